pub mod cli;
pub mod error;
pub mod fem;
pub mod krylov;
pub mod klexp;
pub mod linalg;
pub mod mesh;
pub mod oracle;
pub mod pce;
pub mod precond;
pub mod schur;
pub mod ssfem;
pub mod vtk;

pub use error::{Error, Result};
