use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate tetrahedron (volume {volume:e})")]
    DegenerateElement { volume: f64 },

    #[error("partition {parts} does not divide {cells} cells along {axis}")]
    Divisibility {
        axis: char,
        cells: usize,
        parts: usize,
    },

    #[error("subdomain {0} owns no elements")]
    EmptySubdomain(usize),

    #[error("subdomain {0} has no interface unknowns on a multi-subdomain partition")]
    EmptyInterface(usize),

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("leading covariance eigenvalue is not positive ({0:e})")]
    NonPositiveEigenvalue(f64),

    #[error("factorization of {what} failed: {reason}")]
    Factorization { what: String, reason: String },

    #[error("operator is not positive definite: (q, p) = {0:e}")]
    NonSpdOperator(f64),

    #[error("preconditioner is not positive definite: (r, z) = {0:e}")]
    NonSpdPreconditioner(f64),

    #[error("dense system of dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn factorization(what: impl Into<String>, reason: impl std::fmt::Debug) -> Self {
        Error::Factorization {
            what: what.into(),
            reason: format!("{reason:?}"),
        }
    }
}

/// Tags errors from a pipeline stage with the stage name.
pub trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
