//! Legacy ASCII VTK writer for linear tetrahedral meshes.

use std::io::Write;

use crate::error::Result;

const VTK_TETRA: u8 = 10;

/// Streams an `UNSTRUCTURED_GRID` followed by cell and point scalars.
///
/// Cell data must be written before point data, as the legacy format
/// expects one `CELL_DATA` and one `POINT_DATA` section.
pub struct VtkWriter<W: Write> {
    out: W,
    n_points: usize,
    n_cells: usize,
    in_points: bool,
    in_cells: bool,
}

impl<W: Write> VtkWriter<W> {
    pub fn new(mut out: W, title: &str, points: &[[f64; 3]], tets: &[[usize; 4]]) -> Result<Self> {
        writeln!(out, "# vtk DataFile Version 3.0")?;
        writeln!(out, "{}", title.lines().next().unwrap_or("ssdd"))?;
        writeln!(out, "ASCII")?;
        writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(out, "POINTS {} double", points.len())?;
        for p in points {
            writeln!(out, "{:e} {:e} {:e}", p[0], p[1], p[2])?;
        }
        writeln!(out, "CELLS {} {}", tets.len(), tets.len() * 5)?;
        for t in tets {
            writeln!(out, "4 {} {} {} {}", t[0], t[1], t[2], t[3])?;
        }
        writeln!(out, "CELL_TYPES {}", tets.len())?;
        for _ in tets {
            writeln!(out, "{VTK_TETRA}")?;
        }
        Ok(Self {
            out,
            n_points: points.len(),
            n_cells: tets.len(),
            in_points: false,
            in_cells: false,
        })
    }

    pub fn cell_scalars(&mut self, name: &str, values: &[f64]) -> Result<()> {
        assert_eq!(values.len(), self.n_cells, "cell field {name}");
        assert!(!self.in_points, "cell data after point data");
        if !self.in_cells {
            writeln!(self.out, "CELL_DATA {}", self.n_cells)?;
            self.in_cells = true;
        }
        self.scalars(name, values)
    }

    pub fn point_scalars(&mut self, name: &str, values: &[f64]) -> Result<()> {
        assert_eq!(values.len(), self.n_points, "point field {name}");
        if !self.in_points {
            writeln!(self.out, "POINT_DATA {}", self.n_points)?;
            self.in_points = true;
        }
        self.scalars(name, values)
    }

    pub fn point_vectors(&mut self, name: &str, values: &[[f64; 3]]) -> Result<()> {
        assert_eq!(values.len(), self.n_points, "point field {name}");
        if !self.in_points {
            writeln!(self.out, "POINT_DATA {}", self.n_points)?;
            self.in_points = true;
        }
        writeln!(self.out, "VECTORS {} double", sanitize(name))?;
        for v in values {
            writeln!(self.out, "{:e} {:e} {:e}", v[0], v[1], v[2])?;
        }
        Ok(())
    }

    fn scalars(&mut self, name: &str, values: &[f64]) -> Result<()> {
        writeln!(self.out, "SCALARS {} double 1", sanitize(name))?;
        writeln!(self.out, "LOOKUP_TABLE default")?;
        for v in values {
            writeln!(self.out, "{v:e}")?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}
