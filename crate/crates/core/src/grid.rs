//! Structured rectangular 2D mesh and the per-cell / per-face containers that
//! every numerical module shares.
//!
//! Cells are numbered row-major from the lower-left corner, `j * nx + i`.
//! Faces normal to x are numbered `j * (nx + 1) + i`, where face `i` sits on
//! the left edge of cell `i`; faces normal to y are numbered `j * nx + i`,
//! where face row `j` is the bottom edge of cell row `j`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredGrid2D {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub origin: [f64; 2],
}

impl StructuredGrid2D {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Self> {
        Self::with_origin(nx, ny, dx, dy, [0.0, 0.0])
    }

    pub fn with_origin(nx: usize, ny: usize, dx: f64, dy: f64, origin: [f64; 2]) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Domain(format!("grid needs at least one cell, got {nx}x{ny}")));
        }
        if !(dx > 0.0 && dy > 0.0) || !dx.is_finite() || !dy.is_finite() {
            return Err(Error::Domain(format!("cell sizes must be positive, got dx={dx} dy={dy}")));
        }
        Ok(Self { nx, ny, dx, dy, origin })
    }

    /// Grid covering a `width x height` rectangle with `nx x ny` cells.
    pub fn covering(nx: usize, ny: usize, width: f64, height: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Domain(format!("grid needs at least one cell, got {nx}x{ny}")));
        }
        Self::new(nx, ny, width / nx as f64, height / ny as f64)
    }

    pub fn num_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn num_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    pub fn num_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn width(&self) -> f64 {
        self.nx as f64 * self.dx
    }

    pub fn height(&self) -> f64 {
        self.ny as f64 * self.dy
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn cell_index(&self, i: usize, j: usize) -> Result<usize> {
        cell_index(i, j, self)
    }

    /// Inverse of [`cell_index`].
    pub fn cell_coords(&self, index: usize) -> (usize, usize) {
        (index % self.nx, index / self.nx)
    }

    pub fn cell_center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + (i as f64 + 0.5) * self.dx, self.origin[1] + (j as f64 + 0.5) * self.dy]
    }

    pub fn xface_index(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn yface_index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn xface_center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + i as f64 * self.dx, self.origin[1] + (j as f64 + 0.5) * self.dy]
    }

    pub fn yface_center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + (i as f64 + 0.5) * self.dx, self.origin[1] + j as f64 * self.dy]
    }
}

/// Row-major linear index of cell `(i, j)`.
pub fn cell_index(i: usize, j: usize, grid: &StructuredGrid2D) -> Result<usize> {
    if i >= grid.nx || j >= grid.ny {
        return Err(Error::Index { i, j, nx: grid.nx, ny: grid.ny });
    }
    Ok(j * grid.nx + i)
}

/// One real value per cell, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl CellField {
    pub fn constant(grid: &StructuredGrid2D, value: f64) -> Self {
        Self { nx: grid.nx, ny: grid.ny, values: vec![value; grid.num_cells()] }
    }

    pub fn zeros(grid: &StructuredGrid2D) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn from_vec(grid: &StructuredGrid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_cells() {
            return Err(Error::Shape(format!(
                "cell field has {} values, grid has {} cells",
                values.len(),
                grid.num_cells()
            )));
        }
        Ok(Self { nx: grid.nx, ny: grid.ny, values })
    }

    pub fn from_fn(grid: &StructuredGrid2D, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.num_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(i, j));
            }
        }
        Self { nx: grid.nx, ny: grid.ny, values }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn matches(&self, grid: &StructuredGrid2D) -> bool {
        self.nx == grid.nx && self.ny == grid.ny
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.values.iter()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { nx: self.nx, ny: self.ny, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Flat CSV: a `# nx=<nx> ny=<ny>` header, then one value per line.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(self.values.len() * 24 + 32);
        let _ = writeln!(out, "# nx={} ny={}", self.nx, self.ny);
        for v in &self.values {
            let _ = writeln!(out, "{v}");
        }
        out
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty cell field file".into()))?;
        let (nx, ny) = parse_dims_header(header)?;
        let mut values = Vec::with_capacity(nx * ny);
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| Error::Format(format!("line {}: not a number: {line:?}", n + 2)))?;
            values.push(v);
        }
        if values.len() != nx * ny {
            return Err(Error::Format(format!(
                "header declares {}x{} = {} cells, found {} values",
                nx,
                ny,
                nx * ny,
                values.len()
            )));
        }
        Ok(Self { nx, ny, values })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }
}

impl std::ops::Index<usize> for CellField {
    type Output = f64;
    fn index(&self, index: usize) -> &f64 {
        &self.values[index]
    }
}

impl std::ops::IndexMut<usize> for CellField {
    fn index_mut(&mut self, index: usize) -> &mut f64 {
        &mut self.values[index]
    }
}

fn parse_dims_header(header: &str) -> Result<(usize, usize)> {
    let bad = || Error::Format(format!("expected '# nx=<nx> ny=<ny>' header, got {header:?}"));
    let rest = header.trim().strip_prefix('#').ok_or_else(bad)?;
    let mut nx = None;
    let mut ny = None;
    for tok in rest.split_whitespace() {
        if let Some(v) = tok.strip_prefix("nx=") {
            nx = v.parse().ok();
        } else if let Some(v) = tok.strip_prefix("ny=") {
            ny = v.parse().ok();
        }
    }
    match (nx, ny) {
        (Some(nx), Some(ny)) => Ok((nx, ny)),
        _ => Err(bad()),
    }
}

/// Signed normal fluxes on the x-normal and y-normal faces, positive along +x / +y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceField {
    pub xflux: Vec<f64>,
    pub yflux: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: &StructuredGrid2D) -> Self {
        Self { xflux: vec![0.0; grid.num_xfaces()], yflux: vec![0.0; grid.num_yfaces()] }
    }

    pub fn uniform(grid: &StructuredGrid2D, ux: f64, uy: f64) -> Self {
        Self { xflux: vec![ux; grid.num_xfaces()], yflux: vec![uy; grid.num_yfaces()] }
    }

    pub fn check(&self, grid: &StructuredGrid2D) -> Result<()> {
        if self.xflux.len() != grid.num_xfaces() || self.yflux.len() != grid.num_yfaces() {
            return Err(Error::Shape(format!(
                "face field has {}/{} x/y faces, grid needs {}/{}",
                self.xflux.len(),
                self.yflux.len(),
                grid.num_xfaces(),
                grid.num_yfaces()
            )));
        }
        Ok(())
    }
}

/// Per-cell Euclidean norm of the flux reconstructed by averaging the two
/// opposite face values in each direction.
pub fn cell_flux_magnitude(faces: &FaceField, grid: &StructuredGrid2D) -> Result<CellField> {
    faces.check(grid)?;
    Ok(CellField::from_fn(grid, |i, j| {
        let ux = 0.5 * (faces.xflux[grid.xface_index(i, j)] + faces.xflux[grid.xface_index(i + 1, j)]);
        let uy = 0.5 * (faces.yflux[grid.yface_index(i, j)] + faces.yflux[grid.yface_index(i, j + 1)]);
        ux.hypot(uy)
    }))
}
