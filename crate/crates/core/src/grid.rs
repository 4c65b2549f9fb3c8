//! Uniform cell-centred grids and cell-averaged phase fields.
//!
//! Storage is row-major: cell `(i, j)` lives at `j * nx + i`, with `i` along
//! x and `j` along y. A 1D grid is a single row (`ny = 1`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 2 cells per axis, got {0}")]
    TooFewCells(usize),
    #[error("domain extent must be positive and finite: [{0}, {1}]")]
    BadExtent(f64, f64),
    #[error("{axis:?} line index {index} out of range (0..{len})")]
    LineOutOfRange { axis: Axis, index: usize, len: usize },
    #[error("line length {got} does not match grid ({expected})")]
    LineLength { got: usize, expected: usize },
    #[error("field has {got} values, grid has {expected} cells")]
    FieldLength { got: usize, expected: usize },
    #[error("non-finite value at cell {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// 1 or 2.
    pub dim: u8,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Lower-left corner of the domain.
    pub origin: [f64; 2],
}

fn check_extent(a: f64, b: f64) -> Result<(), GridError> {
    if a.is_finite() && b.is_finite() && b > a {
        Ok(())
    } else {
        Err(GridError::BadExtent(a, b))
    }
}

impl Grid {
    /// `n` cells on `[x0, x1]`.
    pub fn line(x0: f64, x1: f64, n: usize) -> Result<Grid, GridError> {
        check_extent(x0, x1)?;
        if n < 2 {
            return Err(GridError::TooFewCells(n));
        }
        Ok(Grid { dim: 1, nx: n, ny: 1, dx: (x1 - x0) / n as f64, dy: 1.0, origin: [x0, 0.0] })
    }

    /// `nx * ny` cells on `[x0, x1] x [y0, y1]`. `ny = 1` is allowed.
    pub fn rect(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> Result<Grid, GridError> {
        check_extent(x.0, x.1)?;
        check_extent(y.0, y.1)?;
        if nx < 2 {
            return Err(GridError::TooFewCells(nx));
        }
        if ny < 1 {
            return Err(GridError::TooFewCells(ny));
        }
        Ok(Grid { dim: 2, nx, ny, dx: (x.1 - x.0) / nx as f64, dy: (y.1 - y.0) / ny as f64, origin: [x.0, y.0] })
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        let x = self.origin[0] + (i as f64 + 0.5) * self.dx;
        let y = if self.dim == 1 { 0.0 } else { self.origin[1] + (j as f64 + 0.5) * self.dy };
        (x, y)
    }

    /// Measure of one cell (`dx` in 1D, `dx * dy` in 2D).
    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.dx
        } else {
            self.dx * self.dy
        }
    }

    /// Number of lines along `axis` (rows for `X`, columns for `Y`).
    pub fn line_count(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.ny,
            Axis::Y => self.nx,
        }
    }

    /// Cells per line along `axis`.
    pub fn line_len(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.nx,
            Axis::Y => self.ny,
        }
    }

    pub fn spacing(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.dx,
            Axis::Y => self.dy,
        }
    }

    /// Same grid with the axes exchanged.
    pub fn transposed(&self) -> Grid {
        Grid {
            dim: self.dim,
            nx: self.ny,
            ny: self.nx,
            dx: self.dy,
            dy: self.dx,
            origin: [self.origin[1], self.origin[0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl PhaseField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<PhaseField, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::FieldLength { got: values.len(), expected: grid.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(k));
        }
        Ok(PhaseField { grid, values })
    }

    pub fn uniform(grid: Grid, c: f64) -> PhaseField {
        PhaseField { grid, values: vec![c; grid.len()] }
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> PhaseField {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                values.push(f(x, y));
            }
        }
        PhaseField { grid, values }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_line(&self, axis: Axis, index: usize) -> Result<(), GridError> {
        let len = self.grid.line_count(axis);
        if index >= len {
            return Err(GridError::LineOutOfRange { axis, index, len });
        }
        Ok(())
    }

    /// Copies row `index` (`Axis::X`) or column `index` (`Axis::Y`).
    pub fn extract_line(&self, axis: Axis, index: usize) -> Result<Vec<f64>, GridError> {
        self.check_line(axis, index)?;
        let mut out = vec![0.0; self.grid.line_len(axis)];
        self.read_line_into(axis, index, &mut out);
        Ok(out)
    }

    /// Unchecked copy into a caller buffer of the right length.
    pub(crate) fn read_line_into(&self, axis: Axis, index: usize, out: &mut [f64]) {
        let nx = self.grid.nx;
        match axis {
            Axis::X => out.copy_from_slice(&self.values[index * nx..(index + 1) * nx]),
            Axis::Y => {
                for (j, o) in out.iter_mut().enumerate() {
                    *o = self.values[j * nx + index];
                }
            }
        }
    }

    /// Overwrites exactly the cells of one line.
    pub fn write_line(&mut self, axis: Axis, index: usize, line: &[f64]) -> Result<(), GridError> {
        self.check_line(axis, index)?;
        let expected = self.grid.line_len(axis);
        if line.len() != expected {
            return Err(GridError::LineLength { got: line.len(), expected });
        }
        let nx = self.grid.nx;
        match axis {
            Axis::X => self.values[index * nx..(index + 1) * nx].copy_from_slice(line),
            Axis::Y => {
                for (j, v) in line.iter().enumerate() {
                    self.values[j * nx + index] = *v;
                }
            }
        }
        Ok(())
    }

    /// Field with x and y exchanged, on the transposed grid.
    pub fn transposed(&self) -> PhaseField {
        let g = self.grid;
        let mut values = vec![0.0; g.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                values[i * g.ny + j] = self.values[j * g.nx + i];
            }
        }
        PhaseField { grid: g.transposed(), values }
    }
}

/// Neumann-boundary Laplacian of a line at cell `i` (0-based).
///
/// Missing neighbours at the ends are mirror ghosts, so the boundary rows
/// reduce to one-sided differences.
pub fn laplacian_1d(line: &[f64], h: f64, i: usize) -> f64 {
    let n = line.len();
    let c = line[i];
    let mut acc = 0.0;
    if i > 0 {
        acc += line[i - 1] - c;
    }
    if i + 1 < n {
        acc += line[i + 1] - c;
    }
    acc / (h * h)
}

/// Sum of cell values (no volume factor), Neumaier-compensated.
pub fn total_mass(field: &PhaseField) -> f64 {
    compensated_sum(field.values.iter().copied())
}

pub(crate) fn compensated_sum(it: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in it {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
