//! Dimensional splitting in 2D: every row is advanced by a line solve
//! (Step 1), then every column (Step 2).
//!
//! A row solve sees the adjacent rows as frozen transverse context, with the
//! current values of those rows (already-updated rows below, not-yet-updated
//! rows above in sequential order). Columns are handled by transposing the
//! field so that both steps share one code path.

use crate::diagnostics::{free_energy, row_energy, transposed_model};
use crate::grid::{Axis, PhaseField};
use crate::model::ModelParams;
use crate::nlsolve::SolverControls;
use crate::scheme1d::{step_line, LineStepProblem, LineStepSolution, SchemeError, Transverse};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SweepSchedule {
    #[default]
    Sequential,
    /// Lines 1, 3, 5, ... (1-based) concurrently, then lines 2, 4, 6, ...
    OddEvenParallel,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{axis:?} sweep failed on line {index}")]
pub struct SweepError {
    pub axis: Axis,
    pub index: usize,
    #[source]
    pub source: SchemeError,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Step2DReport {
    /// Total energy before the step.
    pub energy_start: f64,
    /// Energy after each row update, in update order.
    pub row_energies: Vec<f64>,
    /// Energy after each column update, in update order.
    pub col_energies: Vec<f64>,
    pub newton_iters: usize,
    pub worst_residual: f64,
}

impl Step2DReport {
    /// Largest energy increase between consecutive sweeps (negative when
    /// every sweep dissipated).
    pub fn max_sweep_increase(&self) -> f64 {
        let mut prev = self.energy_start;
        let mut worst = f64::NEG_INFINITY;
        for &e in self.row_energies.iter().chain(&self.col_energies) {
            worst = worst.max(e - prev);
            prev = e;
        }
        worst
    }
}

fn row_problem<'a>(field: &'a PhaseField, model: &'a ModelParams, dt: f64, r: usize) -> LineStepProblem<'a> {
    let g = &field.grid;
    let nx = g.nx;
    let v = &field.values;
    let mask = model.wetting.active_walls();
    LineStepProblem {
        old: &v[r * nx..(r + 1) * nx],
        model,
        dt,
        h: g.dx,
        wall_ends: [mask.left, mask.right],
        transverse: Some(Transverse {
            low: (r > 0).then(|| &v[(r - 1) * nx..r * nx]),
            high: (r + 1 < g.ny).then(|| &v[(r + 1) * nx..(r + 2) * nx]),
            h: g.dy,
            walls: [r == 0 && mask.bottom, r + 1 == g.ny && mask.top],
        }),
    }
}

struct Sweep<'a> {
    model: &'a ModelParams,
    controls: &'a SolverControls,
    dt: f64,
    axis: Axis,
}

impl Sweep<'_> {
    fn solve(&self, field: &PhaseField, r: usize) -> Result<LineStepSolution, SweepError> {
        step_line(&row_problem(field, self.model, self.dt, r), self.controls).map_err(|source| SweepError {
            axis: self.axis,
            index: r,
            source,
        })
    }

    /// Writes a solved row and advances the running energy.
    fn commit(
        &self,
        field: &mut PhaseField,
        r: usize,
        sol: &LineStepSolution,
        energy: &mut f64,
        energies: &mut Vec<f64>,
        report: &mut Step2DReport,
    ) {
        let before = row_energy(field, self.model, r);
        let nx = field.grid.nx;
        field.values[r * nx..(r + 1) * nx].copy_from_slice(&sol.phi);
        let after = row_energy(field, self.model, r);
        *energy += after - before;
        energies.push(*energy);
        report.newton_iters += sol.newton_iters;
        report.worst_residual = report.worst_residual.max(sol.residual_norm);
    }

    fn run(
        &self,
        field: &mut PhaseField,
        schedule: SweepSchedule,
        energy: &mut f64,
        energies: &mut Vec<f64>,
        report: &mut Step2DReport,
    ) -> Result<(), SweepError> {
        let ny = field.grid.ny;
        match schedule {
            SweepSchedule::Sequential => {
                for r in 0..ny {
                    let sol = self.solve(field, r)?;
                    self.commit(field, r, &sol, energy, energies, report);
                }
            }
            SweepSchedule::OddEvenParallel => {
                // Rows of one parity never neighbour each other, so each batch
                // reads only rows that the batch does not write.
                for parity in 0..2 {
                    let rows: Vec<usize> = (parity..ny).step_by(2).collect();
                    let snapshot = &*field;
                    let sols: Vec<Result<LineStepSolution, SweepError>> =
                        rows.par_iter().map(|&r| self.solve(snapshot, r)).collect();
                    for (&r, sol) in rows.iter().zip(sols) {
                        let sol = sol?;
                        self.commit(field, r, &sol, energy, energies, report);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Updates row `r` (0-based) in place of a copy; all other cells are
/// returned bit-identical.
pub fn sweep_row(
    field: &PhaseField,
    r: usize,
    model: &ModelParams,
    controls: &SolverControls,
    dt: f64,
) -> Result<(PhaseField, LineStepSolution), SweepError> {
    check_index(field, Axis::X, r)?;
    let sweep = Sweep { model, controls, dt, axis: Axis::X };
    let sol = sweep.solve(field, r)?;
    let mut out = field.clone();
    let nx = out.grid.nx;
    out.values[r * nx..(r + 1) * nx].copy_from_slice(&sol.phi);
    Ok((out, sol))
}

/// Updates column `c` (0-based); the mirror image of [`sweep_row`].
pub fn sweep_col(
    field: &PhaseField,
    c: usize,
    model: &ModelParams,
    controls: &SolverControls,
    dt: f64,
) -> Result<(PhaseField, LineStepSolution), SweepError> {
    check_index(field, Axis::Y, c)?;
    let t = field.transposed();
    let tm = transposed_model(model);
    let sweep = Sweep { model: &tm, controls, dt, axis: Axis::Y };
    let sol = sweep.solve(&t, c)?;
    let mut out = field.clone();
    out.write_line(Axis::Y, c, &sol.phi).map_err(|e| SweepError { axis: Axis::Y, index: c, source: e.into() })?;
    Ok((out, sol))
}

fn check_index(field: &PhaseField, axis: Axis, index: usize) -> Result<(), SweepError> {
    let count = field.grid.line_count(axis);
    if field.grid.nx < 2 || field.grid.ny < 2 {
        return Err(SweepError {
            axis,
            index,
            source: SchemeError::Problem("2D sweeps need at least 2 cells per axis".into()),
        });
    }
    if index >= count {
        return Err(SweepError {
            axis,
            index,
            source: crate::grid::GridError::LineOutOfRange { axis, index, len: count }.into(),
        });
    }
    Ok(())
}

/// One full splitting step: all rows, then all columns.
pub fn step_2d(
    field: &PhaseField,
    model: &ModelParams,
    controls: &SolverControls,
    dt: f64,
    schedule: SweepSchedule,
) -> Result<(PhaseField, Step2DReport), SweepError> {
    check_index(field, Axis::X, 0)?;
    let mut report = Step2DReport { energy_start: free_energy(field, model).total, ..Default::default() };
    let mut energy = report.energy_start;

    let mut work = field.clone();
    let mut rows = Vec::with_capacity(work.grid.ny);
    Sweep { model, controls, dt, axis: Axis::X }.run(&mut work, schedule, &mut energy, &mut rows, &mut report)?;

    let mut t = work.transposed();
    let tm = transposed_model(model);
    let mut cols = Vec::with_capacity(t.grid.ny);
    Sweep { model: &tm, controls, dt, axis: Axis::Y }.run(&mut t, schedule, &mut energy, &mut cols, &mut report)?;

    report.row_energies = rows;
    report.col_energies = cols;
    Ok((t.transposed(), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::model::{MobilityKind, PotentialKind, WallMask, WettingParams};

    fn model(degenerate: bool, wetting: bool) -> ModelParams {
        ModelParams {
            potential: PotentialKind::DoubleWell,
            mobility: if degenerate {
                MobilityKind::Degenerate { m0: 1.0 }
            } else {
                MobilityKind::Constant { m0: 1.0 }
            },
            epsilon: 0.1,
            wetting: if wetting {
                WettingParams::new(1.0, WallMask { left: true, right: false, bottom: true, top: false })
            } else {
                WettingParams::disabled()
            },
        }
    }

    fn field(nx: usize, ny: usize) -> PhaseField {
        let g = Grid::rect((0.0, 1.0), (0.0, 0.8), nx, ny).unwrap();
        PhaseField::from_fn(g, |x, y| 0.7 * (6.0 * x + 1.0).sin() * (5.0 * y - 0.3).cos())
    }

    #[test]
    fn uniform_field_is_unchanged() {
        let g = Grid::rect((0.0, 1.0), (0.0, 1.0), 6, 5).unwrap();
        let f = PhaseField::uniform(g, -0.3);
        let (next, rep) =
            step_2d(&f, &model(true, false), &SolverControls::default(), 0.1, SweepSchedule::Sequential).unwrap();
        assert_eq!(next, f);
        assert_eq!(rep.row_energies.len(), 5);
        assert_eq!(rep.col_energies.len(), 6);
        assert!(rep.max_sweep_increase().abs() < 1e-15);
    }

    #[test]
    fn sweeps_write_only_their_line() {
        let f = field(7, 6);
        let m = model(true, true);
        let c = SolverControls::default();
        for r in 0..6 {
            let (g, _) = sweep_row(&f, r, &m, &c, 0.05).unwrap();
            for j in 0..6 {
                for i in 0..7 {
                    if j != r {
                        assert_eq!(g.get(i, j).to_bits(), f.get(i, j).to_bits());
                    }
                }
            }
            let a: f64 = (0..7).map(|i| f.get(i, r)).sum();
            let b: f64 = (0..7).map(|i| g.get(i, r)).sum();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn column_sweep_is_transposed_row_sweep() {
        let f = field(5, 7);
        let m = model(false, true);
        let c = SolverControls::default();
        for col in 0..5 {
            let (a, _) = sweep_col(&f, col, &m, &c, 0.02).unwrap();
            let (b, _) = sweep_row(&f.transposed(), col, &transposed_model(&m), &c, 0.02).unwrap();
            assert_eq!(a, b.transposed());
        }
    }

    #[test]
    fn step_conserves_mass_and_dissipates_energy() {
        for (deg, wet) in [(true, false), (true, true), (false, true)] {
            let f = field(9, 8);
            let m = model(deg, wet);
            let (g, rep) = step_2d(&f, &m, &SolverControls::default(), 0.01, SweepSchedule::Sequential).unwrap();
            let slack = 10.0 * 1e-10 * 72.0;
            assert!((f.values.iter().sum::<f64>() - g.values.iter().sum::<f64>()).abs() < slack);
            assert!(rep.max_sweep_increase() <= slack);
            let direct = free_energy(&g, &m).total;
            assert!((direct - rep.col_energies.last().unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn odd_even_is_deterministic() {
        let f = field(10, 9);
        let m = model(true, true);
        let c = SolverControls::default();
        let (a, ra) = step_2d(&f, &m, &c, 0.01, SweepSchedule::OddEvenParallel).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let (b, rb) = pool.install(|| step_2d(&f, &m, &c, 0.01, SweepSchedule::OddEvenParallel)).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn out_of_range_line_is_an_error() {
        let f = field(4, 3);
        let err = sweep_row(&f, 3, &model(true, false), &SolverControls::default(), 0.1).unwrap_err();
        assert_eq!(err.axis, Axis::X);
        assert!(matches!(err.source, SchemeError::Grid(_)));
    }
}
