//! Time stepping of scenarios, per-step certification, and output files.

use super::output::{json_pretty, series_csv, snapshot_csv, write_atomic};
use super::scenario::{build_initial, Scenario, ScenarioError, Study, Variant};
use crate::diagnostics::{
    check_step, convergence_order, explicit_steady_state, fit_contact_angle, l1_error, CheckPolicy, InvariantViolation,
    StepReport, Substrate, ViolationKind,
};
use crate::grid::{total_mass, PhaseField};
use crate::model::ModelParams;
use crate::nlsolve::SolveError;
use crate::scheme1d::{step_1d, SchemeError};
use crate::scheme2d::{step_2d, SweepError};
use serde::Serialize;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// How many times a failing step is split in half before giving up.
pub const MAX_HALVINGS: u32 = 4;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{variant}: step {step} failed")]
    Solver {
        variant: String,
        step: usize,
        #[source]
        source: StepFailure,
    },
    #[error("{variant}: step {step}: {violation}")]
    Invariant { variant: String, step: usize, violation: InvariantViolation },
    #[error("cannot write {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    /// Process exit code: 2 configuration, 3 solver, 4 invariant, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Scenario(_) => 2,
            HarnessError::Solver { .. } => 3,
            HarnessError::Invariant { .. } => 4,
            HarnessError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepFailure {
    #[error(transparent)]
    Line(#[from] SchemeError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

impl StepFailure {
    fn retryable(&self) -> bool {
        let source = match self {
            StepFailure::Line(e) => e,
            StepFailure::Sweep(e) => &e.source,
        };
        matches!(source, SchemeError::Solve(SolveError::NonConvergence { .. } | SolveError::SingularJacobian { .. }))
    }
}

/// Worst-case values of the certified properties over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct RunStats {
    pub steps: usize,
    /// `max_n |sum phi^n - sum phi^0|`
    pub mass_drift: f64,
    /// `max_n (max |phi^n| - 1)⁺`
    pub bound_excess: f64,
    /// Largest per-step energy increase (negative if every step dissipated).
    pub energy_increase: f64,
    /// Largest per-sweep energy increase (2D only).
    pub sweep_increase: f64,
    pub newton_iters: usize,
    pub worst_residual: f64,
    pub retries: usize,
    /// Steps that failed a check in non-strict mode.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantResult {
    pub label: String,
    pub cells: [usize; 2],
    pub model: ModelParams,
    pub initial: PhaseField,
    pub field: PhaseField,
    pub series: Vec<StepReport>,
    pub snapshots: Vec<(f64, PhaseField)>,
    pub stats: RunStats,
}

struct Advance {
    field: PhaseField,
    newton_iters: usize,
    residual: f64,
    sweep_increase: f64,
    retries: usize,
}

fn advance(field: &PhaseField, s: &Scenario, model: &ModelParams, dt: f64, depth: u32) -> Result<Advance, StepFailure> {
    let attempt = if s.dim == 1 {
        step_1d(field, model, &s.controls, dt)
            .map(|(f, sol)| Advance {
                field: f,
                newton_iters: sol.newton_iters,
                residual: sol.residual_norm,
                sweep_increase: f64::NEG_INFINITY,
                retries: 0,
            })
            .map_err(StepFailure::from)
    } else {
        step_2d(field, model, &s.controls, dt, s.schedule)
            .map(|(f, rep)| Advance {
                field: f,
                newton_iters: rep.newton_iters,
                sweep_increase: rep.max_sweep_increase(),
                residual: rep.worst_residual,
                retries: 0,
            })
            .map_err(StepFailure::from)
    };
    match attempt {
        Err(e) if e.retryable() && depth < MAX_HALVINGS => {
            let a = advance(field, s, model, dt / 2.0, depth + 1)?;
            let b = advance(&a.field, s, model, dt / 2.0, depth + 1)?;
            Ok(Advance {
                field: b.field,
                newton_iters: a.newton_iters + b.newton_iters,
                residual: a.residual.max(b.residual),
                sweep_increase: a.sweep_increase.max(b.sweep_increase),
                retries: 1 + a.retries + b.retries,
            })
        }
        other => other,
    }
}

/// Runs one variant in memory. `on_step` sees every accepted state.
pub fn simulate(
    s: &Scenario,
    v: &Variant,
    mut on_step: impl FnMut(usize, &PhaseField, &StepReport),
) -> Result<VariantResult, HarnessError> {
    s.validate()?;
    let initial = build_initial(s, v.cells)?;
    let cells = initial.grid.len();
    let policy =
        CheckPolicy { tol: s.controls.tol, cells, bounded: v.model.mobility.is_degenerate(), strict: s.strict };
    let steps = (s.t_end / s.dt).round() as usize;
    let mass0 = total_mass(&initial);

    let mut stats = RunStats {
        energy_increase: f64::NEG_INFINITY,
        sweep_increase: f64::NEG_INFINITY,
        bound_excess: (initial.max_abs() - 1.0).max(0.0),
        ..Default::default()
    };
    let mut field = initial.clone();
    let first = StepReport::measure(&field, &v.model, 0.0, 0, 0.0);
    on_step(0, &field, &first);
    let mut series = vec![first];
    let mut snapshots = Vec::new();
    let mut pending: Vec<f64> = s.snapshots.clone();
    take_snapshots(&mut pending, 0.0, s.dt, &field, &mut snapshots);

    for n in 1..=steps {
        let t = n as f64 * s.dt;
        let adv = advance(&field, s, &v.model, s.dt, 0).map_err(|source| HarnessError::Solver {
            variant: v.label.clone(),
            step: n,
            source,
        })?;
        field = adv.field;
        let report = StepReport::measure(&field, &v.model, t, adv.newton_iters, adv.residual);
        let verdict = check_step(series.last().expect("series starts with the initial report"), &report, &policy)
            .map_err(|violation| HarnessError::Invariant { variant: v.label.clone(), step: n, violation })?;
        let mut failed = !verdict.all_ok();
        if adv.sweep_increase > policy.slack() {
            failed = true;
            if s.strict {
                return Err(HarnessError::Invariant {
                    variant: v.label.clone(),
                    step: n,
                    violation: InvariantViolation { kind: ViolationKind::Energy, magnitude: adv.sweep_increase },
                });
            }
        }
        stats.steps = n;
        stats.mass_drift = stats.mass_drift.max((report.mass - mass0).abs());
        stats.bound_excess = stats.bound_excess.max(verdict.bound_excess);
        stats.energy_increase = stats.energy_increase.max(verdict.energy_change);
        stats.sweep_increase = stats.sweep_increase.max(adv.sweep_increase);
        stats.newton_iters += adv.newton_iters;
        stats.worst_residual = stats.worst_residual.max(adv.residual);
        stats.retries += adv.retries;
        stats.violations += failed as usize;
        on_step(n, &field, &report);
        series.push(report);
        take_snapshots(&mut pending, t, s.dt, &field, &mut snapshots);
    }
    Ok(VariantResult {
        label: v.label.clone(),
        cells: v.cells,
        model: v.model,
        initial,
        field,
        series,
        snapshots,
        stats,
    })
}

fn take_snapshots(pending: &mut Vec<f64>, t: f64, dt: f64, field: &PhaseField, out: &mut Vec<(f64, PhaseField)>) {
    pending.retain(|&ts| {
        if (ts - t).abs() < 0.5 * dt {
            out.push((ts, field.clone()));
            false
        } else {
            true
        }
    });
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub label: String,
    pub cells: [usize; 2],
    pub final_time: f64,
    pub final_energy: f64,
    pub stats: RunStats,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contact_angle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub scenario: Scenario,
    pub variants: Vec<VariantSummary>,
    /// Observed convergence orders between successive resolutions.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub orders: Vec<Option<f64>>,
}

/// L1 distance of a convergence-study field to the explicit steady state.
pub fn steady_state_error(field: &PhaseField, epsilon: f64) -> f64 {
    l1_error(field, |x, _| explicit_steady_state(x, epsilon))
}

pub fn summarize(s: &Scenario, results: &[VariantResult]) -> RunSummary {
    let variants: Vec<VariantSummary> = results
        .iter()
        .map(|r| {
            let last = r.series.last().expect("series is never empty");
            let angle_study = matches!(s.study, Study::ContactAngle | Study::BetaSweep(_));
            VariantSummary {
                label: r.label.clone(),
                cells: r.cells,
                final_time: last.t,
                final_energy: last.energy.total,
                stats: r.stats,
                l1_error: (s.study == Study::Convergence).then(|| steady_state_error(&r.field, r.model.epsilon)),
                contact_angle: angle_study
                    .then(|| {
                        fit_contact_angle(&r.field, Substrate::Bottom, 2.0 * r.model.epsilon).ok().map(|f| f.angle)
                    })
                    .flatten(),
                beta: angle_study.then_some(r.model.wetting.beta),
            }
        })
        .collect();
    let orders = if s.study == Study::Convergence {
        let pairs: Vec<(f64, f64)> =
            results.iter().zip(&variants).map(|(r, v)| (r.field.grid.dx, v.l1_error.unwrap_or(0.0))).collect();
        convergence_order(&pairs)
    } else {
        Vec::new()
    };
    RunSummary { scenario: s.clone(), variants, orders }
}

fn write(path: &Path, text: &str) -> Result<(), HarnessError> {
    write_atomic(path, text.as_bytes()).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

fn time_tag(t: f64) -> String {
    format!("{t:.6}").trim_end_matches('0').trim_end_matches('.').replace('.', "p")
}

/// Runs every variant of a scenario and writes, per variant,
/// `<label>_series.csv` and `<label>_t<time>.csv` snapshots (the initial and
/// final states are always included), plus `summary.json`.
pub fn run(s: &Scenario, out_dir: &Path) -> Result<RunSummary, HarnessError> {
    s.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| HarnessError::Io { path: out_dir.to_path_buf(), source })?;
    let mut results = Vec::new();
    for v in s.variants() {
        let r = simulate(s, &v, |_, _, _| {})?;
        write(&out_dir.join(format!("{}_series.csv", r.label)), &series_csv(&r.series))?;
        let mut snaps: Vec<(f64, &PhaseField)> = vec![(0.0, &r.initial)];
        snaps.extend(r.snapshots.iter().map(|(t, f)| (*t, f)));
        let t_final = r.series.last().map_or(0.0, |x| x.t);
        snaps.push((t_final, &r.field));
        for (t, f) in snaps {
            write(&out_dir.join(format!("{}_t{}.csv", r.label, time_tag(t))), &snapshot_csv(f))?;
        }
        results.push(r);
    }
    let summary = summarize(s, &results);
    write(&out_dir.join("summary.json"), &json_pretty(&summary))?;
    Ok(summary)
}
