//! Structural properties of the schemes on whole fields: conservation,
//! bounds, dissipation (step by step and sweep by sweep), 1D/2D consistency
//! and schedule independence.

use phasefield::diagnostics::free_energy;
use phasefield::grid::{total_mass, Grid, PhaseField};
use phasefield::model::{MobilityKind, ModelParams, PotentialKind, WallMask, WettingParams};
use phasefield::nlsolve::SolverControls;
use phasefield::scheme1d::step_1d;
use phasefield::scheme2d::{step_2d, SweepSchedule};
use proptest::prelude::*;

/// The wall energy's convex part is convex only for `phi >= -1`. A deep
/// quench with constant mobility is free to leave [-1, 1], and with wetting
/// the implicit step can then lose its root at large dt, so that combination
/// runs without walls.
fn model(potential: PotentialKind, degenerate: bool, wetting: Option<f64>) -> ModelParams {
    let deep_quench = matches!(potential, PotentialKind::Logarithmic { theta, .. } if theta == 0.0);
    let wetting = if deep_quench && !degenerate { None } else { wetting };
    ModelParams {
        potential,
        mobility: if degenerate { MobilityKind::Degenerate { m0: 1.0 } } else { MobilityKind::Constant { m0: 1.0 } },
        epsilon: 0.08,
        wetting: wetting.map_or(WettingParams::disabled(), |b| WettingParams::new(b, WallMask::ALL)),
    }
}

/// Degenerate mobility and the singular logarithmic potential each keep
/// `|phi| <= 1`; the deep quench with constant mobility does not.
fn bounded(m: &ModelParams) -> bool {
    m.mobility.is_degenerate() || matches!(m.potential, PotentialKind::Logarithmic { theta, .. } if theta > 0.0)
}

fn potential(k: u8) -> PotentialKind {
    match k % 3 {
        0 => PotentialKind::DoubleWell,
        1 => PotentialKind::Logarithmic { theta: 0.3, theta_c: 1.0 },
        _ => PotentialKind::Logarithmic { theta: 0.0, theta_c: 1.0 },
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn two_d_steps_conserve_bound_and_dissipate(
        values in prop::collection::vec(-0.9f64..0.9, 36),
        pot in 0u8..3,
        degenerate in any::<bool>(),
        wetting in prop::option::of(0.4f64..2.7),
        log_dt in -3.0f64..0.0,
        odd_even in any::<bool>(),
    ) {
        let grid = Grid::rect((0.0, 1.0), (0.0, 1.0), 6, 6).unwrap();
        let field = PhaseField::new(grid, values).unwrap();
        let m = model(potential(pot), degenerate, wetting);
        let dt = 10f64.powf(log_dt);
        let schedule = if odd_even { SweepSchedule::OddEvenParallel } else { SweepSchedule::Sequential };
        let (next, report) = step_2d(&field, &m, &SolverControls::default(), dt, schedule).unwrap();
        let slack = 1e-8 * 36.0;
        prop_assert!((total_mass(&next) - total_mass(&field)).abs() <= slack);
        if bounded(&m) {
            prop_assert!(next.max_abs() <= 1.0 + 1e-8, "max |phi| = {}", next.max_abs());
        }
        prop_assert!(free_energy(&next, &m).total - free_energy(&field, &m).total <= slack);
        if !odd_even {
            prop_assert!(report.max_sweep_increase() <= slack, "sweep increase {}", report.max_sweep_increase());
        }
    }

    #[test]
    fn one_d_steps_conserve_bound_and_dissipate(
        values in prop::collection::vec(-0.95f64..0.95, 3..40),
        pot in 0u8..3,
        degenerate in any::<bool>(),
        wetting in prop::option::of(0.4f64..2.7),
        log_dt in -4.0f64..2.0,
    ) {
        let n = values.len();
        let field = PhaseField::new(Grid::line(0.0, 1.0, n).unwrap(), values).unwrap();
        let m = model(potential(pot), degenerate, wetting);
        let (next, sol) = step_1d(&field, &m, &SolverControls::default(), 10f64.powf(log_dt)).unwrap();
        let slack = 1e-8 * n as f64;
        prop_assert!((total_mass(&next) - total_mass(&field)).abs() <= slack);
        if bounded(&m) {
            prop_assert!(next.max_abs() <= 1.0 + 1e-8);
        }
        prop_assert!(free_energy(&next, &m).total - free_energy(&field, &m).total <= slack);
        // end faces carry no flux
        prop_assert_eq!(sol.fluxes[0], 0.0);
        prop_assert_eq!(sol.fluxes[n], 0.0);
    }
}

fn profile(y: f64) -> f64 {
    0.8 * (std::f64::consts::PI * y).cos()
}

/// A field that varies only in y: the row sweeps have nothing to do, and the
/// column sweeps approximate the 1D stepper. They are not identical to it:
/// the transverse part of the star Laplacian couples each column to its
/// neighbours' old values. That coupling acts on the O(dt) change of the
/// step, so the per-step discrepancy is O(dt²).
#[test]
fn y_only_field_tracks_the_1d_stepper() {
    let m = model(PotentialKind::DoubleWell, true, None);
    let ny = 24;
    let grid = Grid::rect((0.0, 0.25), (0.0, 1.0), 3, ny).unwrap();
    let field = PhaseField::from_fn(grid, |_, y| profile(y));
    let line = PhaseField::from_fn(Grid::line(0.0, 1.0, ny).unwrap(), |x, _| profile(x));
    let controls = SolverControls::default();

    let mut gaps = Vec::new();
    for dt in [4e-4, 2e-4, 1e-4] {
        let (two, report) = step_2d(&field, &m, &controls, dt, SweepSchedule::Sequential).unwrap();
        // every row sweep is an exact no-op
        assert!(report.row_energies.iter().all(|&e| e == report.energy_start));
        let (one, _) = step_1d(&line, &m, &controls, dt).unwrap();
        let mut gap = 0.0f64;
        for i in 0..3 {
            for j in 0..ny {
                gap = gap.max((two.get(i, j) - one.values[j]).abs());
            }
        }
        let moved = one.values.iter().zip(&line.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(gap < 0.5 * moved, "dt {dt}: gap {gap:.2e} vs change {moved:.2e}");
        gaps.push(gap);
    }
    // halving dt roughly quarters the discrepancy
    for w in gaps.windows(2) {
        let ratio = w[0] / w[1];
        assert!((3.2..5.0).contains(&ratio), "{gaps:?}");
    }
}

#[test]
fn odd_even_schedule_is_independent_of_thread_count() {
    let grid = Grid::rect((0.0, 1.0), (0.0, 1.0), 16, 12).unwrap();
    let field = PhaseField::from_fn(grid, |x, y| 0.6 * (7.0 * x + 3.0 * y).sin() * (5.0 * y).cos());
    let m = model(PotentialKind::Logarithmic { theta: 0.3, theta_c: 1.0 }, true, Some(1.2));
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let mut f = field.clone();
            for _ in 0..3 {
                f = step_2d(&f, &m, &SolverControls::default(), 1e-3, SweepSchedule::OddEvenParallel).unwrap().0;
            }
            f
        })
    };
    let one = run(1);
    for threads in [2, 5] {
        let other = run(threads);
        assert!(one.values.iter().zip(&other.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
