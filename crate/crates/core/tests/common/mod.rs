//! Shared pieces for the integration tests: an independent evaluation of the
//! discrete equations and random small instances to check the solvers on.
#![allow(dead_code)]

use phasefield::grid::{Axis, Grid, PhaseField};
use phasefield::model::{MobilityKind, ModelParams, PotentialKind, WallMask, WettingParams};
use phasefield::nlsolve::{oracle_root, SolverControls};
use phasefield::scheme1d::step_1d;
use phasefield::scheme2d::{sweep_col, sweep_row};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `H_c'`, written out from the potential formulas.
fn convex_slope(p: PotentialKind, phi: f64) -> f64 {
    match p {
        PotentialKind::DoubleWell => phi.powi(3),
        PotentialKind::Logarithmic { theta, .. } => 0.5 * theta * ((1.0 + phi) / (1.0 - phi)).ln(),
    }
}

/// `H_e'`.
fn concave_slope(p: PotentialKind, phi: f64) -> f64 {
    match p {
        PotentialKind::DoubleWell => phi,
        PotentialKind::Logarithmic { theta_c, .. } => theta_c * phi,
    }
}

/// `(f_cw', f_ew')` of the cubic wall energy.
fn wall_slopes(beta: f64, eps: f64, phi: f64) -> (f64, f64) {
    let c = eps * 2f64.sqrt() / 2.0 * beta.cos();
    let dfw = c * (phi * phi - 1.0);
    let dfcw = if c >= 0.0 { c * (phi * phi - 1.0 + 2.0 * phi) } else { -2.0 * c * phi };
    (dfcw, dfcw - dfw)
}

fn upwind_mobility(m: MobilityKind, up: f64, down: f64) -> f64 {
    match m {
        MobilityKind::Constant { m0 } => m0,
        MobilityKind::Degenerate { m0 } => m0 * (1.0 + up).max(0.0) * (1.0 - down).max(0.0),
    }
}

/// Residual of one implicit sweep of `line` (a row for `Axis::X`, a column
/// for `Axis::Y`) evaluated directly on the 2D index space of `field`, which
/// holds the current values of every other line. A 1D field is a single row.
pub fn sweep_residual(
    field: &PhaseField,
    model: &ModelParams,
    dt: f64,
    axis: Axis,
    line: usize,
    c: &[f64],
) -> Vec<f64> {
    let g = &field.grid;
    let (nx, ny) = (g.nx, g.ny);
    let eps = model.epsilon;
    let w = &model.wetting;
    let walls = if w.enabled { w.walls } else { WallMask::NONE };
    let n = c.len();
    // cell (i, j) of the swept line's k-th entry
    let at = |k: usize| if axis == Axis::X { (k, line) } else { (line, k) };
    let h_along = if axis == Axis::X { g.dx } else { g.dy };

    // new value where the swept line is, current value elsewhere
    let new_or_current = |i: usize, j: usize| -> f64 {
        let k = if axis == Axis::X { (j == line).then_some(i) } else { (i == line).then_some(j) };
        match k {
            Some(k) => c[k],
            None => field.get(i, j),
        }
    };

    let xi: Vec<f64> = (0..n)
        .map(|k| {
            let (i, j) = at(k);
            let old = field.get(i, j);
            let new = c[k];
            let mut lap_old = 0.0;
            let mut lap_star = 0.0;
            let mut nb = |ii: isize, jj: isize, h: f64| {
                if ii < 0 || jj < 0 || ii as usize >= nx || jj as usize >= ny {
                    return;
                }
                let (ii, jj) = (ii as usize, jj as usize);
                let along = if axis == Axis::X { jj == j } else { ii == i };
                lap_old += (field.get(ii, jj) - old) / (h * h);
                if along {
                    lap_star += (new_or_current(ii, jj) - new) / (h * h);
                } else {
                    lap_star += (field.get(ii, jj) - new) / (h * h);
                }
            };
            let (si, sj) = (i as isize, j as isize);
            nb(si - 1, sj, g.dx);
            nb(si + 1, sj, g.dx);
            if ny > 1 {
                nb(si, sj - 1, g.dy);
                nb(si, sj + 1, g.dy);
            }
            let mut v = convex_slope(model.potential, new)
                - concave_slope(model.potential, old)
                - 0.5 * eps * eps * (lap_old + lap_star);
            let mut weight = 0.0;
            if i == 0 && walls.left {
                weight += 1.0 / g.dx;
            }
            if i + 1 == nx && walls.right {
                weight += 1.0 / g.dx;
            }
            if ny > 1 && j == 0 && walls.bottom {
                weight += 1.0 / g.dy;
            }
            if ny > 1 && j + 1 == ny && walls.top {
                weight += 1.0 / g.dy;
            }
            if weight > 0.0 {
                v += weight * (wall_slopes(w.beta, eps, new).0 - wall_slopes(w.beta, eps, old).1);
            }
            v
        })
        .collect();

    let mut flux = vec![0.0; n + 1];
    for k in 0..n - 1 {
        let u = -(xi[k + 1] - xi[k]) / h_along;
        let m = if u > 0.0 {
            upwind_mobility(model.mobility, c[k], c[k + 1])
        } else if u < 0.0 {
            upwind_mobility(model.mobility, c[k + 1], c[k])
        } else {
            0.0
        };
        flux[k + 1] = u * m;
    }
    (0..n)
        .map(|k| {
            let (i, j) = at(k);
            c[k] - field.get(i, j) + dt / h_along * (flux[k + 1] - flux[k])
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub field: PhaseField,
    pub model: ModelParams,
    pub dt: f64,
    pub axis: Axis,
    pub line: usize,
}

pub struct OracleCheck {
    pub label: String,
    /// Max-norm distance between the production and the oracle solution.
    pub diff: f64,
}

/// Random small problems cycling through both potentials (the logarithmic
/// one with and without the mixing term), both mobilities and wetting on/off.
/// The first half are 1D lines with 3–5 cells, the rest single row or column
/// sweeps of a 3×3 field.
pub fn random_instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let potentials = [
        PotentialKind::DoubleWell,
        PotentialKind::Logarithmic { theta: 0.3, theta_c: 1.0 },
        PotentialKind::Logarithmic { theta: 0.0, theta_c: 1.0 },
    ];
    (0..count)
        .map(|k| {
            let potential = potentials[k % 3];
            let mobility = if (k / 3) % 2 == 0 {
                MobilityKind::Constant { m0: 1.0 }
            } else {
                MobilityKind::Degenerate { m0: 1.0 }
            };
            let wetting = if (k / 6) % 2 == 1 {
                let walls = WallMask {
                    left: rng.random_bool(0.5),
                    right: rng.random_bool(0.5),
                    bottom: rng.random_bool(0.5),
                    top: rng.random_bool(0.5),
                };
                WettingParams::new(
                    rng.random_range(0.3..2.8),
                    if walls == WallMask::NONE { WallMask::ALL } else { walls },
                )
            } else {
                WettingParams::disabled()
            };
            let model = ModelParams { potential, mobility, epsilon: rng.random_range(0.1..0.4), wetting };
            let dt = 10f64.powf(rng.random_range(-3.0..-1.0));
            let two_d = k >= count / 2;
            let grid = if two_d {
                Grid::rect((0.0, 1.0), (0.0, rng.random_range(0.6..1.4)), 3, 3).unwrap()
            } else {
                Grid::line(0.0, 1.0, 3 + k % 3).unwrap()
            };
            let values = (0..grid.len()).map(|_| rng.random_range(-0.8..0.8)).collect();
            let field = PhaseField::new(grid, values).unwrap();
            let axis = if two_d && k % 2 == 1 { Axis::Y } else { Axis::X };
            let line = if two_d { rng.random_range(0..3) } else { 0 };
            let label = format!(
                "#{k:02} {} {:?} {:?} wetting={} {axis:?}[{line}] dt={dt:.1e}",
                if two_d { "3x3" } else { "1D" },
                potential,
                mobility,
                model.wetting.enabled
            );
            Instance { label, field, model, dt, axis, line }
        })
        .collect()
}

/// Solves `inst` with the production stepper and with the dense oracle on
/// [`sweep_residual`], both from the old line.
pub fn check_instance(inst: &Instance) -> Result<OracleCheck, String> {
    let controls = SolverControls { tol: 1e-13, ..SolverControls::default() };
    let f = &inst.field;
    let g = &f.grid;
    let production = if g.ny == 1 {
        step_1d(f, &inst.model, &controls, inst.dt).map_err(|e| e.to_string())?.0
    } else if inst.axis == Axis::X {
        sweep_row(f, inst.line, &inst.model, &controls, inst.dt).map_err(|e| e.to_string())?.0
    } else {
        sweep_col(f, inst.line, &inst.model, &controls, inst.dt).map_err(|e| e.to_string())?.0
    };
    let old = f.extract_line(inst.axis, inst.line).unwrap();
    let root = oracle_root(|c| sweep_residual(f, &inst.model, inst.dt, inst.axis, inst.line, c), &old, 1e-13)
        .map_err(|e| format!("oracle: {e}"))?;
    let got = production.extract_line(inst.axis, inst.line).unwrap();
    let diff = got.iter().zip(&root).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // the rest of the field must be untouched
    let mut rest = production.clone();
    rest.write_line(inst.axis, inst.line, &old).unwrap();
    if rest != *f {
        return Err("cells outside the swept line changed".into());
    }
    Ok(OracleCheck { label: inst.label.clone(), diff })
}
