mod common;

use common::{check_instance, random_instances, sweep_residual};
use phasefield::grid::{Axis, Grid, PhaseField};
use phasefield::model::{MobilityKind, ModelParams, PotentialKind, WallMask, WettingParams};
use phasefield::nlsolve::oracle_root;
use phasefield::nlsolve::SolverControls;
use phasefield::scheme1d::{residual, step_1d, LineStepProblem};
use phasefield::scheme2d::sweep_row;

#[test]
fn production_matches_dense_oracle_on_random_instances() {
    let instances = random_instances(48, 7);
    assert!(instances.iter().filter(|i| i.field.grid.ny == 1).count() >= 20);
    assert!(instances.iter().filter(|i| i.field.grid.ny == 3).count() >= 20);
    for inst in &instances {
        let check = check_instance(inst).unwrap_or_else(|e| panic!("{}: {e}", inst.label));
        assert!(check.diff <= 1e-9, "{}: differs by {:.2e}", check.label, check.diff);
    }
}

/// The hand-written residual and the production one are the same function.
#[test]
fn oracle_residual_agrees_with_production_residual() {
    for inst in random_instances(12, 99).into_iter().filter(|i| i.field.grid.ny == 1) {
        let old = inst.field.values.clone();
        let n = old.len();
        let mask = inst.model.wetting.active_walls();
        let problem = LineStepProblem {
            old: &old,
            model: &inst.model,
            dt: inst.dt,
            h: inst.field.grid.dx,
            wall_ends: [mask.left, mask.right],
            transverse: None,
        };
        let candidate: Vec<f64> = (0..n).map(|k| 0.5 * old[k] + 0.1 * (k as f64 - 1.0)).collect();
        let a = residual(&problem, &candidate).unwrap();
        let b = sweep_residual(&inst.field, &inst.model, inst.dt, Axis::X, 0, &candidate);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{}: {a:?} vs {b:?}", inst.label);
        }
    }
}

/// A large time step on a rough degenerate line: the stiff case the solver's
/// fallbacks exist for still lands on the oracle's root.
#[test]
fn stiff_degenerate_line_matches_oracle() {
    let grid = Grid::line(0.0, 1.0, 5).unwrap();
    let field = PhaseField::new(grid, vec![-0.6, 0.7, -0.95, 0.2, -0.1]).unwrap();
    let model = ModelParams {
        potential: PotentialKind::DoubleWell,
        mobility: MobilityKind::Degenerate { m0: 1.0 },
        epsilon: 0.3,
        wetting: WettingParams::new(1.0, WallMask::ALL),
    };
    let controls = SolverControls { tol: 1e-13, ..SolverControls::default() };
    let (next, _) = step_1d(&field, &model, &controls, 5.0).unwrap();
    assert!(next.max_abs() <= 1.0);
    let r = sweep_residual(&field, &model, 5.0, Axis::X, 0, &next.values);
    assert!(r.iter().all(|v| v.abs() < 1e-10), "{r:?}");
}

/// The bottom row of a rough 256² degenerate coarsening state, and the row
/// above it. In one step several of these cells drain to within 1e-5 of -1,
/// where the upwind mobility of their faces nearly vanishes.
const NEAR_DRAINED: [f64; 25] = [
    -0.9999885291907052,
    -0.9394677421495181,
    -0.9470345211380296,
    -0.9999922471061177,
    -0.9255346327285382,
    -0.9999899370611135,
    -0.9085792882809046,
    -0.9057757772823486,
    -0.7475084998332903,
    -0.7836202561492527,
    -0.7532273960095549,
    -0.7243944706446593,
    -0.7722815632000233,
    -0.6423708644597257,
    -0.9317201443680614,
    -0.5799165780281297,
    -0.9840088822801673,
    -0.8073316374005941,
    -0.8439203411879842,
    -0.9494744148761476,
    -0.8216337115356945,
    -0.8878260440140373,
    -0.7735553024657353,
    -0.7939675361986045,
    -0.8793211266181058,
];
const NEIGHBOUR: [f64; 25] = [
    -0.9616587912580876,
    -0.9999975212234079,
    -0.9489543168463451,
    -0.9188314602546553,
    -0.9999956254453171,
    -0.915007359306973,
    -0.8849820207098776,
    -0.9951241571192043,
    -0.7140677520111874,
    -0.8962749966238113,
    -0.6948877558831014,
    -0.720387843547708,
    -0.7790366921323485,
    -0.7091691663313133,
    -0.9147437080867146,
    -0.8789075887511255,
    -0.697866665434315,
    -0.7852589091191351,
    -0.7755538781248791,
    -0.785581975455065,
    -0.8584634558123058,
    -0.8833381285152845,
    -0.8227445445419982,
    -0.7535398405488032,
    -0.8429256154414395,
];

#[test]
fn nearly_drained_cells_match_oracle() {
    let h = 1.0 / 256.0;
    let grid = Grid::rect((0.0, 25.0 * h), (0.0, 2.0 * h), 25, 2).unwrap();
    let field = PhaseField::new(grid, NEAR_DRAINED.iter().chain(&NEIGHBOUR).copied().collect()).unwrap();
    let model = ModelParams {
        potential: PotentialKind::DoubleWell,
        mobility: MobilityKind::Degenerate { m0: 1.0 },
        epsilon: 0.18,
        wetting: WettingParams::disabled(),
    };
    let dt = 0.0016;
    let (next, sol) = sweep_row(&field, 0, &model, &SolverControls::default(), dt).unwrap();
    let got = next.extract_line(Axis::X, 0).unwrap();
    assert!(got.iter().all(|v| v.abs() <= 1.0));
    assert!(got.iter().any(|v| 1.0 + v < 1e-4), "{got:?}");
    let root = oracle_root(|c| sweep_residual(&field, &model, dt, Axis::X, 0, c), &NEAR_DRAINED, 1e-10).unwrap();
    let diff = got.iter().zip(&root).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-9, "differs by {diff:.2e} (residual {:.1e})", sol.residual_norm);
}
