//! Named experiment presets and initial-condition builders.

use super::rng::CellRng;
use crate::grid::{Grid, GridError, PhaseField};
use crate::model::{MobilityKind, ModelParams, PotentialKind, WallMask, WettingParams};
use crate::nlsolve::SolverControls;
use crate::scheme2d::SweepSchedule;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario '{0}' (see `list`)")]
    UnknownScenario(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialCondition {
    /// `cos((x - 1/2)/eps) - 1` within `pi eps / 2` of the centre, `-1` elsewhere.
    CosineBump,
    /// `mean + r`, `r` uniform in `[-amplitude, amplitude]` per cell.
    Random { mean: f64, amplitude: f64 },
    /// `+1` plateau, linear ramp down at `x = 1/3`, and a small bump centred
    /// at `x = 41/50` on a `-1` background.
    RampAndBump,
    /// `inside` within any of the discs, `outside` elsewhere.
    Discs { centers: Vec<(f64, f64)>, radius: f64, inside: f64, outside: f64 },
}

/// Where the `N` samples of an axis sit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Layout {
    /// `N` cells of size `L / N` covering the domain.
    #[default]
    Cell,
    /// `N` samples at `a + k L / (N - 1)`, including both end points; this is
    /// a cell grid on the domain widened by half a spacing at each end.
    Vertex,
}

/// What a run computes beyond the time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Study {
    Single,
    /// One run per resolution in `cells`; L1 errors against the explicit
    /// steady state and observed orders.
    Convergence,
    /// The same problem with constant and with degenerate mobility.
    MobilityPair,
    /// Final contact angle on the bottom substrate.
    ContactAngle,
    /// One run per contact angle.
    BetaSweep(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub dim: u8,
    /// `[x0, x1, y0, y1]`; the y extent is ignored in 1D.
    pub domain: [f64; 4],
    /// Cells per axis for each run (`[n, 1]` in 1D).
    pub cells: Vec<[usize; 2]>,
    pub layout: Layout,
    pub model: ModelParams,
    pub dt: f64,
    pub t_end: f64,
    pub snapshots: Vec<f64>,
    pub seed: u64,
    pub schedule: SweepSchedule,
    pub strict: bool,
    pub initial: InitialCondition,
    pub study: Study,
    #[serde(skip)]
    pub controls: SolverControls,
}

/// One concrete run of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub cells: [usize; 2],
    pub model: ModelParams,
}

pub const PRESETS: [&str; 9] = [
    "convergence-1d",
    "convergence-2d",
    "separation-1d-dw",
    "separation-1d-log",
    "mobility-compare-1d",
    "coarsening-2d-const",
    "coarsening-2d-degen",
    "droplet-angle",
    "droplets-merge",
];

const DEGENERATE: MobilityKind = MobilityKind::Degenerate { m0: 1.0 };
const DEEP_QUENCH: PotentialKind = PotentialKind::Logarithmic { theta: 0.0, theta_c: 1.0 };
const LOG_03: PotentialKind = PotentialKind::Logarithmic { theta: 0.3, theta_c: 1.0 };

fn model(potential: PotentialKind, mobility: MobilityKind, epsilon: f64) -> ModelParams {
    ModelParams { potential, mobility, epsilon, wetting: WettingParams::disabled() }
}

fn base(
    name: &str,
    dim: u8,
    domain: [f64; 4],
    cells: Vec<[usize; 2]>,
    model: ModelParams,
    dt: f64,
    t_end: f64,
) -> Scenario {
    Scenario {
        name: name.to_string(),
        dim,
        domain,
        cells,
        layout: Layout::Cell,
        model,
        dt,
        t_end,
        snapshots: Vec::new(),
        seed: 2020,
        schedule: SweepSchedule::Sequential,
        strict: false,
        initial: InitialCondition::CosineBump,
        study: Study::Single,
        controls: SolverControls::default(),
    }
}

/// Preset by name, at the resolution and run length of the original
/// experiment.
pub fn preset(name: &str) -> Result<Scenario, ScenarioError> {
    let s = match name {
        "convergence-1d" => Scenario {
            study: Study::Convergence,
            layout: Layout::Vertex,
            snapshots: vec![0.01, 0.1],
            ..base(
                name,
                1,
                [0.0, 1.0, 0.0, 1.0],
                vec![[25, 1], [50, 1], [100, 1], [200, 1]],
                model(DEEP_QUENCH, DEGENERATE, 0.1),
                1e-4,
                0.1,
            )
        },
        "convergence-2d" => Scenario {
            study: Study::Convergence,
            layout: Layout::Vertex,
            snapshots: vec![0.1],
            ..base(
                name,
                2,
                [0.0, 1.0, 0.0, 1.0],
                vec![[10, 10], [20, 20], [40, 40], [80, 80]],
                model(DEEP_QUENCH, DEGENERATE, 0.1),
                1e-4,
                0.1,
            )
        },
        "separation-1d-dw" | "separation-1d-log" => {
            let potential = if name.ends_with("dw") { PotentialKind::DoubleWell } else { LOG_03 };
            Scenario {
                initial: InitialCondition::Random { mean: 0.0, amplitude: 0.5 },
                snapshots: vec![1.0, 5.0, 30.0],
                ..base(name, 1, [-40.0, 40.0, 0.0, 1.0], vec![[200, 1]], model(potential, DEGENERATE, 1.0), 0.01, 30.0)
            }
        }
        "mobility-compare-1d" => Scenario {
            initial: InitialCondition::RampAndBump,
            study: Study::MobilityPair,
            snapshots: vec![0.01, 0.1],
            ..base(name, 1, [0.0, 1.0, 0.0, 1.0], vec![[80, 1]], model(LOG_03, DEGENERATE, 1e-3f64.sqrt()), 0.01, 0.1)
        },
        "coarsening-2d-const" | "coarsening-2d-degen" => {
            let mobility = if name.ends_with("const") { MobilityKind::Constant { m0: 1.0 } } else { DEGENERATE };
            Scenario {
                initial: InitialCondition::Random { mean: -0.4, amplitude: 0.25 },
                snapshots: vec![0.1, 0.5, 1.0],
                ..base(
                    name,
                    2,
                    [-0.5, 0.5, -0.5, 0.5],
                    vec![[256, 256]],
                    model(PotentialKind::DoubleWell, mobility, 0.18),
                    0.0016,
                    1.0,
                )
            }
        }
        "droplet-angle" => {
            let mut m = model(PotentialKind::DoubleWell, DEGENERATE, 0.005);
            m.wetting = WettingParams::new(PI / 3.0, WallMask::BOTTOM);
            Scenario {
                initial: InitialCondition::Discs {
                    centers: vec![(0.0, 0.0)],
                    radius: 0.25,
                    inside: 0.97,
                    outside: -0.97,
                },
                study: Study::ContactAngle,
                snapshots: vec![0.01, 0.1],
                ..base(name, 2, [-0.5, 0.5, 0.0, 0.4], vec![[256, 256]], m, 1e-3, 0.1)
            }
        }
        "droplets-merge" => {
            let mut m = model(PotentialKind::DoubleWell, DEGENERATE, 0.012);
            m.wetting = WettingParams::new(PI / 4.0, WallMask::BOTTOM);
            Scenario {
                initial: InitialCondition::Discs {
                    centers: vec![(-0.35, 0.0), (0.35, 0.0)],
                    radius: 0.3,
                    inside: 0.97,
                    outside: -0.97,
                },
                study: Study::BetaSweep(vec![PI / 4.0, 3.0 * PI / 4.0]),
                snapshots: vec![1.0, 5.0, 15.0],
                ..base(name, 2, [-1.0, 1.0, 0.0, 0.5], vec![[256, 64]], m, 5e-4, 15.0)
            }
        }
        other => return Err(ScenarioError::UnknownScenario(other.to_string())),
    };
    Ok(s)
}

impl Scenario {
    /// Reduced version for quick runs: 2D resolutions are capped (the
    /// single droplet uses 128² with a matching wider interface) and the
    /// two-droplet run is shortened. 1D presets are already cheap and are
    /// returned unchanged.
    pub fn desk_scale(&self) -> Scenario {
        let mut s = self.clone();
        match s.name.as_str() {
            "coarsening-2d-const" | "coarsening-2d-degen" => s.cells = vec![[64, 64]],
            "droplet-angle" => {
                s.cells = vec![[128, 128]];
                s.model.epsilon = 0.01;
            }
            "droplets-merge" => {
                s.cells = vec![[128, 32]];
                s.model.epsilon = 0.024;
                s.dt = 1e-3;
                s.t_end = 1.0;
                s.snapshots = vec![0.1, 1.0];
            }
            _ => {}
        }
        s
    }

    pub fn grid(&self, cells: [usize; 2]) -> Result<Grid, ScenarioError> {
        let mut d = self.domain;
        if self.layout == Layout::Vertex {
            for (axis, &n) in cells.iter().enumerate().take(self.dim as usize) {
                if n < 2 {
                    return Err(GridError::TooFewCells(n).into());
                }
                let half = 0.5 * (d[2 * axis + 1] - d[2 * axis]) / (n - 1) as f64;
                d[2 * axis] -= half;
                d[2 * axis + 1] += half;
            }
        }
        Ok(if self.dim == 1 {
            Grid::line(d[0], d[1], cells[0])?
        } else {
            Grid::rect((d[0], d[1]), (d[2], d[3]), cells[0], cells[1])?
        })
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        if self.dim != 1 && self.dim != 2 {
            return bad(format!("dim must be 1 or 2, got {}", self.dim));
        }
        self.model.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        self.controls.validate().map_err(ScenarioError::Invalid)?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end == 0.0 || self.t_end >= self.dt) || !self.t_end.is_finite() {
            return bad(format!("t_end must be 0 or at least dt, got {}", self.t_end));
        }
        if let Some(t) = self.snapshots.iter().find(|t| !(**t >= 0.0 && **t <= self.t_end)) {
            return bad(format!("snapshot time {t} outside [0, {}]", self.t_end));
        }
        if self.cells.is_empty() {
            return bad("no resolution given".into());
        }
        for c in &self.cells {
            if self.dim == 1 && c[1] != 1 {
                return bad(format!("1D scenario given {}x{} cells", c[0], c[1]));
            }
            self.grid(*c)?;
        }
        if self.study == Study::Convergence && self.cells.len() < 2 {
            return bad("a convergence study needs at least two resolutions".into());
        }
        if matches!(self.study, Study::ContactAngle | Study::BetaSweep(_)) {
            if self.dim != 2 {
                return bad("contact-angle studies are 2D".into());
            }
            if !self.model.wetting.enabled {
                return bad("contact-angle studies need wetting = on".into());
            }
        }
        if let Study::BetaSweep(betas) = &self.study {
            for &b in betas {
                WettingParams { beta: b, ..self.model.wetting }
                    .validate()
                    .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
            }
        }
        Ok(())
    }

    pub fn variants(&self) -> Vec<Variant> {
        let one = |label: String, cells: [usize; 2], model: ModelParams| Variant { label, cells, model };
        match &self.study {
            Study::Single | Study::ContactAngle => vec![one("run".into(), self.cells[0], self.model)],
            Study::Convergence => self.cells.iter().map(|c| one(cells_label(*c, self.dim), *c, self.model)).collect(),
            Study::MobilityPair => {
                let m0 = self.model.mobility.m0();
                vec![
                    one(
                        "constant".into(),
                        self.cells[0],
                        ModelParams { mobility: MobilityKind::Constant { m0 }, ..self.model },
                    ),
                    one(
                        "degenerate".into(),
                        self.cells[0],
                        ModelParams { mobility: MobilityKind::Degenerate { m0 }, ..self.model },
                    ),
                ]
            }
            Study::BetaSweep(betas) => betas
                .iter()
                .map(|&b| {
                    let mut m = self.model;
                    m.wetting.beta = b;
                    one(format!("beta{:.4}", b), self.cells[0], m)
                })
                .collect(),
        }
    }
}

fn cells_label(c: [usize; 2], dim: u8) -> String {
    if dim == 1 {
        format!("n{}", c[0])
    } else {
        format!("n{}x{}", c[0], c[1])
    }
}

/// Initial field of a scenario on the given resolution, sampled at cell
/// centres.
pub fn build_initial(s: &Scenario, cells: [usize; 2]) -> Result<PhaseField, ScenarioError> {
    let grid = s.grid(cells)?;
    let field = match &s.initial {
        InitialCondition::CosineBump => {
            let eps = s.model.epsilon;
            PhaseField::from_fn(grid, |x, _| {
                let d = x - 0.5;
                if d.abs() <= PI * eps / 2.0 {
                    (d / eps).cos() - 1.0
                } else {
                    -1.0
                }
            })
        }
        InitialCondition::Random { mean, amplitude } => {
            let rng = CellRng::new(s.seed);
            let values = (0..grid.len()).map(|k| mean + rng.uniform_in(k as u64, -amplitude, *amplitude)).collect();
            PhaseField { grid, values }
        }
        InitialCondition::RampAndBump => PhaseField::from_fn(grid, |x, _| {
            let ramp = 1.0 / 3.0;
            let bump = 41.0 / 50.0;
            if (0.0..=ramp - 0.05).contains(&x) {
                1.0
            } else if (x - ramp).abs() <= 0.05 {
                20.0 * (ramp - x)
            } else if (x - bump).abs() <= 0.05 {
                -20.0 * (x - bump).abs()
            } else {
                -1.0
            }
        }),
        InitialCondition::Discs { centers, radius, inside, outside } => PhaseField::from_fn(grid, |x, y| {
            let hit = centers.iter().any(|(cx, cy)| (x - cx).powi(2) + (y - cy).powi(2) < radius * radius);
            if hit {
                *inside
            } else {
                *outside
            }
        }),
    };
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_is_valid_at_both_scales() {
        for name in PRESETS {
            let p = preset(name).unwrap();
            p.validate().unwrap();
            p.desk_scale().validate().unwrap();
            assert_eq!(p.name, name);
        }
        assert!(matches!(preset("nope"), Err(ScenarioError::UnknownScenario(_))));
    }

    #[test]
    fn cosine_bump_on_four_cells() {
        let mut s = preset("convergence-1d").unwrap();
        s.layout = Layout::Cell;
        s.cells = vec![[4, 1], [8, 1]];
        let f = build_initial(&s, [4, 1]).unwrap();
        let expect = (1.25f64).cos() - 1.0;
        assert_eq!(f.values[0], -1.0);
        assert!((f.values[1] - expect).abs() < 1e-15);
        assert!((f.values[2] - expect).abs() < 1e-15);
        assert_eq!(f.values[3], -1.0);
        assert!((expect + 0.6847).abs() < 1e-4);
    }

    #[test]
    fn vertex_layout_puts_samples_on_the_end_points() {
        let mut s = preset("convergence-2d").unwrap();
        s.cells = vec![[5, 3], [9, 5]];
        let g = s.grid([5, 3]).unwrap();
        assert_eq!(g.cell_center(0, 0), (0.0, 0.0));
        let (x, y) = g.cell_center(4, 2);
        assert!((x - 1.0).abs() < 1e-15 && (y - 1.0).abs() < 1e-15);
        assert!((g.dx - 0.25).abs() < 1e-15 && (g.dy - 0.5).abs() < 1e-15);
        let f = build_initial(&s, [5, 3]).unwrap();
        assert_eq!(f.get(2, 1), 0.0);
    }

    #[test]
    fn droplet_initial_values() {
        let s = preset("droplet-angle").unwrap();
        let f = build_initial(&s, [10, 4]).unwrap();
        // cell centre (0.05, 0.05) is inside, far corner outside
        assert_eq!(f.get(5, 0), 0.97);
        assert_eq!(f.get(0, 3), -0.97);
        let g = f.grid;
        let d = PhaseField::from_fn(g, |x, y| if x * x + y * y < 0.0625 { 0.97 } else { -0.97 });
        assert_eq!(d, f);
    }

    #[test]
    fn random_fields_are_reproducible_and_in_range() {
        let s = preset("coarsening-2d-degen").unwrap();
        let a = build_initial(&s, [16, 16]).unwrap();
        let b = build_initial(&s, [16, 16]).unwrap();
        assert_eq!(a, b);
        assert!(a.values.iter().all(|v| (-0.65..-0.15).contains(v)));
        let mut other = s.clone();
        other.seed += 1;
        assert_ne!(build_initial(&other, [16, 16]).unwrap(), a);
    }

    #[test]
    fn ramp_and_bump_shape() {
        let s = preset("mobility-compare-1d").unwrap();
        let f = build_initial(&s, [80, 1]).unwrap();
        assert_eq!(f.values[0], 1.0);
        assert_eq!(f.values[79], -1.0);
        let bump_max = (0..80).filter(|&i| f.grid.cell_center(i, 0).0 > 0.6).map(|i| f.values[i]).fold(-2.0, f64::max);
        assert!(bump_max > -0.1 && bump_max <= 0.0);
    }

    #[test]
    fn variants_follow_the_study() {
        assert_eq!(preset("convergence-1d").unwrap().variants().len(), 4);
        let v = preset("mobility-compare-1d").unwrap().variants();
        assert!(!v[0].model.mobility.is_degenerate() && v[1].model.mobility.is_degenerate());
        let v = preset("droplets-merge").unwrap().variants();
        assert_eq!(v.len(), 2);
        assert!((v[1].model.wetting.beta - 3.0 * PI / 4.0).abs() < 1e-15);
    }
}
