//! Finite-volume Cahn–Hilliard solver that conserves mass, keeps the phase
//! field bounded under degenerate mobility, and dissipates the discrete free
//! energy for any time step. 2D problems are advanced by dimensional
//! splitting into row and column line solves.
//!
//! ```
//! use phasefield::{free_energy, step_1d, Grid, MobilityKind, ModelParams, PhaseField, PotentialKind, SolverControls, WettingParams};
//! # fn main() -> Result<(), Box<dyn std::error::Error>> {
//! let grid = Grid::line(0.0, 1.0, 64)?;
//! let mut field = PhaseField::from_fn(grid, |x, _| 0.5 * (6.0 * x).cos());
//! let model = ModelParams {
//!     potential: PotentialKind::Logarithmic { theta: 0.3, theta_c: 1.0 },
//!     mobility: MobilityKind::Degenerate { m0: 1.0 },
//!     epsilon: 0.05,
//!     wetting: WettingParams::disabled(),
//! };
//! let start = free_energy(&field, &model).total;
//! for _ in 0..10 {
//!     field = step_1d(&field, &model, &SolverControls::default(), 1e-3)?.0;
//! }
//! assert!(free_energy(&field, &model).total <= start);
//! assert!(field.max_abs() <= 1.0);
//! # Ok(())
//! # }
//! ```

// Tolerance checks are written as `!(err <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod grid;
pub mod harness;
pub mod model;
pub mod nlsolve;
pub mod scheme1d;
pub mod scheme2d;

pub use diagnostics::{free_energy, EnergyBreakdown, StepReport};
pub use grid::{Axis, Grid, PhaseField};
pub use model::{MobilityKind, ModelParams, PotentialKind, WallMask, WettingParams};
pub use nlsolve::SolverControls;
pub use scheme1d::{step_1d, step_line, LineStepProblem, LineStepSolution, SchemeError};
pub use scheme2d::{step_2d, Step2DReport, SweepSchedule};
