//! Continuous-model ingredients: bulk potentials with their convex splits,
//! mobility laws and the cubic wall free energy.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("logarithmic potential evaluated outside (-1, 1): phi = {0}")]
    Domain(f64),
    #[error("invalid model parameters: {0}")]
    Invalid(String),
}

/// Bulk free-energy density `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PotentialKind {
    /// Ginzburg-Landau `H = (phi^2 - 1)^2 / 4`.
    DoubleWell,
    /// Flory-Huggins type potential with temperature `theta` and critical
    /// temperature `theta_c`. `theta = 0` is the deep-quench limit.
    Logarithmic { theta: f64, theta_c: f64 },
}

/// Values and slopes of the convex (`c`) and concave-removed (`e`) parts,
/// `H = H_c - H_e` with both parts convex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSplit {
    pub hc: f64,
    pub he: f64,
    pub dhc: f64,
    pub dhe: f64,
}

impl PotentialSplit {
    pub fn value(&self) -> f64 {
        self.hc - self.he
    }
}

/// `x ln(x / 2)` with the `0 ln 0 = 0` convention.
fn xlog_half(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (0.5 * x).ln()
    }
}

impl PotentialKind {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            PotentialKind::DoubleWell => Ok(()),
            PotentialKind::Logarithmic { theta, theta_c } => {
                if !(theta.is_finite() && theta_c.is_finite()) {
                    return Err(ModelError::Invalid("theta and theta_c must be finite".into()));
                }
                if theta < 0.0 || theta >= theta_c {
                    return Err(ModelError::Invalid(format!(
                        "logarithmic potential needs 0 <= theta < theta_c (got theta = {theta}, theta_c = {theta_c})"
                    )));
                }
                Ok(())
            }
        }
    }

    pub fn is_logarithmic(&self) -> bool {
        matches!(self, PotentialKind::Logarithmic { .. })
    }

    /// Checked evaluation of the split.
    pub fn split(&self, phi: f64) -> Result<PotentialSplit, ModelError> {
        if self.is_logarithmic() && !(phi.abs() < 1.0) {
            return Err(ModelError::Domain(phi));
        }
        Ok(self.split_unchecked(phi))
    }

    /// Split without the domain check. For the logarithmic potential the
    /// caller guarantees `|phi| <= 1`; `phi = ±1` yields infinite slopes.
    pub fn split_unchecked(&self, phi: f64) -> PotentialSplit {
        PotentialSplit { hc: self.hc(phi), he: self.he(phi), dhc: self.dhc(phi), dhe: self.dhe(phi) }
    }

    pub fn hc(&self, phi: f64) -> f64 {
        match *self {
            PotentialKind::DoubleWell => (phi.powi(4) + 1.0) / 4.0,
            PotentialKind::Logarithmic { theta, .. } => {
                if theta == 0.0 {
                    0.0
                } else {
                    0.5 * theta * (xlog_half(1.0 + phi) + xlog_half(1.0 - phi))
                }
            }
        }
    }

    pub fn he(&self, phi: f64) -> f64 {
        match *self {
            PotentialKind::DoubleWell => 0.5 * phi * phi,
            PotentialKind::Logarithmic { theta_c, .. } => -0.5 * theta_c * (1.0 - phi * phi),
        }
    }

    pub fn dhc(&self, phi: f64) -> f64 {
        match *self {
            PotentialKind::DoubleWell => phi * phi * phi,
            PotentialKind::Logarithmic { theta, .. } => {
                if theta == 0.0 {
                    0.0
                } else {
                    0.5 * theta * ((1.0 + phi) / (1.0 - phi)).ln()
                }
            }
        }
    }

    pub fn dhe(&self, phi: f64) -> f64 {
        match *self {
            PotentialKind::DoubleWell => phi,
            PotentialKind::Logarithmic { theta_c, .. } => theta_c * phi,
        }
    }

    /// Second derivative of the convex part (Newton Jacobian).
    pub fn d2hc(&self, phi: f64) -> f64 {
        match *self {
            PotentialKind::DoubleWell => 3.0 * phi * phi,
            PotentialKind::Logarithmic { theta, .. } => {
                if theta == 0.0 {
                    0.0
                } else {
                    theta / (1.0 - phi * phi)
                }
            }
        }
    }

    /// Full potential `H = H_c - H_e`, written directly (not through the split).
    pub fn value(&self, phi: f64) -> f64 {
        match *self {
            PotentialKind::DoubleWell => 0.25 * (phi * phi - 1.0).powi(2),
            PotentialKind::Logarithmic { theta, theta_c } => {
                let mixing =
                    if theta == 0.0 { 0.0 } else { 0.5 * theta * (xlog_half(1.0 + phi) + xlog_half(1.0 - phi)) };
                mixing + 0.5 * theta_c * (1.0 - phi * phi)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MobilityKind {
    Constant {
        m0: f64,
    },
    /// `M = M0 (1 - phi)(1 + phi)`, vanishing in the pure phases.
    Degenerate {
        m0: f64,
    },
}

impl MobilityKind {
    pub fn m0(&self) -> f64 {
        match *self {
            MobilityKind::Constant { m0 } | MobilityKind::Degenerate { m0 } => m0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self, MobilityKind::Degenerate { .. })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let m0 = self.m0();
        if !(m0 > 0.0 && m0.is_finite()) {
            return Err(ModelError::Invalid(format!("mobility scale must be positive, got {m0}")));
        }
        Ok(())
    }

    /// Face mobility `M(upwind, downwind)`.
    pub fn face(&self, phi_upwind: f64, phi_downwind: f64) -> f64 {
        match *self {
            MobilityKind::Constant { m0 } => m0,
            MobilityKind::Degenerate { m0 } => m0 * (1.0 + phi_upwind).max(0.0) * (1.0 - phi_downwind).max(0.0),
        }
    }

    /// Partial derivatives of [`MobilityKind::face`] with respect to its two
    /// arguments, taking the derivative of `max(s, 0)` as 0 for `s <= 0`.
    pub fn face_grad(&self, phi_upwind: f64, phi_downwind: f64) -> (f64, f64) {
        match *self {
            MobilityKind::Constant { .. } => (0.0, 0.0),
            MobilityKind::Degenerate { m0 } => {
                let a = 1.0 + phi_upwind;
                let b = 1.0 - phi_downwind;
                let da = if a > 0.0 { m0 * b.max(0.0) } else { 0.0 };
                let db = if b > 0.0 { -m0 * a.max(0.0) } else { 0.0 };
                (da, db)
            }
        }
    }
}

/// `mobility_face` as a free function.
pub fn mobility_face(m: MobilityKind, phi_upwind: f64, phi_downwind: f64) -> f64 {
    m.face(phi_upwind, phi_downwind)
}

/// Which domain walls carry the wall free energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WallMask {
    pub left: bool,
    pub right: bool,
    pub bottom: bool,
    pub top: bool,
}

impl WallMask {
    pub const ALL: WallMask = WallMask { left: true, right: true, bottom: true, top: true };
    pub const NONE: WallMask = WallMask { left: false, right: false, bottom: false, top: false };
    pub const BOTTOM: WallMask = WallMask { left: false, right: false, bottom: true, top: false };
}

impl Default for WallMask {
    fn default() -> Self {
        WallMask::ALL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WettingParams {
    /// Equilibrium contact angle in radians.
    pub beta: f64,
    pub enabled: bool,
    pub walls: WallMask,
}

impl WettingParams {
    pub fn disabled() -> Self {
        WettingParams { beta: std::f64::consts::FRAC_PI_2, enabled: false, walls: WallMask::NONE }
    }

    pub fn new(beta: f64, walls: WallMask) -> Self {
        WettingParams { beta, enabled: true, walls }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.enabled && !(self.beta > 0.0 && self.beta < std::f64::consts::PI) {
            return Err(ModelError::Invalid(format!("contact angle must satisfy 0 < beta < pi, got {}", self.beta)));
        }
        Ok(())
    }

    /// Effective mask: no walls when wetting is off.
    pub fn active_walls(&self) -> WallMask {
        if self.enabled {
            self.walls
        } else {
            WallMask::NONE
        }
    }
}

/// Values and slopes of the wall-energy split `f_w = f_cw - f_ew`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallSplit {
    pub fcw: f64,
    pub few: f64,
    pub dfcw: f64,
    pub dfew: f64,
}

impl WallSplit {
    pub fn value(&self) -> f64 {
        self.fcw - self.few
    }
}

/// Cubic wall energy and its convex split. The split branch depends on the
/// sign of `cos(beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallEnergy {
    /// `(eps sqrt 2 / 2) cos(beta)`
    coef: f64,
}

impl WallEnergy {
    pub fn new(beta: f64, epsilon: f64) -> Self {
        WallEnergy { coef: 0.5 * epsilon * SQRT_2 * beta.cos() }
    }

    pub fn value(&self, phi: f64) -> f64 {
        self.coef * (phi * phi * phi / 3.0 - phi)
    }

    pub fn split(&self, phi: f64) -> WallSplit {
        let c = self.coef;
        let fw = self.value(phi);
        let (fcw, dfcw) = if c >= 0.0 {
            (c * (phi * phi * phi / 3.0 - phi + phi * phi), c * (phi * phi - 1.0 + 2.0 * phi))
        } else {
            (-c * phi * phi, -2.0 * c * phi)
        };
        let dfw = c * (phi * phi - 1.0);
        WallSplit { fcw, few: fcw - fw, dfcw, dfew: dfcw - dfw }
    }

    pub fn dfcw(&self, phi: f64) -> f64 {
        self.split(phi).dfcw
    }

    pub fn dfew(&self, phi: f64) -> f64 {
        self.split(phi).dfew
    }

    pub fn d2fcw(&self, phi: f64) -> f64 {
        let c = self.coef;
        if c >= 0.0 {
            c * (2.0 * phi + 2.0)
        } else {
            -2.0 * c
        }
    }
}

/// Checked wall split; wetting must be enabled.
pub fn wall_split(w: &WettingParams, epsilon: f64, phi: f64) -> Result<WallSplit, ModelError> {
    if !w.enabled {
        return Err(ModelError::Invalid("wall split requested with wetting disabled".into()));
    }
    w.validate()?;
    Ok(WallEnergy::new(w.beta, epsilon).split(phi))
}

/// Checked potential split.
pub fn potential_split(p: &PotentialKind, phi: f64) -> Result<PotentialSplit, ModelError> {
    p.split(phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub potential: PotentialKind,
    pub mobility: MobilityKind,
    /// Interface width `eps`; the gradient energy is `eps^2 / 2 |grad phi|^2`.
    pub epsilon: f64,
    pub wetting: WettingParams,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ModelError::Invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        self.potential.validate()?;
        self.mobility.validate()?;
        self.wetting.validate()
    }

    /// Wall energy when wetting is enabled.
    pub fn wall_energy(&self) -> Option<WallEnergy> {
        self.wetting.enabled.then(|| WallEnergy::new(self.wetting.beta, self.epsilon))
    }
}
