//! Discrete free energy, per-step property checks, error norms against the
//! explicit steady state, and contact-angle measurement.

use crate::grid::{compensated_sum, total_mass, PhaseField};
use crate::model::{ModelParams, PotentialKind, WallMask};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Parts of the discrete free energy. `bulk_convex` and `bulk_concave` are
/// the volume-weighted sums of `H_c` and `H_e`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct EnergyBreakdown {
    pub bulk_convex: f64,
    pub bulk_concave: f64,
    pub gradient_x: f64,
    pub gradient_y: f64,
    pub wall: f64,
    pub total: f64,
    /// Cells whose value had to be clamped into the logarithmic domain.
    pub clamped_cells: usize,
}

impl EnergyBreakdown {
    pub fn bulk(&self) -> f64 {
        self.bulk_convex - self.bulk_concave
    }

    pub fn gradient(&self) -> f64 {
        self.gradient_x + self.gradient_y
    }
}

/// Evaluates the bulk potential, clamping outside the logarithmic domain.
fn bulk_parts(p: &PotentialKind, phi: f64, clamped: &mut usize) -> (f64, f64) {
    let v = match p {
        // without the entropy term the bulk energy is a plain quadratic, so a
        // deep quench that overshoots +-1 is evaluated as is
        PotentialKind::Logarithmic { theta, .. } if *theta > 0.0 => {
            let lim = 1.0 - 1e-13;
            if phi.abs() >= 1.0 {
                *clamped += 1;
                phi.clamp(-lim, lim)
            } else {
                phi
            }
        }
        _ => phi,
    };
    (p.hc(v), p.he(v))
}

/// Discrete free energy of a 1D or 2D field.
///
/// ```text
/// F = dx dy sum (H_c - H_e) + eps²/2 dx dy [sum (D_x phi)² + sum (D_y phi)²]
///     + dy sum_{x-walls} f_w + dx sum_{y-walls} f_w
/// ```
///
/// On a 1D grid `dy = 1` and the walls are the two end cells.
pub fn free_energy(field: &PhaseField, model: &ModelParams) -> EnergyBreakdown {
    let g = field.grid;
    let (nx, ny) = (g.nx, g.ny);
    let vol = g.dx * g.dy;
    let half_eps2 = 0.5 * model.epsilon * model.epsilon;
    let v = &field.values;
    let mut clamped = 0;

    let mut hc = Vec::with_capacity(v.len());
    let mut he = Vec::with_capacity(v.len());
    for &phi in v {
        let (a, b) = bulk_parts(&model.potential, phi, &mut clamped);
        hc.push(a);
        he.push(b);
    }
    let bulk_convex = vol * compensated_sum(hc.into_iter());
    let bulk_concave = vol * compensated_sum(he.into_iter());

    let gx = compensated_sum((0..ny).flat_map(|j| {
        (0..nx - 1).map(move |i| {
            let d = (v[j * nx + i + 1] - v[j * nx + i]) / g.dx;
            d * d
        })
    }));
    let gy = if ny > 1 {
        compensated_sum((0..ny - 1).flat_map(|j| {
            (0..nx).map(move |i| {
                let d = (v[(j + 1) * nx + i] - v[j * nx + i]) / g.dy;
                d * d
            })
        }))
    } else {
        0.0
    };

    let wall = wall_energy(field, model);
    let gradient_x = half_eps2 * vol * gx;
    let gradient_y = half_eps2 * vol * gy;
    EnergyBreakdown {
        bulk_convex,
        bulk_concave,
        gradient_x,
        gradient_y,
        wall,
        total: bulk_convex - bulk_concave + gradient_x + gradient_y + wall,
        clamped_cells: clamped,
    }
}

fn wall_energy(field: &PhaseField, model: &ModelParams) -> f64 {
    let Some(w) = model.wall_energy() else {
        return 0.0;
    };
    let g = field.grid;
    let mask = model.wetting.active_walls();
    let mut s = 0.0;
    for j in 0..g.ny {
        if mask.left {
            s += g.dy * w.value(field.get(0, j));
        }
        if mask.right {
            s += g.dy * w.value(field.get(g.nx - 1, j));
        }
    }
    if g.dim == 2 {
        for i in 0..g.nx {
            if mask.bottom {
                s += g.dx * w.value(field.get(i, 0));
            }
            if mask.top {
                s += g.dx * w.value(field.get(i, g.ny - 1));
            }
        }
    }
    s
}

/// Every energy term that involves a cell of row `r`: its bulk and wall
/// terms, the x-faces inside the row and the y-faces to the adjacent rows.
/// The change of this quantity across a row update is the change of the
/// total energy.
pub fn row_energy(field: &PhaseField, model: &ModelParams, r: usize) -> f64 {
    let g = field.grid;
    let nx = g.nx;
    let vol = g.dx * g.dy;
    let half_eps2 = 0.5 * model.epsilon * model.epsilon;
    let row = &field.values[r * nx..(r + 1) * nx];
    let mut clamped = 0;
    let mut bulk = 0.0;
    for &phi in row {
        let (a, b) = bulk_parts(&model.potential, phi, &mut clamped);
        bulk += a - b;
    }
    let mut grad_x = 0.0;
    for i in 0..nx - 1 {
        let d = (row[i + 1] - row[i]) / g.dx;
        grad_x += d * d;
    }
    let mut grad_y = 0.0;
    for nb in [r.checked_sub(1), (r + 1 < g.ny).then_some(r + 1)].into_iter().flatten() {
        let other = &field.values[nb * nx..(nb + 1) * nx];
        for i in 0..nx {
            let d = (other[i] - row[i]) / g.dy;
            grad_y += d * d;
        }
    }
    let mut wall = 0.0;
    if let Some(w) = model.wall_energy() {
        let mask = model.wetting.active_walls();
        if mask.left {
            wall += g.dy * w.value(row[0]);
        }
        if mask.right {
            wall += g.dy * w.value(row[nx - 1]);
        }
        if g.dim == 2 && ((r == 0 && mask.bottom) || (r + 1 == g.ny && mask.top)) {
            let k = (r == 0 && mask.bottom) as u8 + (r + 1 == g.ny && mask.top) as u8;
            wall += k as f64 * g.dx * row.iter().map(|&p| w.value(p)).sum::<f64>();
        }
    }
    vol * bulk + half_eps2 * vol * (grad_x + grad_y) + wall
}

/// Wall mask of the transposed configuration (x and y exchanged).
pub fn transposed_mask(m: WallMask) -> WallMask {
    WallMask { left: m.bottom, right: m.top, bottom: m.left, top: m.right }
}

/// Model with the wall mask exchanged for use on a transposed field.
pub fn transposed_model(model: &ModelParams) -> ModelParams {
    let mut m = *model;
    m.wetting.walls = transposed_mask(m.wetting.walls);
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport {
    pub t: f64,
    pub mass: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub energy: EnergyBreakdown,
    pub newton_iters: usize,
    pub residual_norm: f64,
}

impl StepReport {
    pub fn measure(field: &PhaseField, model: &ModelParams, t: f64, newton_iters: usize, residual_norm: f64) -> Self {
        StepReport {
            t,
            mass: total_mass(field),
            phi_min: field.min(),
            phi_max: field.max(),
            energy: free_energy(field, model),
            newton_iters,
            residual_norm,
        }
    }
}

/// Thresholds for [`check_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckPolicy {
    /// Nonlinear tolerance the steps were solved to.
    pub tol: f64,
    /// Number of cells; slack is `10 * tol * cells`.
    pub cells: usize,
    /// Check `max |phi| <= 1 + 10 tol` (degenerate mobility).
    pub bounded: bool,
    /// Turn violations into errors.
    pub strict: bool,
}

impl CheckPolicy {
    pub fn slack(&self) -> f64 {
        10.0 * self.tol * self.cells as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    Mass,
    Bounds,
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("{kind:?} invariant violated by {magnitude:e}")]
pub struct InvariantViolation {
    pub kind: ViolationKind,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropertyVerdict {
    pub mass_drift: f64,
    pub bound_excess: f64,
    pub energy_change: f64,
    pub mass_ok: bool,
    pub bounds_ok: bool,
    pub energy_ok: bool,
}

impl PropertyVerdict {
    pub fn all_ok(&self) -> bool {
        self.mass_ok && self.bounds_ok && self.energy_ok
    }

    pub fn first_violation(&self) -> Option<InvariantViolation> {
        if !self.mass_ok {
            Some(InvariantViolation { kind: ViolationKind::Mass, magnitude: self.mass_drift })
        } else if !self.bounds_ok {
            Some(InvariantViolation { kind: ViolationKind::Bounds, magnitude: self.bound_excess })
        } else if !self.energy_ok {
            Some(InvariantViolation { kind: ViolationKind::Energy, magnitude: self.energy_change })
        } else {
            None
        }
    }
}

/// Certifies mass conservation, boundedness and energy decay between two
/// consecutive reports.
pub fn check_step(
    prev: &StepReport,
    next: &StepReport,
    policy: &CheckPolicy,
) -> Result<PropertyVerdict, InvariantViolation> {
    let slack = policy.slack();
    let mass_drift = (next.mass - prev.mass).abs();
    let bound_excess = (next.phi_max.max(-next.phi_min) - 1.0).max(0.0);
    let energy_change = next.energy.total - prev.energy.total;
    let verdict = PropertyVerdict {
        mass_drift,
        bound_excess,
        energy_change,
        mass_ok: mass_drift <= slack,
        bounds_ok: !policy.bounded || bound_excess <= 10.0 * policy.tol,
        energy_ok: energy_change <= slack,
    };
    if policy.strict {
        if let Some(v) = verdict.first_violation() {
            return Err(v);
        }
    }
    Ok(verdict)
}

/// Steady state of the deep-quench problem on `[0, 1]`:
/// a cosine bump of half-width `pi eps` centred at `1/2` on a `-1` background.
pub fn explicit_steady_state(x: f64, eps: f64) -> f64 {
    let s = x - 0.5;
    if s.abs() <= PI * eps {
        (1.0 + (s / eps).cos()) / PI - 1.0
    } else {
        -1.0
    }
}

/// Volume-weighted L1 distance to `reference` sampled at cell centres.
pub fn l1_error(field: &PhaseField, reference: impl Fn(f64, f64) -> f64) -> f64 {
    let g = field.grid;
    let terms = (0..g.ny).flat_map(|j| (0..g.nx).map(move |i| (i, j))).map(|(i, j)| {
        let (x, y) = g.cell_center(i, j);
        (field.get(i, j) - reference(x, y)).abs()
    });
    compensated_sum(terms) * g.cell_volume()
}

/// Observed orders `log(E_{k-1} / E_k) / log(h_{k-1} / h_k)` for successive
/// `(h, E)` pairs. Entries are `None` when an error is not positive.
pub fn convergence_order(errors: &[(f64, f64)]) -> Vec<Option<f64>> {
    errors
        .windows(2)
        .map(|w| {
            let ((h0, e0), (h1, e1)) = (w[0], w[1]);
            (e0 > 0.0 && e1 > 0.0 && h0 > 0.0 && h1 > 0.0 && h0 != h1).then(|| (e0 / e1).ln() / (h0 / h1).ln())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substrate {
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AngleError {
    #[error("no phi = 0 interface above the substrate (found {0} contour points)")]
    NoInterface(usize),
    #[error("circle fit is degenerate: {0}")]
    FitDegenerate(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngleFit {
    /// Interior angle through the `phi > 0` phase, radians.
    pub angle: f64,
    pub center: (f64, f64),
    pub radius: f64,
    pub points: usize,
}

/// Zero crossings of `phi` on the edges joining neighbouring cell centres.
pub fn zero_contour(field: &PhaseField) -> Vec<(f64, f64)> {
    let g = field.grid;
    let mut pts = Vec::new();
    let mut push = |(xa, ya): (f64, f64), (xb, yb): (f64, f64), a: f64, b: f64| {
        if (a > 0.0) != (b > 0.0) && a != b {
            let s = a / (a - b);
            pts.push((xa + s * (xb - xa), ya + s * (yb - ya)));
        }
    };
    for j in 0..g.ny {
        for i in 0..g.nx {
            let a = field.get(i, j);
            if i + 1 < g.nx {
                push(g.cell_center(i, j), g.cell_center(i + 1, j), a, field.get(i + 1, j));
            }
            if j + 1 < g.ny {
                push(g.cell_center(i, j), g.cell_center(i, j + 1), a, field.get(i, j + 1));
            }
        }
    }
    pts
}

/// Fits a circle to the `phi = 0` contour points higher than `min_height`
/// above the substrate and returns the contact angle of the `phi > 0` phase
/// where the circle meets the substrate.
pub fn fit_contact_angle(field: &PhaseField, substrate: Substrate, min_height: f64) -> Result<AngleFit, AngleError> {
    let Substrate::Bottom = substrate;
    let g = field.grid;
    let y0 = g.origin[1];
    let pts: Vec<(f64, f64)> = zero_contour(field).into_iter().filter(|p| p.1 > y0 + min_height).collect();
    if pts.len() < 3 {
        return Err(AngleError::NoInterface(pts.len()));
    }
    // Kasa fit of x² + y² + D x + E y + F = 0 in coordinates centred on the
    // point cloud, for conditioning.
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for &(x, y) in &pts {
        let (x, y) = (x - mx, y - my);
        let row = Vector3::new(x, y, 1.0);
        ata += row * row.transpose();
        atb += row * (-(x * x + y * y));
    }
    let sol = ata
        .lu()
        .solve(&atb)
        .ok_or_else(|| AngleError::FitDegenerate("singular normal equations (collinear points)".into()))?;
    let (a, b) = (-sol[0] / 2.0, -sol[1] / 2.0);
    let r2 = a * a + b * b - sol[2];
    if !(r2 > 0.0) || !r2.is_finite() {
        return Err(AngleError::FitDegenerate(format!("non-positive squared radius {r2}")));
    }
    let radius = r2.sqrt();
    let extent = (g.dx * g.nx as f64).hypot(g.dy * g.ny as f64);
    if radius > 1e3 * extent {
        return Err(AngleError::FitDegenerate(format!("radius {radius} indicates a flat interface")));
    }
    let center = (a + mx, b + my);
    let depth = center.1 - y0;
    if radius <= depth.abs() {
        return Err(AngleError::FitDegenerate(format!(
            "circle of radius {radius} centred {depth} from the substrate does not cross it"
        )));
    }
    // Angle measured through the inside of the circle.
    let inside = (-depth / radius).acos();
    let positive_inside = mean_inside(field, center, radius) > 0.0;
    let angle = if positive_inside { inside } else { PI - inside };
    Ok(AngleFit { angle, center, radius, points: pts.len() })
}

/// Contact angle only; see [`fit_contact_angle`].
pub fn measure_contact_angle(field: &PhaseField, substrate: Substrate, min_height: f64) -> Result<f64, AngleError> {
    fit_contact_angle(field, substrate, min_height).map(|f| f.angle)
}

fn mean_inside(field: &PhaseField, c: (f64, f64), r: f64) -> f64 {
    let g = field.grid;
    let (mut s, mut k) = (0.0, 0usize);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let (x, y) = g.cell_center(i, j);
            if (x - c.0).powi(2) + (y - c.1).powi(2) < r * r {
                s += field.get(i, j);
                k += 1;
            }
        }
    }
    if k == 0 {
        0.0
    } else {
        s / k as f64
    }
}
