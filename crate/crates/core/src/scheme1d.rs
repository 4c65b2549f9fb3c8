//! Semi-implicit upwind finite-volume update along one grid line.
//!
//! The same line problem serves the pure 1D scheme and both sweep
//! directions of the 2D splitting: in 2D the neighbouring lines enter
//! through a frozen [`Transverse`] context.
//!
//! For a candidate `c` the residual of cell `i` is
//!
//! ```text
//! R_i = c_i - old_i + dt/h (F_{i+1/2} - F_{i-1/2})
//! F_{k+1/2} = u⁺ M(c_k, c_{k+1}) + u⁻ M(c_{k+1}, c_k),  u = -(xi_{k+1} - xi_k) / h
//! xi_i = H_c'(c_i) - H_e'(old_i) - eps²/2 (Lap_old_i + Lap_new_i) + wall terms
//! ```
//!
//! with zero flux through both ends of the line.

use crate::grid::{GridError, PhaseField};
use crate::model::{MobilityKind, ModelError, ModelParams, PotentialKind, WallEnergy};
use crate::nlsolve::{self, max_norm, BandMatrix, BandedSystem, SolveError, SolverControls};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("invalid line problem: {0}")]
    Problem(String),
}

/// Frozen neighbour lines seen by a 2D sweep.
#[derive(Debug, Clone, Copy)]
pub struct Transverse<'a> {
    /// Line on the low side (`None` at the domain boundary).
    pub low: Option<&'a [f64]>,
    /// Line on the high side (`None` at the domain boundary).
    pub high: Option<&'a [f64]>,
    /// Cell size across lines.
    pub h: f64,
    /// Wall energy applies through the low / high transverse boundary.
    pub walls: [bool; 2],
}

#[derive(Debug, Clone, Copy)]
pub struct LineStepProblem<'a> {
    /// Values at the previous (sub)step.
    pub old: &'a [f64],
    pub model: &'a ModelParams,
    pub dt: f64,
    /// Cell size along the line.
    pub h: f64,
    /// Wall energy at the first / last cell of the line.
    pub wall_ends: [bool; 2],
    pub transverse: Option<Transverse<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineStepSolution {
    pub phi: Vec<f64>,
    pub xi: Vec<f64>,
    /// `N + 1` face fluxes; the two end entries are exactly zero.
    pub fluxes: Vec<f64>,
    /// `N - 1` interior face velocities.
    pub velocities: Vec<f64>,
    pub newton_iters: usize,
    pub outer_iters: usize,
    pub residual_norm: f64,
}

impl LineStepSolution {
    /// `dt * h * sum_k min(M(c_k, c_k+1), M(c_k+1, c_k)) u_k²`, the lower
    /// bound on the energy released by this update (per unit transverse
    /// length).
    pub fn dissipation(&self, mobility: MobilityKind, dt: f64, h: f64) -> f64 {
        let mut s = 0.0;
        for (k, u) in self.velocities.iter().enumerate() {
            let (a, b) = (self.phi[k], self.phi[k + 1]);
            s += mobility.face(a, b).min(mobility.face(b, a)) * u * u;
        }
        dt * h * s
    }
}

/// Upwind branch of a face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    Pos,
    Neg,
    Zero,
}

/// Frozen branch choices: face directions and which `(1 ± c)⁺` factors are
/// positive.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Pattern {
    dir: Vec<Dir>,
    plus: Vec<bool>,
    minus: Vec<bool>,
}

/// The candidate-independent parts of the line residual.
#[derive(Clone)]
struct LineOperator {
    n: usize,
    old: Vec<f64>,
    potential: PotentialKind,
    mobility: MobilityKind,
    wall: Option<WallEnergy>,
    dt_over_h: f64,
    inv_h: f64,
    /// `eps² / (2 h²)`
    nb_coef: f64,
    /// Coefficient of `c_i` in `xi_i` from the implicit Laplacian.
    diag_coef: Vec<f64>,
    /// Everything in `xi_i` that does not depend on the candidate.
    xi_const: Vec<f64>,
    /// Sum of `1 / h_wall` over the walls touching cell `i`.
    wall_weight: Vec<f64>,
    /// The logarithmic potential is singular at `|c| = 1`.
    open_domain: bool,
    /// Iterates are projected onto `[-1 + margin, 1 - margin]`.
    clamp: Option<f64>,
}

impl LineOperator {
    fn new(p: &LineStepProblem<'_>, clamp_margin: f64) -> Result<LineOperator, SchemeError> {
        let n = p.old.len();
        if n < 2 {
            return Err(SchemeError::Problem(format!("line needs at least 2 cells, got {n}")));
        }
        if !(p.dt > 0.0 && p.dt.is_finite()) {
            return Err(SchemeError::Problem(format!("time step must be positive, got {}", p.dt)));
        }
        if !(p.h > 0.0 && p.h.is_finite()) {
            return Err(SchemeError::Problem(format!("cell size must be positive, got {}", p.h)));
        }
        p.model.validate()?;
        if let Some(t) = &p.transverse {
            for line in [t.low, t.high].into_iter().flatten() {
                if line.len() != n {
                    return Err(SchemeError::Problem(format!(
                        "transverse line has {} cells, expected {n}",
                        line.len()
                    )));
                }
            }
            if !(t.h > 0.0 && t.h.is_finite()) {
                return Err(SchemeError::Problem(format!("transverse cell size must be positive, got {}", t.h)));
            }
        }
        if p.old.iter().any(|v| !v.is_finite()) {
            return Err(SchemeError::Problem("non-finite value in old line".into()));
        }

        let model = p.model;
        let eps2_half = 0.5 * model.epsilon * model.epsilon;
        let inv_h2 = 1.0 / (p.h * p.h);
        let walls = model.wetting.enabled;
        let wall = model.wall_energy();

        let mut diag_coef = vec![0.0; n];
        let mut xi_const = vec![0.0; n];
        let mut wall_weight = vec![0.0; n];
        for i in 0..n {
            let o = p.old[i];
            let mut along_nb = 0usize;
            let mut lap_old = 0.0;
            if i > 0 {
                along_nb += 1;
                lap_old += (p.old[i - 1] - o) * inv_h2;
            }
            if i + 1 < n {
                along_nb += 1;
                lap_old += (p.old[i + 1] - o) * inv_h2;
            }
            let mut diag = along_nb as f64 * inv_h2;
            // Old neighbours enter both Laplacians; the new Laplacian uses
            // them around the new centre value.
            let mut trans_nb_sum = 0.0;
            if let Some(t) = &p.transverse {
                let inv_t2 = 1.0 / (t.h * t.h);
                for line in [t.low, t.high].into_iter().flatten() {
                    lap_old += (line[i] - o) * inv_t2;
                    trans_nb_sum += line[i] * inv_t2;
                    diag += inv_t2;
                }
            }
            let mut ww = 0.0;
            if walls {
                if (i == 0 && p.wall_ends[0]) || (i + 1 == n && p.wall_ends[1]) {
                    ww += 1.0 / p.h;
                }
                if let Some(t) = &p.transverse {
                    ww += (t.walls[0] as u8 + t.walls[1] as u8) as f64 / t.h;
                }
            }
            diag_coef[i] = eps2_half * diag;
            wall_weight[i] = ww;
            let mut c = -model.potential.dhe(o) - eps2_half * lap_old - eps2_half * trans_nb_sum;
            if let (Some(w), true) = (&wall, ww > 0.0) {
                c -= ww * w.dfew(o);
            }
            xi_const[i] = c;
        }

        let open_domain = matches!(model.potential, PotentialKind::Logarithmic { theta, .. } if theta > 0.0);
        // Degenerate mobility keeps the discrete solution in [-1, 1] when the
        // old line is there; Newton iterates outside that box see zero
        // mobility and lose all coupling, so they are projected back.
        let clamp = if open_domain {
            Some(clamp_margin)
        } else if model.mobility.is_degenerate() && p.old.iter().all(|v| v.abs() <= 1.0) {
            Some(0.0)
        } else {
            None
        };

        Ok(LineOperator {
            n,
            old: p.old.to_vec(),
            potential: model.potential,
            mobility: model.mobility,
            wall,
            dt_over_h: p.dt / p.h,
            inv_h: 1.0 / p.h,
            nb_coef: eps2_half * inv_h2,
            diag_coef,
            xi_const,
            wall_weight,
            open_domain,
            clamp,
        })
    }

    fn xi(&self, c: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let ci = c[i];
            let mut v = self.potential.dhc(ci) + self.diag_coef[i] * ci + self.xi_const[i];
            if i > 0 {
                v -= self.nb_coef * c[i - 1];
            }
            if i + 1 < n {
                v -= self.nb_coef * c[i + 1];
            }
            if self.wall_weight[i] > 0.0 {
                if let Some(w) = &self.wall {
                    v += self.wall_weight[i] * w.dfcw(ci);
                }
            }
            out[i] = v;
        }
    }

    fn dxi_diag(&self, c: &[f64], i: usize) -> f64 {
        let mut d = self.potential.d2hc(c[i]) + self.diag_coef[i];
        if self.wall_weight[i] > 0.0 {
            if let Some(w) = &self.wall {
                d += self.wall_weight[i] * w.d2fcw(c[i]);
            }
        }
        d
    }

    fn velocities(&self, xi: &[f64]) -> Vec<f64> {
        (0..self.n - 1).map(|k| -(xi[k + 1] - xi[k]) * self.inv_h).collect()
    }

    fn pattern(&self, c: &[f64]) -> Pattern {
        let mut xi = vec![0.0; self.n];
        self.xi(c, &mut xi);
        let dir = self
            .velocities(&xi)
            .into_iter()
            .map(|u| {
                if u > 0.0 {
                    Dir::Pos
                } else if u < 0.0 {
                    Dir::Neg
                } else {
                    Dir::Zero
                }
            })
            .collect();
        Pattern {
            dir,
            plus: c.iter().map(|v| 1.0 + v >= 0.0).collect(),
            minus: c.iter().map(|v| 1.0 - v >= 0.0).collect(),
        }
    }

    /// `(1 + c_i)` and `(1 - c_i)` factors under the pattern, with their slopes.
    #[inline]
    fn factors(&self, pat: &Pattern, c: &[f64], i: usize) -> (f64, f64, f64, f64) {
        let (a, da) = if pat.plus[i] { (1.0 + c[i], 1.0) } else { (0.0, 0.0) };
        let (b, db) = if pat.minus[i] { (1.0 - c[i], -1.0) } else { (0.0, 0.0) };
        (a, da, b, db)
    }

    /// Face mobility under the pattern and its derivatives with respect to
    /// the low and high cell of the face.
    fn face_mobility(&self, pat: &Pattern, c: &[f64], k: usize) -> (f64, f64, f64) {
        let m0 = self.mobility.m0();
        if !self.mobility.is_degenerate() {
            return (m0, 0.0, 0.0);
        }
        let (al, dal, bl, dbl) = self.factors(pat, c, k);
        let (ah, dah, bh, dbh) = self.factors(pat, c, k + 1);
        // M1 = M(c_k, c_k+1) = m0 (1 + c_k)(1 - c_k+1), M2 = M(c_k+1, c_k)
        let m1 = (m0 * al * bh, m0 * dal * bh, m0 * al * dbh);
        let m2 = (m0 * ah * bl, m0 * ah * dbl, m0 * dah * bl);
        match pat.dir[k] {
            Dir::Pos => m1,
            Dir::Neg => m2,
            Dir::Zero => (0.5 * (m1.0 + m2.0), 0.5 * (m1.1 + m2.1), 0.5 * (m1.2 + m2.2)),
        }
    }

    /// Fraction-to-the-boundary rule: a step may cover at most
    /// [`BOUNDARY_FRACTION`] of the distance from a cell to ±1. Iterates that
    /// land exactly on ±1 see a vanishing mobility factor and can get stuck
    /// there, even when the root lies just inside. Cells already on the
    /// boundary are left to [`LineOperator::project`].
    fn max_step(&self, c: &[f64], step: &[f64]) -> f64 {
        if self.clamp.is_none() {
            return 1.0;
        }
        let mut lambda = 1.0f64;
        for (&x, &d) in c.iter().zip(step) {
            let room = if d > 0.0 {
                1.0 - x
            } else if d < 0.0 {
                1.0 + x
            } else {
                continue;
            };
            if room > 0.0 {
                lambda = lambda.min(BOUNDARY_FRACTION * room / d.abs());
            }
        }
        lambda
    }

    fn project(&self, c: &mut [f64]) {
        if let Some(m) = self.clamp {
            let lim = 1.0 - m;
            for v in c.iter_mut() {
                *v = v.clamp(-lim, lim);
            }
        }
    }

    /// Residual under `pat`; with the pattern of `c` itself this is the true
    /// residual. Also returns the face fluxes.
    fn residual_with(&self, pat: &Pattern, c: &[f64], out: &mut [f64]) -> Vec<f64> {
        let n = self.n;
        let mut xi = vec![0.0; n];
        self.xi(c, &mut xi);
        let mut flux = vec![0.0; n + 1];
        for k in 0..n - 1 {
            let u = -(xi[k + 1] - xi[k]) * self.inv_h;
            flux[k + 1] = u * self.face_mobility(pat, c, k).0;
        }
        for i in 0..n {
            out[i] = c[i] - self.old[i] + self.dt_over_h * (flux[i + 1] - flux[i]);
        }
        flux
    }

    /// Size of the rounding error in the residual at `c`: a few ulps of the
    /// largest term that enters any component. Stiff lines (small `h`, large
    /// `dt`) cannot be driven below this, whatever the requested tolerance.
    fn roundoff_floor(&self, c: &[f64]) -> f64 {
        let n = self.n;
        // Sum of the magnitudes of the terms that make up each xi_i. Near the
        // ends of the logarithmic domain H_c' is ill-conditioned: one ulp of
        // c moves it by c H_c''(c) ulps.
        let xi_terms: Vec<f64> = (0..n)
            .map(|i| {
                let mut t = self.potential.dhc(c[i]).abs()
                    + (c[i] * self.potential.d2hc(c[i])).abs()
                    + (self.diag_coef[i] * c[i]).abs()
                    + self.xi_const[i].abs();
                if i > 0 {
                    t += (self.nb_coef * c[i - 1]).abs();
                }
                if i + 1 < n {
                    t += (self.nb_coef * c[i + 1]).abs();
                }
                t
            })
            .collect();
        let pat = self.pattern(c);
        let mut face = vec![0.0; n + 1];
        for k in 0..n - 1 {
            face[k + 1] = self.face_mobility(&pat, c, k).0.abs() * (xi_terms[k] + xi_terms[k + 1]) * self.inv_h;
        }
        let largest = (0..n)
            .map(|i| c[i].abs() + self.old[i].abs() + self.dt_over_h * (face[i] + face[i + 1]))
            .fold(0.0, f64::max);
        4.0 * f64::EPSILON * largest
    }

    fn true_residual(&self, c: &[f64], out: &mut [f64]) {
        let pat = self.pattern(c);
        self.residual_with(&pat, c, out);
    }

    fn jacobian_with(&self, pat: &Pattern, c: &[f64], jac: &mut BandMatrix) {
        let n = self.n;
        let mut xi = vec![0.0; n];
        self.xi(c, &mut xi);
        let off = -self.nb_coef;
        for i in 0..n {
            jac.add(i, i, 1.0);
        }
        for k in 0..n - 1 {
            let u = -(xi[k + 1] - xi[k]) * self.inv_h;
            let (mob, dm_lo, dm_hi) = self.face_mobility(pat, c, k);
            // d u_k / d c_m for m = k-1 .. k+2
            let mut du = [0.0f64; 4];
            let base = k as isize - 1;
            let dxi = |i: usize, m: usize| -> f64 {
                if i == m {
                    self.dxi_diag(c, i)
                } else if i.abs_diff(m) == 1 {
                    off
                } else {
                    0.0
                }
            };
            for (slot, d) in du.iter_mut().enumerate() {
                let m = base + slot as isize;
                if m < 0 || m as usize >= n {
                    continue;
                }
                let m = m as usize;
                *d = -(dxi(k + 1, m) - dxi(k, m)) * self.inv_h;
            }
            for (slot, d) in du.iter().enumerate() {
                let m = base + slot as isize;
                if m < 0 || m as usize >= n {
                    continue;
                }
                let m = m as usize;
                let mut df = d * mob;
                if m == k {
                    df += u * dm_lo;
                } else if m == k + 1 {
                    df += u * dm_hi;
                }
                if df == 0.0 {
                    continue;
                }
                // F_k+1/2 enters R_k with + and R_k+1 with -
                jac.add(k, m, self.dt_over_h * df);
                jac.add(k + 1, m, -self.dt_over_h * df);
            }
        }
    }
}

struct FrozenLine<'a> {
    op: &'a LineOperator,
    pattern: Pattern,
}

impl BandedSystem for FrozenLine<'_> {
    fn dim(&self) -> usize {
        self.op.n
    }

    fn bandwidth(&self) -> (usize, usize) {
        (2, 2)
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        self.op.residual_with(&self.pattern, x, out);
    }

    fn jacobian(&self, x: &[f64], jac: &mut BandMatrix) {
        self.op.jacobian_with(&self.pattern, x, jac);
    }

    fn project(&self, x: &mut [f64]) {
        self.op.project(x);
    }

    fn max_step(&self, x: &[f64], step: &[f64]) -> f64 {
        self.op.max_step(x, step)
    }
}

/// The line system with every face mobility frozen at a value: a Picard
/// linearization of the degenerate flux. Only the potential stays nonlinear.
struct LaggedLine<'a> {
    op: &'a LineOperator,
    mobility: Vec<f64>,
}

impl LaggedLine<'_> {
    fn new<'a>(op: &'a LineOperator, c: &[f64]) -> LaggedLine<'a> {
        let pat = op.pattern(c);
        let mobility = (0..op.n - 1).map(|k| op.face_mobility(&pat, c, k).0).collect();
        LaggedLine { op, mobility }
    }
}

impl BandedSystem for LaggedLine<'_> {
    fn dim(&self) -> usize {
        self.op.n
    }

    fn bandwidth(&self) -> (usize, usize) {
        (2, 2)
    }

    fn residual(&self, x: &[f64], out: &mut [f64]) {
        let op = self.op;
        let n = op.n;
        let mut xi = vec![0.0; n];
        op.xi(x, &mut xi);
        let mut flux = vec![0.0; n + 1];
        for k in 0..n - 1 {
            flux[k + 1] = -(xi[k + 1] - xi[k]) * op.inv_h * self.mobility[k];
        }
        for i in 0..n {
            out[i] = x[i] - op.old[i] + op.dt_over_h * (flux[i + 1] - flux[i]);
        }
    }

    fn jacobian(&self, x: &[f64], jac: &mut BandMatrix) {
        let op = self.op;
        let n = op.n;
        for i in 0..n {
            jac.add(i, i, 1.0);
        }
        for k in 0..n - 1 {
            let mob = self.mobility[k];
            if mob == 0.0 {
                continue;
            }
            let lo = k.saturating_sub(1);
            let hi = (k + 2).min(n - 1);
            for m in lo..=hi {
                let d = |i: usize| -> f64 {
                    if i == m {
                        op.dxi_diag(x, i)
                    } else if i.abs_diff(m) == 1 {
                        -op.nb_coef
                    } else {
                        0.0
                    }
                };
                let df = -(d(k + 1) - d(k)) * op.inv_h * mob;
                jac.add(k, m, op.dt_over_h * df);
                jac.add(k + 1, m, -op.dt_over_h * df);
            }
        }
    }

    fn project(&self, x: &mut [f64]) {
        self.op.project(x);
    }

    fn max_step(&self, x: &[f64], step: &[f64]) -> f64 {
        self.op.max_step(x, step)
    }
}

/// The true (unfrozen) line residual at `candidate`.
pub fn residual(problem: &LineStepProblem<'_>, candidate: &[f64]) -> Result<Vec<f64>, SchemeError> {
    let op = LineOperator::new(problem, SolverControls::default().clamp_margin)?;
    check_candidate(&op, candidate)?;
    let mut out = vec![0.0; op.n];
    op.true_residual(candidate, &mut out);
    Ok(out)
}

/// Face fluxes (`N + 1`, ends zero) at `candidate`.
pub fn fluxes(problem: &LineStepProblem<'_>, candidate: &[f64]) -> Result<Vec<f64>, SchemeError> {
    let op = LineOperator::new(problem, SolverControls::default().clamp_margin)?;
    check_candidate(&op, candidate)?;
    let pat = op.pattern(candidate);
    let mut out = vec![0.0; op.n];
    Ok(op.residual_with(&pat, candidate, &mut out))
}

/// Chemical potential at `candidate`.
pub fn chemical_potential(problem: &LineStepProblem<'_>, candidate: &[f64]) -> Result<Vec<f64>, SchemeError> {
    let op = LineOperator::new(problem, SolverControls::default().clamp_margin)?;
    check_candidate(&op, candidate)?;
    let mut xi = vec![0.0; op.n];
    op.xi(candidate, &mut xi);
    Ok(xi)
}

fn check_candidate(op: &LineOperator, c: &[f64]) -> Result<(), SchemeError> {
    if c.len() != op.n {
        return Err(SchemeError::Problem(format!("candidate has {} cells, expected {}", c.len(), op.n)));
    }
    if let Some(v) = c.iter().find(|v| !v.is_finite()) {
        return Err(SchemeError::Problem(format!("non-finite candidate value {v}")));
    }
    if op.open_domain {
        if let Some(v) = c.iter().find(|v| v.abs() >= 1.0) {
            return Err(ModelError::Domain(*v).into());
        }
    }
    Ok(())
}

/// Iteration counts of a line solve.
#[derive(Default)]
struct Effort {
    newton: usize,
    outer: usize,
}

/// Drives the true residual of `op` to zero starting from `x`, which is
/// updated in place; returns the final residual norm.
///
/// The residual is only piecewise smooth: the upwind choice and the
/// `(1 ± c)⁺` factors switch across branch boundaries, and the mobility
/// derivatives can be huge where the chemical potential is rough. Three
/// stages run in turn, each used once the previous one stops making
/// progress:
///
/// 1. Picard iterations that freeze the face mobilities at the current
///    iterate and solve the remaining smooth system by Newton (skipped when
///    `picard` is false);
/// 2. semismooth Newton on the true residual, linearized under the branch
///    pattern of the current iterate, with backtracking;
/// 3. a damped Newton solve with the branch pattern frozen, which proposes
///    the next iterate when the semismooth step stalls.
fn solve_line(
    op: &LineOperator,
    x: &mut Vec<f64>,
    controls: &SolverControls,
    picard: bool,
    effort: &mut Effort,
) -> Result<f64, SolveError> {
    let n = op.n;
    op.project(x);
    let mut r = vec![0.0; n];
    op.true_residual(x, &mut r);
    let mut norm = max_norm(&r);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];
    let budget = controls.max_outer * controls.max_inner;
    let done = |x: &[f64], norm: f64| norm <= controls.tol || norm <= op.roundoff_floor(x);
    let mut outer = 0;
    let fail = |newton: usize, residual: f64| SolveError::NonConvergence { iterations: newton, residual };

    // Picard: keep going while each sweep at least halves the residual.
    while picard && !done(x, norm) && outer < controls.max_outer {
        outer += 1;
        let lagged = LaggedLine::new(op, x);
        let out = nlsolve::newton_iterate(&lagged, x, controls.max_inner, controls)?;
        effort.newton += out.iterations;
        op.true_residual(&out.solution, &mut r_trial);
        let tn = max_norm(&r_trial);
        if !(tn < norm) {
            break;
        }
        *x = out.solution;
        std::mem::swap(&mut r, &mut r_trial);
        let contracted = tn <= 0.5 * norm;
        norm = tn;
        if !contracted {
            break;
        }
    }

    let mut jac = BandMatrix::zeros(n, 2, 2);
    let mut newton = 0;
    while !done(x, norm) {
        if newton >= budget || outer >= controls.max_outer {
            effort.outer += outer;
            return Err(fail(effort.newton, norm));
        }
        let pattern = op.pattern(x);
        jac.clear();
        op.jacobian_with(&pattern, x, &mut jac);
        let mut step: Vec<f64> = r.iter().map(|v| -v).collect();
        newton += 1;
        effort.newton += 1;
        let accepted = jac.solve_in_place(&mut step).is_ok() && {
            let mut lambda = op.max_step(x, &step);
            loop {
                for k in 0..n {
                    trial[k] = x[k] + lambda * step[k];
                }
                op.project(&mut trial);
                op.true_residual(&trial, &mut r_trial);
                if max_norm(&r_trial) < norm {
                    break true;
                }
                lambda *= 0.5;
                if lambda < controls.damping_min {
                    break false;
                }
            }
        };
        if accepted {
            std::mem::swap(x, &mut trial);
            std::mem::swap(&mut r, &mut r_trial);
            norm = max_norm(&r);
            continue;
        }

        outer += 1;
        let frozen = FrozenLine { op, pattern };
        let out = nlsolve::newton_iterate(&frozen, x, controls.max_inner, controls)?;
        newton += out.iterations;
        effort.newton += out.iterations;
        op.true_residual(&out.solution, &mut r_trial);
        let tn = max_norm(&r_trial);
        if out.solution == *x
            || (!done(&out.solution, tn) && !out.converged && op.pattern(&out.solution) == frozen.pattern)
        {
            effort.outer += outer;
            return Err(fail(effort.newton, norm.min(tn)));
        }
        *x = out.solution;
        std::mem::swap(&mut r, &mut r_trial);
        norm = tn;
    }
    effort.outer += outer;
    Ok(norm)
}

/// Share of the distance to ±1 a single Newton step may cover.
const BOUNDARY_FRACTION: f64 = 0.99;

/// Smallest continuation increment before the line solve gives up.
const MIN_CONTINUATION_STEP: f64 = 1.0 / 1024.0;

/// Advances one line by one implicit step.
///
/// The nonlinear system is solved directly from the old line first. With
/// degenerate mobility a second direct attempt drops the Picard stage and
/// the box projection. If both fail, the time step is ramped up from zero:
/// the system with `s · dt` is
/// solved for increasing `s`, each solution seeding the next, until `s = 1`.
/// Only the starting guess changes; the accepted iterate always solves the
/// full-`dt` system, to `controls.tol` or to the rounding error of its own
/// terms when that is larger.
pub fn step_line(problem: &LineStepProblem<'_>, controls: &SolverControls) -> Result<LineStepSolution, SchemeError> {
    controls.validate().map_err(SchemeError::Problem)?;
    let op = LineOperator::new(problem, controls.clamp_margin)?;
    let n = op.n;
    let mut effort = Effort::default();
    let mut x = problem.old.to_vec();
    let mut attempt = solve_line(&op, &mut x, controls, true, &mut effort);
    if attempt.is_err() && op.clamp == Some(0.0) {
        // The box is only a safeguard for degenerate mobility; Newton's path
        // to a root inside it may have to pass outside, and the lagged
        // mobilities of the Picard stage can lead it astray near drained
        // cells. Plain Newton from the old line is tried next, and its root is
        // accepted only if it lies in the box.
        let free = LineOperator { clamp: None, ..op.clone() };
        let mut y = problem.old.to_vec();
        if let Ok(norm) = solve_line(&free, &mut y, controls, false, &mut effort) {
            if y.iter().all(|v| v.abs() <= 1.0) {
                x = y;
                attempt = Ok(norm);
            }
        }
    }
    let norm = match attempt {
        Ok(norm) => norm,
        Err(SolveError::NonConvergence { residual, .. }) => {
            let mut reached = 0.0f64;
            let mut ds = 0.25;
            x = problem.old.to_vec();
            loop {
                let s = (reached + ds).min(1.0);
                let mut scaled = op.clone();
                scaled.dt_over_h = op.dt_over_h * s;
                let mut y = x.clone();
                match solve_line(&scaled, &mut y, controls, true, &mut effort) {
                    Ok(norm) => {
                        x = y;
                        reached = s;
                        if s == 1.0 {
                            break norm;
                        }
                        ds *= 2.0;
                    }
                    Err(SolveError::NonConvergence { residual: r, .. }) => {
                        ds *= 0.5;
                        if ds < MIN_CONTINUATION_STEP {
                            let residual = if reached == 0.0 { residual } else { r };
                            return Err(SolveError::NonConvergence { iterations: effort.newton, residual }.into());
                        }
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Err(e) => return Err(e.into()),
    };
    let (newton_iters, outer) = (effort.newton, effort.outer);
    let mut r = vec![0.0; n];

    let mut xi = vec![0.0; n];
    op.xi(&x, &mut xi);
    let velocities = op.velocities(&xi);
    let pat = op.pattern(&x);
    let fluxes = op.residual_with(&pat, &x, &mut r);
    Ok(LineStepSolution { phi: x, xi, fluxes, velocities, newton_iters, outer_iters: outer, residual_norm: norm })
}

/// One step of the 1D scheme on a whole field. Wall terms act at the two
/// ends according to the left/right entries of the wetting mask.
pub fn step_1d(
    field: &PhaseField,
    model: &ModelParams,
    controls: &SolverControls,
    dt: f64,
) -> Result<(PhaseField, LineStepSolution), SchemeError> {
    if field.grid.ny != 1 {
        return Err(SchemeError::Problem("step_1d needs a single-row grid".into()));
    }
    let walls = model.wetting.active_walls();
    let problem = LineStepProblem {
        old: &field.values,
        model,
        dt,
        h: field.grid.dx,
        wall_ends: [walls.left, walls.right],
        transverse: None,
    };
    let sol = step_line(&problem, controls)?;
    let next = PhaseField { grid: field.grid, values: sol.phi.clone() };
    Ok((next, sol))
}
