//! Damped Newton iteration over banded systems, plus an independent dense
//! root finder used to certify the production path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Pivots smaller than this abort the factorization.
pub const SINGULAR_PIVOT: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no convergence after {iterations} iterations (best residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("singular Jacobian at row {row}")]
    SingularJacobian { row: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverControls {
    /// Max-norm residual tolerance.
    pub tol: f64,
    /// Outer iterations (active-set refreshes in the line solver).
    pub max_outer: usize,
    /// Newton iterations per outer iteration.
    pub max_inner: usize,
    /// Smallest accepted step fraction in the backtracking line search.
    pub damping_min: f64,
    /// Logarithmic iterates are kept in `[-1 + margin, 1 - margin]`.
    pub clamp_margin: f64,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls { tol: 1e-10, max_outer: 200, max_inner: 50, damping_min: 0.5f64.powi(30), clamp_margin: 1e-13 }
    }
}

impl SolverControls {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_outer < 1 || self.max_inner < 1 {
            return Err("iteration caps must be at least 1".into());
        }
        if !(self.damping_min > 0.0 && self.damping_min <= 1.0) {
            return Err(format!("damping_min must lie in (0, 1], got {}", self.damping_min));
        }
        if !(self.clamp_margin > 0.0 && self.clamp_margin < 1e-6) {
            return Err(format!("clamp_margin must lie in (0, 1e-6), got {}", self.clamp_margin));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
}

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Each row keeps `kl` extra slots to the right so partial pivoting can
/// fill in without reallocating.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.slot(i, j)]
        } else {
            0.0
        }
    }

    /// Accumulates into `(i, j)`; panics outside the declared band.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band ({}, {})", self.kl, self.ku);
        let s = self.slot(i, j);
        self.data[s] = v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + 1).min(self.n);
                (lo..hi).map(|j| self.data[self.slot(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// Solves `A x = rhs` in place by Gaussian elimination with partial
    /// pivoting. The matrix is overwritten by its factors.
    pub fn solve_in_place(&mut self, rhs: &mut [f64]) -> Result<(), SolveError> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let reach = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.slot(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.slot(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best >= SINGULAR_PIVOT) {
                return Err(SolveError::SingularJacobian { row: k });
            }
            let last_col = (k + reach).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.slot(k, j);
                    let b = self.slot(p, j);
                    self.data.swap(a, b);
                }
                rhs.swap(k, p);
            }
            let pivot = self.data[self.slot(k, k)];
            for i in k + 1..=last_row {
                let s = self.slot(i, k);
                let l = self.data[s] / pivot;
                if l == 0.0 {
                    continue;
                }
                self.data[s] = 0.0;
                for j in k + 1..=last_col {
                    let akj = self.data[self.slot(k, j)];
                    let sij = self.slot(i, j);
                    self.data[sij] -= l * akj;
                }
                rhs[i] -= l * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + reach).min(n - 1);
            let mut s = rhs[k];
            for (j, r) in rhs.iter().enumerate().take(last_col + 1).skip(k + 1) {
                s -= self.data[self.slot(k, j)] * r;
            }
            rhs[k] = s / self.data[self.slot(k, k)];
        }
        Ok(())
    }
}

/// A square nonlinear system with a banded Jacobian.
pub trait BandedSystem {
    fn dim(&self) -> usize;

    /// `(sub, super)` diagonals of the Jacobian.
    fn bandwidth(&self) -> (usize, usize);

    fn residual(&self, x: &[f64], out: &mut [f64]);

    /// Overwrites `jac` (already zeroed) with the Jacobian at `x`.
    fn jacobian(&self, x: &[f64], jac: &mut BandMatrix);

    /// Maps a trial iterate back into the admissible set.
    fn project(&self, _x: &mut [f64]) {}

    /// Largest damping factor in `(0, 1]` the line search may start from at
    /// `x` along `step`.
    fn max_step(&self, _x: &[f64], _step: &[f64]) -> f64 {
        1.0
    }
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    let mut m = 0.0f64;
    for x in v {
        if x.is_nan() {
            return f64::NAN;
        }
        m = m.max(x.abs());
    }
    m
}

/// Damped Newton on `sys` starting at `x0`, at most `max_iters` steps.
///
/// Returns the best iterate with `converged = false` when the cap is hit or
/// the line search stalls; only a singular Jacobian is an error.
pub fn newton_iterate<S: BandedSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    max_iters: usize,
    controls: &SolverControls,
) -> Result<SolveOutcome, SolveError> {
    let n = sys.dim();
    let (kl, ku) = sys.bandwidth();
    let mut x = x0.to_vec();
    sys.project(&mut x);
    let mut r = vec![0.0; n];
    sys.residual(&x, &mut r);
    let mut norm = max_norm(&r);
    let mut jac = BandMatrix::zeros(n, kl, ku);
    let mut step = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; n];

    for it in 0..max_iters {
        if norm <= controls.tol {
            return Ok(SolveOutcome { solution: x, iterations: it, residual_norm: norm, converged: true });
        }
        jac.clear();
        sys.jacobian(&x, &mut jac);
        for (s, ri) in step.iter_mut().zip(&r) {
            *s = -ri;
        }
        jac.solve_in_place(&mut step)?;

        let mut lambda = sys.max_step(&x, &step);
        loop {
            for k in 0..n {
                trial[k] = x[k] + lambda * step[k];
            }
            sys.project(&mut trial);
            sys.residual(&trial, &mut r_trial);
            let tn = max_norm(&r_trial);
            if tn < norm {
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                norm = tn;
                break;
            }
            lambda *= 0.5;
            if lambda < controls.damping_min {
                return Ok(SolveOutcome { solution: x, iterations: it + 1, residual_norm: norm, converged: false });
            }
        }
    }
    let converged = norm <= controls.tol;
    Ok(SolveOutcome { solution: x, iterations: max_iters, residual_norm: norm, converged })
}

/// Damped Newton with a typed failure when the tolerance is not reached
/// within `controls.max_inner * controls.max_outer` steps.
pub fn solve_banded_newton<S: BandedSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    controls: &SolverControls,
) -> Result<SolveOutcome, SolveError> {
    let out = newton_iterate(sys, x0, controls.max_outer * controls.max_inner, controls)?;
    if out.converged {
        Ok(out)
    } else {
        Err(SolveError::NonConvergence { iterations: out.iterations, residual: out.residual_norm })
    }
}

/// Independent root finder: Newton with a dense central-difference
/// Jacobian, an LU solve and step halving on the max-norm. It knows nothing
/// about band structure or piecewise branches of the residual.
pub fn oracle_root(residual: impl Fn(&[f64]) -> Vec<f64>, x0: &[f64], tol: f64) -> Result<Vec<f64>, SolveError> {
    const MAX_ITERS: usize = 200;
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = residual(&x);
    let mut norm = max_norm(&r);
    for it in 0..MAX_ITERS {
        if norm <= tol {
            return Ok(x);
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let rp = residual(&xp);
            let rm = residual(&xm);
            for i in 0..n {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_iterator(n, r.iter().map(|v| -v));
        let step = jac.lu().solve(&rhs).ok_or(SolveError::SingularJacobian { row: it })?;
        let mut lambda = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a + lambda * s).collect();
            let rt = residual(&trial);
            let tn = max_norm(&rt);
            if tn < norm {
                x = trial;
                r = rt;
                norm = tn;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Err(SolveError::NonConvergence { iterations: it, residual: norm });
            }
        }
    }
    if norm <= tol {
        Ok(x)
    } else {
        Err(SolveError::NonConvergence { iterations: MAX_ITERS, residual: norm })
    }
}
