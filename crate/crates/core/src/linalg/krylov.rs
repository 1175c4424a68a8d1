//! Lanczos approximation of `exp(-iτH) v` for hermitian `H`.
//!
//! The Krylov basis is built once per step; the step length is then shrunk
//! (by halving) until the a-posteriori estimate `β_m |[e^{-iτT}]_{m,1}|` is
//! below tolerance. Full re-orthogonalization keeps the propagated norm at
//! round-off level, which the unitarity checks rely on.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use super::dense::{DMat, DVec, ZERO};
use super::sparse::SparseOp;
use crate::error::{Error, Result};

/// Anything that can act on a complex vector.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[C64], y: &mut [C64]);
}

impl LinearOperator for SparseOp {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        self.matvec_into(x, y)
    }
}

impl LinearOperator for DMat {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply_into(&self, x: &[C64], y: &mut [C64]) {
        let n = self.nrows();
        for (i, yi) in y.iter_mut().enumerate().take(n) {
            let mut acc = ZERO;
            for (j, xj) in x.iter().enumerate() {
                acc += self[(i, j)] * xj;
            }
            *yi = acc;
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    pub krylov_dim: usize,
    /// Absolute error allowed per accepted step, relative to `|v|`.
    pub tolerance: f64,
    /// Smallest step the halving may reach before giving up.
    pub min_step: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { krylov_dim: 30, tolerance: 1e-12, min_step: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub vector: DVec,
    pub steps: usize,
    pub max_error_estimate: f64,
}

struct LanczosBasis {
    q: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `β_m`, the norm of the residual direction; zero on an invariant subspace.
    residual: f64,
}

fn dotc(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).fold(ZERO, |acc, (x, y)| acc + x.conj() * y)
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn lanczos(op: &dyn LinearOperator, v: &[C64], m: usize) -> LanczosBasis {
    let n = v.len();
    let m = m.min(n).max(1);
    let v_norm = norm(v);
    let mut q: Vec<Vec<C64>> = vec![v.iter().map(|x| x / v_norm).collect()];
    let mut alpha = Vec::with_capacity(m);
    let mut beta: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![ZERO; n];
    let breakdown_tol = 1e-13;
    let mut residual = 0.0;
    for j in 0..m {
        op.apply_into(&q[j], &mut w);
        let a = dotc(&q[j], &w).re;
        alpha.push(a);
        for (wi, qi) in w.iter_mut().zip(&q[j]) {
            *wi -= qi * a;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, qi) in w.iter_mut().zip(&q[j - 1]) {
                *wi -= qi * b;
            }
        }
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for qk in &q {
                let h = dotc(qk, &w);
                for (wi, qi) in w.iter_mut().zip(qk) {
                    *wi -= qi * h;
                }
            }
        }
        let b = norm(&w);
        if b < breakdown_tol || j + 1 == m {
            residual = if b < breakdown_tol { 0.0 } else { b };
            break;
        }
        beta.push(b);
        q.push(w.iter().map(|x| x / b).collect());
    }
    LanczosBasis { q, alpha, beta, residual }
}

impl LanczosBasis {
    /// `e^{-iτT} e_1` and the error estimate for that step.
    fn small_exponential(&self, eig: &SymmetricEigen<f64, nalgebra::Dyn>, tau: f64) -> (Vec<C64>, f64) {
        let k = self.alpha.len();
        let mut y = vec![ZERO; k];
        for (l, &lam) in eig.eigenvalues.iter().enumerate() {
            let coef = C64::from_polar(1.0, -tau * lam) * eig.eigenvectors[(0, l)];
            for (i, yi) in y.iter_mut().enumerate() {
                *yi += coef * eig.eigenvectors[(i, l)];
            }
        }
        let err = self.residual * y[k - 1].norm();
        (y, err)
    }

    fn tridiagonal_eigen(&self) -> SymmetricEigen<f64, nalgebra::Dyn> {
        let k = self.alpha.len();
        let t = DMatrix::<f64>::from_fn(k, k, |i, j| {
            if i == j {
                self.alpha[i]
            } else if i + 1 == j {
                self.beta[i]
            } else if j + 1 == i {
                self.beta[j]
            } else {
                0.0
            }
        });
        SymmetricEigen::new(t)
    }
}

/// Computes `exp(-iτH) v` with adaptive sub-stepping, starting from `initial_step`.
pub fn expm_action(
    op: &dyn LinearOperator,
    v: &DVec,
    tau: f64,
    initial_step: f64,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome> {
    if v.len() != op.dim() {
        return Err(Error::DimensionMismatch {
            expected: op.dim(),
            got: v.len(),
            context: "Krylov exponential",
        });
    }
    let mut x: Vec<C64> = v.as_slice().to_vec();
    let x_norm0 = norm(&x);
    if tau == 0.0 || x_norm0 == 0.0 {
        return Ok(KrylovOutcome { vector: v.clone(), steps: 0, max_error_estimate: 0.0 });
    }
    let direction = tau.signum();
    let mut remaining = tau.abs();
    let mut step = initial_step.abs().min(remaining).max(opts.min_step);
    let max_step = initial_step.abs().max(opts.min_step);
    let mut steps = 0;
    let mut max_err: f64 = 0.0;
    while remaining > 0.0 {
        let basis = lanczos(op, &x, opts.krylov_dim);
        let eig = basis.tridiagonal_eigen();
        let x_norm = norm(&x);
        let mut h = step.min(remaining);
        let mut halved = false;
        let (y, err) = loop {
            let (y, err) = basis.small_exponential(&eig, direction * h);
            if err * x_norm <= opts.tolerance * x_norm0 {
                break (y, err);
            }
            h *= 0.5;
            halved = true;
            if h < opts.min_step {
                return Err(Error::KrylovBreakdown { dt_min: opts.min_step, estimate: err });
            }
        };
        let mut next = vec![ZERO; x.len()];
        for (qj, yj) in basis.q.iter().zip(&y) {
            let s = yj * x_norm;
            for (ni, qi) in next.iter_mut().zip(qj) {
                *ni += qi * s;
            }
        }
        x = next;
        max_err = max_err.max(err * x_norm);
        steps += 1;
        // guard against the last step leaving a denormal sliver
        remaining = if (remaining - h) <= 1e-14 * tau.abs() { 0.0 } else { remaining - h };
        step = if halved { h } else { (h * 2.0).min(max_step) };
    }
    Ok(KrylovOutcome { vector: DVec::from_vec(x), steps, max_error_estimate: max_err })
}
