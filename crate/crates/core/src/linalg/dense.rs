//! Dense complex helpers used on the particle factor and by the small-dimension
//! oracles.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

pub type DMat = DMatrix<C64>;
pub type DVec = DVector<C64>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Frobenius norm of `A - A†`.
pub fn hermiticity_defect(a: &DMat) -> f64 {
    (a - a.adjoint()).norm()
}

/// Frobenius norm of `U†U - I`.
pub fn unitarity_defect(u: &DMat) -> f64 {
    let n = u.ncols();
    (u.adjoint() * u - DMat::identity(n, n)).norm()
}

pub fn trace(a: &DMat) -> C64 {
    a.diagonal().iter().sum()
}

pub fn commutator(a: &DMat, b: &DMat) -> DMat {
    a * b - b * a
}

/// Hermitian part `(A + A†)/2`, used to strip round-off before eigensolves.
pub fn hermitian_part(a: &DMat) -> DMat {
    (a + a.adjoint()) * c(0.5, 0.0)
}

/// Eigen-decomposition of a hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &DMat) -> (Vec<f64>, DMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), DMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMat::from_fn(n, n, |r, col| eig.eigenvectors[(r, order[col])]);
    (values, vectors)
}

pub fn min_eigenvalue(a: &DMat) -> f64 {
    eigh(a).0.first().copied().unwrap_or(0.0)
}

/// `exp(factor * H)` for hermitian `H`, through its spectral decomposition.
pub fn expm_hermitian(h: &DMat, factor: C64) -> DMat {
    let (values, vectors) = eigh(h);
    spectral_function(&values, &vectors, |x| (factor * x).exp())
}

/// `V diag(f(λ)) V†`.
pub fn spectral_function(values: &[f64], vectors: &DMat, f: impl Fn(f64) -> C64) -> DMat {
    let n = values.len();
    let mut scaled = vectors.clone();
    for (j, &v) in values.iter().enumerate() {
        let fv = f(v);
        for i in 0..n {
            scaled[(i, j)] *= fv;
        }
    }
    scaled * vectors.adjoint()
}

/// Unitary propagator `exp(-i t H)`.
pub fn unitary_propagator(h: &DMat, t: f64) -> DMat {
    expm_hermitian(h, c(0.0, -t))
}

/// Sum of singular values.
pub fn trace_norm(a: &DMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone().svd(false, false).singular_values.iter().sum()
}

/// Largest singular value.
pub fn operator_norm(a: &DMat) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |m, &s| m.max(s))
}

/// `|ψ⟩⟨ψ|`.
pub fn projector(psi: &DVec) -> DMat {
    psi * psi.adjoint()
}

/// Projector onto the span of the given orthonormal columns.
pub fn span_projector(vectors: &DMat, columns: std::ops::Range<usize>) -> DMat {
    let n = vectors.nrows();
    let mut p = DMat::zeros(n, n);
    for j in columns {
        let v = vectors.column(j);
        p += v * v.adjoint();
    }
    p
}

/// `tr(A B)` without forming the product.
pub fn trace_product(a: &DMat, b: &DMat) -> C64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn diag_matrix(d: &[C64]) -> DMat {
    DMat::from_diagonal(&DVec::from_column_slice(d))
}

pub fn real_diag_matrix(d: &[f64]) -> DMat {
    DMat::from_fn(d.len(), d.len(), |i, j| if i == j { c(d[i], 0.0) } else { ZERO })
}
