//! Compressed-row complex operators tagged with the Hilbert space they act on.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::dense::{DMat, DVec, ZERO};
use crate::error::{Error, Result};

/// Which factor of `H ⊗ K_ε` an operator acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceTag {
    Particle,
    Field,
    Joint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<C64>,
    tag: SpaceTag,
}

impl SparseOp {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, C64)>,
        tag: SpaceTag,
    ) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut data: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < rows && c < cols, "triplet ({r},{c}) out of bounds");
            if last == Some((r, c)) {
                *data.last_mut().unwrap() += v;
            } else {
                indices.push(c);
                data.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        Self { rows, cols, indptr, indices, data, tag }
    }

    pub fn zeros(rows: usize, cols: usize, tag: SpaceTag) -> Self {
        Self { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), data: Vec::new(), tag }
    }

    pub fn identity(n: usize, tag: SpaceTag) -> Self {
        Self::diagonal(&vec![C64::new(1.0, 0.0); n], tag)
    }

    pub fn diagonal(d: &[C64], tag: SpaceTag) -> Self {
        let n = d.len();
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            data: d.to_vec(),
            tag,
        }
    }

    pub fn from_dense(a: &DMat, tag: SpaceTag) -> Self {
        let mut t = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != ZERO {
                    t.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), t, tag)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn tag(&self) -> SpaceTag {
        self.tag
    }

    pub fn with_tag(mut self, tag: SpaceTag) -> Self {
        self.tag = tag;
        self
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    /// Iterates `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            (self.indptr[r]..self.indptr[r + 1]).map(move |k| (r, self.indices[k], self.data[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        match self.indices[lo..hi].binary_search(&c) {
            Ok(k) => self.data[lo + k],
            Err(_) => ZERO,
        }
    }

    /// `y = A x`.
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            *yr = acc;
        }
    }

    pub fn apply(&self, x: &DVec) -> Result<DVec> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
                context: "operator application",
            });
        }
        let mut y = DVec::zeros(self.rows);
        self.matvec_into(x.as_slice(), y.as_mut_slice());
        Ok(y)
    }

    pub fn adjoint(&self) -> Self {
        let t = self.iter().map(|(r, c, v)| (c, r, v.conj())).collect();
        Self::from_triplets(self.cols, self.rows, t, self.tag)
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let t = self.iter().chain(other.iter()).collect();
        Ok(Self::from_triplets(self.rows, self.cols, t, self.tag))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Sparse product `self * other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
                context: "sparse product",
            });
        }
        let mut t = Vec::new();
        for r in 0..self.rows {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let mid = self.indices[k];
                let a = self.data[k];
                for kk in other.indptr[mid]..other.indptr[mid + 1] {
                    t.push((r, other.indices[kk], a * other.data[kk]));
                }
            }
        }
        Ok(Self::from_triplets(self.rows, other.cols, t, self.tag))
    }

    /// `self ⊗ I_n`.
    pub fn kron_identity(&self, n: usize, tag: SpaceTag) -> Self {
        let t = self
            .iter()
            .flat_map(|(r, c, v)| (0..n).map(move |f| (r * n + f, c * n + f, v)))
            .collect();
        Self::from_triplets(self.rows * n, self.cols * n, t, tag)
    }

    /// `I_n ⊗ self`.
    pub fn identity_kron(&self, n: usize, tag: SpaceTag) -> Self {
        let (rr, cc) = (self.rows, self.cols);
        let t = (0..n)
            .flat_map(|p| self.iter().map(move |(r, c, v)| (p * rr + r, p * cc + c, v)))
            .collect();
        Self::from_triplets(rr * n, cc * n, t, tag)
    }

    /// Block-diagonal assembly `⊕_p blocks[p]`.
    pub fn block_diagonal(blocks: &[SparseOp], tag: SpaceTag) -> Self {
        let mut t = Vec::new();
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            t.extend(b.iter().map(|(r, c, v)| (r0 + r, c0 + c, v)));
            r0 += b.rows;
            c0 += b.cols;
        }
        Self::from_triplets(r0, c0, t, tag)
    }

    pub fn to_dense(&self) -> DMat {
        let mut m = DMat::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter() {
            m[(r, c)] += v;
        }
        m
    }

    /// Largest entry of `|A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if self.rows != self.cols {
            return f64::INFINITY;
        }
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .chain(self.adjoint().iter().map(|(r, c, v)| (v - self.get(r, c)).norm()))
            .fold(0.0, f64::max)
    }

    pub fn is_diagonal(&self) -> bool {
        self.iter().all(|(r, c, _)| r == c)
    }

    pub fn diagonal_entries(&self) -> Vec<C64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    /// Frobenius-norm bound on the spectral radius, used for Krylov step sizing.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: other.rows * other.cols,
                context: "sparse sum",
            });
        }
        Ok(())
    }
}
