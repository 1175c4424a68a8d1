//! Truncated symmetric Fock space over `M` field modes with the ε-scaled
//! canonical commutation relations `[a_ε(f), a_ε†(g)] = ε⟨f, g⟩`.
//!
//! The truncation caps the *total* number of quanta. Operators are exact on
//! states whose total quanta stay at least one below the cap; the leakage
//! diagnostics (`unitarity_defect`, coherent-state mass defect) report how
//! much the cap bites.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    c, dense, expm_action, DMat, DVec, KrylovOptions, SpaceTag, SparseOp, C64, ONE, ZERO,
};
use crate::micro::HybridState;

/// Largest basis the enumerator will build unless told otherwise.
pub const DEFAULT_DIMENSION_CAP: usize = 4_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockSpec {
    pub num_modes: usize,
    pub max_total_quanta: usize,
    pub epsilon: f64,
}

impl FockSpec {
    pub fn new(num_modes: usize, max_total_quanta: usize, epsilon: f64) -> Result<Self> {
        let spec = Self { num_modes, max_total_quanta, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    /// Cap chosen as `ceil(8 C / ε)` for a target bound `C` on `⟨dG_ε(1)⟩`.
    pub fn from_moment_bound(num_modes: usize, moment_bound: f64, epsilon: f64) -> Result<Self> {
        if !(moment_bound > 0.0) || !(epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "moment bound {moment_bound} and epsilon {epsilon} must be positive"
            )));
        }
        Self::new(num_modes, recommended_cap(moment_bound, epsilon), epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_modes == 0 {
            return Err(Error::InvalidParameter("at least one field mode is required".into()));
        }
        if self.max_total_quanta == 0 {
            return Err(Error::InvalidParameter("quanta cap must be >= 1".into()));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    /// Stars-and-bars count `C(N_cap + M, M)`.
    pub fn dimension(&self) -> u128 {
        binomial((self.max_total_quanta + self.num_modes) as u128, self.num_modes as u128)
    }
}

pub fn recommended_cap(moment_bound: f64, epsilon: f64) -> usize {
    // the 1e-9 guard keeps 8*C/ε from rounding up past an exact integer
    ((8.0 * moment_bound / epsilon) - 1e-9).ceil().max(1.0) as usize
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Occupation basis in graded lexicographic order.
#[derive(Debug, Clone)]
pub struct FockBasis {
    spec: FockSpec,
    states: Vec<u32>,
    index: HashMap<Vec<u32>, usize>,
    totals: Vec<u32>,
    /// `lower[i * M + k]` is the index of `n - e_k`, or `usize::MAX`.
    lower: Vec<usize>,
}

/// Enumerates the basis; fails when the dimension exceeds [`DEFAULT_DIMENSION_CAP`].
pub fn build_basis(spec: FockSpec) -> Result<FockBasis> {
    build_basis_capped(spec, DEFAULT_DIMENSION_CAP)
}

pub fn build_basis_capped(spec: FockSpec, cap: usize) -> Result<FockBasis> {
    spec.validate()?;
    let dim = spec.dimension();
    if dim > cap as u128 {
        return Err(Error::DimensionOverflow { dim, cap });
    }
    let m = spec.num_modes;
    let dim = dim as usize;
    let mut states = Vec::with_capacity(dim * m);
    let mut current = vec![0u32; m];
    for total in 0..=spec.max_total_quanta as u32 {
        push_compositions(&mut states, &mut current, 0, total);
    }
    let mut index = HashMap::with_capacity(dim);
    let mut totals = Vec::with_capacity(dim);
    for (i, occ) in states.chunks(m).enumerate() {
        index.insert(occ.to_vec(), i);
        totals.push(occ.iter().sum());
    }
    let mut lower = vec![usize::MAX; dim * m];
    let mut scratch = vec![0u32; m];
    for (i, occ) in states.chunks(m).enumerate() {
        for k in 0..m {
            if occ[k] > 0 {
                scratch.copy_from_slice(occ);
                scratch[k] -= 1;
                lower[i * m + k] = index[&scratch];
            }
        }
    }
    Ok(FockBasis { spec, states, index, totals, lower })
}

/// All `(n_0..n_{M-1})` summing to `remaining` from position `pos`, lex ascending.
fn push_compositions(out: &mut Vec<u32>, current: &mut [u32], pos: usize, remaining: u32) {
    let m = current.len();
    if pos == m - 1 {
        current[pos] = remaining;
        out.extend_from_slice(current);
        return;
    }
    for n in 0..=remaining {
        current[pos] = n;
        push_compositions(out, current, pos + 1, remaining - n);
    }
}

impl FockBasis {
    pub fn spec(&self) -> &FockSpec {
        &self.spec
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    pub fn num_modes(&self) -> usize {
        self.spec.num_modes
    }

    pub fn dim(&self) -> usize {
        self.totals.len()
    }

    pub fn multi_index(&self, i: usize) -> &[u32] {
        let m = self.spec.num_modes;
        &self.states[i * m..(i + 1) * m]
    }

    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn total_quanta(&self, i: usize) -> u32 {
        self.totals[i]
    }

    pub fn vacuum(&self) -> DVec {
        let mut v = DVec::zeros(self.dim());
        v[0] = ONE;
        v
    }

    /// Basis vector for a given occupation.
    pub fn number_state(&self, occupation: &[u32]) -> Result<DVec> {
        let i = self.index_of(occupation).ok_or_else(|| {
            Error::InvalidParameter(format!("occupation {occupation:?} is outside the truncated basis"))
        })?;
        let mut v = DVec::zeros(self.dim());
        v[i] = ONE;
        Ok(v)
    }

    /// Diagonal projector onto states with total quanta `<= n`.
    pub fn low_quanta_mask(&self, n: u32) -> Vec<bool> {
        self.totals.iter().map(|&t| t <= n).collect()
    }

    fn lowered(&self, i: usize, k: usize) -> Option<usize> {
        let j = self.lower[i * self.spec.num_modes + k];
        (j != usize::MAX).then_some(j)
    }

    fn check_len(&self, f: &FieldVector) -> Result<()> {
        if f.len() != self.spec.num_modes {
            return Err(Error::DimensionMismatch {
                expected: self.spec.num_modes,
                got: f.len(),
                context: "field vector length vs number of modes",
            });
        }
        Ok(())
    }
}

/// A point `z ∈ 𝔥 ≅ C^M` in the mode basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldVector(#[serde(with = "crate::serde_complex::complex_vec")] pub Vec<C64>);

impl FieldVector {
    pub fn new(components: Vec<C64>) -> Self {
        Self(components)
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![ZERO; m])
    }

    pub fn unit(m: usize, k: usize) -> Self {
        let mut v = Self::zeros(m);
        v.0[k] = ONE;
        v
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Self {
        Self(pairs.iter().map(|&(re, im)| c(re, im)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn components(&self) -> &[C64] {
        &self.0
    }

    /// `⟨self, other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &FieldVector) -> C64 {
        self.0.iter().zip(&other.0).fold(ZERO, |acc, (a, b)| acc + a.conj() * b)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self(self.0.iter().map(|a| a * s).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// Mode-wise multiplication by `e^{i θ_k}`.
    pub fn rotate(&self, phases: &[f64]) -> Self {
        Self(self.0.iter().zip(phases).map(|(a, &th)| a * C64::from_polar(1.0, th)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// `a_ε(f) = √ε Σ_k conj(f_k) a_k`.
pub fn annihilator(basis: &FockBasis, f: &FieldVector) -> Result<SparseOp> {
    basis.check_len(f)?;
    let sqrt_eps = basis.epsilon().sqrt();
    let mut t = Vec::new();
    for i in 0..basis.dim() {
        let occ = basis.multi_index(i);
        for (k, fk) in f.0.iter().enumerate() {
            if *fk == ZERO {
                continue;
            }
            if let Some(j) = basis.lowered(i, k) {
                t.push((j, i, fk.conj() * (sqrt_eps * (occ[k] as f64).sqrt())));
            }
        }
    }
    Ok(SparseOp::from_triplets(basis.dim(), basis.dim(), t, SpaceTag::Field))
}

/// `a_ε†(f)`, linear in `f`.
pub fn creator(basis: &FockBasis, f: &FieldVector) -> Result<SparseOp> {
    Ok(annihilator(basis, f)?.adjoint())
}

/// Diagonal `dG_ε(ω)` with eigenvalue `ε Σ ω_k n_k`.
pub fn second_quantize(basis: &FockBasis, omega: &[f64]) -> Result<SparseOp> {
    if omega.len() != basis.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.num_modes(),
            got: omega.len(),
            context: "dispersion length vs number of modes",
        });
    }
    if let Some((mode, &value)) = omega.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
        return Err(Error::NegativeDispersion { mode, value });
    }
    let eps = basis.epsilon();
    let d: Vec<C64> = (0..basis.dim())
        .map(|i| {
            let e: f64 = basis.multi_index(i).iter().zip(omega).map(|(&n, w)| n as f64 * w).sum();
            c(eps * e, 0.0)
        })
        .collect();
    Ok(SparseOp::diagonal(&d, SpaceTag::Field))
}

/// `dG_ε(1) = ε N`.
pub fn number_operator(basis: &FockBasis) -> SparseOp {
    second_quantize(basis, &vec![1.0; basis.num_modes()]).expect("unit dispersion is valid")
}

/// Segal field `φ_ε(f) = a_ε†(f) + a_ε(f)`.
pub fn field_operator(basis: &FockBasis, f: &FieldVector) -> Result<SparseOp> {
    let a = annihilator(basis, f)?;
    a.adjoint().add(&a)
}

/// Dense Weyl operator together with its unitarity defect.
#[derive(Debug, Clone)]
pub struct WeylOperator {
    pub matrix: DMat,
    pub unitarity_defect: f64,
}

/// `W_ε(η) = exp(i φ_ε(η))` by dense spectral exponentiation.
pub fn weyl_operator(basis: &FockBasis, eta: &FieldVector) -> Result<WeylOperator> {
    let phi = field_operator(basis, eta)?.to_dense();
    let matrix = dense::expm_hermitian(&phi, c(0.0, 1.0));
    let unitarity_defect = dense::unitarity_defect(&matrix);
    Ok(WeylOperator { matrix, unitarity_defect })
}

/// `W_ε(η) v` by Krylov action; avoids forming the dense matrix.
pub fn weyl_apply(basis: &FockBasis, eta: &FieldVector, v: &DVec) -> Result<DVec> {
    if eta.norm_sqr() == 0.0 {
        return Ok(v.clone());
    }
    let phi = field_operator(basis, eta)?;
    // exp(iφ) = exp(-i·(-1)·φ)
    Ok(expm_action(&phi, v, -1.0, 1.0, &KrylovOptions::default())?.vector)
}

/// Truncated ε-coherent state and the probability mass the cap removed.
#[derive(Debug, Clone)]
pub struct CoherentState {
    pub vector: DVec,
    pub truncation_defect: f64,
}

/// Default `‖z0‖²/ε ≤ N_cap/4`.
pub const COHERENT_SAFETY_FRACTION: f64 = 0.25;

/// ε-coherent state with `a_ε(f)ψ = ⟨f, z0⟩ψ` (up to truncation).
pub fn coherent_state(basis: &FockBasis, z0: &FieldVector) -> Result<CoherentState> {
    coherent_state_with_safety(basis, z0, COHERENT_SAFETY_FRACTION)
}

pub fn coherent_state_with_safety(
    basis: &FockBasis,
    z0: &FieldVector,
    safety_fraction: f64,
) -> Result<CoherentState> {
    basis.check_len(z0)?;
    let eps = basis.epsilon();
    let mean_number = z0.norm_sqr() / eps;
    let limit = basis.spec().max_total_quanta as f64 * safety_fraction;
    if mean_number > limit {
        return Err(Error::TruncationTooSmall { mean_number, limit });
    }
    // α_k = z0_k / √ε; amplitudes via logs to survive large occupations
    let alpha: Vec<C64> = z0.0.iter().map(|z| z / eps.sqrt()).collect();
    let log_abs: Vec<f64> = alpha.iter().map(|a| a.norm().ln()).collect();
    let args: Vec<f64> = alpha.iter().map(|a| a.arg()).collect();
    let max_n = basis.spec().max_total_quanta;
    let mut log_fact = vec![0.0f64; max_n + 1];
    for n in 1..=max_n {
        log_fact[n] = log_fact[n - 1] + (n as f64).ln();
    }
    let mut v = DVec::zeros(basis.dim());
    let mut mass = 0.0;
    for i in 0..basis.dim() {
        let occ = basis.multi_index(i);
        let mut log_mod = -0.5 * mean_number;
        let mut phase = 0.0;
        let mut vanishes = false;
        for (k, &n) in occ.iter().enumerate() {
            if n == 0 {
                continue;
            }
            if alpha[k] == ZERO {
                vanishes = true;
                break;
            }
            log_mod += n as f64 * log_abs[k] - 0.5 * log_fact[n as usize];
            phase += n as f64 * args[k];
        }
        if vanishes {
            continue;
        }
        let amp = C64::from_polar(log_mod.exp(), phase);
        mass += amp.norm_sqr();
        v[i] = amp;
    }
    let vector = &v / c(mass.sqrt(), 0.0);
    Ok(CoherentState { vector, truncation_defect: (1.0 - mass).max(0.0) })
}

/// `⟨z_a | z_b⟩_ε` for untruncated ε-coherent states.
pub fn coherent_overlap(za: &FieldVector, zb: &FieldVector, epsilon: f64) -> C64 {
    let exponent = (-0.5 * (za.norm_sqr() + zb.norm_sqr()) + za.inner(zb).re) / epsilon;
    C64::from_polar(exponent.exp(), za.inner(zb).im / epsilon)
}

/// `γ = tr_{K_ε} Γ` computed directly from the vector components.
pub fn partial_trace_field(state: &HybridState) -> DMat {
    let (p, f) = state.dims();
    let mut gamma = DMat::zeros(p, p);
    for (prob, psi) in state.components() {
        let s = psi.as_slice();
        for a in 0..p {
            let ra = &s[a * f..(a + 1) * f];
            for b in 0..=a {
                let rb = &s[b * f..(b + 1) * f];
                let v: C64 = ra.iter().zip(rb).fold(ZERO, |acc, (x, y)| acc + x * y.conj());
                gamma[(a, b)] += v * prob;
                if a != b {
                    gamma[(b, a)] += v.conj() * prob;
                }
            }
        }
    }
    gamma
}

/// Checked variant that validates declared factor dimensions.
pub fn partial_trace_field_checked(state: &HybridState, particle_dim: usize, fock_dim: usize) -> Result<DMat> {
    let (p, f) = state.dims();
    if p != particle_dim || f != fock_dim {
        return Err(Error::DimensionMismatch {
            expected: particle_dim * fock_dim,
            got: p * f,
            context: "partial trace factor dimensions",
        });
    }
    Ok(partial_trace_field(state))
}
