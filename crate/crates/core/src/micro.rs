//! Microscopic particle-field dynamics on `H ⊗ K_ε`: states, Krylov
//! propagation, noncommutative Fourier transform, number moments, the
//! propagation bound check, the Duhamel residual and checkpoints.
//!
//! Joint vectors use particle-major layout: component `(p, f)` sits at `p * F + f`.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{field_operator, FieldVector, FockBasis};
use crate::linalg::dense::{eigh, expm_hermitian, unitary_propagator};
use crate::linalg::{c, expm_action, DMat, DVec, KrylovOptions, SparseOp, C64, I, ZERO};
use crate::measures::StateValuedMeasure;
use crate::models::ModelConfig;
use crate::qc_dynamics::{check_uniform, quadrature_weights, Quadrature};

/// Normalization tolerance for state vectors.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Convex combination of pure joint vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridState {
    particle_dim: usize,
    fock_dim: usize,
    components: Vec<(f64, DVec)>,
}

impl HybridState {
    pub fn pure(vector: DVec, particle_dim: usize, fock_dim: usize) -> Result<Self> {
        Self::mixed(vec![(1.0, vector)], particle_dim, fock_dim)
    }

    pub fn mixed(components: Vec<(f64, DVec)>, particle_dim: usize, fock_dim: usize) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidState("state has no components".into()));
        }
        let total: f64 = components.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > NORM_TOLERANCE || components.iter().any(|(p, _)| !(*p >= 0.0)) {
            return Err(Error::InvalidState(format!("probabilities sum to {total}")));
        }
        for (_, v) in &components {
            if v.len() != particle_dim * fock_dim {
                return Err(Error::DimensionMismatch {
                    expected: particle_dim * fock_dim,
                    got: v.len(),
                    context: "joint state vector length",
                });
            }
            if (v.norm() - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::InvalidState(format!("component has norm {}", v.norm())));
            }
        }
        Ok(Self { particle_dim, fock_dim, components })
    }

    /// `γ ⊗ |ψ⟩⟨ψ|` with `γ` split along its eigenvectors.
    pub fn product(gamma: &DMat, field: &DVec) -> Result<Self> {
        let (values, vectors) = eigh(gamma);
        let fnorm = field.norm();
        let comps: Vec<(f64, DVec)> = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 1e-14)
            .map(|(j, &v)| (v, vectors.column(j).kronecker(field) / c(fnorm, 0.0)))
            .collect();
        let total: f64 = comps.iter().map(|(p, _)| p).sum();
        let comps = comps.into_iter().map(|(p, v)| (p / total, v)).collect();
        Self::mixed(comps, gamma.nrows(), field.len())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.particle_dim, self.fock_dim)
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, &DVec)> {
        self.components.iter().map(|(p, v)| (*p, v))
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.components.iter().map(|(p, _)| *p).collect()
    }

    pub fn num_components(&self) -> usize {
        self.components.len()
    }

    /// Applies a map to every component vector.
    pub fn map_vectors(&self, f: impl Fn(&DVec) -> Result<DVec> + Sync) -> Result<Self> {
        let components = self
            .components
            .par_iter()
            .map(|(p, v)| Ok((*p, f(v)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { particle_dim: self.particle_dim, fock_dim: self.fock_dim, components })
    }

    /// Largest deviation of a component norm from one.
    pub fn norm_defect(&self) -> f64 {
        self.components.iter().map(|(_, v)| (v.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `Tr(Γ A)` for a joint operator given by its action.
    pub fn expectation(&self, op: impl Fn(&DVec) -> Result<DVec>) -> Result<C64> {
        let mut acc = ZERO;
        for (p, v) in self.components() {
            acc += v.dotc(&op(v)?) * p;
        }
        Ok(acc)
    }

    /// `Σ p |Ψ_{pf}|² g(f)` for a function of the Fock index.
    pub fn fock_diagonal_expectation(&self, g: impl Fn(usize) -> f64) -> f64 {
        let f = self.fock_dim;
        let weights: Vec<f64> = (0..f).map(&g).collect();
        self.components()
            .map(|(p, v)| p * v.iter().enumerate().map(|(i, a)| a.norm_sqr() * weights[i % f]).sum::<f64>())
            .sum()
    }
}

/// `(A ⊗ 1) Ψ` for a particle operator `A`.
pub fn apply_particle_operator(a: &DMat, psi: &DVec, fock_dim: usize) -> DVec {
    let p = a.nrows();
    let mut out = DVec::zeros(p * fock_dim);
    for r in 0..p {
        for q in 0..a.ncols() {
            let w = a[(r, q)];
            if w == ZERO {
                continue;
            }
            for f in 0..fock_dim {
                out[r * fock_dim + f] += w * psi[q * fock_dim + f];
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroConfig {
    pub dt: f64,
    pub krylov_dim: usize,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_dt_min() -> f64 {
    1e-8
}

fn default_tolerance() -> f64 {
    1e-12
}

impl Default for MicroConfig {
    fn default() -> Self {
        Self { dt: 0.05, krylov_dim: 30, dt_min: default_dt_min(), tolerance: default_tolerance() }
    }
}

/// `Γ(t) = e^{-itH} Γ e^{itH}` by Lanczos exponential actions.
pub fn propagate_micro(h: &SparseOp, state: &HybridState, t: f64, cfg: &MicroConfig) -> Result<HybridState> {
    if h.rows() != state.particle_dim * state.fock_dim {
        return Err(Error::DimensionMismatch {
            expected: h.rows(),
            got: state.particle_dim * state.fock_dim,
            context: "Hamiltonian vs state dimension",
        });
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let opts = KrylovOptions { krylov_dim: cfg.krylov_dim, tolerance: cfg.tolerance, min_step: cfg.dt_min };
    let out = state.map_vectors(|v| Ok(expm_action(h, v, t, cfg.dt, &opts)?.vector))?;
    let drift = out.norm_defect();
    if drift > NORM_TOLERANCE * t.abs().max(1.0) {
        return Err(Error::InvalidState(format!("norm drift {drift} after propagation to t = {t}")));
    }
    Ok(out)
}

/// Exact evolution through a dense eigendecomposition; for small joint spaces.
#[derive(Debug, Clone)]
pub struct DenseEvolution {
    values: Vec<f64>,
    vectors: DMat,
}

impl DenseEvolution {
    pub fn new(h: &SparseOp) -> Self {
        let (values, vectors) = eigh(&h.to_dense());
        Self { values, vectors }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn evolve_vector(&self, v: &DVec, t: f64) -> DVec {
        let coeffs = self.vectors.adjoint() * v;
        let phased = DVec::from_fn(coeffs.len(), |i, _| coeffs[i] * C64::from_polar(1.0, -t * self.values[i]));
        &self.vectors * phased
    }

    pub fn evolve(&self, state: &HybridState, t: f64) -> HybridState {
        state.map_vectors(|v| Ok(self.evolve_vector(v, t))).expect("dense evolution cannot fail")
    }
}

/// How the Weyl operator acts on Fock vectors.
enum WeylAction {
    Dense(DMat),
    Krylov(SparseOp),
    Identity,
}

/// Fock dimension up to which `W_ε(η)` is formed densely.
pub const DENSE_WEYL_LIMIT: usize = 600;

impl WeylAction {
    fn new(basis: &FockBasis, eta: &FieldVector) -> Result<Self> {
        if eta.norm_sqr() == 0.0 {
            return Ok(Self::Identity);
        }
        let phi = field_operator(basis, eta)?;
        if basis.dim() <= DENSE_WEYL_LIMIT {
            Ok(Self::Dense(expm_hermitian(&phi.to_dense(), I)))
        } else {
            Ok(Self::Krylov(phi))
        }
    }

    fn apply(&self, v: &DVec) -> Result<DVec> {
        match self {
            Self::Dense(w) => Ok(w * v),
            Self::Krylov(phi) => Ok(expm_action(phi, v, -1.0, 1.0, &KrylovOptions::default())?.vector),
            Self::Identity => Ok(v.clone()),
        }
    }
}

fn rows(psi: &DVec, p: usize, f: usize) -> Vec<DVec> {
    (0..p).map(|i| psi.rows(i * f, f).into_owned()).collect()
}

/// `tr_K(|a⟩⟨b| (1 ⊗ W))`, entry `(p, q) = ⟨b_q, W a_p⟩`.
fn weyl_partial_trace(a: &DVec, b: &DVec, p: usize, f: usize, w: &WeylAction) -> Result<DMat> {
    let wa: Vec<DVec> = rows(a, p, f).par_iter().map(|r| w.apply(r)).collect::<Result<_>>()?;
    let br = rows(b, p, f);
    Ok(DMat::from_fn(p, p, |i, j| br[j].dotc(&wa[i])))
}

/// `Γ̂_ε(η) = tr_K(Γ (1 ⊗ W_ε(η)))`.
pub fn nc_fourier_transform(state: &HybridState, basis: &FockBasis, eta: &FieldVector) -> Result<DMat> {
    check_fock_dim(state, basis)?;
    let (p, f) = state.dims();
    let w = WeylAction::new(basis, eta)?;
    let mut out = DMat::zeros(p, p);
    for (prob, v) in state.components() {
        out += weyl_partial_trace(v, v, p, f, &w)? * c(prob, 0.0);
    }
    Ok(out)
}

/// `Γ̂_ε(η)` for several `η` at once.
pub fn nc_fourier_transforms(state: &HybridState, basis: &FockBasis, etas: &[FieldVector]) -> Result<Vec<DMat>> {
    etas.par_iter().map(|eta| nc_fourier_transform(state, basis, eta)).collect()
}

fn check_fock_dim(state: &HybridState, basis: &FockBasis) -> Result<()> {
    if state.fock_dim != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            got: state.fock_dim,
            context: "state Fock dimension vs basis",
        });
    }
    Ok(())
}

/// `Tr(Γ (dG_ε(1) + 1)^δ)`.
pub fn number_moment(state: &HybridState, basis: &FockBasis, delta: f64) -> Result<f64> {
    shifted_number_moment(state, basis, delta, 1.0)
}

/// `Tr(Γ (dG_ε(1) + shift)^δ)`.
pub fn shifted_number_moment(state: &HybridState, basis: &FockBasis, delta: f64, shift: f64) -> Result<f64> {
    check_fock_dim(state, basis)?;
    let eps = basis.epsilon();
    Ok(state.fock_diagonal_expectation(|f| (eps * basis.total_quanta(f) as f64 + shift).powf(delta)))
}

/// `c_δ(ε) = max{2 + ε, 1 + (1 + ε)^δ}`.
pub fn moment_growth_constant(delta: f64, epsilon: f64) -> f64 {
    (2.0 + epsilon).max(1.0 + (1.0 + epsilon).powf(delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundReport {
    /// `Tr(Γ(t)(dG + N² + ε)^δ)`.
    pub lhs: f64,
    /// Growth factor times the initial moment.
    pub rhs: f64,
    pub factor: f64,
    pub holds: bool,
    /// `rhs − lhs`.
    pub slack: f64,
}

/// Evaluates both sides of the moment propagation bound.
pub fn check_moment_bound(
    state0: &HybridState,
    state_t: &HybridState,
    basis: &FockBasis,
    num_particles: usize,
    delta: f64,
    t: f64,
    lambda_norm: f64,
) -> Result<MomentBoundReport> {
    if state0.dims() != state_t.dims() {
        return Err(Error::DimensionMismatch {
            expected: state0.particle_dim * state0.fock_dim,
            got: state_t.particle_dim * state_t.fock_dim,
            context: "propagation bound states",
        });
    }
    let eps = basis.epsilon();
    let shift = (num_particles * num_particles) as f64 + eps;
    let initial = shifted_number_moment(state0, basis, delta, shift)?;
    let lhs = shifted_number_moment(state_t, basis, delta, shift)?;
    let factor = (moment_growth_constant(delta / 2.0, eps) * eps.sqrt() * delta.abs() * t.abs() * lambda_norm).exp();
    let rhs = factor * initial;
    // equal sides count as holding up to round-off
    let holds = lhs <= rhs * (1.0 + 1e-12);
    Ok(MomentBoundReport { lhs, rhs, factor, holds, slack: rhs - lhs })
}

/// `|Tr(dG_ε(1)^k Γ) − Σ w ‖z‖^{2k}|` for `k = 0..=max_k`.
pub fn check_moment_matching(state: &HybridState, basis: &FockBasis, measure: &StateValuedMeasure, max_k: u32) -> Result<Vec<f64>> {
    check_fock_dim(state, basis)?;
    let eps = basis.epsilon();
    Ok((0..=max_k)
        .map(|k| {
            let micro = state.fock_diagonal_expectation(|f| (eps * basis.total_quanta(f) as f64).powi(k as i32));
            (micro - measure.norm_moment(k)).abs()
        })
        .collect())
}

/// Free dynamics `H_0 = K_0 ⊗ 1 + ν(ε) 1 ⊗ dG_ε(ω)` split into its factors.
#[derive(Debug, Clone)]
pub struct FreeDynamics {
    k0: DMat,
    /// `ν(ε) ε Σ ω_k n_k` per Fock index.
    field_energies: Vec<f64>,
}

impl FreeDynamics {
    pub fn new(cfg: &ModelConfig, basis: &FockBasis) -> Self {
        let nu = cfg.nu_regime.nu_of_epsilon(cfg.epsilon);
        let eps = basis.epsilon();
        let field_energies = (0..basis.dim())
            .map(|f| {
                nu * eps * basis.multi_index(f).iter().zip(&cfg.dispersion).map(|(&n, w)| n as f64 * w).sum::<f64>()
            })
            .collect();
        Self { k0: crate::models::build_k0(cfg).to_dense(), field_energies }
    }

    /// `(1 ⊗ e^{iτν(ε)dG_ε(ω)}) Ψ`.
    pub fn field_phase(&self, psi: &DVec, tau: f64) -> DVec {
        let f = self.field_energies.len();
        DVec::from_fn(psi.len(), |i, _| psi[i] * C64::from_polar(1.0, tau * self.field_energies[i % f]))
    }

    /// `e^{iτH_0} Ψ`.
    pub fn interaction_picture_vector(&self, psi: &DVec, tau: f64) -> DVec {
        let f = self.field_energies.len();
        let u = unitary_propagator(&self.k0, -tau);
        apply_particle_operator(&u, &self.field_phase(psi, tau), f)
    }

    /// `Υ(τ) = e^{iτH_0} Γ(τ) e^{-iτH_0}`.
    pub fn interaction_picture(&self, state: &HybridState, tau: f64) -> HybridState {
        state.map_vectors(|v| Ok(self.interaction_picture_vector(v, tau))).expect("phase application cannot fail")
    }

    pub fn k0(&self) -> &DMat {
        &self.k0
    }
}

/// Residual of the microscopic Duhamel formula in the interaction picture over the
/// trajectory's first and last node:
/// `Υ̂(t)(η) − Υ̂(s)(η) + i ∫ e^{iτK_0} tr_K([Ṽ_τ, χχ†] W_ε(η)) e^{-iτK_0} dτ`,
/// with `χ = (1 ⊗ e^{iτν(ε)dG_ε(ω)}) Ψ(τ)` and `Ṽ_τ = Σ_j φ_ε(e^{iτεν(ε)ω} λ(x_j))`.
pub fn duhamel_residual(
    trajectory: &[(f64, HybridState)],
    basis: &FockBasis,
    cfg: &ModelConfig,
    eta: &FieldVector,
    rule: Quadrature,
) -> Result<DMat> {
    let times: Vec<f64> = trajectory.iter().map(|(t, _)| *t).collect();
    let h = check_uniform(&times)?;
    let weights = quadrature_weights(rule, times.len(), h)?;
    let free = FreeDynamics::new(cfg, basis);
    let w = WeylAction::new(basis, eta)?;
    let lambda = cfg.form_factor()?;
    let (p, f) = trajectory[0].1.dims();
    if cfg.grid.particles != 1 || lambda.num_points() != p {
        return Err(Error::GridMismatch("Duhamel residual is implemented for one particle on the model grid".into()));
    }
    let nu_eps = cfg.nu_regime.nu_of_epsilon(cfg.epsilon) * cfg.epsilon;
    let conj_k0 = |m: DMat, tau: f64| {
        let u = unitary_propagator(free.k0(), -tau);
        &u * m * u.adjoint()
    };
    let integrand = |(tau, state): &(f64, HybridState)| -> Result<DMat> {
        let phases: Vec<f64> = cfg.dispersion.iter().map(|om| tau * nu_eps * om).collect();
        let ops: Vec<SparseOp> =
            (0..p).map(|x| field_operator(basis, &lambda.at(x).rotate(&phases))).collect::<Result<_>>()?;
        let mut acc = DMat::zeros(p, p);
        for (prob, psi) in state.components() {
            check_fock_dim(state, basis)?;
            let chi = free.field_phase(psi, *tau);
            let mut vchi = DVec::zeros(p * f);
            for (x, op) in ops.iter().enumerate() {
                let block = op.apply(&chi.rows(x * f, f).into_owned())?;
                vchi.rows_mut(x * f, f).copy_from(&block);
            }
            let term = weyl_partial_trace(&vchi, &chi, p, f, &w)? - weyl_partial_trace(&chi, &vchi, p, f, &w)?;
            acc += term * c(prob, 0.0);
        }
        Ok(conj_k0(acc, *tau))
    };
    let values: Vec<DMat> = trajectory.par_iter().map(integrand).collect::<Result<_>>()?;
    let mut integral = DMat::zeros(p, p);
    for (v, wt) in values.iter().zip(&weights) {
        integral += v * c(*wt, 0.0);
    }
    let upsilon_hat = |(tau, state): &(f64, HybridState)| -> Result<DMat> {
        let mut acc = DMat::zeros(p, p);
        for (prob, psi) in state.components() {
            let chi = free.field_phase(psi, *tau);
            acc += weyl_partial_trace(&chi, &chi, p, f, &w)? * c(prob, 0.0);
        }
        Ok(conj_k0(acc, *tau))
    };
    let start = upsilon_hat(&trajectory[0])?;
    let end = upsilon_hat(&trajectory[trajectory.len() - 1])?;
    Ok(end - start + integral * I)
}

/// Frozen constant for the Lipschitz-type probe
/// `‖Γ̂(η) − Γ̂(ξ)‖₁ ≤ c (min(‖η‖,‖ξ‖)^{1/2} + 1) ‖η − ξ‖^{1/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquicontinuityProbe {
    pub constant: f64,
}

impl EquicontinuityProbe {
    /// Ratio of the measured difference to the η-dependent envelope.
    pub fn ratio(difference: f64, eta: &FieldVector, xi: &FieldVector) -> f64 {
        let dist = eta.sub(xi).norm();
        if dist == 0.0 {
            return 0.0;
        }
        difference / ((eta.norm().min(xi.norm()).sqrt() + 1.0) * dist.sqrt())
    }

    /// Fits `c` once, as `margin` times the largest observed ratio.
    pub fn fit(ratios: &[f64], margin: f64) -> Self {
        Self { constant: margin * ratios.iter().cloned().fold(0.0, f64::max) }
    }

    pub fn holds(&self, ratios: &[f64]) -> bool {
        ratios.iter().all(|r| *r <= self.constant)
    }
}

/// Header line of a checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config_hash: String,
    pub epsilon: f64,
    pub t: f64,
    pub particle_dim: usize,
    pub fock_dim: usize,
    pub probabilities: Vec<f64>,
}

/// Writes a JSON header line followed by little-endian `(re, im)` pairs.
pub fn save_checkpoint(path: &Path, state: &HybridState, config_hash: &str, epsilon: f64, t: f64) -> Result<()> {
    let header = CheckpointHeader {
        config_hash: config_hash.to_string(),
        epsilon,
        t,
        particle_dim: state.particle_dim,
        fock_dim: state.fock_dim,
        probabilities: state.probabilities(),
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for (_, v) in state.components() {
        for z in v.iter() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, HybridState)> {
    let mut input = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
    let n = header.particle_dim * header.fock_dim;
    let mut buf = [0u8; 8];
    let mut components = Vec::with_capacity(header.probabilities.len());
    for &p in &header.probabilities {
        let mut v = DVec::zeros(n);
        for i in 0..n {
            input.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            input.read_exact(&mut buf)?;
            v[i] = c(re, f64::from_le_bytes(buf));
        }
        components.push((p, v));
    }
    let state = HybridState::mixed(components, header.particle_dim, header.fock_dim)?;
    Ok((header, state))
}
