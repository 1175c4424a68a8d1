//! Initial states, the quasi-classical distance and the ε-sweep drivers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, HeisenbergSymbolKind, InitialState, ParticleStateSpec};
use crate::error::{Error, Result};
use crate::fock::{build_basis, coherent_state, partial_trace_field, FieldVector, FockBasis};
use crate::linalg::dense::{eigh, projector, trace, trace_product};
use crate::linalg::{c, DMat, DVec, SparseOp, C64, ZERO};
use crate::measures::StateValuedMeasure;
use crate::micro::{
    check_moment_matching, check_moment_bound, nc_fourier_transforms, number_moment, propagate_micro, HybridState,
};
use crate::models::{build_nelson_hamiltonian, EffectiveModel, ModelConfig};
use crate::qc_dynamics::measure_trajectory;
use crate::symbols::{evaluate_symbol, Monomial, SymbolSpec};

/// Overlap threshold for superposition components, `e^{-‖z_i − z_j‖²/(4ε)}`.
pub const SUPERPOSITION_OVERLAP_LIMIT: f64 = 1e-3;

/// Initial microscopic state at one ε together with its expected quasi-classical limit.
#[derive(Debug, Clone)]
pub struct PreparedState {
    pub state: HybridState,
    pub limit: StateValuedMeasure,
    pub truncation_defect: f64,
}

/// Normalized particle vector for the configured initial particle state.
pub fn particle_vector(cfg: &ModelConfig, spec: &ParticleStateSpec) -> Result<DVec> {
    match spec {
        ParticleStateSpec::K0Eigenstate { index } => k0_eigenvector(cfg, *index),
        ParticleStateSpec::Gaussian { center, width, momentum } => {
            let grid = &cfg.grid;
            let l = grid.box_length;
            let mut v = DVec::from_iterator(
                grid.single_dim(),
                grid.single_points().iter().map(|x| {
                    let mut r2 = 0.0;
                    let mut phase = 0.0;
                    for a in 0..x.len() {
                        // minimum image displacement
                        let d = (x[a] - center[a] + 0.5 * l).rem_euclid(l) - 0.5 * l;
                        r2 += d * d;
                        phase += momentum[a] * x[a];
                    }
                    C64::from_polar((-r2 / (4.0 * width * width)).exp(), phase)
                }),
            );
            let n = v.norm();
            v /= c(n, 0.0);
            Ok(v)
        }
    }
}

fn k0_eigenvector(cfg: &ModelConfig, index: usize) -> Result<DVec> {
    let (_, vectors) = eigh(&crate::models::build_k0(cfg).to_dense());
    if index >= vectors.ncols() {
        return Err(Error::InvalidParameter(format!(
            "K0 eigenvector {index} requested on a {}-dimensional particle space",
            vectors.ncols()
        )));
    }
    Ok(vectors.column(index).into_owned())
}

/// `n(ε) = floor(scale / ε)`.
pub fn loss_of_mass_index(scale: f64, epsilon: f64) -> usize {
    (scale / epsilon + 1e-12).floor() as usize
}

/// Builds `Γ_ε` on `basis` and the limit measure it should converge to.
pub fn build_initial_state(cfg: &ExperimentConfig, basis: &FockBasis) -> Result<PreparedState> {
    let eps = basis.epsilon();
    let model = cfg.model_at(eps);
    match &cfg.initial_state {
        InitialState::CoherentProduct { z0 } => {
            let psi = particle_vector(&model, &cfg.particle_state)?;
            let gamma = projector(&psi);
            let coh = coherent_state(basis, z0)?;
            Ok(PreparedState {
                state: HybridState::product(&gamma, &coh.vector)?,
                limit: StateValuedMeasure::dirac(z0.clone(), gamma, 1.0)?,
                truncation_defect: coh.truncation_defect,
            })
        }
        InitialState::CoherentSuperposition { terms } => {
            let eps_max = cfg.epsilon_list.iter().cloned().fold(eps, f64::max);
            for i in 0..terms.len() {
                for j in i + 1..terms.len() {
                    let overlap = (-terms[i].z0.sub(&terms[j].z0).norm_sqr() / (4.0 * eps_max)).exp();
                    if overlap > SUPERPOSITION_OVERLAP_LIMIT {
                        return Err(Error::PointsTooClose { i, j, overlap, threshold: SUPERPOSITION_OVERLAP_LIMIT });
                    }
                }
            }
            let psi = particle_vector(&model, &cfg.particle_state)?;
            let gamma = projector(&psi);
            let mut field = DVec::zeros(basis.dim());
            let mut defect: f64 = 0.0;
            for t in terms {
                let coh = coherent_state(basis, &t.z0)?;
                defect = defect.max(coh.truncation_defect);
                field += coh.vector * t.amplitude;
            }
            let n = field.norm();
            if n == 0.0 {
                return Err(Error::InvalidState("superposition amplitudes cancel".into()));
            }
            field /= c(n, 0.0);
            let total: f64 = terms.iter().map(|t| t.amplitude.norm_sqr()).sum();
            let samples = terms
                .iter()
                .map(|t| crate::measures::Sample {
                    weight: t.amplitude.norm_sqr() / total,
                    point: t.z0.clone(),
                    state: gamma.clone(),
                })
                .collect();
            Ok(PreparedState {
                state: HybridState::product(&gamma, &field)?,
                limit: StateValuedMeasure::new(model.grid.particle_dim(), samples)?,
                truncation_defect: defect,
            })
        }
        InitialState::LossOfMass { z0, scale } => {
            let n = loss_of_mass_index(*scale, eps);
            let psi = k0_eigenvector(&model, n)?;
            let coh = coherent_state(basis, z0)?;
            Ok(PreparedState {
                state: HybridState::product(&projector(&psi), &coh.vector)?,
                limit: StateValuedMeasure::zero(model.grid.particle_dim()),
                truncation_defect: coh.truncation_defect,
            })
        }
    }
}

/// Test observables: rank-one projectors onto low `K_0` eigenvectors, optionally the identity.
#[derive(Debug, Clone)]
pub struct ObservableFamily {
    pub compact: Vec<DMat>,
    pub include_identity: bool,
}

impl ObservableFamily {
    pub fn from_k0(k0: &DMat, num_projectors: usize, include_identity: bool) -> Self {
        let (_, vectors) = eigh(k0);
        let compact = (0..num_projectors.min(vectors.ncols()))
            .map(|j| projector(&vectors.column(j).into_owned()))
            .collect();
        Self { compact, include_identity }
    }

    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        let k0 = crate::models::build_k0(&cfg.model).to_dense();
        Self::from_k0(&k0, cfg.observables.num_projectors, cfg.observables.include_identity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcDistance {
    /// Largest deviation over the compact observables.
    pub compact: f64,
    /// Same, with the identity added when configured.
    pub total: f64,
}

/// `max_{η, B} |tr((Γ̂_ε(η) − m̂(η)) B)|` from precomputed transforms.
pub fn qc_distance_from_transforms(
    micro: &[DMat],
    measure: &StateValuedMeasure,
    etas: &[FieldVector],
    obs: &ObservableFamily,
) -> QcDistance {
    let mut compact: f64 = 0.0;
    let mut identity: f64 = 0.0;
    for (g, eta) in micro.iter().zip(etas) {
        let diff = g - measure.fourier_transform(eta);
        for b in &obs.compact {
            compact = compact.max(trace_product(&diff, b).norm());
        }
        if obs.include_identity {
            identity = identity.max(trace(&diff).norm());
        }
    }
    QcDistance { compact, total: compact.max(identity) }
}

pub fn qc_distance(
    state: &HybridState,
    basis: &FockBasis,
    measure: &StateValuedMeasure,
    etas: &[FieldVector],
    obs: &ObservableFamily,
) -> Result<QcDistance> {
    let micro = nc_fourier_transforms(state, basis, etas)?;
    Ok(qc_distance_from_transforms(&micro, measure, etas, obs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub epsilon: f64,
    pub t: f64,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub name: String,
    pub config_hash: String,
    pub seed: u64,
    pub rows: Vec<ResultRow>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ExperimentResult {
    pub fn value(&self, epsilon: f64, t: f64, metric: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.epsilon == epsilon && r.t == t && r.metric == metric).map(|r| r.value)
    }

    /// `(ε, value)` pairs for one metric at one time, in row order.
    pub fn series(&self, metric: &str, t: f64) -> Vec<(f64, f64)> {
        self.rows.iter().filter(|r| r.metric == metric && r.t == t).map(|r| (r.epsilon, r.value)).collect()
    }

    pub fn metrics(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.metric) {
                out.push(r.metric.clone());
            }
        }
        out
    }

    pub fn times(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.t) {
                out.push(r.t);
            }
        }
        out
    }
}

/// Everything built once per ε.
pub struct EpsilonSetup {
    pub epsilon: f64,
    pub model: ModelConfig,
    pub basis: FockBasis,
    pub hamiltonian: SparseOp,
    pub initial: PreparedState,
}

pub fn setup_epsilon(cfg: &ExperimentConfig, epsilon: f64) -> Result<EpsilonSetup> {
    let model = cfg.model_at(epsilon);
    let basis = build_basis(cfg.fock_spec(epsilon)?)?;
    let hamiltonian = build_nelson_hamiltonian(&model, &basis)?;
    let initial = build_initial_state(cfg, &basis)?;
    log::info!("ε = {epsilon}: Fock dimension {}, joint dimension {}", basis.dim(), hamiltonian.rows());
    Ok(EpsilonSetup { epsilon, model, basis, hamiltonian, initial })
}

/// Microscopic states at each configured time, propagated incrementally from `t = 0`.
pub fn micro_trajectory(cfg: &ExperimentConfig, setup: &EpsilonSetup) -> Result<Vec<(f64, HybridState)>> {
    let mut out = Vec::with_capacity(cfg.times.len());
    let mut state = setup.initial.state.clone();
    let mut last = 0.0;
    for &t in &cfg.times {
        if t > last {
            state = propagate_micro(&setup.hamiltonian, &state, t - last, &cfg.micro)?;
        }
        last = t;
        out.push((t, state.clone()));
    }
    Ok(out)
}

/// Limit measure `m_t` at each configured time.
pub fn limit_trajectory(cfg: &ExperimentConfig, limit: &StateValuedMeasure) -> Result<Vec<(f64, StateValuedMeasure)>> {
    let model = EffectiveModel::new(&cfg.model)?;
    measure_trajectory(&model, &cfg.propagator, limit, &cfg.times)
}

fn metric_rows(
    cfg: &ExperimentConfig,
    setup: &EpsilonSetup,
    micro: &[(f64, HybridState)],
    limits: &[(f64, StateValuedMeasure)],
    etas: &[FieldVector],
    obs: &ObservableFamily,
) -> Result<Vec<ResultRow>> {
    let eps = setup.epsilon;
    let k0 = crate::models::build_k0(&setup.model).to_dense();
    let shifted_k0 = &k0 + DMat::identity(k0.nrows(), k0.ncols());
    let mut rows = vec![
        ResultRow { epsilon: eps, t: 0.0, metric: "fock_dim".into(), value: setup.basis.dim() as f64 },
        ResultRow { epsilon: eps, t: 0.0, metric: "truncation_defect".into(), value: setup.initial.truncation_defect },
    ];
    let per_time: Vec<Vec<ResultRow>> = micro
        .par_iter()
        .zip(limits)
        .map(|((t, state), (_, m_t))| {
            let t = *t;
            let row = |metric: String, value: f64| ResultRow { epsilon: eps, t, metric, value };
            let transforms = nc_fourier_transforms(state, &setup.basis, etas)?;
            let d = qc_distance_from_transforms(&transforms, m_t, etas, obs);
            let mut out = vec![
                row("qc_distance_compact".into(), d.compact),
                row("qc_distance_total".into(), d.total),
                row("measure_mass".into(), m_t.total_mass()),
                row("norm_defect".into(), state.norm_defect()),
                row("number_moment".into(), number_moment(state, &setup.basis, 1.0)?),
            ];
            let gaps = check_moment_matching(state, &setup.basis, m_t, cfg.checks.moment_order)?;
            for (k, v) in gaps.iter().enumerate().skip(1) {
                out.push(row(format!("moment_gap_{k}"), *v));
            }
            for &delta in &cfg.checks.moment_bound_deltas {
                let r = check_moment_bound(
                    &setup.initial.state,
                    state,
                    &setup.basis,
                    setup.model.grid.particles,
                    delta,
                    t,
                    setup.model.coupling_norm(),
                )?;
                out.push(row(format!("moment_bound_lhs_d{delta}"), r.lhs));
                out.push(row(format!("moment_bound_rhs_d{delta}"), r.rhs));
                out.push(row(format!("moment_bound_holds_d{delta}"), if r.holds { 1.0 } else { 0.0 }));
            }
            let gamma = partial_trace_field(state);
            out.push(row("micro_mass".into(), trace(&gamma).re));
            out.push(row("particle_energy".into(), trace_product(&gamma, &shifted_k0).re));
            Ok(out)
        })
        .collect::<Result<_>>()?;
    rows.extend(per_time.into_iter().flatten());
    Ok(rows)
}

/// Runs the ε sweep: microscopic evolution, limit measure, distances and moment checks.
pub fn run_convergence_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let etas = cfg.etas();
    let obs = ObservableFamily::for_config(cfg);
    let first = build_basis(cfg.fock_spec(cfg.epsilon_list[0])?)?;
    // the limit measure does not depend on ε, except for loss of mass where it is zero throughout
    let limit = build_initial_state(cfg, &first)?.limit;
    drop(first);
    let limits = limit_trajectory(cfg, &limit)?;
    let per_eps: Vec<Vec<ResultRow>> = cfg
        .epsilon_list
        .par_iter()
        .map(|&eps| {
            let setup = setup_epsilon(cfg, eps)?;
            let micro = micro_trajectory(cfg, &setup)?;
            metric_rows(cfg, &setup, &micro, &limits, &etas, &obs)
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentResult {
        name: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        rows: per_eps.into_iter().flatten().collect(),
        warnings: Vec::new(),
    })
}

/// Symbol selected by the Heisenberg options.
pub fn heisenberg_symbol(model: &ModelConfig, kind: &HeisenbergSymbolKind) -> Result<SymbolSpec> {
    match kind {
        HeisenbergSymbolKind::Nelson => model.interaction_symbol(),
        HeisenbergSymbolKind::Intensity => {
            let lambda = model.form_factor()?;
            SymbolSpec::single(model.grid.particles, Monomial::new(c(1.0, 0.0), vec![lambda.clone()], vec![lambda])?)
        }
    }
}

/// Observable selected by an optional projector index: `|e_j⟩⟨e_j|` or the identity.
pub fn projector_or_identity(k0: &DMat, index: Option<usize>) -> Result<DMat> {
    match index {
        None => Ok(DMat::identity(k0.nrows(), k0.ncols())),
        Some(j) => {
            let (_, vectors) = eigh(k0);
            if j >= vectors.ncols() {
                return Err(Error::InvalidParameter(format!("projector index {j} out of range")));
            }
            Ok(projector(&vectors.column(j).into_owned()))
        }
    }
}

/// `Tr(Γ (T ⊗ 1) Op(F) (S ⊗ 1))` for a Wick-quantized joint operator.
pub fn micro_heisenberg_value(state: &HybridState, op: &SparseOp, s: &DMat, t_op: &DMat) -> Result<C64> {
    let (_, f) = state.dims();
    let t_adj = t_op.adjoint();
    let mut total = ZERO;
    for (p, psi) in state.components() {
        let right = op.apply(&crate::micro::apply_particle_operator(s, psi, f))?;
        let left = crate::micro::apply_particle_operator(&t_adj, psi, f);
        total += c(p, 0.0) * left.dotc(&right);
    }
    Ok(total)
}

/// `∫ tr(γ(z) T F(z) S) dμ(z)` for an atomic measure.
pub fn qc_heisenberg_value(m: &StateValuedMeasure, sym: &SymbolSpec, s: &DMat, t_op: &DMat) -> Result<C64> {
    let mut total = ZERO;
    for sample in &m.samples {
        let diag = evaluate_symbol(sym, &sample.point, m.particle_dim)?;
        let f = crate::linalg::dense::diag_matrix(&diag);
        total += c(sample.weight, 0.0) * trace(&(&sample.state * t_op * f * s));
    }
    Ok(total)
}

/// Compares `Tr(Γ_ε(t) T Op(F) S)` with `tr ∫ T F S dm_t` along the ε sweep.
pub fn run_heisenberg_experiment(
    cfg: &ExperimentConfig,
    kind: &HeisenbergSymbolKind,
    s: &DMat,
    t_op: &DMat,
    moment_delta: f64,
) -> Result<ExperimentResult> {
    cfg.validate()?;
    let sym = heisenberg_symbol(&cfg.model, kind)?;
    let mut warnings = Vec::new();
    let degree = sym.max_degree() as f64;
    if degree / 2.0 >= 2.0 * moment_delta {
        let msg = format!(
            "symbol degree {degree} violates (l+m)/2 < 2δ with δ = {moment_delta}; convergence is not guaranteed"
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let first = build_basis(cfg.fock_spec(cfg.epsilon_list[0])?)?;
    let limit = build_initial_state(cfg, &first)?.limit;
    drop(first);
    let limits = limit_trajectory(cfg, &limit)?;
    let per_eps: Vec<Vec<ResultRow>> = cfg
        .epsilon_list
        .par_iter()
        .map(|&eps| {
            let setup = setup_epsilon(cfg, eps)?;
            let op = crate::symbols::wick_quantize(&sym, &setup.basis, setup.model.grid.particle_dim())?;
            let micro = micro_trajectory(cfg, &setup)?;
            let mut rows = Vec::new();
            for ((t, state), (_, m_t)) in micro.iter().zip(&limits) {
                let a = micro_heisenberg_value(state, &op, s, t_op)?;
                let b = qc_heisenberg_value(m_t, &sym, s, t_op)?;
                let row = |metric: &str, value: f64| ResultRow { epsilon: eps, t: *t, metric: metric.into(), value };
                rows.push(row("heisenberg_micro_re", a.re));
                rows.push(row("heisenberg_micro_im", a.im));
                rows.push(row("heisenberg_qc_re", b.re));
                rows.push(row("heisenberg_qc_im", b.im));
                rows.push(row("heisenberg_discrepancy", (a - b).norm()));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentResult {
        name: format!("{}-heisenberg", cfg.name),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        rows: per_eps.into_iter().flatten().collect(),
        warnings,
    })
}

/// Heisenberg experiment with `S`, `T` and the symbol taken from the config.
pub fn run_configured_heisenberg(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let opts = cfg
        .heisenberg
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("config has no heisenberg section".into()))?;
    let k0 = crate::models::build_k0(&cfg.model).to_dense();
    let s = projector_or_identity(&k0, opts.s_projector)?;
    let t_op = projector_or_identity(&k0, opts.t_projector)?;
    run_heisenberg_experiment(cfg, &opts.symbol, &s, &t_op, opts.moment_delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::SuperpositionTerm;
    use crate::models::NuRegime;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::headline(NuRegime::Constant);
        cfg.model = crate::models::nelson_1d(8, 8.0, &[1.0], &[c(0.5, 0.0)], NuRegime::Constant, 0.4).unwrap();
        cfg.initial_state = InitialState::CoherentProduct { z0: FieldVector::from_pairs(&[(0.4, 0.2)]) };
        cfg.particle_state = ParticleStateSpec::K0Eigenstate { index: 0 };
        cfg.eta_test_set = vec![FieldVector::from_pairs(&[(0.0, 0.0)]), FieldVector::from_pairs(&[(0.6, -0.3)])];
        cfg.epsilon_list = vec![0.4, 0.2];
        cfg.times = vec![0.0, 0.5];
        cfg.observables.num_projectors = 3;
        cfg
    }

    #[test]
    fn coherent_product_at_time_zero_matches_gaussian_factor() {
        let cfg = small();
        let basis = build_basis(cfg.fock_spec(0.2).unwrap()).unwrap();
        let prep = build_initial_state(&cfg, &basis).unwrap();
        let eta = &cfg.eta_test_set[1];
        let obs = ObservableFamily::for_config(&cfg);
        let d = qc_distance(&prep.state, &basis, &prep.limit, std::slice::from_ref(eta), &obs).unwrap();
        // Γ̂(η) = m̂(η) e^{-ε‖η‖²/2}, so the identity distance is 1 − e^{-ε‖η‖²/2}
        let expected = 1.0 - (-0.2 * eta.norm_sqr() / 2.0).exp();
        assert!((d.total - expected).abs() < 1e-8, "{} vs {expected}", d.total);
        assert!(d.compact <= d.total + 1e-15);
    }

    #[test]
    fn superposition_rejects_close_points() {
        let mut cfg = small();
        cfg.initial_state = InitialState::CoherentSuperposition {
            terms: vec![
                SuperpositionTerm { amplitude: c(1.0, 0.0), z0: FieldVector::from_pairs(&[(0.3, 0.0)]) },
                SuperpositionTerm { amplitude: c(1.0, 0.0), z0: FieldVector::from_pairs(&[(-0.3, 0.0)]) },
            ],
        };
        let basis = build_basis(cfg.fock_spec(0.2).unwrap()).unwrap();
        assert!(matches!(build_initial_state(&cfg, &basis), Err(Error::PointsTooClose { .. })));
    }

    #[test]
    fn loss_of_mass_vanishes_on_compacts() {
        let mut cfg = small();
        cfg.initial_state = InitialState::LossOfMass { z0: FieldVector::from_pairs(&[(0.2, 0.0)]), scale: 1.0 };
        let basis = build_basis(cfg.fock_spec(0.2).unwrap()).unwrap();
        let prep = build_initial_state(&cfg, &basis).unwrap();
        assert_eq!(prep.limit.total_mass(), 0.0);
        let obs = ObservableFamily::from_k0(&crate::models::build_k0(&cfg.model).to_dense(), 3, true);
        let d = qc_distance(&prep.state, &basis, &prep.limit, &cfg.eta_test_set, &obs).unwrap();
        // n(0.2) = 5 lies outside the three lowest projectors
        assert!(d.compact < 1e-12);
        assert!((d.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_sweep_produces_rows() {
        let cfg = small();
        let res = run_convergence_experiment(&cfg).unwrap();
        assert_eq!(res.config_hash, cfg.hash());
        for &eps in &cfg.epsilon_list {
            for &t in &cfg.times {
                assert!(res.value(eps, t, "qc_distance_total").is_some());
                assert_eq!(res.value(eps, t, "moment_bound_holds_d1"), Some(1.0));
                assert!((res.value(eps, t, "measure_mass").unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heisenberg_at_time_zero_is_exact_for_coherent_states() {
        let cfg = small();
        let k0 = crate::models::build_k0(&cfg.model).to_dense();
        let s = projector_or_identity(&k0, Some(0)).unwrap();
        let id = projector_or_identity(&k0, None).unwrap();
        let res = run_heisenberg_experiment(&cfg, &HeisenbergSymbolKind::Intensity, &s, &id, 1.0).unwrap();
        for &eps in &cfg.epsilon_list {
            assert!(res.value(eps, 0.0, "heisenberg_discrepancy").unwrap() < 1e-8);
        }
        assert!(res.warnings.is_empty());
        let warned = run_heisenberg_experiment(&cfg, &HeisenbergSymbolKind::Intensity, &s, &id, 0.25).unwrap();
        assert_eq!(warned.warnings.len(), 1);
    }
}
