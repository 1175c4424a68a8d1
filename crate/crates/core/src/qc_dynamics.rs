//! Quasi-classical evolution: the per-configuration propagator `U_{t,s}(z)`
//! generated by `K_0 + V_t(z)`, evolution of state-valued measures, the
//! interaction picture and the transport-equation residual.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FieldVector;
use crate::linalg::dense::{hermiticity_defect, unitary_propagator};
use crate::linalg::{c, DMat, I};
use crate::measures::{Sample, StateValuedMeasure};
use crate::models::{classical_field_flow, EffectiveModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    /// Second order: generator sampled at the step midpoint.
    MagnusMidpoint,
    /// First order: generator sampled at the left endpoint.
    ExponentialEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorConfig {
    pub integrator: Integrator,
    pub dt: f64,
    #[serde(default = "default_krylov_dim")]
    pub krylov_dim: usize,
    /// When set, each step is compared against two half steps and rejected above this.
    #[serde(default)]
    pub local_error_budget: Option<f64>,
}

fn default_krylov_dim() -> usize {
    30
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self { integrator: Integrator::MagnusMidpoint, dt: 1e-3, krylov_dim: 30, local_error_budget: None }
    }
}

impl PropagatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if self.krylov_dim < 2 {
            return Err(Error::InvalidParameter("krylov dimension must be >= 2".into()));
        }
        Ok(())
    }
}

/// Generator hermiticity tolerance checked at every step.
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;

fn step_propagator(model: &EffectiveModel, cfg: &PropagatorConfig, z: &FieldVector, t0: f64, h: f64) -> Result<DMat> {
    let tau = match cfg.integrator {
        Integrator::MagnusMidpoint => t0 + 0.5 * h,
        Integrator::ExponentialEuler => t0,
    };
    let gen = model.generator(z, tau)?;
    let defect = hermiticity_defect(&gen);
    if defect > HERMITICITY_TOLERANCE {
        return Err(Error::NotHermitian(defect));
    }
    Ok(unitary_propagator(&gen, h))
}

/// `U_{t,s}(z)` solving `i∂_t U = (K_0 + V_t(z)) U`, `U_{s,s} = 1`.
pub fn propagator(model: &EffectiveModel, cfg: &PropagatorConfig, z: &FieldVector, s: f64, t: f64) -> Result<DMat> {
    cfg.validate()?;
    let p = model.particle_dim();
    let mut u = DMat::identity(p, p);
    if t == s {
        return Ok(u);
    }
    let n = ((t - s).abs() / cfg.dt - 1e-9).ceil().max(1.0) as usize;
    let h = (t - s) / n as f64;
    for step in 0..n {
        let t0 = s + step as f64 * h;
        let full = step_propagator(model, cfg, z, t0, h)?;
        if let Some(budget) = cfg.local_error_budget {
            let halves = step_propagator(model, cfg, z, t0 + 0.5 * h, 0.5 * h)?
                * step_propagator(model, cfg, z, t0, 0.5 * h)?;
            let estimate = (&full - &halves).norm();
            if estimate > budget {
                return Err(Error::StepRejected { t: t0, estimate, budget });
            }
        }
        u = full * u;
    }
    Ok(u)
}

/// `U γ U†`.
pub fn conjugate(u: &DMat, gamma: &DMat) -> DMat {
    u * gamma * u.adjoint()
}

/// `U_{t,s}(z) γ U_{t,s}(z)†`.
pub fn propagate_sample(
    model: &EffectiveModel,
    cfg: &PropagatorConfig,
    z: &FieldVector,
    gamma: &DMat,
    s: f64,
    t: f64,
) -> Result<DMat> {
    if gamma.nrows() != model.particle_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.particle_dim(),
            got: gamma.nrows(),
            context: "sample state vs model particle dimension",
        });
    }
    Ok(conjugate(&propagator(model, cfg, z, s, t)?, gamma))
}

/// `m_t`: atoms at `e^{-itνω} z_k` carrying `U_{t,0}(z_k) γ_k U_{t,0}(z_k)†`.
pub fn evolve_measure(
    model: &EffectiveModel,
    cfg: &PropagatorConfig,
    m: &StateValuedMeasure,
    t: f64,
) -> Result<StateValuedMeasure> {
    let samples = m
        .samples
        .par_iter()
        .map(|s| {
            let state = propagate_sample(model, cfg, &s.point, &s.state, 0.0, t)?;
            Ok(Sample { weight: s.weight, point: classical_field_flow(model.config(), &s.point, t), state })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StateValuedMeasure { particle_dim: m.particle_dim, samples })
}

/// `m_τ` at each requested (ascending) time, reusing the propagator between nodes.
pub fn measure_trajectory(
    model: &EffectiveModel,
    cfg: &PropagatorConfig,
    m: &StateValuedMeasure,
    times: &[f64],
) -> Result<Vec<(f64, StateValuedMeasure)>> {
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("trajectory times must be ascending".into()));
    }
    let per_sample: Vec<Vec<DMat>> = m
        .samples
        .par_iter()
        .map(|s| {
            let p = model.particle_dim();
            let mut u = DMat::identity(p, p);
            let mut last = 0.0;
            let mut out = Vec::with_capacity(times.len());
            for &t in times {
                u = propagator(model, cfg, &s.point, last, t)? * u;
                last = t;
                out.push(conjugate(&u, &s.state));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(n, &t)| {
            let samples = m
                .samples
                .iter()
                .zip(&per_sample)
                .map(|(s, states)| Sample {
                    weight: s.weight,
                    point: classical_field_flow(model.config(), &s.point, t),
                    state: states[n].clone(),
                })
                .collect();
            (t, StateValuedMeasure { particle_dim: m.particle_dim, samples })
        })
        .collect())
}

/// `n_t`: points `e^{+itνω} z`, states `e^{itK_0} γ e^{-itK_0}`.
pub fn interaction_picture_measure(model: &EffectiveModel, m_t: &StateValuedMeasure, t: f64) -> StateValuedMeasure {
    free_rotation(model, m_t, -t)
}

/// Inverse of [`interaction_picture_measure`].
pub fn schrodinger_picture_measure(model: &EffectiveModel, n_t: &StateValuedMeasure, t: f64) -> StateValuedMeasure {
    free_rotation(model, n_t, t)
}

fn free_rotation(model: &EffectiveModel, m: &StateValuedMeasure, t: f64) -> StateValuedMeasure {
    let u = unitary_propagator(model.k0(), t);
    let samples = m
        .samples
        .iter()
        .map(|s| Sample {
            weight: s.weight,
            point: classical_field_flow(model.config(), &s.point, t),
            state: conjugate(&u, &s.state),
        })
        .collect();
    StateValuedMeasure { particle_dim: m.particle_dim, samples }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    Trapezoid,
    Simpson,
}

/// Composite quadrature weights for `n` equally spaced nodes with spacing `h`.
pub fn quadrature_weights(rule: Quadrature, n: usize, h: f64) -> Result<Vec<f64>> {
    match rule {
        Quadrature::Trapezoid => {
            if n < 2 {
                return Err(Error::InsufficientSampling(format!("trapezoid needs >= 2 nodes, got {n}")));
            }
            let mut w = vec![h; n];
            w[0] = 0.5 * h;
            w[n - 1] = 0.5 * h;
            Ok(w)
        }
        Quadrature::Simpson => {
            if n < 3 || n.is_multiple_of(2) {
                return Err(Error::InsufficientSampling(format!(
                    "Simpson needs an odd number (>= 3) of nodes, got {n}"
                )));
            }
            Ok((0..n)
                .map(|i| {
                    let f = if i == 0 || i == n - 1 {
                        1.0
                    } else if i % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    f * h / 3.0
                })
                .collect())
        }
    }
}

pub(crate) fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::InsufficientSampling("trajectory needs at least two nodes".into()));
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if times.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.abs().max(1e-300)) {
        return Err(Error::InsufficientSampling("trajectory nodes must be equally spaced".into()));
    }
    Ok(h)
}

/// Residual of the transport equation on `[s, t]` (the trajectory's first and last node)
/// for a Schrödinger-picture trajectory `τ ↦ m_τ`:
/// `n̂_t(η) − n̂_s(η) + i ∫ Σ_k w_k e^{iτK_0}[V(z_k(τ)), γ_k(τ)]e^{-iτK_0} e^{2iRe⟨η, y_k⟩} dτ`,
/// with `y_k = e^{iτνω} z_k(τ)` the interaction-picture point.
pub fn transport_residual(
    model: &EffectiveModel,
    trajectory: &[(f64, StateValuedMeasure)],
    eta: &FieldVector,
    rule: Quadrature,
) -> Result<DMat> {
    let times: Vec<f64> = trajectory.iter().map(|(t, _)| *t).collect();
    let h = check_uniform(&times)?;
    let weights = quadrature_weights(rule, times.len(), h)?;
    let n0 = trajectory[0].1.len();
    if trajectory.iter().any(|(_, m)| m.len() != n0) {
        return Err(Error::InsufficientSampling("sample count changes along the trajectory".into()));
    }
    let integrand = |(tau, m): &(f64, StateValuedMeasure)| -> Result<DMat> {
        let p = m.particle_dim;
        let mut acc = DMat::zeros(p, p);
        for s in &m.samples {
            let v = model.potential(&s.point)?;
            let y = classical_field_flow(model.config(), &s.point, -tau);
            let phase = num_complex::Complex64::from_polar(s.weight, 2.0 * eta.inner(&y).re);
            acc += (&v * &s.state - &s.state * &v) * phase;
        }
        let u = unitary_propagator(model.k0(), -tau);
        Ok(&u * acc * u.adjoint())
    };
    let values: Vec<DMat> = trajectory.par_iter().map(integrand).collect::<Result<_>>()?;
    let p = trajectory[0].1.particle_dim;
    let mut integral = DMat::zeros(p, p);
    for (v, w) in values.iter().zip(&weights) {
        integral += v * c(*w, 0.0);
    }
    let (s, m_s) = &trajectory[0];
    let (t, m_t) = &trajectory[trajectory.len() - 1];
    let n_s = interaction_picture_measure(model, m_s, *s).fourier_transform(eta);
    let n_t = interaction_picture_measure(model, m_t, *t).fourier_transform(eta);
    Ok(n_t - n_s + integral * I)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{min_eigenvalue, projector, trace, trace_norm, unitarity_defect};
    use crate::linalg::{DVec, C64};
    use crate::models::{build_k0, nelson_1d, NuRegime};
    use std::f64::consts::PI;

    fn model(coupling: f64, regime: NuRegime) -> EffectiveModel {
        let cfg = nelson_1d(8, 2.0 * PI, &[1.0], &[c(coupling, 0.0)], regime, 0.1).unwrap();
        EffectiveModel::new(&cfg).unwrap()
    }

    fn gaussian_state(p: usize) -> DMat {
        let v = DVec::from_fn(p, |i, _| {
            let x = i as f64 - p as f64 / 2.0;
            C64::from_polar((-x * x / 4.0).exp(), 0.3 * i as f64)
        });
        projector(&(&v / c(v.norm(), 0.0)))
    }

    fn z0() -> FieldVector {
        FieldVector::from_pairs(&[(0.5, 0.3)])
    }

    #[test]
    fn zero_field_is_free_evolution() {
        let m = model(0.8, NuRegime::Free);
        let cfg = PropagatorConfig::default();
        let g = gaussian_state(8);
        let out = propagate_sample(&m, &cfg, &FieldVector::zeros(1), &g, 0.0, 0.7).unwrap();
        let u = unitary_propagator(m.k0(), 0.7);
        assert!((out - conjugate(&u, &g)).norm() < 1e-12);
    }

    #[test]
    fn frozen_regime_matches_dense_exponential() {
        let m = model(0.8, NuRegime::Constant);
        let cfg = PropagatorConfig { dt: 0.05, ..Default::default() };
        let u = propagator(&m, &cfg, &z0(), 0.2, 1.2).unwrap();
        let exact = unitary_propagator(&m.generator(&z0(), 0.0).unwrap(), 1.0);
        assert!((u - exact).norm() < 1e-8);
    }

    #[test]
    fn group_property_and_time_reversal() {
        let m = model(0.8, NuRegime::Free);
        let cfg = PropagatorConfig { dt: 1e-3, ..Default::default() };
        let u10 = propagator(&m, &cfg, &z0(), 0.0, 1.0).unwrap();
        let u15 = propagator(&m, &cfg, &z0(), 0.5, 1.0).unwrap();
        let u05 = propagator(&m, &cfg, &z0(), 0.0, 0.5).unwrap();
        assert!((u15 * u05 - &u10).norm() < 1e-7);
        let back = propagator(&m, &cfg, &z0(), 1.0, 0.0).unwrap();
        assert!((back * u10 - DMat::identity(8, 8)).norm() < 1e-7);
    }

    #[test]
    fn trace_and_positivity_preserved() {
        let m = model(0.8, NuRegime::Free);
        let cfg = PropagatorConfig { dt: 1e-2, ..Default::default() };
        let out = propagate_sample(&m, &cfg, &z0(), &gaussian_state(8), 0.0, 2.0).unwrap();
        assert!((trace(&out).re - 1.0).abs() < 1e-9);
        assert!(min_eigenvalue(&out) > -1e-9);
        assert!(unitarity_defect(&propagator(&m, &cfg, &z0(), 0.0, 2.0).unwrap()) < 1e-10);
    }

    #[test]
    fn step_budget_rejects_coarse_steps() {
        let m = model(0.8, NuRegime::Free);
        let cfg = PropagatorConfig { dt: 0.5, local_error_budget: Some(1e-12), ..Default::default() };
        assert!(matches!(propagator(&m, &cfg, &z0(), 0.0, 1.0), Err(Error::StepRejected { .. })));
    }

    #[test]
    fn evolve_measure_decoupled_closed_form() {
        let m = model(0.0, NuRegime::Free);
        let cfg = PropagatorConfig::default();
        let g = gaussian_state(8);
        let mu = StateValuedMeasure::dirac(z0(), g.clone(), 1.0).unwrap();
        let t = 0.9;
        let out = evolve_measure(&m, &cfg, &mu, t).unwrap();
        let u = unitary_propagator(&build_k0(m.config()).to_dense(), t);
        assert!((out.samples[0].state.clone() - conjugate(&u, &g)).norm() < 1e-9);
        let w = m.config().dispersion[0];
        assert!(out.samples[0].point.sub(&z0().rotate(&[-t * w])).norm() < 1e-14);
        assert_eq!(out.total_mass(), mu.total_mass());
        assert_eq!(evolve_measure(&m, &cfg, &mu, 0.0).unwrap(), mu);
    }

    #[test]
    fn interaction_picture_round_trip_and_free_invariance() {
        let m = model(0.0, NuRegime::Free);
        let cfg = PropagatorConfig::default();
        let mu = StateValuedMeasure::dirac(z0(), gaussian_state(8), 1.0).unwrap();
        let m_t = evolve_measure(&m, &cfg, &mu, 0.6).unwrap();
        let n_t = interaction_picture_measure(&m, &m_t, 0.6);
        assert!((n_t.samples[0].state.clone() - &mu.samples[0].state).norm() < 1e-9);
        assert!(n_t.samples[0].point.sub(&z0()).norm() < 1e-14);
        let back = schrodinger_picture_measure(&m, &n_t, 0.6);
        assert!((back.samples[0].state.clone() - &m_t.samples[0].state).norm() < 1e-12);
    }

    #[test]
    fn transport_residual_small_for_solution_and_large_for_corruption() {
        let m = model(0.8, NuRegime::Free);
        let cfg = PropagatorConfig { dt: 1e-3, ..Default::default() };
        let mu = StateValuedMeasure::dirac(z0(), gaussian_state(8), 1.0).unwrap();
        let times: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let traj = measure_trajectory(&m, &cfg, &mu, &times).unwrap();
        let eta = FieldVector::from_pairs(&[(0.3, -0.2)]);
        let r = transport_residual(&m, &traj, &eta, Quadrature::Simpson).unwrap();
        assert!(trace_norm(&r) < 1e-6, "{}", trace_norm(&r));
        let mut bad = traj.clone();
        let last = bad.len() - 1;
        bad[last].1.samples[0].state = bad[last].1.samples[0].state.transpose();
        let r = transport_residual(&m, &bad, &eta, Quadrature::Simpson).unwrap();
        assert!(trace_norm(&r) > 1e-3);
        assert!(transport_residual(&m, &traj[..2], &eta, Quadrature::Simpson).is_err());
    }

    #[test]
    fn decoupled_transport_residual_vanishes() {
        let m = model(0.0, NuRegime::Free);
        let cfg = PropagatorConfig::default();
        let mu = StateValuedMeasure::dirac(z0(), gaussian_state(8), 1.0).unwrap();
        let times: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        let traj = measure_trajectory(&m, &cfg, &mu, &times).unwrap();
        let r = transport_residual(&m, &traj, &z0(), Quadrature::Trapezoid).unwrap();
        assert!(trace_norm(&r) < 1e-10);
    }
}
