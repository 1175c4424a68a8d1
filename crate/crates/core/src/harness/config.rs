//! Experiment configuration (JSON) and its validation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock::FieldVector;
use crate::linalg::{c, C64};
use crate::micro::MicroConfig;
use crate::models::{nelson_1d, ModelConfig, NuRegime};
use crate::qc_dynamics::{Integrator, PropagatorConfig};

/// Particle factor of the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ParticleStateSpec {
    /// `index`-th eigenvector of `K_0` (ascending).
    K0Eigenstate { index: usize },
    /// Periodized Gaussian packet on the single-particle grid (one particle, any `d`).
    Gaussian { center: Vec<f64>, width: f64, momentum: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperpositionTerm {
    #[serde(with = "crate::serde_complex::complex")]
    pub amplitude: C64,
    pub z0: FieldVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InitialState {
    /// `γ ⊗ |z0⟩⟨z0|`, limit `δ_{z0}` carrying `γ`.
    CoherentProduct { z0: FieldVector },
    /// `γ ⊗ Σ_j c_j |z_j⟩` (normalized), limit `Σ_j |c_j|² δ_{z_j}`.
    CoherentSuperposition { terms: Vec<SuperpositionTerm> },
    /// `|e_{n(ε)}⟩⟨e_{n(ε)}| ⊗ |z0⟩⟨z0|` with `n(ε) = floor(scale/ε)`; limit is the zero measure.
    LossOfMass {
        z0: FieldVector,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableSpec {
    /// Rank-one projectors onto the lowest `num_projectors` eigenvectors of `K_0`.
    pub num_projectors: usize,
    pub include_identity: bool,
}

impl Default for ObservableSpec {
    fn default() -> Self {
        Self { num_projectors: 8, include_identity: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeisenbergSymbolKind {
    /// `Σ_j 2Re⟨z, λ(x_j)⟩`, degree one.
    Nelson,
    /// `Σ_j |⟨z, λ(x_j)⟩|²`, one creation and one annihilation factor.
    Intensity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeisenbergOptions {
    pub symbol: HeisenbergSymbolKind,
    /// `S` is the projector onto this `K_0` eigenvector, or the identity.
    #[serde(default)]
    pub s_projector: Option<usize>,
    #[serde(default)]
    pub t_projector: Option<usize>,
    /// Moment regularity `δ` of the initial family, for the `(ℓ+m)/2 < 2δ` precondition.
    #[serde(default = "one")]
    pub moment_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSettings {
    /// Exponents for the propagation bound.
    #[serde(default = "default_deltas")]
    pub moment_bound_deltas: Vec<f64>,
    #[serde(default = "default_moment_order")]
    pub moment_order: u32,
    #[serde(default = "default_simple_symbol_levels")]
    pub simple_symbol_levels: Vec<usize>,
}

fn default_deltas() -> Vec<f64> {
    vec![0.5, 1.0]
}

fn default_moment_order() -> u32 {
    2
}

fn default_simple_symbol_levels() -> Vec<usize> {
    vec![5, 10, 20, 40]
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self { moment_bound_deltas: default_deltas(), moment_order: default_moment_order(), simple_symbol_levels: default_simple_symbol_levels() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Required ratio final/initial distance along the sweep.
    pub convergence_ratio: f64,
    /// Largest allowed moment-matching discrepancy at the smallest ε.
    pub moment_gap_final: f64,
    /// Allowed deviation of the measure mass from one.
    pub mass: f64,
    pub ccr: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { convergence_ratio: 0.5, moment_gap_final: 0.05, mass: 1e-6, ccr: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// The model's own `epsilon` is replaced by each entry of `epsilon_list`.
    pub model: ModelConfig,
    pub initial_state: InitialState,
    pub particle_state: ParticleStateSpec,
    pub epsilon_list: Vec<f64>,
    pub times: Vec<f64>,
    pub eta_test_set: Vec<FieldVector>,
    /// Extra seeded random test vectors with norm up to `random_eta_radius`.
    #[serde(default)]
    pub random_etas: usize,
    #[serde(default = "one")]
    pub random_eta_radius: f64,
    #[serde(default)]
    pub observables: ObservableSpec,
    /// `C` in the cap heuristic `N_cap = ceil(8 C / ε)`.
    pub moment_bound: f64,
    /// Overrides the heuristic cap for every ε.
    #[serde(default)]
    pub quanta_cap: Option<usize>,
    #[serde(default)]
    pub propagator: PropagatorConfig,
    #[serde(default)]
    pub micro: MicroConfig,
    #[serde(default)]
    pub checks: CheckSettings,
    #[serde(default)]
    pub heisenberg: Option<HeisenbergOptions>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> String {
    "experiment".into()
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if self.epsilon_list.is_empty() {
            return Err(Error::InvalidParameter("epsilon_list is empty".into()));
        }
        if self.epsilon_list.iter().any(|e| !(*e > 0.0)) || self.epsilon_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidParameter("epsilon_list must be positive and strictly decreasing".into()));
        }
        if self.times.is_empty()
            || self.times.iter().any(|t| !t.is_finite() || *t < 0.0)
            || self.times.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(Error::InvalidParameter("times must be nonnegative and strictly increasing".into()));
        }
        if self.eta_test_set.is_empty() && self.random_etas == 0 {
            return Err(Error::InvalidParameter("the η test set is empty".into()));
        }
        let m = self.model.num_modes();
        let check_len = |z: &FieldVector, what: &str| {
            if z.len() != m {
                Err(Error::InconsistentModes(format!("{what} has {} components for {m} modes", z.len())))
            } else {
                Ok(())
            }
        };
        for eta in &self.eta_test_set {
            check_len(eta, "η test vector")?;
        }
        match &self.initial_state {
            InitialState::CoherentProduct { z0 } | InitialState::LossOfMass { z0, .. } => check_len(z0, "z0")?,
            InitialState::CoherentSuperposition { terms } => {
                if terms.is_empty() {
                    return Err(Error::InvalidParameter("superposition has no terms".into()));
                }
                for t in terms {
                    check_len(&t.z0, "superposition point")?;
                }
            }
        }
        if let ParticleStateSpec::Gaussian { center, momentum, width } = &self.particle_state {
            if center.len() != self.model.grid.dimension || momentum.len() != self.model.grid.dimension {
                return Err(Error::InvalidParameter("Gaussian centre/momentum must have grid dimension".into()));
            }
            if !(*width > 0.0) {
                return Err(Error::InvalidParameter("Gaussian width must be positive".into()));
            }
            if self.model.grid.particles != 1 {
                return Err(Error::InvalidParameter("Gaussian packets are defined for one particle".into()));
            }
        }
        if !(self.moment_bound > 0.0) {
            return Err(Error::InvalidParameter("moment_bound must be positive".into()));
        }
        self.propagator.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// SHA-256 of the compact JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Truncated Fock spec at a given ε.
    pub fn fock_spec(&self, epsilon: f64) -> Result<crate::fock::FockSpec> {
        let m = self.model.num_modes();
        match self.quanta_cap {
            Some(cap) => crate::fock::FockSpec::new(m, cap, epsilon),
            None => crate::fock::FockSpec::from_moment_bound(m, self.moment_bound, epsilon),
        }
    }

    /// Model at a given ε.
    pub fn model_at(&self, epsilon: f64) -> ModelConfig {
        self.model.with_epsilon(epsilon)
    }

    /// Explicit test vectors followed by the seeded random ones.
    pub fn etas(&self) -> Vec<FieldVector> {
        let mut out = self.eta_test_set.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let m = self.model.num_modes();
        for _ in 0..self.random_etas {
            let raw: Vec<C64> = (0..m).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let v = FieldVector::new(raw);
            let scale = self.random_eta_radius * rng.random::<f64>() / v.norm().max(1e-300);
            out.push(v.scale(c(scale, 0.0)));
        }
        out
    }

    /// The one-dimensional Nelson setting used for the convergence study.
    pub fn headline(regime: NuRegime) -> Self {
        let model = nelson_1d(16, 2.0 * std::f64::consts::PI, &[1.0, 2.0], &[c(0.5, 0.0), c(0.4, 0.0)], regime, 0.4)
            .expect("headline model is valid");
        let eta_test_set = vec![
            FieldVector::from_pairs(&[(0.0, 0.0), (0.0, 0.0)]),
            FieldVector::from_pairs(&[(0.5, 0.0), (0.0, 0.0)]),
            FieldVector::from_pairs(&[(0.0, 0.5), (0.0, 0.0)]),
            FieldVector::from_pairs(&[(0.0, 0.0), (0.5, 0.0)]),
            FieldVector::from_pairs(&[(0.0, 0.0), (0.0, -0.5)]),
            FieldVector::from_pairs(&[(1.0, 0.0), (0.0, 0.0)]),
            FieldVector::from_pairs(&[(0.0, 0.0), (0.0, 1.0)]),
            FieldVector::from_pairs(&[(0.7, 0.7), (0.0, 0.0)]),
            FieldVector::from_pairs(&[(0.5, -0.3), (0.4, 0.6)]),
            FieldVector::from_pairs(&[(-0.8, 0.2), (0.3, -0.9)]),
        ];
        Self {
            name: format!("nelson-1d-{}", match regime {
                NuRegime::Constant => "constant",
                NuRegime::Free => "free",
            }),
            model,
            initial_state: InitialState::CoherentProduct { z0: FieldVector::from_pairs(&[(0.5, 0.0), (0.0, 0.5)]) },
            particle_state: ParticleStateSpec::Gaussian { center: vec![std::f64::consts::PI], width: 0.6, momentum: vec![1.0] },
            epsilon_list: vec![0.4, 0.2, 0.1, 0.05],
            times: vec![0.25, 0.5, 1.0],
            eta_test_set,
            random_etas: 0,
            random_eta_radius: 1.0,
            observables: ObservableSpec::default(),
            moment_bound: 1.0,
            quanta_cap: None,
            propagator: PropagatorConfig { integrator: Integrator::MagnusMidpoint, dt: 1e-3, krylov_dim: 30, local_error_budget: None },
            micro: MicroConfig::default(),
            checks: CheckSettings::default(),
            heisenberg: Some(HeisenbergOptions {
                symbol: HeisenbergSymbolKind::Nelson,
                s_projector: Some(0),
                t_projector: None,
                moment_delta: 1.0,
            }),
            tolerances: Tolerances::default(),
            seed: 7,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_round_trips_and_hashes_stably() {
        let cfg = ExperimentConfig::headline(NuRegime::Free);
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json_pretty().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_eq!(cfg.hash().len(), 64);
        assert_ne!(cfg.hash(), ExperimentConfig::headline(NuRegime::Constant).hash());
    }

    #[test]
    fn rejects_non_decreasing_epsilons() {
        let mut cfg = ExperimentConfig::headline(NuRegime::Free);
        cfg.epsilon_list = vec![0.1, 0.2];
        assert!(cfg.validate().is_err());
        cfg.epsilon_list = vec![0.2, 0.2];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn random_etas_are_seeded() {
        let mut cfg = ExperimentConfig::headline(NuRegime::Free);
        cfg.random_etas = 3;
        let a = cfg.etas();
        assert_eq!(a.len(), cfg.eta_test_set.len() + 3);
        assert_eq!(a, cfg.etas());
        assert!(a[cfg.eta_test_set.len()..].iter().all(|e| e.norm() <= 1.0 + 1e-12));
        cfg.seed += 1;
        assert_ne!(a, cfg.etas());
    }
}
