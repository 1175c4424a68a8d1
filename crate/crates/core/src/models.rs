//! Concrete model assembly: particle grid and kinetic operator, field modes,
//! the Nelson Hamiltonian and the effective (quasi-classical) generators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{second_quantize, FieldVector, FockBasis};
use crate::linalg::{c, DMat, SpaceTag, SparseOp, C64, I, ZERO};
use crate::symbols::{evaluate_symbol, particle_indices, wick_quantize, FormFactor, SymbolSpec};

/// Periodic box `[0, L)^d` sampled with `n` points per axis, shared by `N` particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleGrid {
    pub dimension: usize,
    pub points_per_axis: usize,
    pub box_length: f64,
    pub particles: usize,
    /// Harmonic trap strength `κ` in `½κ|x − L/2|²`, per particle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confinement: Option<f64>,
}

impl ParticleGrid {
    pub fn new(dimension: usize, points_per_axis: usize, box_length: f64, particles: usize) -> Result<Self> {
        let g = Self { dimension, points_per_axis, box_length, particles, confinement: None };
        g.validate()?;
        Ok(g)
    }

    pub fn with_confinement(mut self, kappa: f64) -> Self {
        self.confinement = Some(kappa);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.points_per_axis == 0 || self.particles == 0 {
            return Err(Error::InvalidParameter("grid dimension, points and particles must be >= 1".into()));
        }
        if !(self.box_length > 0.0) || !self.box_length.is_finite() {
            return Err(Error::InvalidParameter(format!("box length must be positive, got {}", self.box_length)));
        }
        if let Some(k) = self.confinement {
            if !(k >= 0.0) {
                return Err(Error::InvalidParameter(format!("confinement must be >= 0, got {k}")));
            }
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.points_per_axis as f64
    }

    /// Points in the single-particle grid, `n^d`.
    pub fn single_dim(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    /// Particle Hilbert dimension `(n^d)^N`.
    pub fn particle_dim(&self) -> usize {
        self.single_dim().pow(self.particles as u32)
    }

    /// Axis indices of single-particle point `i` (axis 0 most significant).
    pub fn axis_indices(&self, i: usize) -> Vec<usize> {
        particle_indices(i, self.points_per_axis, self.dimension)
    }

    fn point_index(&self, axes: &[usize]) -> usize {
        axes.iter().fold(0, |acc, &a| acc * self.points_per_axis + a)
    }

    pub fn single_points(&self) -> Vec<Vec<f64>> {
        let h = self.spacing();
        (0..self.single_dim())
            .map(|i| self.axis_indices(i).iter().map(|&a| a as f64 * h).collect())
            .collect()
    }

    /// Index of the neighbour of `i` shifted by `step` along `axis`, periodically.
    fn neighbour(&self, i: usize, axis: usize, step: isize) -> usize {
        let mut ax = self.axis_indices(i);
        let n = self.points_per_axis as isize;
        ax[axis] = (ax[axis] as isize + step).rem_euclid(n) as usize;
        self.point_index(&ax)
    }

    /// Single-particle `−Δ` (periodic second-order differences) plus the trap.
    pub fn single_kinetic(&self) -> SparseOp {
        let g = self.single_dim();
        let inv_h2 = 1.0 / (self.spacing() * self.spacing());
        let centre = self.box_length / 2.0;
        let points = self.single_points();
        let mut t = Vec::new();
        for i in 0..g {
            let mut diag = 2.0 * self.dimension as f64 * inv_h2;
            if let Some(kappa) = self.confinement {
                diag += 0.5 * kappa * points[i].iter().map(|x| (x - centre).powi(2)).sum::<f64>();
            }
            t.push((i, i, c(diag, 0.0)));
            for axis in 0..self.dimension {
                for step in [-1isize, 1] {
                    t.push((i, self.neighbour(i, axis, step), c(-inv_h2, 0.0)));
                }
            }
        }
        SparseOp::from_triplets(g, g, t, SpaceTag::Particle)
    }

    /// Single-particle `−i ∂_axis` by periodic central differences.
    pub fn single_momentum(&self, axis: usize) -> SparseOp {
        let g = self.single_dim();
        let s = 1.0 / (2.0 * self.spacing());
        let mut t = Vec::new();
        for i in 0..g {
            t.push((i, self.neighbour(i, axis, 1), -I * s));
            t.push((i, self.neighbour(i, axis, -1), I * s));
        }
        SparseOp::from_triplets(g, g, t, SpaceTag::Particle)
    }

    /// `Σ_j` of a single-particle operator acting on particle `j`.
    pub fn sum_over_particles(&self, single: &SparseOp) -> SparseOp {
        let g = self.single_dim();
        let n = self.particles;
        let mut total = SparseOp::zeros(self.particle_dim(), self.particle_dim(), SpaceTag::Particle);
        for j in 0..n {
            let before = g.pow(j as u32);
            let after = g.pow((n - 1 - j) as u32);
            let embedded = single.kron_identity(after, SpaceTag::Particle).identity_kron(before, SpaceTag::Particle);
            total = total.add(&embedded).expect("shapes agree by construction");
        }
        total
    }
}

/// Discrete field modes; quadrature weights get folded into the coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldModes {
    pub wave_numbers: Vec<Vec<f64>>,
    pub quadrature_weights: Vec<f64>,
}

impl FieldModes {
    pub fn len(&self) -> usize {
        self.wave_numbers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wave_numbers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuRegime {
    /// `ν(ε) = 1`, so `ν = 0`: the classical field is frozen.
    Constant,
    /// `ν(ε) = 1/ε`, so `ν = 1`: the field rotates freely.
    Free,
}

impl NuRegime {
    pub fn nu_of_epsilon(self, epsilon: f64) -> f64 {
        match self {
            NuRegime::Constant => 1.0,
            NuRegime::Free => 1.0 / epsilon,
        }
    }

    /// `ν = lim ε ν(ε)`.
    pub fn nu(self) -> f64 {
        match self {
            NuRegime::Constant => 0.0,
            NuRegime::Free => 1.0,
        }
    }
}

/// Which effective potential the quasi-classical side uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum EffectiveKind {
    #[default]
    Nelson,
    /// Coupling `φ(x;k) = α e^{-ik·x} / |k|^{(d-1)/2}` split at `|k| = r`.
    Polaron { alpha: f64, cutoff_radius: f64 },
    /// One real polarization vector (length `d`) per mode.
    PauliFierz { polarizations: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub grid: ParticleGrid,
    pub modes: FieldModes,
    pub dispersion: Vec<f64>,
    /// `λ0_k` before the quadrature weight is folded in.
    #[serde(with = "crate::serde_complex::complex_vec")]
    pub coupling: Vec<C64>,
    pub nu_regime: NuRegime,
    pub epsilon: f64,
    #[serde(default)]
    pub effective: EffectiveKind,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let m = self.modes.len();
        if m == 0 {
            return Err(Error::InvalidParameter("at least one field mode is required".into()));
        }
        for (what, len) in [
            ("quadrature weights", self.modes.quadrature_weights.len()),
            ("dispersion", self.dispersion.len()),
            ("coupling", self.coupling.len()),
        ] {
            if len != m {
                return Err(Error::InconsistentModes(format!("{what} has {len} entries for {m} modes")));
            }
        }
        if self.modes.wave_numbers.iter().any(|k| k.len() != self.grid.dimension) {
            return Err(Error::InconsistentModes("wave number dimension differs from grid dimension".into()));
        }
        if let Some((mode, &value)) = self.dispersion.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
            return Err(Error::NegativeDispersion { mode, value });
        }
        if self.modes.quadrature_weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter("quadrature weights must be nonnegative".into()));
        }
        if self.coupling.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
            return Err(Error::InvalidParameter("coupling must be finite".into()));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if let EffectiveKind::PauliFierz { polarizations } = &self.effective {
            if polarizations.len() != m || polarizations.iter().any(|p| p.len() != self.grid.dimension) {
                return Err(Error::InconsistentModes("one d-vector polarization per mode is required".into()));
            }
        }
        Ok(())
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..self.clone() }
    }

    pub fn with_regime(&self, nu_regime: NuRegime) -> Self {
        Self { nu_regime, ..self.clone() }
    }

    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    /// `λ0_k √w_k`.
    pub fn weighted_coupling(&self) -> Vec<C64> {
        self.coupling
            .iter()
            .zip(&self.modes.quadrature_weights)
            .map(|(l, w)| l * w.sqrt())
            .collect()
    }

    pub fn form_factor(&self) -> Result<FormFactor> {
        FormFactor::plane_wave(&self.grid.single_points(), &self.modes.wave_numbers, &self.weighted_coupling())
    }

    /// `K = sup_x ‖λ(x)‖`.
    pub fn coupling_norm(&self) -> f64 {
        self.weighted_coupling().iter().map(|l| l.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn interaction_symbol(&self) -> Result<SymbolSpec> {
        SymbolSpec::nelson_interaction(self.form_factor()?, self.grid.particles)
    }

    fn wave_norm(&self, k: usize) -> f64 {
        self.modes.wave_numbers[k].iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

pub fn build_k0(cfg: &ModelConfig) -> SparseOp {
    cfg.grid.sum_over_particles(&cfg.grid.single_kinetic())
}

/// `K_0 ⊗ 1 + ν(ε) 1 ⊗ dG_ε(ω) + Σ_j φ_ε(λ(x_j))`.
pub fn build_nelson_hamiltonian(cfg: &ModelConfig, basis: &FockBasis) -> Result<SparseOp> {
    cfg.validate()?;
    if (basis.epsilon() - cfg.epsilon).abs() > 1e-15 * cfg.epsilon {
        return Err(Error::InvalidParameter(format!(
            "Fock basis built for epsilon {} but model has {}",
            basis.epsilon(),
            cfg.epsilon
        )));
    }
    if basis.num_modes() != cfg.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: cfg.num_modes(),
            got: basis.num_modes(),
            context: "Fock modes vs model modes",
        });
    }
    let p = cfg.grid.particle_dim();
    let f = basis.dim();
    let k0 = build_k0(cfg).kron_identity(f, SpaceTag::Joint);
    let field = second_quantize(basis, &cfg.dispersion)?
        .scale(c(cfg.nu_regime.nu_of_epsilon(cfg.epsilon), 0.0))
        .identity_kron(p, SpaceTag::Joint);
    let interaction = wick_quantize(&cfg.interaction_symbol()?, basis, p)?;
    k0.add(&field)?.add(&interaction)
}

/// `e^{-itνω} z`.
pub fn classical_field_flow(cfg: &ModelConfig, z: &FieldVector, t: f64) -> FieldVector {
    let nu = cfg.nu_regime.nu();
    if nu == 0.0 || t == 0.0 {
        return z.clone();
    }
    let phases: Vec<f64> = cfg.dispersion.iter().map(|w| -t * nu * w).collect();
    z.rotate(&phases)
}

/// Precomputed pieces of the effective generator `K_0 + V_t(z)`.
#[derive(Debug, Clone)]
pub struct EffectiveModel {
    cfg: ModelConfig,
    k0: DMat,
    nelson: SymbolSpec,
    extra: Extra,
}

#[derive(Debug, Clone)]
enum Extra {
    Nelson,
    Polaron { low: SymbolSpec, high: Vec<FormFactor>, momenta: Vec<SparseOp> },
    PauliFierz { potentials: Vec<FormFactor>, momenta: Vec<SparseOp> },
}

impl EffectiveModel {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = &cfg.grid;
        let points = grid.single_points();
        let k0 = build_k0(cfg).to_dense();
        let nelson = cfg.interaction_symbol()?;
        let momenta = || (0..grid.dimension).map(|a| grid.single_momentum(a)).collect::<Vec<_>>();
        let extra = match &cfg.effective {
            EffectiveKind::Nelson => Extra::Nelson,
            EffectiveKind::Polaron { alpha, cutoff_radius } => {
                let d = grid.dimension as f64;
                let m = cfg.num_modes();
                let phi: Vec<C64> = (0..m)
                    .map(|k| {
                        let kn = cfg.wave_norm(k);
                        let w = cfg.modes.quadrature_weights[k].sqrt();
                        if kn == 0.0 {
                            ZERO
                        } else {
                            c(alpha * w / kn.powf((d - 1.0) / 2.0), 0.0)
                        }
                    })
                    .collect();
                let low_profile: Vec<C64> = (0..m)
                    .map(|k| if cfg.wave_norm(k) <= *cutoff_radius { phi[k] } else { ZERO })
                    .collect();
                let low = SymbolSpec::nelson_interaction(
                    FormFactor::plane_wave(&points, &cfg.modes.wave_numbers, &low_profile)?,
                    grid.particles,
                )?;
                // λ_r(x;k) = 1_{|k|>r} k φ(x;k) / |k|², one form factor per axis
                let high = (0..grid.dimension)
                    .map(|a| {
                        let prof: Vec<C64> = (0..m)
                            .map(|k| {
                                let kn = cfg.wave_norm(k);
                                if kn > *cutoff_radius {
                                    phi[k] * (cfg.modes.wave_numbers[k][a] / (kn * kn))
                                } else {
                                    ZERO
                                }
                            })
                            .collect();
                        FormFactor::plane_wave(&points, &cfg.modes.wave_numbers, &prof)
                    })
                    .collect::<Result<_>>()?;
                Extra::Polaron { low, high, momenta: momenta() }
            }
            EffectiveKind::PauliFierz { polarizations } => {
                let base = cfg.weighted_coupling();
                let potentials = (0..grid.dimension)
                    .map(|a| {
                        let prof: Vec<C64> = base.iter().zip(polarizations).map(|(l, p)| l * p[a]).collect();
                        FormFactor::plane_wave(&points, &cfg.modes.wave_numbers, &prof)
                    })
                    .collect::<Result<_>>()?;
                Extra::PauliFierz { potentials, momenta: momenta() }
            }
        };
        Ok(Self { cfg: cfg.clone(), k0, nelson, extra })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn k0(&self) -> &DMat {
        &self.k0
    }

    pub fn particle_dim(&self) -> usize {
        self.k0.nrows()
    }

    /// `V(z)` for an already-flowed field point.
    pub fn potential(&self, z: &FieldVector) -> Result<DMat> {
        let p = self.particle_dim();
        let grid = &self.cfg.grid;
        match &self.extra {
            Extra::Nelson => Ok(DMat::from_diagonal(&evaluate_symbol(&self.nelson, z, p)?.into())),
            Extra::Polaron { low, high, momenta } => {
                let mut v = DMat::from_diagonal(&evaluate_symbol(low, z, p)?.into());
                for (lam, mom) in high.iter().zip(momenta) {
                    // [−i∂, 2i Im⟨λ_r, z⟩]
                    let g: Vec<C64> = lam.values().iter().map(|l| I * (2.0 * l.inner(z).im)).collect();
                    let g = SparseOp::diagonal(&g, SpaceTag::Particle);
                    let comm = mom.mul(&g)?.sub(&g.mul(mom)?)?;
                    v += grid.sum_over_particles(&comm).to_dense();
                }
                Ok(v)
            }
            Extra::PauliFierz { potentials, momenta } => {
                let mut v = DMat::zeros(p, p);
                for (lam, mom) in potentials.iter().zip(momenta) {
                    // P A + A P + A², A = 2Re⟨z, λ_a⟩
                    let a: Vec<C64> = lam.values().iter().map(|l| c(2.0 * z.inner(l).re, 0.0)).collect();
                    let a = SparseOp::diagonal(&a, SpaceTag::Particle);
                    let term = mom.mul(&a)?.add(&a.mul(mom)?)?.add(&a.mul(&a)?)?;
                    v += grid.sum_over_particles(&term).to_dense();
                }
                Ok(v)
            }
        }
    }

    /// `V_t(z) = V(e^{-itνω} z)`.
    pub fn potential_at(&self, z: &FieldVector, t: f64) -> Result<DMat> {
        self.potential(&classical_field_flow(&self.cfg, z, t))
    }

    /// `K_0 + V_t(z)`.
    pub fn generator(&self, z: &FieldVector, t: f64) -> Result<DMat> {
        Ok(&self.k0 + self.potential_at(z, t)?)
    }
}

/// `V_t(z)` as a dense particle operator.
pub fn effective_potential(cfg: &ModelConfig, z: &FieldVector, t: f64) -> Result<DMat> {
    EffectiveModel::new(cfg)?.potential_at(z, t)
}

/// `K_0 + V_t(z)`.
pub fn effective_generator(cfg: &ModelConfig, z: &FieldVector, t: f64) -> Result<DMat> {
    EffectiveModel::new(cfg)?.generator(z, t)
}

/// A small one-dimensional Nelson configuration: `ω_k = √(k² + 1)`, unit weights.
pub fn nelson_1d(
    points: usize,
    box_length: f64,
    wave_numbers: &[f64],
    coupling: &[C64],
    nu_regime: NuRegime,
    epsilon: f64,
) -> Result<ModelConfig> {
    let cfg = ModelConfig {
        grid: ParticleGrid::new(1, points, box_length, 1)?,
        modes: FieldModes {
            wave_numbers: wave_numbers.iter().map(|&k| vec![k]).collect(),
            quadrature_weights: vec![1.0; wave_numbers.len()],
        },
        dispersion: wave_numbers.iter().map(|k| (k * k + 1.0).sqrt()).collect(),
        coupling: coupling.to_vec(),
        nu_regime,
        epsilon,
        effective: EffectiveKind::Nelson,
    };
    cfg.validate()?;
    Ok(cfg)
}
