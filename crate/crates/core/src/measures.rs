//! State-valued measures as finite weighted ensembles `{(w_k, z_k, γ_k)}`.
//!
//! Weights carry the scalar measure, `γ_k` the normalized particle state
//! attached to each atom; the two are never mixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FieldVector;
use crate::linalg::dense::{min_eigenvalue, trace};
use crate::linalg::{c, DMat, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub weight: f64,
    pub point: FieldVector,
    #[serde(with = "crate::serde_complex::matrix")]
    pub state: DMat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateValuedMeasure {
    pub particle_dim: usize,
    pub samples: Vec<Sample>,
}

/// Tolerance used when validating that attached states are density matrices.
pub const STATE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `Σ w_k F(z_k) γ_k`.
    Left,
    /// `Σ w_k γ_k F(z_k)`.
    Right,
}

impl StateValuedMeasure {
    pub fn new(particle_dim: usize, samples: Vec<Sample>) -> Result<Self> {
        let m = Self { particle_dim, samples };
        m.validate(STATE_TOLERANCE)?;
        Ok(m)
    }

    /// The zero measure.
    pub fn zero(particle_dim: usize) -> Self {
        Self { particle_dim, samples: Vec::new() }
    }

    /// `w δ_{z0}` carrying state `γ`.
    pub fn dirac(point: FieldVector, state: DMat, weight: f64) -> Result<Self> {
        let p = state.nrows();
        Self::new(p, vec![Sample { weight, point, state }])
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let m = self.samples.first().map(|s| s.point.len());
        for (k, s) in self.samples.iter().enumerate() {
            if !(s.weight >= 0.0) || !s.weight.is_finite() {
                return Err(Error::InvalidState(format!("sample {k} has weight {}", s.weight)));
            }
            if Some(s.point.len()) != m || !s.point.is_finite() {
                return Err(Error::InvalidState(format!("sample {k} has an invalid field point")));
            }
            if s.state.nrows() != self.particle_dim || s.state.ncols() != self.particle_dim {
                return Err(Error::DimensionMismatch {
                    expected: self.particle_dim,
                    got: s.state.nrows(),
                    context: "sample state dimension",
                });
            }
            let tr = trace(&s.state);
            if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
                return Err(Error::InvalidState(format!("sample {k} state has trace {tr}")));
            }
            if (&s.state - s.state.adjoint()).norm() > tol {
                return Err(Error::InvalidState(format!("sample {k} state is not hermitian")));
            }
            let lo = min_eigenvalue(&s.state);
            if lo < -tol {
                return Err(Error::InvalidState(format!("sample {k} state has eigenvalue {lo}")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `Σ w_k`.
    pub fn total_mass(&self) -> f64 {
        self.samples.iter().map(|s| s.weight).sum()
    }

    /// `m(𝔥) = Σ w_k γ_k`.
    pub fn mass_operator(&self) -> DMat {
        self.weighted_sum(|_| c(1.0, 0.0))
    }

    fn weighted_sum(&self, f: impl Fn(&Sample) -> C64) -> DMat {
        let mut out = DMat::zeros(self.particle_dim, self.particle_dim);
        for s in &self.samples {
            out += &s.state * (f(s) * s.weight);
        }
        out
    }

    /// `m̂(η) = Σ w_k γ_k e^{2iRe⟨η, z_k⟩}`.
    pub fn fourier_transform(&self, eta: &FieldVector) -> DMat {
        self.weighted_sum(|s| C64::from_polar(1.0, 2.0 * eta.inner(&s.point).re))
    }

    /// Moves every atom along `flow`; weights and states are untouched.
    pub fn pushforward(&self, flow: impl Fn(&FieldVector) -> FieldVector) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .map(|s| {
                let point = flow(&s.point);
                let (before, after) = (s.point.norm(), point.norm());
                if (before - after).abs() > 1e-12 * before.max(1.0) {
                    return Err(Error::NonUnitaryFlow { before, after });
                }
                Ok(Sample { weight: s.weight, point, state: s.state.clone() })
            })
            .collect::<Result<_>>()?;
        Ok(Self { particle_dim: self.particle_dim, samples })
    }

    /// `∫ dm(z) F(z)` with the ordering chosen by `side`.
    pub fn integrate(&self, f: impl Fn(&FieldVector) -> DMat, side: Side) -> DMat {
        let mut out = DMat::zeros(self.particle_dim, self.particle_dim);
        for s in &self.samples {
            let fz = f(&s.point);
            let term = match side {
                Side::Left => &fz * &s.state,
                Side::Right => &s.state * &fz,
            };
            out += term * c(s.weight, 0.0);
        }
        out
    }

    /// Unnormalized conditional state on `{|f(z) − λ| ≤ tol}`.
    pub fn condition(&self, f: impl Fn(&FieldVector) -> C64, lambda: C64, tol: f64) -> Result<DMat> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!("conditioning tolerance must be positive, got {tol}")));
        }
        let mut out = DMat::zeros(self.particle_dim, self.particle_dim);
        let mut hit = false;
        for s in &self.samples {
            if (f(&s.point) - lambda).norm() <= tol {
                out += &s.state * c(s.weight, 0.0);
                hit = true;
            }
        }
        if hit {
            Ok(out)
        } else {
            Err(Error::EmptyConditioning)
        }
    }

    /// `Σ w_k (‖z_k‖² + 1)^δ`.
    pub fn moment(&self, delta: f64) -> f64 {
        self.samples.iter().map(|s| s.weight * (s.point.norm_sqr() + 1.0).powf(delta)).sum()
    }

    /// `Σ w_k ‖z_k‖^{2k}`.
    pub fn norm_moment(&self, k: u32) -> f64 {
        self.samples.iter().map(|s| s.weight * s.point.norm_sqr().powi(k as i32)).sum()
    }

    /// Field marginal `{(w_k, z_k)}`.
    pub fn field_marginal(&self) -> Vec<(f64, FieldVector)> {
        self.samples.iter().map(|s| (s.weight, s.point.clone())).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        m.validate(STATE_TOLERANCE)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dense::{commutator, projector, trace_norm};
    use crate::linalg::{DVec, ONE, ZERO};

    fn pure(a: C64, b: C64) -> DMat {
        let v = DVec::from_vec(vec![a, b]);
        projector(&(&v / c(v.norm(), 0.0)))
    }

    fn two_point() -> StateValuedMeasure {
        StateValuedMeasure::new(
            2,
            vec![
                Sample { weight: 0.25, point: FieldVector::from_pairs(&[(0.5, 0.0)]), state: pure(ONE, ZERO) },
                Sample { weight: 0.75, point: FieldVector::from_pairs(&[(-0.2, 0.9)]), state: pure(ONE, c(0.0, 1.0)) },
            ],
        )
        .unwrap()
    }

    #[test]
    fn fourier_at_zero_is_mass() {
        let m = two_point();
        let f0 = m.fourier_transform(&FieldVector::zeros(1));
        assert!((f0.clone() - m.mass_operator()).norm() < 1e-15);
        assert!((trace(&f0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dirac_fourier_is_phase_times_state() {
        let z0 = FieldVector::from_pairs(&[(0.3, -0.4)]);
        let g = pure(ONE, c(0.5, 0.0));
        let m = StateValuedMeasure::dirac(z0.clone(), g.clone(), 1.0).unwrap();
        let eta = FieldVector::from_pairs(&[(1.0, 2.0)]);
        let expected = g * C64::from_polar(1.0, 2.0 * eta.inner(&z0).re);
        assert!((m.fourier_transform(&eta) - expected).norm() < 1e-15);
    }

    #[test]
    fn pushforward_change_of_variables() {
        let m = two_point();
        let phase = 0.7;
        let pushed = m.pushforward(|z| z.rotate(&[phase])).unwrap();
        let eta = FieldVector::from_pairs(&[(0.4, 1.1)]);
        let lhs = pushed.fourier_transform(&eta);
        let rhs = m.fourier_transform(&eta.rotate(&[-phase]));
        assert!((lhs - rhs).norm() < 1e-14);
        assert_eq!(pushed.total_mass(), m.total_mass());
        assert!(matches!(m.pushforward(|z| z.scale(c(2.0, 0.0))), Err(Error::NonUnitaryFlow { .. })));
    }

    #[test]
    fn integrate_sides() {
        let m = two_point();
        let id = m.integrate(|_| DMat::identity(2, 2), Side::Left);
        assert!((id - m.mass_operator()).norm() < 1e-15);
        let eta = FieldVector::from_pairs(&[(0.2, 0.3)]);
        let scalar = |z: &FieldVector| DMat::identity(2, 2) * C64::from_polar(1.0, 2.0 * eta.inner(z).re);
        assert!((m.integrate(scalar, Side::Right) - m.fourier_transform(&eta)).norm() < 1e-15);
        let f = |z: &FieldVector| DMat::from_row_slice(2, 2, &[ZERO, c(z.0[0].re, 0.0), c(z.0[0].re, 0.0), ZERO]);
        let diff = m.integrate(f, Side::Left) - m.integrate(f, Side::Right);
        let mut expected = DMat::zeros(2, 2);
        for s in &m.samples {
            expected += commutator(&f(&s.point), &s.state) * c(s.weight, 0.0);
        }
        assert!(diff.norm() > 0.1);
        assert!((diff - expected).norm() < 1e-15);
    }

    #[test]
    fn conditioning_partitions_mass() {
        let m = two_point();
        let f = |z: &FieldVector| c(z.0[0].re.signum(), 0.0);
        let a = m.condition(f, c(1.0, 0.0), 1e-9).unwrap();
        let b = m.condition(f, c(-1.0, 0.0), 1e-9).unwrap();
        assert!((a + b - m.mass_operator()).norm() < 1e-15);
        assert!(matches!(m.condition(f, c(5.0, 0.0), 1e-9), Err(Error::EmptyConditioning)));
        let all = m.condition(|_| c(2.0, 0.0), c(2.0, 0.0), 1e-9).unwrap();
        assert!((all - m.mass_operator()).norm() < 1e-15);
    }

    #[test]
    fn moments() {
        let m = StateValuedMeasure::dirac(FieldVector::from_pairs(&[(0.6, 0.8)]), pure(ONE, ZERO), 1.0).unwrap();
        assert_eq!(m.moment(0.0), 1.0);
        assert!((m.moment(1.0) - 2.0).abs() < 1e-15);
        assert!(two_point().moment(0.5) <= two_point().moment(1.5));
    }

    #[test]
    fn trace_norm_bounded_by_mass() {
        let m = two_point();
        for k in 0..10 {
            let eta = FieldVector::from_pairs(&[(k as f64 * 0.37, -(k as f64) * 0.21)]);
            assert!(trace_norm(&m.fourier_transform(&eta)) <= m.total_mass() + 1e-12);
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let m = two_point();
        let back = StateValuedMeasure::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        let mut bad = m.clone();
        bad.samples[0].state *= c(2.0, 0.0);
        assert!(StateValuedMeasure::new(2, bad.samples).is_err());
    }
}
