//! Polynomial operator-valued symbols, their pointwise evaluation, the
//! level-set simple-function approximation and Wick quantization.
//!
//! A symbol is a sum of monomials, each summed over particles:
//! `F(z)(x_1..x_N) = Σ_terms c Σ_j Π_creation ⟨z, λ(x_j)⟩ Π_annihilation ⟨λ(x_j), z⟩`.
//! Wick quantization sends `⟨z, λ⟩ ↦ a_ε†(λ)` and `⟨λ, z⟩ ↦ a_ε(λ)`,
//! creators to the left.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{annihilator, creator, FieldVector, FockBasis};
use crate::linalg::{SpaceTag, SparseOp, C64, ONE, ZERO};

/// Coupling factor `x ↦ λ(x) ∈ C^M` sampled on the single-particle grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormFactor {
    values: Vec<FieldVector>,
    sup_norm: f64,
}

impl FormFactor {
    pub fn from_values(values: Vec<FieldVector>) -> Result<Self> {
        let m = values.first().map(FieldVector::len).ok_or_else(|| {
            Error::InvalidParameter("form factor needs at least one grid point".into())
        })?;
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::InconsistentModes("form factor values have different lengths".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("form factor has non-finite entries".into()));
        }
        let sup_norm = values.iter().map(FieldVector::norm).fold(0.0, f64::max);
        Ok(Self { values, sup_norm })
    }

    /// `λ(x; k) = profile_k e^{-i k·x}` at each grid point.
    pub fn plane_wave(points: &[Vec<f64>], wave_numbers: &[Vec<f64>], profile: &[C64]) -> Result<Self> {
        if wave_numbers.len() != profile.len() {
            return Err(Error::InconsistentModes(format!(
                "{} wave numbers but {} profile entries",
                wave_numbers.len(),
                profile.len()
            )));
        }
        let values = points
            .iter()
            .map(|x| {
                FieldVector::new(
                    wave_numbers
                        .iter()
                        .zip(profile)
                        .map(|(k, l0)| {
                            let kx: f64 = k.iter().zip(x).map(|(a, b)| a * b).sum();
                            l0 * C64::from_polar(1.0, -kx)
                        })
                        .collect(),
                )
            })
            .collect();
        Self::from_values(values)
    }

    /// `λ(x) ≡ φ` on `num_points` points.
    pub fn constant(num_points: usize, phi: FieldVector) -> Result<Self> {
        Self::from_values(vec![phi; num_points])
    }

    pub fn num_points(&self) -> usize {
        self.values.len()
    }

    pub fn num_modes(&self) -> usize {
        self.values[0].len()
    }

    pub fn at(&self, i: usize) -> &FieldVector {
        &self.values[i]
    }

    pub fn values(&self) -> &[FieldVector] {
        &self.values
    }

    /// `K = max_x ‖λ(x)‖`.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_values(self.values.iter().map(|v| v.scale(s)).collect()).expect("scaling keeps shape")
    }
}

/// `c · Π ⟨z, λ_c⟩ · Π ⟨λ_a, z⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    #[serde(with = "crate::serde_complex::complex")]
    pub coefficient: C64,
    pub creation: Vec<FormFactor>,
    pub annihilation: Vec<FormFactor>,
}

impl Monomial {
    pub fn new(coefficient: C64, creation: Vec<FormFactor>, annihilation: Vec<FormFactor>) -> Result<Self> {
        let m = Self { coefficient, creation, annihilation };
        m.validate()?;
        Ok(m)
    }

    pub fn degree(&self) -> (usize, usize) {
        (self.creation.len(), self.annihilation.len())
    }

    fn factors(&self) -> impl Iterator<Item = &FormFactor> {
        self.creation.iter().chain(&self.annihilation)
    }

    fn validate(&self) -> Result<()> {
        let mut it = self.factors();
        let first = it.next().ok_or_else(|| Error::InvalidParameter("monomial must have ℓ+m ≥ 1".into()))?;
        for f in it {
            if f.num_points() != first.num_points() {
                return Err(Error::GridMismatch("factors sampled on different grids".into()));
            }
            if f.num_modes() != first.num_modes() {
                return Err(Error::InconsistentModes("factors have different mode counts".into()));
            }
        }
        Ok(())
    }

    fn num_points(&self) -> usize {
        self.factors().next().map(FormFactor::num_points).unwrap_or(0)
    }

    fn num_modes(&self) -> usize {
        self.factors().next().map(FormFactor::num_modes).unwrap_or(0)
    }

    /// Value at single-particle grid point `i`.
    pub fn evaluate_at(&self, z: &FieldVector, i: usize) -> C64 {
        let mut v = self.coefficient;
        for f in &self.creation {
            v *= z.inner(f.at(i));
        }
        for f in &self.annihilation {
            v *= f.at(i).inner(z);
        }
        v
    }

    pub fn adjoint(&self) -> Self {
        Self {
            coefficient: self.coefficient.conj(),
            creation: self.annihilation.iter().rev().cloned().collect(),
            annihilation: self.creation.iter().rev().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolSpec {
    pub num_particles: usize,
    pub terms: Vec<Monomial>,
}

impl SymbolSpec {
    pub fn new(num_particles: usize, terms: Vec<Monomial>) -> Result<Self> {
        if num_particles == 0 {
            return Err(Error::InvalidParameter("at least one particle is required".into()));
        }
        let first = terms.first().ok_or_else(|| Error::InvalidParameter("symbol has no terms".into()))?;
        let (g, m) = (first.num_points(), first.num_modes());
        for t in &terms {
            t.validate()?;
            if t.num_points() != g {
                return Err(Error::GridMismatch("terms sampled on different grids".into()));
            }
            if t.num_modes() != m {
                return Err(Error::InconsistentModes("terms have different mode counts".into()));
            }
        }
        Ok(Self { num_particles, terms })
    }

    /// `V(z) = Σ_j 2Re⟨z, λ(x_j)⟩`, quantized to `Σ_j φ_ε(λ(x_j))`.
    pub fn nelson_interaction(lambda: FormFactor, num_particles: usize) -> Result<Self> {
        Self::new(
            num_particles,
            vec![
                Monomial::new(ONE, vec![lambda.clone()], vec![])?,
                Monomial::new(ONE, vec![], vec![lambda])?,
            ],
        )
    }

    pub fn single(num_particles: usize, monomial: Monomial) -> Result<Self> {
        Self::new(num_particles, vec![monomial])
    }

    pub fn adjoint(&self) -> Self {
        Self { num_particles: self.num_particles, terms: self.terms.iter().map(Monomial::adjoint).collect() }
    }

    /// Single-particle grid size.
    pub fn grid_points(&self) -> usize {
        self.terms[0].num_points()
    }

    pub fn num_modes(&self) -> usize {
        self.terms[0].num_modes()
    }

    /// Particle Hilbert dimension `G^N`.
    pub fn particle_dim(&self) -> usize {
        self.grid_points().pow(self.num_particles as u32)
    }

    /// Largest `ℓ + m` over terms.
    pub fn max_degree(&self) -> usize {
        self.terms.iter().map(|t| t.creation.len() + t.annihilation.len()).max().unwrap_or(0)
    }

    fn check_particle_dim(&self, particle_dim: usize) -> Result<()> {
        if particle_dim != self.particle_dim() {
            return Err(Error::GridMismatch(format!(
                "particle dimension {particle_dim} but symbol lives on {}^{} = {} points",
                self.grid_points(),
                self.num_particles,
                self.particle_dim()
            )));
        }
        Ok(())
    }

    /// Single-particle values `Σ_terms c Π…` at every grid point.
    fn single_particle_values(&self, z: &FieldVector) -> Vec<C64> {
        (0..self.grid_points())
            .map(|i| self.terms.iter().map(|t| t.evaluate_at(z, i)).sum())
            .collect()
    }
}

/// Splits a joint particle index into single-particle grid indices (particle 1 most significant).
pub fn particle_indices(p: usize, grid_points: usize, num_particles: usize) -> Vec<usize> {
    let mut out = vec![0; num_particles];
    let mut rest = p;
    for j in (0..num_particles).rev() {
        out[j] = rest % grid_points;
        rest /= grid_points;
    }
    out
}

/// Diagonal of the multiplication operator `F(z)` on the particle grid.
pub fn evaluate_symbol(sym: &SymbolSpec, z: &FieldVector, particle_dim: usize) -> Result<Vec<C64>> {
    sym.check_particle_dim(particle_dim)?;
    if z.len() != sym.num_modes() {
        return Err(Error::DimensionMismatch {
            expected: sym.num_modes(),
            got: z.len(),
            context: "field point vs symbol modes",
        });
    }
    let single = sym.single_particle_values(z);
    if sym.num_particles == 1 {
        return Ok(single);
    }
    let g = sym.grid_points();
    Ok((0..particle_dim)
        .map(|p| particle_indices(p, g, sym.num_particles).iter().map(|&i| single[i]).sum())
        .collect())
}

/// Piecewise-constant approximation of a monomial on a partition of the grid.
#[derive(Debug, Clone)]
pub struct SimpleSymbol {
    /// Disjoint cells covering the grid, each listed in ascending point order.
    pub cells: Vec<Vec<usize>>,
    /// Representative factor values per cell, creation factors first.
    pub coefficients: Vec<Vec<FieldVector>>,
    pub levels: usize,
    monomial: Monomial,
}

impl SimpleSymbol {
    /// `F_M(z)` on the single-particle grid.
    pub fn evaluate(&self, z: &FieldVector) -> Vec<C64> {
        let (l, _) = self.monomial.degree();
        let mut out = vec![ZERO; self.monomial.num_points()];
        for (cell, coeffs) in self.cells.iter().zip(&self.coefficients) {
            let mut v = self.monomial.coefficient;
            for (n, lam) in coeffs.iter().enumerate() {
                v *= if n < l { z.inner(lam) } else { lam.inner(z) };
            }
            for &i in cell {
                out[i] = v;
            }
        }
        out
    }

    /// `max_x |F(z)(x) − F_M(z)(x)|`, the operator norm of the diagonal difference.
    pub fn sup_error(&self, z: &FieldVector) -> f64 {
        let approx = self.evaluate(z);
        approx
            .iter()
            .enumerate()
            .map(|(i, a)| (self.monomial.evaluate_at(z, i) - a).norm())
            .fold(0.0, f64::max)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
}

/// Band of `v ∈ [0, top]` among `levels` equal bands; the top value joins the last band.
fn band(v: f64, top: f64, levels: usize) -> usize {
    if top <= 0.0 {
        return 0;
    }
    ((v / top * levels as f64).floor() as usize).min(levels - 1)
}

/// Level-set partition for one factor `x ↦ ⟨z, λ(x)⟩` (or its conjugate, same cells).
fn factor_labels(factor: &FormFactor, z: &FieldVector, levels: usize) -> Vec<[usize; 4]> {
    let top = factor.sup_norm() * z.norm();
    factor
        .values()
        .iter()
        .map(|lam| {
            let v = z.inner(lam);
            [
                band(v.re.max(0.0), top, levels),
                band((-v.re).max(0.0), top, levels),
                band(v.im.max(0.0), top, levels),
                band((-v.im).max(0.0), top, levels),
            ]
        })
        .collect()
}

/// Builds the level-set partition and per-cell representatives.
///
/// For `ℓ + m = 1` the sup error is at most `4 K ‖z‖ / levels`; higher degree
/// uses the common refinement of the factor partitions.
pub fn simple_approximate(monomial: &Monomial, z: &FieldVector, levels: usize) -> Result<SimpleSymbol> {
    if levels == 0 {
        return Err(Error::InvalidParameter("levels must be >= 1".into()));
    }
    monomial.validate()?;
    let factors: Vec<&FormFactor> = monomial.factors().collect();
    let labels: Vec<Vec<[usize; 4]>> = factors.iter().map(|f| factor_labels(f, z, levels)).collect();
    let mut keyed: std::collections::BTreeMap<Vec<[usize; 4]>, Vec<usize>> = Default::default();
    for i in 0..monomial.num_points() {
        keyed.entry(labels.iter().map(|l| l[i]).collect()).or_default().push(i);
    }
    let mut cells: Vec<Vec<usize>> = keyed.into_values().collect();
    cells.sort_by_key(|c| c[0]);
    let coefficients = cells
        .iter()
        .map(|cell| factors.iter().map(|f| f.at(cell[0]).clone()).collect())
        .collect();
    Ok(SimpleSymbol { cells, coefficients, levels, monomial: monomial.clone() })
}

/// Fock-space operator of one monomial at single-particle grid point `i`.
fn monomial_fock_operator(t: &Monomial, basis: &FockBasis, i: usize) -> Result<SparseOp> {
    let mut op = SparseOp::identity(basis.dim(), SpaceTag::Field).scale(t.coefficient);
    for f in &t.creation {
        op = op.mul(&creator(basis, f.at(i))?)?;
    }
    for f in &t.annihilation {
        op = op.mul(&annihilator(basis, f.at(i))?)?;
    }
    Ok(op)
}

/// `Op^Wick(F)`, block-diagonal over particle configurations (particle-major layout).
pub fn wick_quantize(sym: &SymbolSpec, basis: &FockBasis, particle_dim: usize) -> Result<SparseOp> {
    sym.check_particle_dim(particle_dim)?;
    if sym.num_modes() != basis.num_modes() {
        return Err(Error::InconsistentModes(format!(
            "symbol has {} modes, Fock basis {}",
            sym.num_modes(),
            basis.num_modes()
        )));
    }
    let g = sym.grid_points();
    let single: Vec<SparseOp> = (0..g)
        .map(|i| {
            sym.terms.iter().try_fold(SparseOp::zeros(basis.dim(), basis.dim(), SpaceTag::Field), |acc, t| {
                acc.add(&monomial_fock_operator(t, basis, i)?)
            })
        })
        .collect::<Result<_>>()?;
    let blocks: Vec<SparseOp> = if sym.num_particles == 1 {
        single
    } else {
        (0..particle_dim)
            .map(|p| {
                particle_indices(p, g, sym.num_particles).iter().try_fold(
                    SparseOp::zeros(basis.dim(), basis.dim(), SpaceTag::Field),
                    |acc, &i| acc.add(&single[i]),
                )
            })
            .collect::<Result<_>>()?
    };
    Ok(SparseOp::block_diagonal(&blocks, SpaceTag::Joint))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{build_basis, coherent_state, field_operator, FockSpec};
    use crate::linalg::{c, DVec};

    fn grid(n: usize) -> Vec<Vec<f64>> {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        (0..n).map(|i| vec![i as f64 * h]).collect()
    }

    fn nelson_factor(n: usize) -> FormFactor {
        FormFactor::plane_wave(&grid(n), &[vec![1.0]], &[ONE]).unwrap()
    }

    #[test]
    fn nelson_symbol_is_two_cosine() {
        let pts = grid(16);
        let sym = SymbolSpec::nelson_interaction(nelson_factor(16), 1).unwrap();
        let v = evaluate_symbol(&sym, &FieldVector::from_pairs(&[(1.0, 0.0)]), 16).unwrap();
        for (x, val) in pts.iter().zip(&v) {
            assert!((val - c(2.0 * x[0].cos(), 0.0)).norm() < 1e-14);
        }
        let zero = evaluate_symbol(&sym, &FieldVector::zeros(1), 16).unwrap();
        assert!(zero.iter().all(|v| *v == ZERO));
        assert!(matches!(evaluate_symbol(&sym, &FieldVector::zeros(1), 15), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn two_particle_symbol_sums_over_particles() {
        let sym = SymbolSpec::nelson_interaction(nelson_factor(4), 2).unwrap();
        let z = FieldVector::from_pairs(&[(0.3, -0.7)]);
        let single = evaluate_symbol(&SymbolSpec::nelson_interaction(nelson_factor(4), 1).unwrap(), &z, 4).unwrap();
        let both = evaluate_symbol(&sym, &z, 16).unwrap();
        assert!((both[4 * 2 + 3] - single[2] - single[3]).norm() < 1e-14);
    }

    #[test]
    fn simple_input_reproduced() {
        let a = FieldVector::from_pairs(&[(1.0, 0.0)]);
        let b = FieldVector::from_pairs(&[(-0.5, 0.5)]);
        let vals = vec![a.clone(), a.clone(), b.clone(), b.clone(), a];
        let m = Monomial::new(ONE, vec![FormFactor::from_values(vals).unwrap()], vec![]).unwrap();
        let z = FieldVector::from_pairs(&[(0.8, 0.1)]);
        let s = simple_approximate(&m, &z, 3).unwrap();
        assert_eq!(s.sup_error(&z), 0.0);
        assert_eq!(s.num_cells(), 2);
    }

    #[test]
    fn simple_symbol_bound_on_plane_wave() {
        let lam = nelson_factor(32);
        let z = FieldVector::from_pairs(&[(0.6, 0.8)]);
        let m = Monomial::new(ONE, vec![], vec![lam.clone()]).unwrap();
        for levels in [5, 10, 20, 40] {
            let s = simple_approximate(&m, &z, levels).unwrap();
            let err = s.sup_error(&z);
            assert!(err <= 4.0 * lam.sup_norm() * z.norm() / levels as f64 + 1e-15, "{levels}: {err}");
            assert!(s.num_cells() <= levels.pow(4));
            let covered: usize = s.cells.iter().map(Vec::len).sum();
            assert_eq!(covered, 32);
        }
    }

    #[test]
    fn degree_two_refinement() {
        let lam = nelson_factor(32);
        let mu = FormFactor::plane_wave(&grid(32), &[vec![2.0]], &[c(0.5, 0.5)]).unwrap();
        let bound = |levels: usize, z: &FieldVector| 8.0 * lam.sup_norm() * mu.sup_norm() * z.norm_sqr() / levels as f64;
        let m = Monomial::new(ONE, vec![lam.clone()], vec![mu.clone()]).unwrap();
        let z = FieldVector::from_pairs(&[(0.4, -0.3)]);
        let e2 = simple_approximate(&m, &z, 2).unwrap().sup_error(&z);
        let e10 = simple_approximate(&m, &z, 10).unwrap().sup_error(&z);
        assert!(e2 > 0.0 && e2 <= bound(2, &z));
        assert!(e10 <= bound(10, &z));
    }

    #[test]
    fn constant_creation_quantizes_to_identity_tensor_creator() {
        let b = build_basis(FockSpec::new(1, 5, 0.5).unwrap()).unwrap();
        let phi = FieldVector::from_pairs(&[(0.3, 0.4)]);
        let m = Monomial::new(ONE, vec![FormFactor::constant(3, phi.clone()).unwrap()], vec![]).unwrap();
        let op = wick_quantize(&SymbolSpec::single(1, m).unwrap(), &b, 3).unwrap();
        let expected = creator(&b, &phi).unwrap().identity_kron(3, SpaceTag::Joint);
        assert!((op.to_dense() - expected.to_dense()).norm() < 1e-15);
    }

    #[test]
    fn nelson_wick_matches_field_operators() {
        let b = build_basis(FockSpec::new(1, 6, 0.3).unwrap()).unwrap();
        let lam = nelson_factor(8);
        let op = wick_quantize(&SymbolSpec::nelson_interaction(lam.clone(), 1).unwrap(), &b, 8).unwrap();
        assert!(op.hermiticity_defect() < 1e-15);
        let blocks: Vec<SparseOp> = (0..8).map(|i| field_operator(&b, lam.at(i)).unwrap()).collect();
        let expected = SparseOp::block_diagonal(&blocks, SpaceTag::Joint);
        assert!((op.to_dense() - expected.to_dense()).norm() < 1e-14);
    }

    #[test]
    fn coherent_expectation_reproduces_symbol() {
        let eps = 0.25;
        let b = build_basis(FockSpec::new(1, 40, eps).unwrap()).unwrap();
        let lam = nelson_factor(4);
        let mu = FormFactor::plane_wave(&grid(4), &[vec![1.0]], &[c(0.2, -0.6)]).unwrap();
        let sym = SymbolSpec::new(
            1,
            vec![
                Monomial::new(ONE, vec![lam.clone()], vec![mu.clone()]).unwrap(),
                Monomial::new(c(0.0, 1.0), vec![], vec![lam]).unwrap(),
            ],
        )
        .unwrap();
        let z = FieldVector::from_pairs(&[(0.5, 0.5)]);
        let psi = coherent_state(&b, &z).unwrap().vector;
        let op = wick_quantize(&sym, &b, 4).unwrap();
        let values = evaluate_symbol(&sym, &z, 4).unwrap();
        for x in 0..4 {
            let mut v = DVec::zeros(4 * b.dim());
            v.rows_mut(x * b.dim(), b.dim()).copy_from(&psi);
            let e = v.dotc(&op.apply(&v).unwrap());
            assert!((e - values[x]).norm() < 1e-6);
        }
    }

    #[test]
    fn quantization_commutes_with_adjoint() {
        let b = build_basis(FockSpec::new(2, 4, 0.5).unwrap()).unwrap();
        let pts = grid(3);
        let ks = [vec![1.0], vec![-2.0]];
        let lam = FormFactor::plane_wave(&pts, &ks, &[c(0.3, 0.1), c(-0.2, 0.4)]).unwrap();
        let mu = FormFactor::plane_wave(&pts, &ks, &[c(0.5, 0.0), c(0.1, 0.1)]).unwrap();
        let sym = SymbolSpec::single(1, Monomial::new(c(0.7, 0.2), vec![lam.clone()], vec![mu, lam]).unwrap()).unwrap();
        let a = wick_quantize(&sym, &b, 3).unwrap().adjoint().to_dense();
        let b2 = wick_quantize(&sym.adjoint(), &b, 3).unwrap().to_dense();
        assert!((a - b2).norm() < 1e-12);
    }

    #[test]
    fn inconsistent_modes_rejected() {
        let b = build_basis(FockSpec::new(2, 3, 0.5).unwrap()).unwrap();
        let sym = SymbolSpec::nelson_interaction(nelson_factor(4), 1).unwrap();
        assert!(matches!(wick_quantize(&sym, &b, 4), Err(Error::InconsistentModes(_))));
    }
}
