//! Assumption and invariant checks reported by the `check` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, InitialState};
use super::experiment::{run_convergence_experiment, ExperimentResult};
use crate::error::Result;
use crate::fock::{annihilator, build_basis, creator, FieldVector, FockSpec};
use crate::linalg::{c, C64};
use crate::models::NuRegime;
use crate::symbols::{simple_approximate, Monomial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, measured: f64, threshold: f64, detail: String) -> Self {
        Self { name: name.into(), passed, measured, threshold, detail }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {}: measured {:.3e}, threshold {:.3e}. {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.threshold,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub config_hash: String,
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl CheckReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0])
}

fn random_vector(rng: &mut ChaCha8Rng, m: usize) -> FieldVector {
    FieldVector::new((0..m).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
}

/// Largest entry of `[a_ε(f), a_ε†(g)] − ε⟨f,g⟩` on states below the quanta cap.
pub fn ccr_defect(num_modes: usize, epsilon: f64, cap: usize, f: &FieldVector, g: &FieldVector) -> Result<f64> {
    let basis = build_basis(FockSpec::new(num_modes, cap, epsilon)?)?;
    let a = annihilator(&basis, f)?;
    let ad = creator(&basis, g)?;
    let comm = a.mul(&ad)?.sub(&ad.mul(&a)?)?.to_dense();
    let expected: C64 = c(epsilon, 0.0) * f.inner(g);
    let inside = basis.low_quanta_mask(cap as u32 - 1);
    let mut worst: f64 = 0.0;
    for i in 0..basis.dim() {
        if !inside[i] {
            continue;
        }
        for j in 0..basis.dim() {
            if !inside[j] {
                continue;
            }
            let target = if i == j { expected } else { c(0.0, 0.0) };
            worst = worst.max((comm[(i, j)] - target).norm());
        }
    }
    Ok(worst)
}

fn ccr_check(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let m = cfg.model.num_modes();
    let mut worst: f64 = 0.0;
    for &eps in &cfg.epsilon_list {
        let f = random_vector(&mut rng, m);
        let g = random_vector(&mut rng, m);
        worst = worst.max(ccr_defect(m, eps, 10, &f, &g)?);
    }
    let tol = cfg.tolerances.ccr;
    Ok(CheckOutcome::new("ccr", worst <= tol, worst, tol, "projected commutator on random f, g".into()))
}

fn reference_point(cfg: &ExperimentConfig) -> FieldVector {
    match &cfg.initial_state {
        InitialState::CoherentProduct { z0 } | InitialState::LossOfMass { z0, .. } => z0.clone(),
        InitialState::CoherentSuperposition { terms } => terms[0].z0.clone(),
    }
}

fn simple_symbol_check(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let lambda = cfg.model.form_factor()?;
    let k = lambda.sup_norm();
    let mut z = reference_point(cfg);
    if z.norm() == 0.0 {
        z = FieldVector::unit(z.len(), 0);
    }
    let mono = Monomial::new(c(1.0, 0.0), vec![lambda], vec![])?;
    let mut errors = Vec::new();
    let mut worst_ratio: f64 = 0.0;
    for &levels in &cfg.checks.simple_symbol_levels {
        let e = simple_approximate(&mono, &z, levels)?.sup_error(&z);
        worst_ratio = worst_ratio.max(e / (4.0 * k * z.norm() / levels as f64));
        errors.push(e);
    }
    let monotone = errors.windows(2).all(|w| w[1] <= w[0]);
    Ok(CheckOutcome::new(
        "simple_symbol_bound",
        worst_ratio <= 1.0 && monotone,
        worst_ratio,
        1.0,
        format!("sup errors {errors:?}, ratio to 4K|z|/M"),
    ))
}

fn result_checks(cfg: &ExperimentConfig, res: &ExperimentResult) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let last = *cfg.epsilon_list.last().unwrap();
    let first = cfg.epsilon_list[0];
    let prop_fail = res.rows.iter().filter(|r| r.metric.starts_with("moment_bound_holds") && r.value != 1.0).count();
    out.push(CheckOutcome::new(
        "propagation_bound",
        prop_fail == 0,
        prop_fail as f64,
        0.0,
        "cells where the moment bound failed".into(),
    ));
    let mass_dev = res
        .rows
        .iter()
        .filter(|r| r.metric == "measure_mass")
        .map(|r| (r.value - res.rows.iter().find(|q| q.metric == "measure_mass").unwrap().value).abs())
        .fold(0.0, f64::max);
    out.push(CheckOutcome::new("measure_mass_preserved", mass_dev == 0.0, mass_dev, 0.0, "Σ w over all cells".into()));
    let t_last = *cfg.times.last().unwrap();
    let is_coherent = !matches!(cfg.initial_state, InitialState::LossOfMass { .. });
    if is_coherent {
        for k in 1..=cfg.checks.moment_order {
            let s: Vec<f64> = res.series(&format!("moment_gap_{k}"), t_last).iter().map(|p| p.1).collect();
            let fin = *s.last().unwrap_or(&f64::NAN);
            out.push(CheckOutcome::new(
                &format!("moment_gap_{k}"),
                strictly_decreasing(&s) && fin <= cfg.tolerances.moment_gap_final,
                fin,
                cfg.tolerances.moment_gap_final,
                format!("discrepancies at t = {t_last}: {s:?}"),
            ));
        }
        for &t in &cfg.times {
            let s: Vec<f64> = res.series("qc_distance_total", t).iter().map(|p| p.1).collect();
            let ratio = s.last().unwrap() / s[0];
            out.push(CheckOutcome::new(
                &format!("qc_convergence_t{t}"),
                strictly_decreasing(&s) && ratio <= cfg.tolerances.convergence_ratio,
                ratio,
                cfg.tolerances.convergence_ratio,
                format!("distances {s:?}"),
            ));
        }
    } else {
        let compact = res.value(last, cfg.times[0], "qc_distance_compact").unwrap_or(f64::NAN);
        let total = res.value(last, cfg.times[0], "qc_distance_total").unwrap_or(f64::NAN);
        out.push(CheckOutcome::new(
            "mass_loss_compact",
            compact <= 0.05,
            compact,
            0.05,
            format!("compact-tested distance at ε = {last}"),
        ));
        if cfg.observables.include_identity {
            out.push(CheckOutcome::new(
                "mass_loss_identity",
                (total - 1.0).abs() <= 0.05,
                (total - 1.0).abs(),
                0.05,
                format!("identity-tested distance {total} at ε = {last}"),
            ));
        }
    }
    if cfg.model.grid.confinement.is_some() {
        let e0 = res.value(first, cfg.times[0], "particle_energy").unwrap_or(f64::NAN);
        let worst = res.rows.iter().filter(|r| r.metric == "particle_energy").map(|r| r.value).fold(0.0, f64::max);
        // empirical envelope: the trapped energy may exchange with the field but not run away
        out.push(CheckOutcome::new(
            "trapped_energy_bounded",
            worst.is_finite() && worst <= 10.0 * e0,
            worst / e0,
            10.0,
            "max tr((K0+1)γ) relative to the first cell".into(),
        ));
    }
    out
}

fn frozen_field_check(cfg: &ExperimentConfig) -> Result<Option<CheckOutcome>> {
    if cfg.model.nu_regime != NuRegime::Constant {
        return Ok(None);
    }
    let first = build_basis(cfg.fock_spec(cfg.epsilon_list[0])?)?;
    let limit = super::experiment::build_initial_state(cfg, &first)?.limit;
    let traj = super::experiment::limit_trajectory(cfg, &limit)?;
    let same = traj.iter().all(|(_, m)| m.field_marginal() == limit.field_marginal());
    Ok(Some(CheckOutcome::new(
        "frozen_field_marginal",
        same,
        if same { 0.0 } else { 1.0 },
        0.0,
        "ν = 0 leaves the field marginal unchanged".into(),
    )))
}

/// Runs the convergence experiment and evaluates every check on it.
pub fn run_checks(cfg: &ExperimentConfig) -> Result<(CheckReport, ExperimentResult)> {
    cfg.validate()?;
    let mut checks = vec![ccr_check(cfg)?, simple_symbol_check(cfg)?];
    let res = run_convergence_experiment(cfg)?;
    checks.extend(result_checks(cfg, &res));
    if let Some(c) = frozen_field_check(cfg)? {
        checks.push(c);
    }
    Ok((CheckReport { config_hash: cfg.hash(), seed: cfg.seed, checks }, res))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ccr_holds_below_the_cap() {
        let f = FieldVector::from_pairs(&[(0.3, -0.2), (0.1, 0.7)]);
        let g = FieldVector::from_pairs(&[(-0.5, 0.4), (0.2, 0.2)]);
        assert!(ccr_defect(2, 0.3, 8, &f, &g).unwrap() < 1e-12);
    }

    #[test]
    fn decreasing_helper() {
        assert!(strictly_decreasing(&[3.0, 2.0, 1.0]));
        assert!(!strictly_decreasing(&[3.0, 3.0]));
        assert!(strictly_decreasing(&[1.0]));
    }
}
