//! Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.
//!
//! Run with `cargo test -p qclab-core --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qclab_core::fock::{build_basis, coherent_state, FockSpec};
use qclab_core::harness::checks::{ccr_defect, strictly_decreasing};
use qclab_core::harness::config::{ExperimentConfig, InitialState, ParticleStateSpec};
use qclab_core::harness::experiment::{run_configured_heisenberg, run_convergence_experiment, ExperimentResult};
use qclab_core::linalg::dense::{projector, trace_norm, unitary_propagator};
use qclab_core::linalg::{c, DVec, C64};
use qclab_core::measures::{Sample, StateValuedMeasure};
use qclab_core::micro::{duhamel_residual, DenseEvolution, HybridState};
use qclab_core::models::{build_nelson_hamiltonian, nelson_1d, EffectiveModel, NuRegime};
use qclab_core::qc_dynamics::{
    evolve_measure, measure_trajectory, propagate_sample, propagator, transport_residual, Integrator, PropagatorConfig,
    Quadrature,
};
use qclab_core::symbols::{simple_approximate, Monomial};
use qclab_core::FieldVector;

fn report(n: u32, passed: bool, what: &str, detail: String, start: Instant) {
    println!(
        "criterion {n:>2} [{}] {what}: {detail} ({:.1} s)",
        if passed { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
}

fn random_field(rng: &mut ChaCha8Rng, m: usize) -> FieldVector {
    FieldVector::new((0..m).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect())
}

fn gaussian(p: usize) -> DVec {
    let v = DVec::from_fn(p, |i, _| C64::from_polar((-(i as f64 - p as f64 / 2.0).powi(2) / 4.0).exp(), 0.3 * i as f64));
    &v / c(v.norm(), 0.0)
}

/// Headline sweeps, shared by the convergence, mass and moment-matching criteria.
fn headline() -> &'static [(NuRegime, ExperimentResult, ExperimentConfig); 2] {
    static CELL: OnceLock<[(NuRegime, ExperimentResult, ExperimentConfig); 2]> = OnceLock::new();
    CELL.get_or_init(|| {
        [NuRegime::Constant, NuRegime::Free].map(|r| {
            let cfg = ExperimentConfig::headline(r);
            (r, run_convergence_experiment(&cfg).expect("headline sweep runs"), cfg)
        })
    })
}

fn column(res: &ExperimentResult, metric: &str, t: f64) -> Vec<f64> {
    res.series(metric, t).iter().map(|p| p.1).collect()
}

#[test]
fn criterion_01_ccr() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for &eps in &[1.0, 0.5, 0.1] {
        for m in 1..=2 {
            for _ in 0..3 {
                let f = random_field(&mut rng, m);
                let g = random_field(&mut rng, m);
                worst = worst.max(ccr_defect(m, eps, 12, &f, &g).unwrap());
            }
        }
    }
    let passed = worst <= 1e-12 && start.elapsed().as_secs_f64() < 1.0;
    report(1, passed, "projected CCR", format!("max defect {worst:.2e} (tol 1e-12)"), start);
    assert!(passed);
}

#[test]
fn criterion_02_simple_symbol_bound() {
    let start = Instant::now();
    let cfg = nelson_1d(32, 2.0 * PI, &[1.0, 2.0], &[c(0.5, 0.0), c(0.4, 0.0)], NuRegime::Free, 0.1).unwrap();
    let lambda = cfg.form_factor().unwrap();
    let k = lambda.sup_norm();
    let mono = Monomial::new(c(1.0, 0.0), vec![lambda], vec![]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut passed = true;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..5 {
        let z = random_field(&mut rng, 2);
        let errors: Vec<f64> = [5usize, 10, 20, 40]
            .iter()
            .map(|&levels| {
                let e = simple_approximate(&mono, &z, levels).unwrap().sup_error(&z);
                worst_ratio = worst_ratio.max(e / (4.0 * k * z.norm() / levels as f64));
                e
            })
            .collect();
        passed &= errors.windows(2).all(|w| w[1] <= w[0]);
    }
    passed &= worst_ratio <= 1.0 && start.elapsed().as_secs_f64() < 1.0;
    report(2, passed, "simple-function approximation", format!("max error / (4K|z|/M) = {worst_ratio:.3}, monotone in M"), start);
    assert!(passed);
}

#[test]
fn criterion_03_propagation_bound() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::headline(NuRegime::Free);
    cfg.model = nelson_1d(16, 2.0 * PI, &[1.0], &[c(0.5, 0.0)], NuRegime::Free, 0.4).unwrap();
    cfg.initial_state = InitialState::CoherentProduct { z0: FieldVector::from_pairs(&[(0.5, 0.3)]) };
    cfg.eta_test_set = vec![FieldVector::zeros(1)];
    cfg.epsilon_list = vec![0.4, 0.2, 0.1];
    cfg.times = vec![0.5, 1.0];
    cfg.checks.moment_bound_deltas = vec![0.5, 1.0];
    let res = run_convergence_experiment(&cfg).unwrap();
    let mut cells = 0;
    let mut failures = 0;
    let mut tightest = f64::MAX;
    for &eps in &cfg.epsilon_list {
        for &t in &cfg.times {
            for d in ["0.5", "1"] {
                cells += 1;
                let lhs = res.value(eps, t, &format!("moment_bound_lhs_d{d}")).unwrap();
                let rhs = res.value(eps, t, &format!("moment_bound_rhs_d{d}")).unwrap();
                if res.value(eps, t, &format!("moment_bound_holds_d{d}")) != Some(1.0) {
                    failures += 1;
                }
                tightest = tightest.min(rhs / lhs);
            }
        }
    }
    let passed = failures == 0 && cells == 12 && start.elapsed().as_secs_f64() < 120.0;
    report(3, passed, "moment propagation bound", format!("{failures}/{cells} cells violated, min rhs/lhs {tightest:.4}"), start);
    assert!(passed);
}

#[test]
fn criterion_04_duhamel_residual() {
    let start = Instant::now();
    let eps = 0.2;
    let cfg = nelson_1d(8, 8.0, &[1.0], &[c(0.5, 0.0)], NuRegime::Free, eps).unwrap();
    let basis = build_basis(FockSpec::new(1, 49, eps).unwrap()).unwrap();
    assert_eq!(basis.dim(), 50);
    let h = build_nelson_hamiltonian(&cfg, &basis).unwrap();
    let field = coherent_state(&basis, &FieldVector::from_pairs(&[(0.3, 0.2)])).unwrap().vector;
    let state = HybridState::pure(gaussian(8).kronecker(&field), 8, basis.dim()).unwrap();
    let evo = DenseEvolution::new(&h);
    let traj: Vec<(f64, HybridState)> = (0..=64).map(|i| i as f64 / 64.0).map(|t| (t, evo.evolve(&state, t))).collect();
    let eta = FieldVector::from_pairs(&[(0.4, -0.3)]);
    let r = trace_norm(&duhamel_residual(&traj, &basis, &cfg, &eta, Quadrature::Simpson).unwrap());
    let mut bad = traj.clone();
    bad[64].1 = evo.evolve(&state, 1.05);
    let rb = trace_norm(&duhamel_residual(&bad, &basis, &cfg, &eta, Quadrature::Simpson).unwrap());
    let passed = r <= 1e-6 && rb >= 1e-3 && start.elapsed().as_secs_f64() < 60.0;
    report(4, passed, "Duhamel residual 8x50", format!("exact {r:.2e} (tol 1e-6), corrupted {rb:.2e} (floor 1e-3)"), start);
    assert!(passed);
}

#[test]
fn criterion_05_transport_and_uniqueness() {
    let start = Instant::now();
    let mcfg = nelson_1d(8, 2.0 * PI, &[1.0], &[c(0.8, 0.0)], NuRegime::Free, 0.1).unwrap();
    let model = EffectiveModel::new(&mcfg).unwrap();
    let gamma = projector(&gaussian(8));
    let z0 = FieldVector::from_pairs(&[(0.5, 0.3)]);
    let mu = StateValuedMeasure::dirac(z0.clone(), gamma.clone(), 1.0).unwrap();
    let cfg = PropagatorConfig { dt: 1e-3, ..Default::default() };
    let times: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
    let traj = measure_trajectory(&model, &cfg, &mu, &times).unwrap();
    let eta = FieldVector::from_pairs(&[(0.3, -0.2)]);
    let r = trace_norm(&transport_residual(&model, &traj, &eta, Quadrature::Simpson).unwrap());
    // Magnus-2 against exponential Euler at a hundredth of its step
    let magnus = PropagatorConfig { integrator: Integrator::MagnusMidpoint, dt: 1e-4, ..Default::default() };
    let euler = PropagatorConfig { integrator: Integrator::ExponentialEuler, dt: 1e-6, ..Default::default() };
    let a = propagate_sample(&model, &magnus, &z0, &gamma, 0.0, 1.0).unwrap();
    let b = propagate_sample(&model, &euler, &z0, &gamma, 0.0, 1.0).unwrap();
    let d = trace_norm(&(a - b));
    let passed = r <= 1e-6 && d <= 1e-6 && start.elapsed().as_secs_f64() < 120.0;
    report(5, passed, "transport residual and integrator agreement", format!("residual {r:.2e}, disagreement {d:.2e} (tol 1e-6)"), start);
    assert!(passed);
}

#[test]
fn criterion_06_headline_convergence() {
    let start = Instant::now();
    let mut passed = true;
    let mut detail = Vec::new();
    for (regime, res, cfg) in headline() {
        for &t in &cfg.times {
            let d = column(res, "qc_distance_total", t);
            let ratio = d.last().unwrap() / d[0];
            passed &= d.len() == 4 && strictly_decreasing(&d) && ratio <= 0.5;
            detail.push(format!("{regime:?} t={t}: {:.3}->{:.3}", d[0], d.last().unwrap()));
        }
    }
    passed &= start.elapsed().as_secs_f64() < 1800.0;
    report(6, passed, "quasi-classical convergence", detail.join(", "), start);
    assert!(passed);
}

#[test]
fn criterion_07_mass_dichotomy() {
    let start = Instant::now();
    // loss of mass: particle pushed into ever higher K0 levels on a 32-point grid
    let mut cfg = ExperimentConfig::headline(NuRegime::Free);
    cfg.model = nelson_1d(32, 2.0 * PI, &[1.0], &[c(0.5, 0.0)], NuRegime::Free, 0.4).unwrap();
    cfg.initial_state = InitialState::LossOfMass { z0: FieldVector::from_pairs(&[(0.4, 0.2)]), scale: 1.0 };
    cfg.particle_state = ParticleStateSpec::K0Eigenstate { index: 0 };
    cfg.eta_test_set = vec![
        FieldVector::from_pairs(&[(0.0, 0.0)]),
        FieldVector::from_pairs(&[(0.5, 0.0)]),
        FieldVector::from_pairs(&[(0.0, -0.7)]),
        FieldVector::from_pairs(&[(0.6, 0.6)]),
    ];
    cfg.times = vec![0.0];
    let res = run_convergence_experiment(&cfg).unwrap();
    let compact = column(&res, "qc_distance_compact", 0.0);
    let total = column(&res, "qc_distance_total", 0.0);
    let mut passed = compact.windows(2).all(|w| w[1] <= w[0])
        && *compact.last().unwrap() <= 0.05
        && (total.last().unwrap() - 1.0).abs() <= 0.05;
    // coherent product: the recovered limit keeps unit mass and the flow keeps Σ w
    let mut mass_dev: f64 = 0.0;
    for (_, hres, hcfg) in headline() {
        let last = *hcfg.epsilon_list.last().unwrap();
        for &t in &hcfg.times {
            mass_dev = mass_dev.max((hres.value(last, t, "micro_mass").unwrap() - 1.0).abs());
            passed &= hres.value(last, t, "measure_mass") == Some(1.0);
        }
    }
    let model = EffectiveModel::new(&ExperimentConfig::headline(NuRegime::Free).model).unwrap();
    let p = model.particle_dim();
    let m0 = StateValuedMeasure::new(
        p,
        vec![
            Sample { weight: 0.3, point: FieldVector::from_pairs(&[(0.5, 0.0), (0.0, 0.5)]), state: projector(&gaussian(p)) },
            Sample { weight: 0.45, point: FieldVector::from_pairs(&[(-0.4, 0.1), (0.2, 0.0)]), state: projector(&gaussian(p)) },
        ],
    )
    .unwrap();
    for &t in &[0.25, 0.5, 1.0] {
        let mt = evolve_measure(&model, &PropagatorConfig::default(), &m0, t).unwrap();
        passed &= mt.samples.iter().zip(&m0.samples).all(|(a, b)| a.weight == b.weight);
    }
    passed &= mass_dev <= 1e-6;
    report(
        7,
        passed,
        "mass dichotomy",
        format!(
            "loss of mass compact {:.2e} identity {:.3} at eps=0.05; coherent mass defect {mass_dev:.1e}; weights preserved",
            compact.last().unwrap(),
            total.last().unwrap()
        ),
        start,
    );
    assert!(passed);
}

#[test]
fn criterion_08_moment_matching() {
    let start = Instant::now();
    let mut passed = true;
    let mut detail = Vec::new();
    for (regime, res, cfg) in headline() {
        // the final time, where the interaction has acted longest
        let t = *cfg.times.last().unwrap();
        for k in 1..=2 {
            let s = column(res, &format!("moment_gap_{k}"), t);
            passed &= strictly_decreasing(&s) && *s.last().unwrap() < 0.05;
            detail.push(format!("{regime:?} k={k}: {:.3}->{:.4}", s[0], s.last().unwrap()));
        }
    }
    report(8, passed, "moment matching", detail.join(", "), start);
    assert!(passed);
}

#[test]
fn criterion_09_heisenberg() {
    let start = Instant::now();
    let mut passed = true;
    let mut detail = Vec::new();
    for regime in [NuRegime::Constant, NuRegime::Free] {
        let mut cfg = ExperimentConfig::headline(regime);
        cfg.times = vec![0.5, 1.0];
        let res = run_configured_heisenberg(&cfg).unwrap();
        passed &= res.warnings.is_empty();
        for &t in &cfg.times {
            let d = column(&res, "heisenberg_discrepancy", t);
            passed &= strictly_decreasing(&d) && *d.last().unwrap() <= 0.5 * d[0];
            detail.push(format!("{regime:?} t={t}: {:.2e}->{:.2e}", d[0], d.last().unwrap()));
        }
    }
    passed &= start.elapsed().as_secs_f64() < 900.0;
    report(9, passed, "Heisenberg picture", detail.join(", "), start);
    assert!(passed);
}

#[test]
fn criterion_10_frozen_field() {
    let start = Instant::now();
    let cfg = ExperimentConfig::headline(NuRegime::Constant);
    let model = EffectiveModel::new(&cfg.model).unwrap();
    let p = model.particle_dim();
    let z = FieldVector::from_pairs(&[(0.5, 0.0), (0.0, 0.5)]);
    let m0 = StateValuedMeasure::dirac(z.clone(), projector(&gaussian(p)), 1.0).unwrap();
    let pcfg = PropagatorConfig::default();
    let traj = measure_trajectory(&model, &pcfg, &m0, &[0.25, 0.5, 1.0]).unwrap();
    let frozen = traj.iter().all(|(_, m)| m.field_marginal() == m0.field_marginal());
    let h = model.generator(&z, 0.0).unwrap();
    let mut worst: f64 = 0.0;
    for &(s, t) in &[(0.0, 0.5), (0.2, 1.0), (0.0, 1.0)] {
        let u = propagator(&model, &pcfg, &z, s, t).unwrap();
        worst = worst.max((u - unitary_propagator(&h, t - s)).norm());
    }
    let passed = frozen && worst <= 1e-8;
    report(10, passed, "frozen field regime", format!("marginal unchanged: {frozen}, propagator error {worst:.2e} (tol 1e-8)"), start);
    assert!(passed);
}
