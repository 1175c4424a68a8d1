use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use qclab_core::fock::{build_basis, coherent_state, weyl_apply, FockSpec};
use qclab_core::linalg::c;
use qclab_core::micro::{propagate_micro, HybridState, MicroConfig};
use qclab_core::models::{build_nelson_hamiltonian, nelson_1d, EffectiveModel, NuRegime};
use qclab_core::qc_dynamics::{propagator, PropagatorConfig};
use qclab_core::FieldVector;

fn model(eps: f64) -> qclab_core::ModelConfig {
    nelson_1d(16, 2.0 * std::f64::consts::PI, &[1.0, 2.0], &[c(0.5, 0.0), c(0.4, 0.0)], NuRegime::Free, eps).unwrap()
}

fn basis_build(cr: &mut Criterion) {
    cr.bench_function("basis_build_m2_cap80", |b| {
        b.iter(|| build_basis(FockSpec::new(2, black_box(80), 0.1).unwrap()).unwrap())
    });
}

fn lanczos_propagation(cr: &mut Criterion) {
    let eps = 0.1;
    let cfg = model(eps);
    let basis = build_basis(FockSpec::from_moment_bound(2, 1.0, eps).unwrap()).unwrap();
    let h = build_nelson_hamiltonian(&cfg, &basis).unwrap();
    let field = coherent_state(&basis, &FieldVector::from_pairs(&[(0.5, 0.0), (0.0, 0.5)])).unwrap().vector;
    let p = cfg.grid.particle_dim();
    let psi = qclab_core::linalg::DVec::from_element(p, c(1.0 / (p as f64).sqrt(), 0.0));
    let state = HybridState::pure(psi.kronecker(&field), p, basis.dim()).unwrap();
    let mcfg = MicroConfig::default();
    let mut group = cr.benchmark_group("lanczos");
    group.sample_size(10);
    group.bench_function("nelson_eps0.1_t0.1", |b| b.iter(|| propagate_micro(&h, black_box(&state), 0.1, &mcfg).unwrap()));
    group.finish();
}

fn weyl_action(cr: &mut Criterion) {
    let basis = build_basis(FockSpec::new(2, 80, 0.1).unwrap()).unwrap();
    let v = coherent_state(&basis, &FieldVector::from_pairs(&[(0.5, 0.0), (0.0, 0.5)])).unwrap().vector;
    let eta = FieldVector::from_pairs(&[(0.5, -0.3), (0.4, 0.6)]);
    cr.bench_function("weyl_apply_m2_cap80", |b| b.iter(|| weyl_apply(&basis, black_box(&eta), &v).unwrap()));
}

fn magnus_step(cr: &mut Criterion) {
    let m = EffectiveModel::new(&model(0.1)).unwrap();
    let z = FieldVector::from_pairs(&[(0.5, 0.0), (0.0, 0.5)]);
    let cfg = PropagatorConfig { dt: 1e-2, ..Default::default() };
    cr.bench_function("magnus_16grid_ten_steps", |b| b.iter(|| propagator(&m, &cfg, black_box(&z), 0.0, 0.1).unwrap()));
}

criterion_group!(benches, basis_build, lanczos_propagation, weyl_action, magnus_step);
criterion_main!(benches);
