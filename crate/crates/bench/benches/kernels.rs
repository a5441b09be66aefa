use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use num_complex::Complex64;

use qhd_core::krylov::Propagator;
use qhd_core::state_space::DEFAULT_STATE_CAP;
use qhd_core::{
    build_scenario, decompose_sector, enumerate_sector, fragment_of, Lattice, PropagatorSettings, ScenarioKind,
    ScenarioSpec, SparseHamiltonian,
};

fn enumeration(c: &mut Criterion) {
    let lat = Lattice::new(6).unwrap();
    c.bench_function("enumerate L=6 M=14", |b| {
        b.iter(|| enumerate_sector(&lat, 14, DEFAULT_STATE_CAP).unwrap())
    });
    let sector = enumerate_sector(&lat, 14, DEFAULT_STATE_CAP).unwrap();
    c.bench_function("decompose L=6 M=14", |b| b.iter(|| decompose_sector(&lat, &sector).unwrap()));
}

fn second_row_fragment(side: usize) -> (Lattice, SparseHamiltonian) {
    let lat = Lattice::new(side).unwrap();
    let init = build_scenario(&ScenarioSpec::new(ScenarioKind::SecondRow, side)).unwrap();
    let basis = fragment_of(&lat, &init, DEFAULT_STATE_CAP).unwrap();
    let h = SparseHamiltonian::build(&lat, &basis, 1.0, 0.1).unwrap();
    (lat, h)
}

fn matvec(c: &mut Criterion) {
    let (_, h) = second_row_fragment(8);
    let x = vec![Complex64::new(1.0, 0.5); h.dim()];
    let mut y = vec![Complex64::default(); h.dim()];
    c.bench_function(&format!("apply dim={}", h.dim()), |b| b.iter(|| h.apply_into(&x, &mut y).unwrap()));
}

fn krylov_step(c: &mut Criterion) {
    let (_, h) = second_row_fragment(8);
    let mut psi = vec![Complex64::default(); h.dim()];
    psi[0] = Complex64::new(1.0, 0.0);
    let mut prop = Propagator::new(PropagatorSettings::default(), h.dim()).unwrap();
    c.bench_function(&format!("krylov step dim={}", h.dim()), |b| {
        b.iter_batched_ref(|| psi.clone(), |v| prop.step(&h, v).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group! {
    name = kernels;
    config = Criterion::default().sample_size(10);
    targets = enumeration, matvec, krylov_step
}
criterion_main!(kernels);
