use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use spikefield::fokker_planck::cfl_bound;
use spikefield::measures::CircleMeasure;
use spikefield::{
    discretize_initial, euler_step, fp_step, init_system, wasserstein1_joint, wasserstein1_v, InitialLaws,
    InteractionMode, ModelCoefficients, SimConfig, ThetaKernel, WeightedAtomMeasure,
};

fn model(theta: ThetaKernel) -> ModelCoefficients {
    ModelCoefficients { lambda_hat: 1.0, epsilon: 0.02, delta: 0.3, theta, ..ModelCoefficients::default() }
}

fn interaction(c: &mut Criterion) {
    let mut group = c.benchmark_group("euler_step");
    group.sample_size(20);
    let kernels = [
        ("constant", ThetaKernel::Constant { theta0: 2.0 }),
        ("gaussian", ThetaKernel::Gaussian { theta0: 2.0, length: 0.2 }),
    ];
    for (name, theta) in kernels {
        for n in [250usize, 1000, 4000] {
            for mode in [InteractionMode::Exact, InteractionMode::Binned] {
                if mode == InteractionMode::Exact && n > 1000 {
                    continue;
                }
                let mut cfg = SimConfig::new(n, 1e-3, 7, model(theta.clone()), InitialLaws::default());
                cfg.interaction = mode;
                let state = init_system(&cfg, 0).unwrap();
                group.bench_with_input(BenchmarkId::new(format!("{name}/{mode:?}"), n), &n, |b, _| {
                    b.iter_batched_ref(|| state.clone(), |s| euler_step(s, &cfg), criterion::BatchSize::LargeInput)
                });
            }
        }
    }
    group.finish();
}

fn pde_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("fp_step");
    group.sample_size(20);
    let coeffs = model(ThetaKernel::Gaussian { theta0: 2.0, length: 0.5 });
    for (m, k) in [(20usize, 200usize), (60, 400), (100, 800)] {
        let state = discretize_initial(&InitialLaws::default(), m, k, 1).unwrap();
        let dt = 0.4 * cfl_bound(2.0 / k as f64, &coeffs);
        group.bench_with_input(BenchmarkId::from_parameter(format!("{m}x{k}")), &state, |b, s| {
            b.iter(|| fp_step(black_box(s), dt, &coeffs).unwrap())
        });
    }
    group.finish();
}

fn distances(c: &mut Criterion) {
    let mut group = c.benchmark_group("w1");
    for n in [1_000usize, 100_000] {
        let a: Vec<(f64, f64)> = (0..n).map(|i| ((i as f64 * 0.618_033_988_7) % 2.0, 1.0 / n as f64)).collect();
        let b: Vec<(f64, f64)> = (0..n).map(|i| ((i as f64 * 0.414_213_562_4 + 0.3) % 2.0, 1.0 / n as f64)).collect();
        let (mu, nu) = (CircleMeasure::atoms(a), CircleMeasure::atoms(b));
        group.bench_with_input(BenchmarkId::new("circle", n), &n, |bch, _| {
            bch.iter(|| wasserstein1_v(black_box(&mu), black_box(&nu)).unwrap())
        });
    }
    for n in [100usize, 400] {
        let cfg = SimConfig::new(n, 1e-3, 3, model(ThetaKernel::Constant { theta0: 0.0 }), InitialLaws::default());
        let emp = |replica| {
            let s = init_system(&cfg, replica).unwrap();
            WeightedAtomMeasure::empirical(&s.positions, &s.voltages)
        };
        let (mu, nu) = (emp(0), emp(1));
        group.bench_with_input(BenchmarkId::new("joint", n), &n, |bch, _| {
            bch.iter(|| wasserstein1_joint(black_box(&mu), black_box(&nu)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, interaction, pde_step, distances);
criterion_main!(benches);
