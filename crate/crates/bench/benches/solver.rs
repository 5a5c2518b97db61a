use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tmix_core::erm::{train_single, TrainHyper};
use tmix_core::exposure::{Membership, Strategy};
use tmix_core::mitigation::{run_sweep, AxisSpec, BasePoint, SimulationSettings, SweepAxis, SweepMode, SweepSpec};
use tmix_core::replica::{fixed_point_solve, proximal, Derivatives, SolverConfig};
use tmix_core::{build_teacher_geometry, sample_dataset, GenerativeParams, ReweighWeights};

fn params() -> GenerativeParams {
    GenerativeParams {
        rho: 0.3,
        q_teacher: 0.8,
        m_tilde_plus: 0.2,
        m_tilde_minus: 0.2,
        alpha: 0.5,
        ..Default::default()
    }
}

fn fixed_point(c: &mut Criterion) {
    let gen = params();
    let rw = ReweighWeights::NEUTRAL;
    let mut group = c.benchmark_group("fixed_point");
    group.sample_size(20);
    for (name, derivatives) in [("analytic", Derivatives::Analytic), ("finite_difference", Derivatives::FiniteDifference)] {
        let cfg = SolverConfig { derivatives, ..Default::default() };
        group.bench_function(BenchmarkId::new("single", name), |b| {
            b.iter(|| fixed_point_solve(black_box(&gen), 0.1, 0.0, &rw, &cfg, None).unwrap())
        });
    }
    let coupled = SolverConfig {
        derivatives: Derivatives::Analytic,
        membership: Membership { strategy: Strategy::Coupled, eta: 0.9 },
        ..Default::default()
    };
    group.bench_function(BenchmarkId::new("coupled", "analytic"), |b| {
        b.iter(|| fixed_point_solve(black_box(&gen), 0.1, 0.5, &rw, &coupled, None).unwrap())
    });
    for order in [60, 120, 240] {
        let cfg = SolverConfig { derivatives: Derivatives::Analytic, quadrature_order: order, ..Default::default() };
        group.bench_with_input(BenchmarkId::new("quadrature_order", order), &cfg, |b, cfg| {
            b.iter(|| fixed_point_solve(black_box(&gen), 0.1, 0.0, &rw, cfg, None).unwrap())
        });
    }
    group.finish();
}

fn proximal_operator(c: &mut Criterion) {
    c.bench_function("proximal", |b| b.iter(|| proximal(black_box(0.3), black_box(-0.7), 2.5, 1.0, 1e-12)));
}

fn erm_training(c: &mut Criterion) {
    let gen = GenerativeParams { alpha: 2.0, ..params() };
    let mut group = c.benchmark_group("erm");
    group.sample_size(10);
    for d in [100, 400] {
        let teachers = build_teacher_geometry(&gen, d, 1).unwrap();
        let data = sample_dataset(&teachers, &gen, (gen.alpha * d as f64) as usize, 2).unwrap();
        let hyper = TrainHyper::default();
        group.bench_with_input(BenchmarkId::new("train_single", d), &d, |b, _| {
            b.iter(|| train_single(&data, &teachers, &ReweighWeights::NEUTRAL, &hyper, 3).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let spec = SweepSpec {
        axes: vec![AxisSpec::new(SweepAxis::Rho, 0.1, 0.9, 9)],
        base: BasePoint { generative: params(), ..Default::default() },
        mode: SweepMode::Theory,
        solver: SolverConfig { derivatives: Derivatives::Analytic, ..Default::default() },
        simulation: SimulationSettings::default(),
    };
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    group.bench_function("rho_9_cells", |b| b.iter(|| run_sweep(black_box(&spec), Some(1)).unwrap()));
    group.finish();
}

criterion_group!(benches, fixed_point, proximal_operator, erm_training, sweep);
criterion_main!(benches);
