use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mpesplit::models::ModelId;
use mpesplit::order::{default_ladder, empirical_order, verify_conditions, MatrixOraclePair, Precision};
use mpesplit::scheme::{apply, apply_parallel, catalog};
use mpesplit_bench::fixture;

fn propagator(c: &mut Criterion) {
    let mut g = c.benchmark_group("heat_propagator");
    for n in [64, 128, 256] {
        let f = fixture(ModelId::Ac, n);
        let linear = &f.flows.linear[0];
        g.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| linear.apply(black_box(f.state.primary()), 0.01).unwrap())
        });
    }
    g.finish();
}

fn scheme_step(c: &mut Criterion) {
    let f = fixture(ModelId::Ac, 128);
    let mut g = c.benchmark_group("ac_step_128");
    for name in ["strang_a", "s3_1", "s4_1", "s4_4", "s6"] {
        let s = catalog(name).unwrap();
        g.bench_function(BenchmarkId::new("serial", name), |b| {
            b.iter(|| apply(&s, &f.flows, 0.01, black_box(&f.state)).unwrap())
        });
        g.bench_function(BenchmarkId::new("parallel", name), |b| {
            b.iter(|| apply_parallel(&s, &f.flows, 0.01, black_box(&f.state)).unwrap())
        });
    }
    g.finish();
}

fn order_check(c: &mut Criterion) {
    let s = catalog("s4_4").unwrap();
    let ladder = default_ladder();
    let mut g = c.benchmark_group("order_check_s4_4");
    g.sample_size(10);
    g.bench_function("conditions", |b| b.iter(|| verify_conditions(black_box(&s), 3)));
    let extended = MatrixOraclePair::default();
    g.bench_function("empirical_extended", |b| {
        b.iter(|| empirical_order(&s, &extended, &ladder).unwrap())
    });
    let double = MatrixOraclePair::default().with_precision(Precision::Double);
    g.bench_function("empirical_double", |b| {
        b.iter(|| empirical_order(&s, &double, &ladder).unwrap())
    });
    g.finish();
}

criterion_group!(benches, propagator, scheme_step, order_check);
criterion_main!(benches);
