use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mlrate_bench::friedman;
use mlrate_core::learners::{elastic_net_fit, gbdt_fit, GbdtParams};

fn gbdt(c: &mut Criterion) {
    let mut group = c.benchmark_group("gbdt_fit");
    group.sample_size(10);
    for n in [1000, 5000] {
        let ds = friedman(n, 100, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &ds, |b, ds| {
            b.iter(|| gbdt_fit(ds.covariates(), ds.outcome(), &GbdtParams::default()).unwrap())
        });
    }
    group.finish();
}

fn elastic_net(c: &mut Criterion) {
    let mut group = c.benchmark_group("elastic_net_fit");
    for n in [1000, 5000] {
        let ds = friedman(n, 100, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &ds, |b, ds| {
            b.iter(|| elastic_net_fit(ds.covariates(), ds.outcome(), 1.0, 0.5, 1e-6, 1000).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, gbdt, elastic_net);
criterion_main!(benches);
