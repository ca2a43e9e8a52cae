use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pgdpir::fidelity::{prox_cold, prox_fixed_variance, prox_pg};
use pgdpir::InnerDescent;
use pgdpir_bench::prox_fixture;

fn data_step(c: &mut Criterion) {
    let descent = InnerDescent::to_tolerance(1e-6, 100_000);
    let mut group = c.benchmark_group("data_step");
    group.sample_size(20);
    for s in [1, 2] {
        let p = prox_fixture(64, s, 3);
        let sigma_bar_sq = p.mean_variance().unwrap();
        group.bench_with_input(BenchmarkId::new("closed_form", s), &p, |b, p| {
            b.iter(|| prox_fixed_variance(p, sigma_bar_sq).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("warm", s), &p, |b, p| {
            b.iter(|| prox_pg(p, &descent, true).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("cold", s), &p, |b, p| {
            b.iter(|| prox_cold(p, &descent).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, data_step);
criterion_main!(benches);
