use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tqsvd_core::harness::generate_preference_tensor;
use tqsvd_core::recsys::{algorithm4, classical_reference_pipeline, Algorithm4Config};

fn pipeline_bench(c: &mut Criterion) {
    let mut group = c.benchmark_group("recommendation");
    group.sample_size(20);
    for n in [4, 8] {
        let t = generate_preference_tensor(n, 2, 1.0, 11).unwrap();
        let thr = vec![0.5; n];
        let mut cfg = Algorithm4Config::oracle(8).unwrap();
        cfg.context = Some(0);
        cfg.shots = 100;
        group.bench_with_input(BenchmarkId::new("simulated", n), &n, |bencher, _| {
            bencher.iter(|| algorithm4(black_box(&t), &thr, 0, &cfg).unwrap());
        });
        group.bench_with_input(BenchmarkId::new("classical", n), &n, |bencher, _| {
            bencher.iter(|| classical_reference_pipeline(black_box(&t), &thr, 0).unwrap());
        });
    }
}

criterion_group!(benches, pipeline_bench);
criterion_main!(benches);
