use criterion::{criterion_group, criterion_main, Criterion};
use ttgda::dynamics::Algorithm;
use ttgda::exec::Executor;
use ttgda::harness::{ratio_sweep, ExperimentSpec};

fn spec() -> ExperimentSpec {
    ExperimentSpec {
        max_iters: 50_000,
        seeds: (0..4).collect(),
        algorithms: vec![Algorithm::Gda, Algorithm::Eg],
        ..ExperimentSpec::quadratic_default(1)
    }
}

fn sweeps(c: &mut Criterion) {
    let spec = spec();
    let mut group = c.benchmark_group("ratio_sweep");
    group.sample_size(10);
    group.bench_function("sequential", |b| b.iter(|| ratio_sweep(&spec, &Executor::Sequential).unwrap()));
    group.bench_function("parallel", |b| {
        b.iter(|| ratio_sweep(&spec, &Executor::Parallel { jobs: 0 }).unwrap())
    });
    group.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
