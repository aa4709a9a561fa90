use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use blind_mimo::experiment::{success_trials, Algorithm, Execution, SuccessPoint, XCondition};

fn success_batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("success_trials");
    group.sample_size(10);
    for (n, k) in [(3, 8), (4, 10)] {
        let point = SuccessPoint {
            n,
            k,
            order: 2,
            c: 3.0,
            kappa_max: 1e6,
            algorithm: Algorithm::A2,
            x_condition: XCondition::None,
        };
        let label = format!("n{n}_k{k}");
        for (name, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel { threads: None }),
        ] {
            group.bench_with_input(BenchmarkId::new(name, &label), &point, |b, p| {
                b.iter(|| black_box(success_trials(p, 64, 1, 0, exec).unwrap()))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, success_batch);
criterion_main!(benches);
