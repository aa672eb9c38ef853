//! Solver wall time on two-blob training sets of growing size.

use catmine_core::model::FeatureMask;
use catmine_core::svm::{train_nu_svm, Dataset, SolverOptions};
use catmine_core::testkit::random_blobs;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn bench_train(c: &mut Criterion) {
    let mut group = c.benchmark_group("nu_svm_train");
    group.sample_size(20);
    for per_class in [25usize, 100, 400] {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let (points, labels) = random_blobs(&mut rng, per_class, 0.4);
        let data = Dataset::new(points, labels).unwrap();
        let mask = FeatureMask::new(0b11).unwrap();
        group.bench_with_input(
            BenchmarkId::from_parameter(per_class * 2),
            &data,
            |b, data| {
                b.iter(|| {
                    black_box(
                        train_nu_svm(data, 0.3, 5.0, mask, &SolverOptions::default()).unwrap(),
                    )
                });
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_train);
criterion_main!(benches);
