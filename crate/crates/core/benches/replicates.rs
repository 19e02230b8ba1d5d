//! Parallel vs sequential replicate generation on a realistic mesh.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::DMatrix;

use manifold_extremes::covariance::CovarianceModel;
use manifold_extremes::geometry::{build_mesh, make_builtin, BuiltinKind};
use manifold_extremes::sampler::{factorize, sample_batch, sample_batch_seq, FactorizedCovariance};

fn circle_factor(points_target: f64) -> FactorizedCovariance {
    let circle = make_builtin(BuiltinKind::Circle { radius: 1.0 }).unwrap();
    let h = 0.25;
    let spacing = 2.0 * std::f64::consts::PI / h / points_target;
    let mesh = build_mesh(&circle, h, spacing).unwrap();
    let model = CovarianceModel::powered_exponential(2.0, DMatrix::identity(2, 2)).unwrap();
    factorize(&model, h, &mesh).unwrap()
}

fn bench_replicates(c: &mut Criterion) {
    let mut group = c.benchmark_group("replicate_batches");
    for points in [128usize, 512] {
        let fc = circle_factor(points as f64);
        let reps = 256;
        group.bench_with_input(BenchmarkId::new("parallel", points), &fc, |b, fc| {
            b.iter(|| sample_batch(fc, reps, 42));
        });
        group.bench_with_input(BenchmarkId::new("sequential", points), &fc, |b, fc| {
            b.iter(|| sample_batch_seq(fc, reps, 42));
        });
    }
    group.finish();
}

criterion_group!(benches, bench_replicates);
criterion_main!(benches);
