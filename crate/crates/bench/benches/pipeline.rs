use std::hint::black_box;

use boxseg_bench::{pixels, scene};
use boxseg_core::classify::{fit_discriminant, fit_knn, DiscriminantKind, Ridge};
use boxseg_core::lambda::{fit_lambda, LambdaConfig};
use boxseg_core::prefilter::{boxcox, stretch, BoxCoxParams, StretchRange};
use boxseg_core::sweep::{run_sweep, SweepConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn transform(c: &mut Criterion) {
    let mut g = c.benchmark_group("transform");
    for side in [128, 512] {
        let v = scene(side, 0).0.vectorize();
        g.throughput(Throughput::Elements(v.len() as u64));
        g.bench_with_input(BenchmarkId::new("boxcox_stretch", side), &v, |b, v| {
            let p = BoxCoxParams::new(0.37, 1.0).unwrap();
            b.iter(|| stretch(&boxcox(black_box(v), p).unwrap(), StretchRange::default()).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("fit_lambda", side), &v, |b, v| {
            let cfg = LambdaConfig::default();
            b.iter(|| fit_lambda(black_box(v), 1.0, &cfg).unwrap())
        });
    }
    g.finish();
}

fn classifiers(c: &mut Criterion) {
    let mut g = c.benchmark_group("classify");
    let (x, y) = pixels(256, 1);
    g.throughput(Throughput::Elements(x.rows() as u64));
    for kind in [DiscriminantKind::Lda, DiscriminantKind::Qda] {
        let name = format!("{kind:?}").to_lowercase();
        g.bench_function(format!("{name}_fit"), |b| {
            b.iter(|| fit_discriminant(black_box(&x), &y, 2, kind, Ridge::default()).unwrap())
        });
        let model = fit_discriminant(&x, &y, 2, kind, Ridge::default()).unwrap();
        g.bench_function(format!("{name}_predict"), |b| b.iter(|| model.predict(black_box(&x)).unwrap()));
    }
    let (train, labels) = pixels(64, 2);
    let (queries, _) = pixels(64, 3);
    let knn = fit_knn(&train, &labels, 2, 5).unwrap();
    g.throughput(Throughput::Elements(queries.rows() as u64));
    g.bench_function("knn5_predict_4096x4096", |b| b.iter(|| knn.predict(black_box(&queries)).unwrap()));
    g.finish();
}

fn sweep(c: &mut Criterion) {
    let (img, mask) = scene(128, 4);
    let cfg = SweepConfig {
        annotate_mle: false,
        ..SweepConfig::default()
    };
    let mut g = c.benchmark_group("sweep");
    g.sample_size(10);
    g.bench_function("lda_61_points_128", |b| b.iter(|| run_sweep(black_box(&img), &mask, &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, transform, classifiers, sweep);
criterion_main!(benches);
