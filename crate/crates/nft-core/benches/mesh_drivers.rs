//! Compares the rayon-parallel mesh drivers against a sequential map over the
//! same propagations. Build with `--no-default-features` to bench the fully
//! sequential library configuration instead.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use nft_core::continuous::{continuous_spectrum, LambdaMesh};
use nft_core::signal::{auto_window, generate, make_grid, PulseFamily, PulseSpec};
use nft_core::steppers::{propagate, MethodId};
use nft_core::C64;

fn bench_continuous_spectrum(c: &mut Criterion) {
    let spec = PulseSpec::new(PulseFamily::Sech, C64::new(2.7, 0.0));
    let (t1, t2) = auto_window(&spec, 0.9999).unwrap();
    let grid = make_grid(t1, t2, 1024).unwrap();
    let signal = generate(&spec, &grid).unwrap();
    let mesh = LambdaMesh::new(-10.0, 10.0, 301).unwrap();

    let mut group = c.benchmark_group("continuous_spectrum");
    group.sample_size(10);
    group.bench_function("pool", |b| {
        b.iter(|| {
            let out =
                continuous_spectrum(black_box(&signal), MethodId::LayerPeeling, &mesh).unwrap();
            black_box(out.points.len())
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let points: Vec<_> = mesh
                .points()
                .into_iter()
                .map(|l| {
                    propagate(
                        MethodId::LayerPeeling,
                        black_box(&signal),
                        C64::new(l, 0.0),
                        false,
                    )
                    .unwrap()
                })
                .collect();
            black_box(points.len())
        })
    });
    group.finish();
}

fn bench_newton_refine(c: &mut Criterion) {
    use nft_core::search::{newton_refine, NewtonOptions};
    let spec = PulseSpec::new(PulseFamily::Sech, C64::new(2.7, 0.0));
    let (t1, t2) = auto_window(&spec, 0.9999).unwrap();
    let grid = make_grid(t1, t2, 1024).unwrap();
    let signal = generate(&spec, &grid).unwrap();
    let opts = NewtonOptions::for_signal(&signal);

    let mut group = c.benchmark_group("newton_refine");
    group.sample_size(20);
    group.bench_function("sy_largest", |b| {
        b.iter(|| {
            let out = newton_refine(
                black_box(&signal),
                MethodId::LayerPeeling,
                C64::new(0.0, 2.0),
                &opts,
            )
            .unwrap();
            black_box(out)
        })
    });
    group.finish();
}

criterion_group!(benches, bench_continuous_spectrum, bench_newton_refine);
criterion_main!(benches);
