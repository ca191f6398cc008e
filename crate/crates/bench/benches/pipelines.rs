use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use poseinit_bench::{camera, frame};
use poseinit_core::image::{resample_closed, sobel};
use poseinit_core::silhouette::{
    extract_query_silhouette, generate_database, greedy_assignment, match_silhouette,
    shape_context, SilhouetteConfig, ViewGrid,
};
use poseinit_core::svd::{detect_lines, solve_svd, SvdConfig};
use poseinit_core::PixelPoint;

fn bench_image(c: &mut Criterion) {
    let (img, _) = frame(20);
    c.bench_function("sobel 1920x1080", |b| b.iter(|| sobel(black_box(&img))));
    let cfg = SvdConfig::default();
    c.bench_function("detect_lines", |b| {
        b.iter(|| detect_lines(black_box(&img), &camera(), &cfg))
    });
}

fn bench_shape_context(c: &mut Criterion) {
    let poly: Vec<PixelPoint> = [
        (0.0, 0.0),
        (120.0, 0.0),
        (120.0, 40.0),
        (40.0, 40.0),
        (40.0, 160.0),
        (0.0, 160.0),
    ]
    .iter()
    .map(|&(u, v)| PixelPoint::new(u, v))
    .collect();
    let pts = resample_closed(&poly, 100);
    c.bench_function("shape_context 100 points", |b| {
        b.iter(|| shape_context(black_box(&pts), 5, 12))
    });
    let a = shape_context(&pts, 5, 12).unwrap();
    let shifted: Vec<PixelPoint> = pts.iter().map(|p| PixelPoint::new(p.v, p.u)).collect();
    let d = shape_context(&shifted, 5, 12).unwrap();
    c.bench_function("greedy_assignment 100x100", |b| {
        b.iter(|| greedy_assignment(black_box(&a), &d))
    });
}

fn bench_pipelines(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipelines");
    group.sample_size(10);
    let (img, model) = frame(20);
    let cam = camera();
    group.bench_function("solve_svd", |b| {
        b.iter(|| solve_svd(black_box(&img), &model, &cam, &SvdConfig::default()))
    });

    let cfg = SilhouetteConfig::default();
    let grid = ViewGrid {
        radii: vec![1600.0],
        ..ViewGrid::default()
    };
    let db = generate_database(&model, &grid, &cam, &cfg).unwrap();
    let query = extract_query_silhouette(&img, &model, &cam, &cfg).unwrap();
    group.bench_function("match_silhouette 252 entries", |b| {
        b.iter(|| match_silhouette(black_box(&query), &db, &cfg))
    });
    group.finish();
}

criterion_group!(benches, bench_image, bench_shape_context, bench_pipelines);
criterion_main!(benches);
