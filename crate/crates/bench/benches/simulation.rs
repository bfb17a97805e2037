use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ruralmesh_bench::{district, district_scaled, tiny};
use ruralmesh_core::radio::{effective_rate, LinkProfile, RadioStandard};
use ruralmesh_core::{run, SimTime};

fn tiny_day(c: &mut Criterion) {
    let cfg = tiny();
    c.bench_function("tiny/24h", |b| b.iter(|| run(black_box(&cfg), SimTime::from_hours(24.0)).unwrap()));
}

fn district_horizon(c: &mut Criterion) {
    let cfg = district();
    let mut group = c.benchmark_group("district");
    group.sample_size(20);
    for hours in [6.0, 24.0, 48.0] {
        group.bench_with_input(BenchmarkId::new("hours", hours), &hours, |b, &h| {
            b.iter(|| run(&cfg, SimTime::from_hours(h)).unwrap())
        });
    }
    group.finish();
}

fn district_load(c: &mut Criterion) {
    let mut group = c.benchmark_group("district_load");
    group.sample_size(10);
    for factor in [1.0, 4.0, 16.0] {
        let cfg = district_scaled(factor);
        group.bench_with_input(BenchmarkId::new("x", factor), &cfg, |b, cfg| {
            b.iter(|| run(cfg, SimTime::from_hours(24.0)).unwrap())
        });
    }
    group.finish();
}

fn radio(c: &mut Criterion) {
    let p = LinkProfile::new(RadioStandard::Dot11A);
    c.bench_function("effective_rate", |b| b.iter(|| effective_rate(black_box(&p), black_box(7))));
}

criterion_group!(benches, tiny_day, district_horizon, district_load, radio);
criterion_main!(benches);
