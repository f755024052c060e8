use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use mlaris::array::{all_schemes, compare_schemes, BeamScenario};
use mlaris::extraction::{default_window, extract, seeded_channel, synthesize_received, ReflectorScene, SourceBurst};
use mlaris::fixtures::{fitted_envelope, SWEEP_9C};
use mlaris::io::read_sweep;
use mlaris::iq::{assign_loads, ReflectionTarget, StageSet};
use mlaris::matching::{optimize_tier, AnnealConfig, CascadedNetwork, FrequencyBand, DEFAULT_Z0};
use mlaris::transducer::fit_params;

fn fit(c: &mut Criterion) {
    let sweep = read_sweep(SWEEP_9C).unwrap();
    c.bench_function("fit_fixture_sweep", |b| {
        b.iter(|| fit_params(black_box(&sweep)).unwrap())
    });
}

fn matching(c: &mut Criterion) {
    let env = fitted_envelope(9).unwrap();
    let band = FrequencyBand::default();
    let prefix = CascadedNetwork::empty(DEFAULT_Z0).unwrap();
    let cfg = AnnealConfig::default();
    let mut group = c.benchmark_group("matching");
    group.sample_size(10);
    group.bench_function("optimize_first_tier", |b| {
        b.iter(|| optimize_tier(&prefix, &env.entries()[..3], &band, DEFAULT_Z0, black_box(&cfg)).unwrap())
    });
    group.finish();
}

fn beam(c: &mut Criterion) {
    let scenario = BeamScenario::eight_element_default();
    let schemes = all_schemes();
    c.bench_function("compare_four_schemes", |b| {
        b.iter(|| compare_schemes(black_box(&scenario), &schemes).unwrap())
    });
}

fn iq(c: &mut Criterion) {
    let stages = StageSet::default();
    let targets: Vec<ReflectionTarget> = (0..360)
        .map(|d| ReflectionTarget::new(0.8, (d as f64).to_radians() - std::f64::consts::PI).unwrap())
        .collect();
    c.bench_function("assign_360_targets", |b| {
        b.iter(|| {
            for t in &targets {
                black_box(assign_loads(t, &stages, DEFAULT_Z0).unwrap());
            }
        })
    });
}

fn extraction(c: &mut Criterion) {
    let burst = SourceBurst {
        carrier_freq: 41.1e3,
        cycles: 200.0,
        initial_phase: 0.0,
        sample_rate: 8.0 * 41.1e3,
        amplitude: 1.0,
    };
    let channel = seeded_channel(1, &burst).unwrap();
    let op = synthesize_received(&channel, &ReflectorScene::all_open(2), &burst).unwrap();
    let sh = synthesize_received(&channel, &ReflectorScene::all_short(2), &burst).unwrap();
    let scene = ReflectorScene::new(vec![
        mlaris::Complex64::new(0.3, 0.0),
        mlaris::Complex64::new(0.0, -0.6),
    ])
    .unwrap();
    let window = default_window(&channel, &burst).unwrap();
    c.bench_function("synthesize_and_extract", |b| {
        b.iter(|| {
            let load = synthesize_received(&channel, black_box(&scene), &burst).unwrap();
            extract(&load, &op, &sh, window).unwrap()
        })
    });
}

criterion_group!(benches, fit, matching, beam, iq, extraction);
criterion_main!(benches);
