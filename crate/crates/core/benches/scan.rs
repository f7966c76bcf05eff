//! Benchmarks of the dictionary correlation scan and the two-stage search,
//! comparing the rayon-parallel scan against the sequential fallback.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use chirpmit::dictionary::build_grid;
use chirpmit::mitigation::{mitigate, CoarseGridSpec, FineGridSpec, MitigationConfig};
use chirpmit::omp::correlate_select_seq;
#[cfg(feature = "parallel")]
use chirpmit::omp::correlate_select_par;
use chirpmit::signal_model::{
    synthesize_scenario, InterferenceSource, ReceiverConfig, Scenario, TargetEcho, WaveformParams,
};

fn test_signal() -> (WaveformParams, ReceiverConfig, chirpmit::signal_model::SampledSignal) {
    let waveform = WaveformParams::new(77e9, 1e9, 1e-4).unwrap();
    let receiver = ReceiverConfig::new(2e7, 2000, &waveform).unwrap();
    let scenario = Scenario {
        waveform,
        receiver,
        targets: vec![TargetEcho::new(4e-7, 1.0).unwrap()],
        interferers: vec![InterferenceSource::new(waveform.slope + 2.3e12, 9.3e-6, 30.0).unwrap()],
        noise_std: 0.02,
        rng_seed: 1,
    };
    (waveform, receiver, synthesize_scenario(&scenario))
}

fn bench_scan(c: &mut Criterion) {
    let (waveform, receiver, y) = test_signal();
    let grid = build_grid(
        (-6e12, 6e12),
        (0.0, 1e-4),
        50,
        150,
        &receiver,
        waveform.chirp_duration,
        None,
    )
    .unwrap();

    let mut group = c.benchmark_group("correlation_scan");
    group.sample_size(20);
    group.bench_function("sequential", |b| {
        b.iter(|| correlate_select_seq(&grid, black_box(&y), true))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| correlate_select_par(&grid, black_box(&y), true))
    });
    group.finish();
}

fn bench_mitigate(c: &mut Criterion) {
    let (waveform, receiver, y) = test_signal();
    let config = MitigationConfig {
        coarse: CoarseGridSpec {
            slope_hypotheses: 50,
            time_hypotheses: 150,
            slope_range: Some((-6e12, 6e12)),
            time_range: Some((0.0, 1e-4)),
        },
        fine: FineGridSpec {
            slope_hypotheses: 20,
            time_hypotheses: 20,
        },
        ..MitigationConfig::default()
    };
    let mut group = c.benchmark_group("mitigate");
    group.sample_size(10);
    group.bench_function("two_stage", |b| {
        b.iter(|| mitigate(black_box(&y), &waveform, &receiver, &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_scan, bench_mitigate);
criterion_main!(benches);
