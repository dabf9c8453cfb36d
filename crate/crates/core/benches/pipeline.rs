use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use isc_detect::batch::{simulate_many, sweep_seeds, Execution, ScenarioJob};
use isc_detect::pipeline::{run_replay, ReplayConfig};
use isc_detect::{synth_drive_cycle, table1_schedule, Detector, NoiseSpec, Sample};

fn detector_throughput(c: &mut Criterion) {
    let cfg = ReplayConfig::default();
    let replay = run_replay(&cfg, 0).unwrap();
    let samples: Vec<Sample> = replay.faulty.samples().collect();
    let p = &cfg.params;

    let mut group = c.benchmark_group("detector");
    group.throughput(Throughput::Elements(samples.len() as u64));
    group.bench_function("stream_16000", |b| {
        b.iter(|| {
            let mut det =
                Detector::new(&p.r0_table, replay.thresholds, p.capacity_ah, p.soc_init).unwrap();
            let mut n = 0u32;
            for s in &samples {
                n += det.step(black_box(*s)).unwrap().emission.is_some() as u32;
            }
            n
        })
    });
    group.finish();
}

fn scenario_batch(c: &mut Criterion) {
    let cfg = ReplayConfig::default();
    let jobs: Vec<ScenarioJob> = (0..8)
        .map(|seed| ScenarioJob {
            profile: synth_drive_cycle(cfg.duration_s, cfg.dt, seed).unwrap(),
            schedule: table1_schedule(),
            noise: NoiseSpec {
                seed,
                ..NoiseSpec::default()
            },
        })
        .collect();

    let mut group = c.benchmark_group("simulate_8_scenarios");
    group.sample_size(20);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| simulate_many(&cfg.params, black_box(&jobs), exec)),
        );
    }
    group.finish();
}

fn seed_sweep(c: &mut Criterion) {
    let cfg = ReplayConfig::default();
    let seeds: Vec<u64> = (0..8).collect();

    let mut group = c.benchmark_group("replay_sweep_8_seeds");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| sweep_seeds(&cfg, black_box(&seeds), exec)),
        );
    }
    group.finish();
}

criterion_group!(benches, detector_throughput, scenario_batch, seed_sweep);
criterion_main!(benches);
