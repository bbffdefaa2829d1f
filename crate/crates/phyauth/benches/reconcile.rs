//! Throughput of the frame-error-rate sweep: the default path (rayon
//! data-parallel when the `parallel` feature is on) against the
//! always-available sequential baseline, over the two heaviest decoder
//! families. Trials derive their RNGs independently, so both paths produce
//! identical counts; the comparison is purely about time.
//!
//! Run with `cargo bench --bench reconcile`; add `--no-default-features`
//! to see the default path collapse onto the sequential baseline.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use phyauth::coding::fixture::by_name;
use phyauth::coding::DecoderParams;
use phyauth::skg::{run_fer_sweep, run_fer_sweep_sequential, FerExperiment};

fn experiments() -> Vec<(&'static str, FerExperiment)> {
    vec![
        (
            "polar-512-L8",
            FerExperiment {
                code: by_name("polar-512-267").expect("builtin fixture"),
                params: DecoderParams::PolarList { list_size: 8 },
                p_grid: vec![0.05],
                trials: 64,
                master_seed: 11,
            },
        ),
        (
            "ldpc-512-bp-osd1",
            FerExperiment {
                code: by_name("ldpc-3-6-512").expect("builtin fixture"),
                params: DecoderParams::LdpcBp {
                    max_iter: 30,
                    osd_order: Some(1),
                },
                p_grid: vec![0.05],
                trials: 32,
                master_seed: 12,
            },
        ),
    ]
}

fn bench_sweeps(c: &mut Criterion) {
    let mut group = c.benchmark_group("fer-sweep");
    group.sample_size(10);
    for (name, exp) in experiments() {
        group.bench_with_input(BenchmarkId::new("default", name), &exp, |b, exp| {
            b.iter(|| run_fer_sweep(exp).expect("sweep runs"))
        });
        group.bench_with_input(BenchmarkId::new("sequential", name), &exp, |b, exp| {
            b.iter(|| run_fer_sweep_sequential(exp).expect("sweep runs"))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_sweeps);
criterion_main!(benches);
