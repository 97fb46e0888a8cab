//! Rayon pool vs a single worker on the hot paths. On a build without the
//! `parallel` feature both variants run the sequential code.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPool;
use rirsf_core::dsp::{stft, FrameParams, Spectrogram};
use rirsf_core::eval::{draw_mixture, ExperimentConfig};
use rirsf_core::features::{compute_c_kernel, compute_rsf, compute_sf, PairSet};
use rirsf_core::room::{ctf_from_rir, simulate_rir, ArrayGeometry, CtfFilter, Rir, RoomSpec};

struct Fixture {
    room: RoomSpec,
    array: ArrayGeometry,
    source: [f64; 3],
    rir: Rir,
    ctf: CtfFilter,
    mix: Spectrogram,
    pairs: PairSet,
}

fn fixture() -> Fixture {
    let config = ExperimentConfig::default();
    let room = RoomSpec::new([6.4, 5.1, 3.2], 0.6);
    let array = ArrayGeometry::protocol([3.0, 2.2, 1.4]);
    let source = [4.1, 4.1, 1.6];
    let rir = simulate_rir(&room, &source, &array, config.absorption, 16_000).unwrap();
    let other = simulate_rir(&room, &[1.0, 3.4, 1.3], &array, config.absorption, 16_000).unwrap();
    let bundle = draw_mixture(&config, (&rir, &other), 5).unwrap();
    let params = FrameParams::default();
    Fixture {
        ctf: ctf_from_rir(&rir, &params).unwrap(),
        mix: stft(&bundle.mixture, &params).unwrap(),
        pairs: config.pairs,
        room,
        array,
        source,
        rir,
    }
}

fn pools() -> [(&'static str, ThreadPool); 2] {
    let build = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    [("pool", build(0)), ("single", build(1))]
}

fn throughput(c: &mut Criterion) {
    let f = fixture();
    let pools = pools();
    let mut group = c.benchmark_group("throughput");
    group.sample_size(10);
    for (name, pool) in &pools {
        group.bench_function(BenchmarkId::new("simulate_rir", name), |b| {
            b.iter(|| pool.install(|| simulate_rir(&f.room, &f.source, &f.array, Default::default(), 16_000).unwrap()))
        });
        group.bench_function(BenchmarkId::new("ctf_from_rir", name), |b| {
            b.iter(|| pool.install(|| ctf_from_rir(black_box(&f.rir), &FrameParams::default()).unwrap()))
        });
        group.bench_function(BenchmarkId::new("sf", name), |b| {
            b.iter(|| pool.install(|| compute_sf(black_box(&f.mix), &f.ctf, &f.pairs).unwrap()))
        });
        for k in [2, 10] {
            group.bench_function(BenchmarkId::new(format!("rsf_k{k}"), name), |b| {
                b.iter(|| pool.install(|| compute_rsf(black_box(&f.mix), &f.ctf, &f.pairs, k).unwrap()))
            });
        }
        group.bench_function(BenchmarkId::new("c_kernel_k10", name), |b| {
            b.iter(|| pool.install(|| compute_c_kernel(black_box(&f.ctf), 10).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, throughput);
criterion_main!(benches);
