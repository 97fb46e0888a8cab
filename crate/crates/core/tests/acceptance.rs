//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::{Array2, Array3};
use num_complex::Complex64;
use rand::Rng;
use rirsf_core::dsp::{istft, matched_filter_time_axis, stft, FrameParams, Spectrogram, Waveform, WindowKind};
use rirsf_core::eval::{
    draw_mixture, mixture_seed, room_slot_seed, run_experiment, simulate_room, synthetic_utterance, Band,
    ExperimentConfig, ExperimentReport, RunOptions, ScenarioKind,
};
use rirsf_core::features::{compute_c_kernel, compute_rsf, compute_sf, compute_sf_with_steering, PairSet, Steering};
use rirsf_core::io::{encode_wav, SampleFormat, Tensor};
use rirsf_core::room::{
    ctf_from_rir, image_sources, measure_rt60, simulate_rir, Absorption, ArrayGeometry, CtfFilter, RoomSpec,
};
use rirsf_core::seed;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_cube(shape: (usize, usize, usize), seed: u64) -> Array3<Complex64> {
    let mut rng = seed::rng(seed);
    Array3::from_shape_fn(shape, |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

fn small_params() -> FrameParams {
    FrameParams {
        sample_rate: 16_000,
        win_len: 64,
        hop: 32,
        fft_size: 64,
        window: WindowKind::SqrtHann,
    }
}

fn random_spectrogram(channels: usize, frames: usize, seed: u64) -> Spectrogram {
    let p = small_params();
    let len = (frames - 1) * p.hop - p.win_len / 2 + 1;
    Spectrogram::new(random_cube((channels, frames, p.num_bins()), seed), p, len).unwrap()
}

fn max_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    (a - b).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

fn reduction_identity() -> Outcome {
    let pairs = PairSet::symmetric(6).unwrap();
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let spec = random_spectrogram(6, 20 + i as usize % 7, 100 + 2 * i);
        let ctf = CtfFilter {
            frames: random_cube((6, 3 + i as usize % 4, small_params().num_bins()), 101 + 2 * i),
            params: small_params(),
        };
        let sf = compute_sf(&spec, &ctf, &pairs).unwrap();
        let rsf = compute_rsf(&spec, &ctf, &pairs, 1).unwrap();
        worst = worst.max(max_diff(&sf.values, &rsf.values));
    }
    outcome(
        worst <= 1e-6,
        format!("max |RSF(k=1) - SF| over 50 fixtures = {worst:.2e} (<= 1e-6)"),
    )
}

fn anechoic_sanity() -> Outcome {
    let p = FrameParams::default();
    let delays = [0usize, 3, 5, 6, 9, 11, 13, 16];
    let dry = synthetic_utterance(2.0, p.sample_rate, 42);
    let dry = dry.channel(0);
    let len = dry.len();
    let samples = Array2::from_shape_fn((delays.len(), len), |(m, t)| {
        if t >= delays[m] {
            dry[t - delays[m]]
        } else {
            0.0
        }
    });
    let wave = Waveform::new(samples, p.sample_rate).unwrap();
    let spec = stft(&wave, &p).unwrap();
    let bins = p.num_bins();
    let steering = Steering(Array2::from_shape_fn((delays.len(), bins), |(m, f)| {
        Complex64::from_polar(1.0, -2.0 * PI * f as f64 * delays[m] as f64 / p.fft_size as f64)
    }));
    let pairs = PairSet::symmetric(delays.len()).unwrap();
    let sf = compute_sf_with_steering(&spec, &steering, &pairs).unwrap().values;

    // Active: within 40 dB of the loudest reference-channel bin, away from
    // the edge frames and the DC/Nyquist bins.
    let power = spec.channel(0).mapv(|z| z.norm_sqr());
    let peak = power.iter().cloned().fold(0.0, f64::max);
    let frames = spec.frames();
    let mut sum = 0.0;
    let mut n = 0usize;
    for t in 1..frames - 1 {
        for f in 1..bins - 1 {
            if power[[t, f]] >= peak * 1e-4 {
                sum += sf[[t, f]];
                n += 1;
            }
        }
    }
    let mean = sum / n as f64;
    let bound = 0.99 * pairs.len() as f64;
    outcome(
        n > 0 && mean >= bound,
        format!("mean SF over {n} active bins = {mean:.4} (>= {bound:.2})"),
    )
}

fn row_value(
    report: &ExperimentReport,
    band: &str,
    scenario: ScenarioKind,
    feature: &str,
    k: Option<usize>,
    auc: bool,
) -> f64 {
    let kind = rirsf_core::features::FeatureKind::parse(feature).unwrap();
    let row = report
        .row(band, scenario, kind, k)
        .unwrap_or_else(|| panic!("no row for {band} {} {feature} {k:?}", scenario.name()));
    let v = if auc { row.auc } else { row.mean_on_target };
    v.unwrap_or(f64::NAN)
}

fn strong_superiority(r: &ExperimentReport) -> Outcome {
    let ideal = ScenarioKind::Ideal;
    let sf_mean = row_value(r, "strong", ideal, "sf", None, false);
    let rsf_mean = row_value(r, "strong", ideal, "rsf", Some(10), false);
    let gap = rsf_mean - sf_mean;
    let a_sf = row_value(r, "strong", ideal, "sf", None, true);
    let a2 = row_value(r, "strong", ideal, "rsf", Some(2), true);
    let a10 = row_value(r, "strong", ideal, "rsf", Some(10), true);
    outcome(
        gap >= 0.15 && a10 > a2 && a2 > a_sf,
        format!(
            "target-bin mean RSF(10) - SF = {gap:.4} (>= 0.15); AUC RSF(10) {a10:.4} > RSF(2) {a2:.4} > SF {a_sf:.4}"
        ),
    )
}

fn robustness_gap(r: &ExperimentReport) -> Outcome {
    let ideal = ScenarioKind::Ideal;
    let drop = |feature: &str, k| {
        row_value(r, "weak", ideal, feature, k, true) - row_value(r, "strong", ideal, feature, k, true)
    };
    let (d_rsf, d_sf) = (drop("rsf", Some(10)), drop("sf", None));
    outcome(
        d_rsf < d_sf,
        format!("AUC drop weak->strong: RSF(10) {d_rsf:.4} < SF {d_sf:.4}"),
    )
}

fn scenario_ordering(r: &ExperimentReport) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for band in ["weak", "strong"] {
        let a = |s| row_value(r, band, s, "rsf", Some(10), true);
        let (ideal, sce1, sce2) = (a(ScenarioKind::Ideal), a(ScenarioKind::Sce1), a(ScenarioKind::Sce2));
        pass &= (sce1 - ideal).abs() <= 0.05 && sce2 < sce1;
        parts.push(format!("{band}: ideal {ideal:.4}, sce1 {sce1:.4}, sce2 {sce2:.4}"));
    }
    outcome(
        pass,
        format!(
            "RSF(10) AUC, |sce1 - ideal| <= 0.05 and sce2 < sce1; {}",
            parts.join("; ")
        ),
    )
}

fn concentration(r: &ExperimentReport) -> Outcome {
    let mut checked = 0;
    let mut failing = Vec::new();
    let mut worst = f64::INFINITY;
    for d in r.rooms.iter().filter(|d| d.band == "strong") {
        let (Some(c1), Some(c10)) = (d.concentration_at(1), d.concentration_at(10)) else {
            failing.push(format!("room {} lacks diagnostics", d.room));
            continue;
        };
        for (m, (a, b)) in c1.iter().zip(c10).enumerate() {
            checked += 1;
            worst = worst.min(b / a);
            if b <= a {
                failing.push(format!("room {} mic {m}", d.room));
            }
        }
    }
    outcome(
        checked > 0 && failing.is_empty(),
        format!(
            "{checked} strong-band responses, min concentration ratio k=10/k=1 = {worst:.3}{}",
            if failing.is_empty() {
                String::new()
            } else {
                format!("; not higher: {}", failing.join(", "))
            }
        ),
    )
}

fn acoustics() -> Outcome {
    let array = ArrayGeometry::protocol([3.1, 2.4, 1.4]);
    let source = [4.7, 3.6, 1.6];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for i in 1..=7 {
        let target = i as f64 / 10.0;
        let room = RoomSpec::new([6.3, 4.9, 3.1], target);
        let rir = simulate_rir(&room, &source, &array, Absorption::default(), 16_000).unwrap();
        let measured = measure_rt60(&rir).unwrap();
        let err = measured / target - 1.0;
        worst = worst.max(err.abs());
        parts.push(format!("{target:.1}->{measured:.3}"));
    }
    let room = RoomSpec::new([6.3, 4.9, 3.1], 0.4);
    let first_order = image_sources(&room, &source, Some(1), &source, 1e3).len();
    outcome(
        worst <= 0.2 && first_order == 7,
        format!(
            "worst RT60 error {:.1}% (<= 20%) [{}]; order-1 arrivals {first_order} (== 7)",
            100.0 * worst,
            parts.join(", ")
        ),
    )
}

fn numerical_core() -> Outcome {
    let p = FrameParams::default();
    let mut rng = seed::rng(9);
    let samples = Array2::from_shape_fn((3, 12_345), |_| rng.random_range(-1.0..1.0));
    let wave = Waveform::new(samples, p.sample_rate).unwrap();
    let back = istft(&stft(&wave, &p).unwrap()).unwrap();
    let stft_err = max_diff(wave.samples(), back.samples());

    // Brute force with explicit zero extension of the spectrogram.
    let mut mf_err = 0.0f64;
    for i in 0..10u64 {
        let (frames, bins, k) = (15 + i as usize, 9, 1 + i as usize % 6);
        let spec = random_cube((1, frames, bins), 500 + i).index_axis_move(ndarray::Axis(0), 0);
        let kernel = random_cube((1, 6, bins), 600 + i).index_axis_move(ndarray::Axis(0), 0);
        let got = matched_filter_time_axis(spec.view(), kernel.view(), k).unwrap();
        let mut padded = Array2::zeros((frames + k, bins));
        padded.slice_mut(ndarray::s![..frames, ..]).assign(&spec);
        for t in 0..frames {
            for f in 0..bins {
                let want: Complex64 = (0..k).map(|n| kernel[[n, f]].conj() * padded[[t + n, f]]).sum();
                mf_err = mf_err.max((got[[t, f]] - want).norm());
            }
        }
    }

    let mut lag0_ok = true;
    let mut fixtures = 0;
    let mut check = |ctf: &CtfFilter| {
        for k in 1..=ctf.num_frames().min(10) {
            let c = compute_c_kernel(ctf, k).unwrap();
            fixtures += 1;
            lag0_ok &= c
                .values
                .index_axis(ndarray::Axis(1), 0)
                .iter()
                .all(|z| z.im == 0.0 && z.re >= 0.0);
        }
    };
    for i in 0..10u64 {
        check(&CtfFilter {
            frames: random_cube((4, 12, 33), 700 + i),
            params: small_params(),
        });
    }
    let room = RoomSpec::new([5.2, 4.1, 2.8], 0.6);
    let rir = simulate_rir(
        &room,
        &[1.2, 1.1, 1.5],
        &ArrayGeometry::protocol([3.0, 2.5, 1.3]),
        Absorption::default(),
        16_000,
    )
    .unwrap();
    check(&ctf_from_rir(&rir, &p).unwrap());

    outcome(
        stft_err <= 1e-6 && mf_err <= 1e-10 && lag0_ok,
        format!(
            "STFT round trip {stft_err:.2e} (<= 1e-6); matched filter vs brute force {mf_err:.2e} (<= 1e-10); C-kernel lag 0 real and non-negative on {fixtures} kernels: {lag0_ok}"
        ),
    )
}

/// Output bytes of a smoke experiment plus one simulated room and mixture.
fn smoke_artifacts(master: u64) -> Vec<Vec<u8>> {
    let config = ExperimentConfig::smoke(master);
    let report = run_experiment(&config, RunOptions { keep_raw: true }).unwrap();
    let mut out = vec![report.to_csv().into_bytes(), report.rooms_csv().into_bytes()];
    for raw in &report.raw {
        out.push(Tensor::real(raw.values.view().into_dyn()).encode().unwrap());
    }
    let band = Band::new("strong", 0.3, 0.4);
    let setup = simulate_room(&config, &band, room_slot_seed(master, 0, 0)).unwrap();
    out.push(Tensor::real(setup.target_rir.taps.view().into_dyn()).encode().unwrap());
    let bundle = draw_mixture(
        &config,
        (&setup.target_rir, &setup.interferer_rir),
        mixture_seed(setup.seed, 0),
    )
    .unwrap();
    for wave in [&bundle.mixture, &bundle.target, &bundle.interferer] {
        out.push(encode_wav(wave, SampleFormat::Float32).unwrap());
        out.push(encode_wav(wave, SampleFormat::Pcm16).unwrap());
    }
    out
}

fn determinism() -> Outcome {
    let a = smoke_artifacts(11);
    let b = smoke_artifacts(11);
    let c = smoke_artifacts(12);
    let same = a == b;
    let differs = a[0] != c[0];
    outcome(
        same && differs,
        format!(
            "{} CSV/tensor/WAV outputs byte-identical on rerun: {same}; another seed changes the CSV: {differs}",
            a.len()
        ),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, limit: Duration, run: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = run();
        let took = start.elapsed();
        let in_time = took <= limit;
        let pass = o.pass && in_time;
        if !pass {
            failed += 1;
        }
        println!(
            "{} {id} {name}: {}; {:.2} s (< {} s){}",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            took.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { " over time" }
        );
    };
    let secs = Duration::from_secs;

    report(1, "reduction identity", secs(5), &mut reduction_identity);
    report(2, "anechoic sanity", secs(10), &mut anechoic_sanity);

    let config = ExperimentConfig {
        seed: 1,
        ..Default::default()
    };
    let start = Instant::now();
    let experiment = run_experiment(&config, RunOptions::default()).expect("default experiment runs");
    let run_time = start.elapsed();
    for f in &experiment.failures {
        println!("  experiment failure: {} room {}: {}", f.band, f.room, f.message);
    }
    println!(
        "  default experiment: {} rooms x {} mixtures per band in {:.1} s",
        config.rooms,
        config.mixtures_per_room,
        run_time.as_secs_f64()
    );
    // Criteria 3-5 share one run, so its time counts against their limit.
    let after_run = secs(600).saturating_sub(run_time);
    let r = &experiment;
    report(3, "strong-reverb superiority", after_run, &mut || strong_superiority(r));
    report(4, "robustness gap", after_run, &mut || robustness_gap(r));
    report(5, "scenario ordering", after_run, &mut || scenario_ordering(r));
    report(6, "kernel concentration", secs(60), &mut || concentration(r));
    report(7, "acoustics", secs(60), &mut acoustics);
    report(8, "numerical core", secs(30), &mut numerical_core);
    report(9, "determinism", secs(60), &mut determinism);

    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
