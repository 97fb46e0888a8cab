//! Seeded speech-like test signals, so experiments run without a corpus.
//!
//! An utterance is a sequence of voiced segments, unvoiced noise bursts and
//! short pauses, each under a raised-cosine envelope. Voiced segments are a
//! harmonic series with a gliding, jittered pitch, 1/h tilt and three moving
//! formants, up to a maximum voiced frequency, plus aspiration noise.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::Waveform;
use crate::seed;

const PEAK: f64 = 0.5;

fn raised_cosine(i: usize, n: usize) -> f64 {
    0.5 - 0.5 * (2.0 * PI * (i as f64 + 0.5) / n as f64).cos()
}

fn formant_gain(freq: f64, formants: &[(f64, f64)]) -> f64 {
    1.0 + formants
        .iter()
        .map(|&(centre, bw)| 4.0 * (-((freq - centre) / bw).powi(2)).exp())
        .sum::<f64>()
}

/// (low, high, bandwidth) in Hz for the first three formants.
const FORMANT_RANGES: [(f64, f64, f64); 3] = [(300.0, 800.0, 120.0), (900.0, 2300.0, 180.0), (2400.0, 3300.0, 250.0)];

fn voiced(out: &mut Vec<f64>, n: usize, fs: f64, base_f0: f64, rng: &mut seed::Rng) {
    let f0_start = base_f0 * rng.random_range(0.85..1.15);
    let f0_end = f0_start * rng.random_range(0.9..1.1);
    let mut formant_track = || {
        let (lo, hi, bw) = FORMANT_RANGES[0];
        let f1 = (rng.random_range(lo..hi), bw);
        let (lo, hi, bw) = FORMANT_RANGES[1];
        let f2 = (rng.random_range(lo..hi), bw);
        let (lo, hi, bw) = FORMANT_RANGES[2];
        [f1, f2, (rng.random_range(lo..hi), bw)]
    };
    let (from, to) = (formant_track(), formant_track());
    // Harmonics stop at the maximum voiced frequency; aspiration noise
    // carries the band above it.
    let mvf = rng.random_range(3000.0..4500.0);
    let harmonics = (mvf / f0_start.min(f0_end)).floor() as usize;
    let mut phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let amp = rng.random_range(0.5..1.0);
    let breath = rng.random_range(0.05..0.15);
    let mut jitter = 0.0;
    let mut cycle = 0.0;
    let mut prev_noise = 0.0;
    for i in 0..n {
        let frac = i as f64 / n as f64;
        let f0 = (f0_start + (f0_end - f0_start) * frac) * (1.0 + jitter);
        cycle += f0 / fs;
        if cycle >= 1.0 {
            cycle -= 1.0;
            let step: f64 = StandardNormal.sample(rng);
            jitter = (0.9 * jitter + 0.01 * step).clamp(-0.05, 0.05);
        }
        let formants: Vec<(f64, f64)> = from
            .iter()
            .zip(&to)
            .map(|(a, b)| (a.0 + (b.0 - a.0) * frac, a.1))
            .collect();
        let mut v = 0.0;
        for (h, ph) in phases.iter_mut().enumerate() {
            let freq = f0 * (h + 1) as f64;
            *ph += 2.0 * PI * freq / fs;
            if freq < mvf {
                v += ph.sin() * formant_gain(freq, &formants) / (h + 1) as f64;
            }
        }
        let x: f64 = StandardNormal.sample(rng);
        v += breath * (x - prev_noise);
        prev_noise = x;
        out.push(amp * raised_cosine(i, n) * v);
    }
}

fn unvoiced(out: &mut Vec<f64>, n: usize, rng: &mut seed::Rng) {
    let amp = rng.random_range(0.2..0.5);
    let mut prev = 0.0;
    for i in 0..n {
        let x: f64 = StandardNormal.sample(rng);
        // First-difference high-pass tilts the burst towards fricative energy.
        out.push(amp * raised_cosine(i, n) * (x - 0.9 * prev));
        prev = x;
    }
}

pub fn synthetic_utterance(seconds: f64, sample_rate: u32, seed: u64) -> Waveform {
    let fs = sample_rate as f64;
    let total = (seconds * fs).round().max(1.0) as usize;
    let mut rng = seed::rng(seed);
    let base_f0 = rng.random_range(90.0..230.0);
    let mut out = Vec::with_capacity(total + sample_rate as usize);
    let mut first = true;
    while out.len() < total {
        let roll: f64 = rng.random_range(0.0..1.0);
        if first || roll < 0.6 {
            let n = (rng.random_range(0.08..0.25) * fs) as usize;
            voiced(&mut out, n, fs, base_f0, &mut rng);
            first = false;
        } else if roll < 0.8 {
            let n = (rng.random_range(0.03..0.12) * fs) as usize;
            unvoiced(&mut out, n, &mut rng);
        } else {
            let n = (rng.random_range(0.03..0.15) * fs) as usize;
            out.extend(std::iter::repeat_n(0.0, n));
        }
    }
    out.truncate(total);
    let peak = out.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= PEAK / peak);
    }
    Waveform::mono(out, sample_rate).expect("finite synthetic samples")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_normalised() {
        let a = synthetic_utterance(1.0, 16_000, 4);
        let b = synthetic_utterance(1.0, 16_000, 4);
        let c = synthetic_utterance(1.0, 16_000, 5);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16_000);
        let peak = a.channel(0).iter().fold(0.0f64, |x, v| x.max(v.abs()));
        assert!((peak - PEAK).abs() < 1e-12);
    }

    #[test]
    fn energy_tilts_towards_low_frequencies() {
        use crate::dsp::{stft, FrameParams};
        let x = synthetic_utterance(2.0, 16_000, 9);
        let spec = stft(&x, &FrameParams::default()).unwrap();
        let band = |lo: usize, hi: usize| -> f64 {
            spec.bins
                .slice(ndarray::s![0, .., lo..hi])
                .iter()
                .map(|z| z.norm_sqr())
                .sum()
        };
        assert!(band(3, 64) > 3.0 * band(128, 256));
    }
}
