use super::Rir;
use crate::error::{Error, Result};

/// Upper and lower edges (dB) of the fitted decay span.
const FIT_START_DB: f64 = -5.0;
const FIT_END_DB: f64 = -35.0;

/// Schroeder energy-decay curve in dB relative to total energy.
pub fn schroeder_curve_db(taps: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = taps
        .iter()
        .rev()
        .map(|v| {
            acc += v * v;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    edc.iter()
        .map(|&e| {
            if total > 0.0 && e > 0.0 {
                10.0 * (e / total).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// Decay time from the reference channel: least-squares line through the
/// −5..−35 dB part of the Schroeder curve, extrapolated to −60 dB.
pub fn measure_rt60(rir: &Rir) -> Result<f64> {
    let taps = rir.channel(0).to_vec();
    if taps.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("impulse response is silent".into()));
    }
    fit_t30(&schroeder_curve_db(&taps), rir.sample_rate as f64)
}

/// [`measure_rt60`] on a per-sample energy envelope instead of taps.
pub(crate) fn rt60_from_energy(energy: &[f64], sample_rate: f64) -> Result<f64> {
    let mut acc = 0.0;
    let mut edc: Vec<f64> = energy
        .iter()
        .rev()
        .map(|e| {
            acc += e;
            acc
        })
        .collect();
    edc.reverse();
    let total = edc.first().copied().unwrap_or(0.0);
    if !(total > 0.0) {
        return Err(Error::Degenerate("impulse response is silent".into()));
    }
    let curve: Vec<f64> = edc
        .iter()
        .map(|&e| {
            if e > 0.0 {
                10.0 * (e / total).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    fit_t30(&curve, sample_rate)
}

fn fit_t30(curve: &[f64], fs: f64) -> Result<f64> {
    let start = curve.iter().position(|&db| db <= FIT_START_DB);
    let end = curve.iter().position(|&db| db <= FIT_END_DB);
    let (Some(start), Some(end)) = (start, end) else {
        return Err(Error::Range(
            "energy decay spans less than 30 dB; cannot fit T30".into(),
        ));
    };
    // Both ends inclusive; `end` is the first sample at or below −35 dB.
    let span = &curve[start..=end];
    if span.len() < 2 || span.iter().any(|v| !v.is_finite()) {
        return Err(Error::Range(
            "energy decay spans less than 30 dB; cannot fit T30".into(),
        ));
    }
    let n = span.len() as f64;
    let mean_t = (0..span.len()).map(|i| (start + i) as f64 / fs).sum::<f64>() / n;
    let mean_db = span.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &db) in span.iter().enumerate() {
        let dt = (start + i) as f64 / fs - mean_t;
        sxy += dt * (db - mean_db);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::Degenerate("energy decay curve is not decreasing".into()));
    }
    Ok(-60.0 / slope)
}
