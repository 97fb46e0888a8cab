use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use super::{distance, ArrayGeometry, CtfFilter, Point, Rir};
use crate::dsp::{convolve, stft_with_window, FrameParams, Waveform};
use crate::error::{Error, Result};
use crate::par::*;

/// STFT of each response channel on the mixture's frame grid. Frame `n` is
/// centred on tap `n · hop`, so taps near zero delay land in frame 0.
///
/// The response is framed with the partition-of-unity window
/// ([`FrameParams::partition_window`]) rather than the analysis window, so
/// each tap keeps unit total weight across the frames that share it.
pub fn ctf_from_rir(rir: &Rir, params: &FrameParams) -> Result<CtfFilter> {
    let wave = Waveform::new(rir.taps.clone(), rir.sample_rate)?;
    let spec = stft_with_window(&wave, params, &params.partition_window())?;
    Ok(CtfFilter {
        frames: spec.bins,
        params: *params,
    })
}

/// Free-field direct-path gains `exp(−j 2π f d / c) / (4π d)`, `[M × F]`.
pub fn steering_from_geometry(
    source: &Point,
    array: &ArrayGeometry,
    params: &FrameParams,
    speed_of_sound: f64,
) -> Array2<Complex64> {
    let bins = params.num_bins();
    Array2::from_shape_fn((array.len(), bins), |(m, f)| {
        let d = distance(source, &array.mic_positions[m]).max(1e-9);
        let omega = 2.0 * PI * params.bin_hz(f);
        Complex64::from_polar(1.0 / (4.0 * PI * d), -omega * d / speed_of_sound)
    })
}

/// Reverberant images `rir_m * dry` for every channel (full linear convolution).
pub fn synth_reverberant(dry: &Waveform, rir: &Rir) -> Result<Waveform> {
    if dry.channels() != 1 {
        return Err(Error::shape(format!(
            "dry signal must be mono, got {} channels",
            dry.channels()
        )));
    }
    if dry.sample_rate() != rir.sample_rate {
        return Err(Error::config(format!(
            "dry signal is {} Hz but the impulse response is {} Hz",
            dry.sample_rate(),
            rir.sample_rate
        )));
    }
    let x = dry.channel(0).to_vec();
    let rows: Vec<Vec<f64>> = (0..rir.channels())
        .into_par_iter()
        .map(|m| convolve(&x, &rir.channel(m).to_vec()))
        .collect();
    let len = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), len));
    for (m, row) in rows.into_iter().enumerate() {
        out.row_mut(m).assign(&ndarray::Array1::from(row));
    }
    Waveform::new(out, dry.sample_rate())
}
