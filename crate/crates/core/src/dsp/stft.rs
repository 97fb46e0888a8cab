use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

use super::{FrameParams, Spectrogram, Waveform};
use crate::error::{Error, Result};
use crate::par::*;

/// Offset of frame-relative sample `tau` (in `-win/2 .. win/2`) inside the
/// FFT buffer: negative offsets wrap to the end so the phase is referenced to
/// the frame centre.
#[inline]
fn buffer_slot(tau: isize, fft_size: usize) -> usize {
    tau.rem_euclid(fft_size as isize) as usize
}

/// Short-time Fourier transform of every channel.
pub fn stft(wave: &Waveform, params: &FrameParams) -> Result<Spectrogram> {
    stft_with_window(wave, params, &params.window_samples())
}

/// [`stft`] with the analysis window replaced by `window` (length `win_len`).
pub fn stft_with_window(wave: &Waveform, params: &FrameParams, window: &[f64]) -> Result<Spectrogram> {
    params.validate()?;
    if window.len() != params.win_len {
        return Err(Error::shape(format!(
            "window has {} samples, frame params say {}",
            window.len(),
            params.win_len
        )));
    }
    if wave.is_empty() {
        return Err(Error::shape("cannot analyse an empty waveform"));
    }
    if wave.sample_rate() != params.sample_rate {
        return Err(Error::config(format!(
            "waveform is {} Hz, frame params expect {} Hz",
            wave.sample_rate(),
            params.sample_rate
        )));
    }
    let len = wave.len();
    let frames = params.num_frames(len);
    let bins = params.num_bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(params.fft_size);
    let half = (params.win_len / 2) as isize;

    let per_channel: Vec<Array2<Complex64>> = (0..wave.channels())
        .into_par_iter()
        .map(|m| {
            let x = wave.channel(m);
            let mut out = Array2::zeros((frames, bins));
            let mut buf = vec![Complex64::new(0.0, 0.0); params.fft_size];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for t in 0..frames {
                buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
                let centre = (t * params.hop) as isize;
                for (i, &w) in window.iter().enumerate() {
                    let tau = i as isize - half;
                    let n = centre + tau;
                    if n < 0 || n >= len as isize {
                        continue;
                    }
                    buf[buffer_slot(tau, params.fft_size)].re += x[n as usize] * w;
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                out.row_mut(t).iter_mut().zip(&buf[..bins]).for_each(|(o, z)| *o = *z);
            }
            out
        })
        .collect();

    let mut spec = Array3::zeros((wave.channels(), frames, bins));
    for (m, ch) in per_channel.into_iter().enumerate() {
        spec.index_axis_mut(Axis(0), m).assign(&ch);
    }
    Spectrogram::new(spec, *params, len)
}

/// Least-squares overlap-add inverse of [`stft`].
pub fn istft(spec: &Spectrogram) -> Result<Waveform> {
    let params = spec.params;
    params.validate()?;
    let (channels, frames, bins) = spec.bins.dim();
    if bins != params.num_bins() || frames != params.num_frames(spec.len) {
        return Err(Error::shape(format!(
            "spectrogram {frames}x{bins} does not match frame params for {} samples",
            spec.len
        )));
    }
    let len = spec.len;
    let window = params.window_samples();
    let n_fft = params.fft_size;
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n_fft);
    let half = (params.win_len / 2) as isize;

    // Squared-window normaliser is shared by all channels.
    let mut norm = vec![0.0f64; len];
    for t in 0..frames {
        let centre = (t * params.hop) as isize;
        for (i, &w) in window.iter().enumerate() {
            let n = centre + i as isize - half;
            if n >= 0 && n < len as isize {
                norm[n as usize] += w * w;
            }
        }
    }

    let per_channel: Vec<Vec<f64>> = (0..channels)
        .into_par_iter()
        .map(|m| {
            let ch = spec.channel(m);
            let mut acc = vec![0.0f64; len];
            let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
            let mut scratch = vec![Complex64::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
            for t in 0..frames {
                let row = ch.row(t);
                for (k, slot) in buf.iter_mut().enumerate() {
                    *slot = if k < bins { row[k] } else { row[n_fft - k].conj() };
                }
                // Imaginary parts of DC/Nyquist are not representable in a real signal.
                buf[0].im = 0.0;
                if n_fft.is_multiple_of(2) {
                    buf[n_fft / 2].im = 0.0;
                }
                ifft.process_with_scratch(&mut buf, &mut scratch);
                let centre = (t * params.hop) as isize;
                for (i, &w) in window.iter().enumerate() {
                    let tau = i as isize - half;
                    let n = centre + tau;
                    if n < 0 || n >= len as isize {
                        continue;
                    }
                    acc[n as usize] += w * buf[buffer_slot(tau, n_fft)].re / n_fft as f64;
                }
            }
            acc.iter()
                .zip(&norm)
                .map(|(a, &d)| if d > 1e-12 { a / d } else { 0.0 })
                .collect()
        })
        .collect();

    let mut out = Array2::zeros((channels, len));
    for (m, ch) in per_channel.into_iter().enumerate() {
        out.row_mut(m).assign(&ndarray::Array1::from(ch));
    }
    Waveform::new(out, params.sample_rate)
}
