//! Signal containers, STFT analysis/synthesis and the per-frequency filtering
//! primitives the spatial features are built from.

mod filter;
mod stft;

use std::f64::consts::PI;

use ndarray::{Array2, Array3, ArrayView1, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub use filter::{convolve, matched_filter_time_axis};
pub use stft::{istft, stft, stft_with_window};

/// Analysis window shape. Both are periodic so that shifted copies tile exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WindowKind {
    Hann,
    SqrtHann,
}

impl WindowKind {
    pub fn name(self) -> &'static str {
        match self {
            WindowKind::Hann => "hann",
            WindowKind::SqrtHann => "sqrt_hann",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "hann" => Ok(WindowKind::Hann),
            "sqrt_hann" => Ok(WindowKind::SqrtHann),
            other => Err(Error::config(format!("unknown window '{other}'"))),
        }
    }

    pub fn samples(self, len: usize) -> Vec<f64> {
        (0..len)
            .map(|n| {
                let hann = 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos();
                match self {
                    WindowKind::Hann => hann,
                    WindowKind::SqrtHann => hann.sqrt(),
                }
            })
            .collect()
    }
}

/// Framing of the short-time transform.
///
/// Frame `t` is centred on sample `t * hop`; the signal is zero-extended on
/// both sides. Phases are referenced to the frame centre, so a pure delay of
/// `d` samples shows up as `exp(-j 2π f d / fs)` regardless of the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FrameParams {
    pub sample_rate: u32,
    pub win_len: usize,
    pub hop: usize,
    pub fft_size: usize,
    pub window: WindowKind,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            sample_rate: 16_000,
            win_len: 512,
            hop: 256,
            fft_size: 512,
            window: WindowKind::SqrtHann,
        }
    }
}

/// Tolerance for the overlap-add check on the squared window.
pub const COLA_TOLERANCE: f64 = 1e-10;

impl FrameParams {
    pub fn validate(&self) -> Result<()> {
        if self.sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if self.hop == 0 || self.win_len < 2 {
            return Err(Error::config("hop and window length must be positive"));
        }
        if !(self.hop <= self.win_len && self.win_len <= self.fft_size) {
            return Err(Error::config(format!(
                "need hop <= win_len <= fft_size, got {} / {} / {}",
                self.hop, self.win_len, self.fft_size
            )));
        }
        let (lo, hi) = self.squared_window_overlap_range();
        if hi - lo > COLA_TOLERANCE * hi.max(1.0) {
            return Err(Error::config(format!(
                "{} window of {} samples is not overlap-add constant at hop {} (squared sum spans {lo:.6}..{hi:.6})",
                self.window.name(),
                self.win_len,
                self.hop
            )));
        }
        Ok(())
    }

    /// Min and max over one hop period of `Σ_t w²(n − t·hop)`.
    pub fn squared_window_overlap_range(&self) -> (f64, f64) {
        let w = self.window.samples(self.win_len);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..self.hop {
            let s: f64 = w.iter().skip(n).step_by(self.hop).map(|v| v * v).sum();
            lo = lo.min(s);
            hi = hi.max(s);
        }
        (lo, hi)
    }

    pub fn window_samples(&self) -> Vec<f64> {
        self.window.samples(self.win_len)
    }

    /// Squared analysis window scaled so its hop-shifted copies sum to one.
    /// Framing an impulse response with it splits every tap across frames
    /// without changing its total weight.
    pub fn partition_window(&self) -> Vec<f64> {
        let (lo, hi) = self.squared_window_overlap_range();
        let level = 0.5 * (lo + hi);
        self.window_samples().iter().map(|w| w * w / level).collect()
    }

    /// One-sided bin count `F = fft_size/2 + 1`.
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Frames needed so that every sample of an `len`-sample signal is covered
    /// by all the frames that overlap it.
    pub fn num_frames(&self, len: usize) -> usize {
        if len == 0 {
            return 0;
        }
        (len - 1 + self.win_len / 2) / self.hop + 1
    }

    pub fn bin_hz(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate as f64 / self.fft_size as f64
    }

    pub fn frames_for_seconds(&self, seconds: f64) -> usize {
        ((seconds * self.sample_rate as f64 / self.hop as f64).round() as usize).max(1)
    }

    pub fn frame_seconds(&self, frames: usize) -> f64 {
        frames as f64 * self.hop as f64 / self.sample_rate as f64
    }
}

/// Multichannel real signal, `[channels × samples]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Array2<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if samples.nrows() == 0 {
            return Err(Error::shape("waveform needs at least one channel"));
        }
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if let Some(pos) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite sample at flat index {pos}")));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let n = samples.len();
        Self::new(
            Array2::from_shape_vec((1, n), samples).expect("1 x n shape"),
            sample_rate,
        )
    }

    pub fn zeros(channels: usize, len: usize, sample_rate: u32) -> Self {
        Waveform {
            samples: Array2::zeros((channels.max(1), len)),
            sample_rate,
        }
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }

    pub fn channel(&self, m: usize) -> ArrayView1<'_, f64> {
        self.samples.row(m)
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.ncols() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }
}

/// One-sided complex STFT, `[channels × frames × bins]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bins: Array3<Complex64>,
    pub params: FrameParams,
    /// Length in samples of the analysed signal.
    pub len: usize,
}

impl Spectrogram {
    pub fn new(bins: Array3<Complex64>, params: FrameParams, len: usize) -> Result<Self> {
        params.validate()?;
        let (_, t, f) = bins.dim();
        if f != params.num_bins() {
            return Err(Error::shape(format!(
                "spectrogram has {f} bins, frame params imply {}",
                params.num_bins()
            )));
        }
        if t != params.num_frames(len) {
            return Err(Error::shape(format!(
                "spectrogram has {t} frames, a {len}-sample signal needs {}",
                params.num_frames(len)
            )));
        }
        Ok(Spectrogram { bins, params, len })
    }

    pub fn channels(&self) -> usize {
        self.bins.dim().0
    }

    pub fn frames(&self) -> usize {
        self.bins.dim().1
    }

    pub fn num_bins(&self) -> usize {
        self.bins.dim().2
    }

    pub fn channel(&self, m: usize) -> ArrayView2<'_, Complex64> {
        self.bins.index_axis(ndarray::Axis(0), m)
    }

    /// Same shape and framing, every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Spectrogram {
        Spectrogram {
            bins: self.bins.mapv(|z| z * factor),
            params: self.params,
            len: self.len,
        }
    }
}

/// Principal phase in (−π, π]; the phase of an exact zero is 0.
#[inline]
pub fn phase(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Wraps an angle into (−π, π].
#[inline]
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

/// Element-wise principal phase of a `[T × F]` map.
pub fn phase_map(spec: ArrayView2<'_, Complex64>) -> Array2<f64> {
    spec.mapv(phase)
}
