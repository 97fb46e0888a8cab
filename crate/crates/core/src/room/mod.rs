//! Shoebox room acoustics: image-source impulse responses, decay-time
//! measurement, and the STFT-domain (convolutive transfer function) view of a
//! response.

mod ctf;
mod ism;
mod rt60;

use ndarray::{Array2, Array3, ArrayView1};
use num_complex::Complex64;

use crate::dsp::FrameParams;
use crate::error::{Error, Result};

pub use ctf::{ctf_from_rir, steering_from_geometry, synth_reverberant};
pub use ism::{
    absorption_from_rt60, image_count_closed_form, image_sources, simulate_rir, Absorption, ImageSource, SINC_TAPS,
};
pub use rt60::{measure_rt60, schroeder_curve_db};

pub type Point = [f64; 3];

pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

/// Cumulative element offsets (m) of the 8-microphone non-uniform linear
/// array with spacings 15-10-5-20-5-10-15 cm.
pub const PROTOCOL_ARRAY_OFFSETS: [f64; 8] = [0.0, 0.15, 0.25, 0.30, 0.50, 0.55, 0.65, 0.80];

/// Smallest and largest room sizes used when sampling rooms.
pub const PROTOCOL_ROOM_MIN: Point = [3.0, 3.0, 2.5];
pub const PROTOCOL_ROOM_MAX: Point = [8.0, 6.0, 4.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoomSpec {
    pub dims: Point,
    pub rt60: f64,
    pub speed_of_sound: f64,
    /// Highest reflection order; `None` keeps every image that arrives
    /// within the response length.
    pub max_order: Option<u32>,
}

impl RoomSpec {
    pub fn new(dims: Point, rt60: f64) -> Self {
        RoomSpec {
            dims,
            rt60,
            speed_of_sound: DEFAULT_SPEED_OF_SOUND,
            max_order: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::config(format!(
                "room dimensions must be positive, got {:?}",
                self.dims
            )));
        }
        if !(self.rt60.is_finite() && self.rt60 > 0.0) {
            return Err(Error::config(format!("rt60 must be positive, got {}", self.rt60)));
        }
        if !(self.speed_of_sound.is_finite() && self.speed_of_sound > 0.0) {
            return Err(Error::config("speed of sound must be positive"));
        }
        Ok(())
    }

    /// Whether the dimensions fall inside the sampling bounds for room generation.
    pub fn within_protocol_bounds(&self) -> bool {
        (0..3).all(|d| self.dims[d] >= PROTOCOL_ROOM_MIN[d] - 1e-12 && self.dims[d] <= PROTOCOL_ROOM_MAX[d] + 1e-12)
    }

    pub fn volume(&self) -> f64 {
        self.dims.iter().product()
    }

    pub fn surface(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|d| p[d] > 0.0 && p[d] < self.dims[d])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub mic_positions: Vec<Point>,
}

impl ArrayGeometry {
    pub fn new(mic_positions: Vec<Point>) -> Result<Self> {
        if mic_positions.is_empty() {
            return Err(Error::config("array needs at least one microphone"));
        }
        Ok(ArrayGeometry { mic_positions })
    }

    /// Linear array along x, centred on `center`, elements at `offsets`
    /// (measured from the first element).
    pub fn linear(center: Point, offsets: &[f64]) -> Result<Self> {
        let (lo, hi) = offsets
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &o| (a.min(o), b.max(o)));
        let mid = 0.5 * (lo + hi);
        Self::new(
            offsets
                .iter()
                .map(|o| [center[0] + o - mid, center[1], center[2]])
                .collect(),
        )
    }

    pub fn protocol(center: Point) -> Self {
        Self::linear(center, &PROTOCOL_ARRAY_OFFSETS).expect("non-empty offsets")
    }

    pub fn len(&self) -> usize {
        self.mic_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mic_positions.is_empty()
    }

    pub fn center(&self) -> Point {
        let n = self.mic_positions.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.mic_positions {
            for d in 0..3 {
                c[d] += p[d] / n;
            }
        }
        c
    }
}

pub fn distance(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Time-domain impulse responses, `[channels × taps]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rir {
    pub taps: Array2<f64>,
    pub sample_rate: u32,
}

impl Rir {
    pub fn new(taps: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if taps.nrows() == 0 || taps.ncols() == 0 {
            return Err(Error::shape("impulse response must have channels and taps"));
        }
        if taps.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("non-finite impulse response tap".into()));
        }
        Ok(Rir { taps, sample_rate })
    }

    pub fn channels(&self) -> usize {
        self.taps.nrows()
    }

    pub fn len(&self) -> usize {
        self.taps.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.ncols() == 0
    }

    pub fn channel(&self, m: usize) -> ArrayView1<'_, f64> {
        self.taps.row(m)
    }
}

/// Band-to-band STFT filters of an impulse response, `[channels × frames × bins]`.
/// Frame 0 holds the steering-vector entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CtfFilter {
    pub frames: Array3<Complex64>,
    pub params: FrameParams,
}

impl CtfFilter {
    pub fn channels(&self) -> usize {
        self.frames.dim().0
    }

    pub fn num_frames(&self) -> usize {
        self.frames.dim().1
    }

    pub fn num_bins(&self) -> usize {
        self.frames.dim().2
    }

    /// `[M × F]` steering entries (frame 0).
    pub fn steering(&self) -> Array2<Complex64> {
        self.frames.index_axis(ndarray::Axis(1), 0).to_owned()
    }

    pub fn channel(&self, m: usize) -> ndarray::ArrayView2<'_, Complex64> {
        self.frames.index_axis(ndarray::Axis(0), m)
    }
}
