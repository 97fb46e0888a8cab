use std::f64::consts::PI;

use ndarray::Array2;

use super::{distance, ArrayGeometry, Point, Rir, RoomSpec};
use crate::error::{Error, Result};
use crate::par::*;

/// Length of the windowed-sinc fractional-delay interpolator.
pub const SINC_TAPS: usize = 81;
const SINC_HALF: isize = (SINC_TAPS / 2) as isize;

/// Sabine constant `24 ln 10 / 343` in s/m.
const SABINE: f64 = 0.161;

/// How a target decay time is turned into a wall absorption coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Absorption {
    /// `α = 0.161 V / (T S)`.
    Sabine,
    /// `α = 1 − exp(−0.161 V / (T S))`.
    Eyring,
    /// Reflection coefficient searched so that the T30 of the image energy
    /// envelope at the first microphone equals the target. Specular shoebox
    /// images decay more slowly than either closed form predicts, and the
    /// direct path shortens short decays, so neither inversion lands within
    /// 20 % across 0.1–0.7 s.
    #[default]
    Calibrated,
}

impl Absorption {
    pub fn name(self) -> &'static str {
        match self {
            Absorption::Sabine => "sabine",
            Absorption::Eyring => "eyring",
            Absorption::Calibrated => "calibrated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sabine" => Ok(Absorption::Sabine),
            "eyring" => Ok(Absorption::Eyring),
            "calibrated" => Ok(Absorption::Calibrated),
            other => Err(Error::config(format!("unknown absorption model '{other}'"))),
        }
    }

    /// Absorption `α` and pressure reflection coefficient `β = sqrt(1 − α)`.
    /// The calibrated model depends on geometry; here it reports the Sabine
    /// value its search starts from.
    pub fn coefficients(self, room: &RoomSpec) -> Result<(f64, f64)> {
        room.validate()?;
        let ratio = SABINE * room.volume() / (room.rt60 * room.surface());
        let alpha = match self {
            Absorption::Sabine | Absorption::Calibrated => ratio,
            Absorption::Eyring => 1.0 - (-ratio).exp(),
        };
        if alpha > 1.0 {
            let min_rt60 = SABINE * room.volume() / room.surface();
            return Err(Error::Infeasible(format!(
                "rt60 {:.3} s needs absorption {alpha:.3} > 1 in a {:?} m room; minimum feasible rt60 is {min_rt60:.3} s",
                room.rt60, room.dims
            )));
        }
        Ok((alpha, (1.0 - alpha).sqrt()))
    }
}

/// Sabine inversion: uniform wall absorption that yields `room.rt60`.
pub fn absorption_from_rt60(room: &RoomSpec) -> Result<(f64, f64)> {
    Absorption::Sabine.coefficients(room)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageSource {
    pub position: Point,
    pub reflections: u32,
}

/// Images of `source` in the shoebox, up to `max_order` reflections and
/// within `radius` of `around`.
pub fn image_sources(
    room: &RoomSpec,
    source: &Point,
    max_order: Option<u32>,
    around: &Point,
    radius: f64,
) -> Vec<ImageSource> {
    // Per axis: image coordinate (1 − 2p)·s + 2qL with |q − p| + |q| reflections.
    let axis = |d: usize| -> Vec<(f64, u32)> {
        let l = room.dims[d];
        let s = source[d];
        let q_lo = ((around[d] - radius - s) / (2.0 * l)).floor() as i64 - 1;
        let q_hi = ((around[d] + radius + s) / (2.0 * l)).ceil() as i64 + 1;
        let mut out = Vec::new();
        for q in q_lo..=q_hi {
            for p in 0..=1i64 {
                let coord = (1 - 2 * p) as f64 * s + 2.0 * q as f64 * l;
                let refl = ((q - p).abs() + q.abs()) as u32;
                if (coord - around[d]).abs() <= radius && max_order.is_none_or(|o| refl <= o) {
                    out.push((coord, refl));
                }
            }
        }
        out
    };
    let (xs, ys, zs) = (axis(0), axis(1), axis(2));
    let r2 = radius * radius;
    let mut images = Vec::new();
    for &(x, rx) in &xs {
        let dx2 = (x - around[0]).powi(2);
        for &(y, ry) in &ys {
            let dxy2 = dx2 + (y - around[1]).powi(2);
            if dxy2 > r2 || max_order.is_some_and(|o| rx + ry > o) {
                continue;
            }
            for &(z, rz) in &zs {
                let refl = rx + ry + rz;
                if dxy2 + (z - around[2]).powi(2) > r2 || max_order.is_some_and(|o| refl > o) {
                    continue;
                }
                images.push(ImageSource {
                    position: [x, y, z],
                    reflections: refl,
                });
            }
        }
    }
    images
}

/// Number of shoebox images with at most `order` reflections: an axis with
/// `r > 0` reflections has two images, `r = 0` has one.
pub fn image_count_closed_form(order: u32) -> usize {
    let mut n = 0;
    for a in 0..=order {
        for b in 0..=order - a {
            for c in 0..=order - a - b {
                n += [a, b, c].iter().map(|&r| if r == 0 { 1 } else { 2 }).product::<usize>();
            }
        }
    }
    n
}

/// Per-tap tables for the Hann-windowed sinc centred on a fractional offset.
struct SincKernel {
    cos: [f64; SINC_TAPS],
    sin: [f64; SINC_TAPS],
    sign: [f64; SINC_TAPS],
    offset: [f64; SINC_TAPS],
}

impl SincKernel {
    fn new() -> Self {
        let mut k = SincKernel {
            cos: [0.0; SINC_TAPS],
            sin: [0.0; SINC_TAPS],
            sign: [0.0; SINC_TAPS],
            offset: [0.0; SINC_TAPS],
        };
        for j in 0..SINC_TAPS {
            let i = j as isize - SINC_HALF;
            let arg = 2.0 * PI * i as f64 / SINC_TAPS as f64;
            k.cos[j] = arg.cos();
            k.sin[j] = arg.sin();
            // sin(π(i − δ)) = −(−1)^i sin(πδ)
            k.sign[j] = if i.rem_euclid(2) == 0 { -1.0 } else { 1.0 };
            k.offset[j] = i as f64;
        }
        k
    }

    /// Taps `w(i − δ) · sinc(i − δ)` for `i = −40..=40`, `|δ| ≤ 1/2`.
    fn fill(&self, frac: f64, out: &mut [f64; SINC_TAPS]) {
        if frac.abs() < 1e-12 {
            out.fill(0.0);
            out[SINC_HALF as usize] = 1.0;
            return;
        }
        let (sf, cf) = (2.0 * PI * frac / SINC_TAPS as f64).sin_cos();
        let sin_frac = (PI * frac).sin() / PI;
        for j in 0..SINC_TAPS {
            // cos(2π(i − δ)/N) expanded so only δ needs a fresh sin/cos.
            let window = 0.5 * (1.0 + self.cos[j] * cf + self.sin[j] * sf);
            out[j] = window * self.sign[j] * sin_frac / (self.offset[j] - frac);
        }
    }
}

const CALIBRATION_STEPS: usize = 40;

/// Corner of the DC-blocking filter applied to every response. All image
/// amplitudes are positive, so dense late arrivals pile up into a slowly
/// varying offset that would otherwise dominate the tail.
pub const HIGH_PASS_HZ: f64 = 100.0;

/// Two cascaded one-pole DC blockers `y[n] = g (x[n] − x[n−1]) + R y[n−1]`
/// with `g = (1 + R) / 2` for unit gain at Nyquist.
fn high_pass(h: &mut [f64], fs: f64) {
    let r = (-2.0 * PI * HIGH_PASS_HZ / fs).exp();
    let g = 0.5 * (1.0 + r);
    for _ in 0..2 {
        let (mut x_prev, mut y_prev) = (0.0, 0.0);
        for v in h.iter_mut() {
            let y = g * (*v - x_prev) + r * y_prev;
            x_prev = *v;
            y_prev = y;
            *v = y;
        }
    }
}

/// Bisects `β` until the T30 of the image energy envelope (each image's
/// `(β^r / 4πd)²` binned at its rounded delay) matches `room.rt60`.
fn calibrated_beta(
    room: &RoomSpec,
    images: &[ImageSource],
    mic: &Point,
    len: usize,
    fs: f64,
    max_refl: u32,
) -> Result<f64> {
    let c = room.speed_of_sound;
    let arrivals: Vec<(usize, u32, f64)> = images
        .iter()
        .filter_map(|img| {
            let d = distance(&img.position, mic).max(1e-9);
            let n = (d / c * fs).round() as usize;
            (n < len).then(|| (n, img.reflections, (4.0 * PI * d).powi(-2)))
        })
        .collect();
    let mut energy = vec![0.0; len];
    let mut measure = |beta: f64| -> Option<f64> {
        let b2 = beta * beta;
        let gains: Vec<f64> = (0..=max_refl).map(|r| b2.powi(r as i32)).collect();
        energy.iter_mut().for_each(|e| *e = 0.0);
        for &(n, r, e) in &arrivals {
            energy[n] += gains[r as usize] * e;
        }
        super::rt60::rt60_from_energy(&energy, fs).ok()
    };
    // T30 is not monotone in β: near 1 the truncated response barely decays,
    // and near 0 only the direct path is left to fit. The physical branch
    // rises up to the peak, so bracket the crossing walking down from it.
    let grid: Vec<f64> = (1..20)
        .map(|i| i as f64 * 0.05)
        .chain([0.97, 0.98, 0.99, 0.995, 0.999])
        .collect();
    let times: Vec<f64> = grid.iter().map(|&b| measure(b).unwrap_or(f64::NAN)).collect();
    let peak = (0..grid.len())
        .filter(|&i| times[i].is_finite())
        .max_by(|&a, &b| times[a].total_cmp(&times[b]));
    let Some(peak) = peak.filter(|&i| times[i] >= room.rt60) else {
        return Err(Error::Infeasible(format!(
            "rt60 {:.3} s is not reachable with a {:.3} s response in a {:?} m room",
            room.rt60,
            len as f64 / fs,
            room.dims
        )));
    };
    let below = (0..peak).rev().find(|&i| !(times[i] >= room.rt60));
    let (mut lo, mut hi) = match below {
        Some(i) => (grid[i], grid[i + 1]),
        None => (0.0, grid[0]),
    };
    for _ in 0..CALIBRATION_STEPS {
        let mid = 0.5 * (lo + hi);
        match measure(mid) {
            Some(t) if t >= room.rt60 => hi = mid,
            _ => lo = mid,
        }
    }
    match measure(hi) {
        Some(t) if (t / room.rt60 - 1.0).abs() < 0.05 => Ok(hi),
        t => Err(Error::Infeasible(format!(
            "rt60 {:.3} s is not reachable in a {:?} m room (closest {:.3} s); minimum feasible rt60 depends on the source distance",
            room.rt60,
            room.dims,
            t.unwrap_or(f64::NAN)
        ))),
    }
}

/// Image-source impulse responses from `source` to every microphone.
///
/// Each image contributes `β^r / (4π d)` at delay `d / c`, placed with an
/// 81-tap Hann-windowed sinc, then high-passed at [`HIGH_PASS_HZ`]. The
/// response spans the latest direct-path
/// arrival plus `rt60` seconds.
pub fn simulate_rir(
    room: &RoomSpec,
    source: &Point,
    array: &ArrayGeometry,
    absorption: Absorption,
    sample_rate: u32,
) -> Result<Rir> {
    room.validate()?;
    if !room.contains(source) {
        return Err(Error::config(format!("source {source:?} outside room {:?}", room.dims)));
    }
    if let Some(p) = array.mic_positions.iter().find(|p| !room.contains(p)) {
        return Err(Error::config(format!("microphone {p:?} outside room {:?}", room.dims)));
    }
    let fs = sample_rate as f64;
    let c = room.speed_of_sound;
    let max_direct = array
        .mic_positions
        .iter()
        .map(|m| distance(m, source))
        .fold(0.0, f64::max);
    let len = (room.rt60 * fs).ceil() as usize + (max_direct / c * fs).ceil() as usize + SINC_HALF as usize + 1;

    let center = array.center();
    let spread = array
        .mic_positions
        .iter()
        .map(|m| distance(m, &center))
        .fold(0.0, f64::max);
    let reach = (len as f64 + SINC_HALF as f64) / fs * c;
    let images = image_sources(room, source, room.max_order, &center, reach + spread);
    let max_refl = images.iter().map(|i| i.reflections).max().unwrap_or(0);
    let beta = match absorption {
        Absorption::Calibrated => calibrated_beta(room, &images, &array.mic_positions[0], len, fs, max_refl)?,
        model => model.coefficients(room)?.1,
    };
    let gains: Vec<f64> = (0..=max_refl).map(|r| beta.powi(r as i32)).collect();

    let kernel = SincKernel::new();
    let rows: Vec<Vec<f64>> = array
        .mic_positions
        .clone()
        .into_par_iter()
        .map(|mic| {
            let mut h = vec![0.0f64; len];
            let mut pulse = [0.0f64; SINC_TAPS];
            for img in &images {
                let d = distance(&img.position, &mic);
                let delay = d / c * fs;
                let centre = delay.round();
                let n0 = centre as isize;
                if n0 - SINC_HALF >= len as isize {
                    continue;
                }
                kernel.fill(delay - centre, &mut pulse);
                let amp = gains[img.reflections as usize] / (4.0 * PI * d.max(1e-9));
                let first = n0 - SINC_HALF;
                let lo = (-first).max(0) as usize;
                let hi = ((len as isize - first) as usize).min(SINC_TAPS);
                let start = (first + lo as isize) as usize;
                for (out, p) in h[start..start + (hi - lo)].iter_mut().zip(&pulse[lo..hi]) {
                    *out += amp * p;
                }
            }
            high_pass(&mut h, fs);
            h
        })
        .collect();

    let mut taps = Array2::zeros((rows.len(), len));
    for (m, row) in rows.into_iter().enumerate() {
        taps.row_mut(m).assign(&ndarray::Array1::from(row));
    }
    Rir::new(taps, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn sabine_worked_example() {
        let room = RoomSpec::new([5.0, 4.0, 3.0], 0.5);
        let (alpha, beta) = absorption_from_rt60(&room).unwrap();
        // 0.161 · 60 / (0.5 · 94)
        assert!((alpha - 0.161 * 60.0 / 47.0).abs() < 1e-12);
        assert!((alpha - 0.2055).abs() < 1e-4);
        assert!((beta - (1.0 - alpha).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn long_decay_means_vanishing_absorption() {
        let room = RoomSpec::new([5.0, 4.0, 3.0], 1e9);
        let (alpha, _) = absorption_from_rt60(&room).unwrap();
        assert!(alpha < 1e-9);
    }

    #[test]
    fn too_short_decay_is_infeasible() {
        let room = RoomSpec::new([3.0, 3.0, 2.5], 0.05);
        let err = absorption_from_rt60(&room).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Infeasible(_)));
        assert!(msg.contains("minimum feasible rt60"), "{msg}");
    }

    #[test]
    fn eyring_is_always_feasible_and_weaker() {
        let room = RoomSpec::new([3.0, 3.0, 2.5], 0.05);
        let (alpha, _) = Absorption::Eyring.coefficients(&room).unwrap();
        assert!(alpha < 1.0);
        let room = RoomSpec::new([5.0, 4.0, 3.0], 0.5);
        let (ae, _) = Absorption::Eyring.coefficients(&room).unwrap();
        let (as_, _) = absorption_from_rt60(&room).unwrap();
        assert!(ae < as_);
    }

    #[test]
    fn direct_path_closed_form() {
        let mut room = RoomSpec::new([6.0, 5.0, 3.0], 0.3);
        room.max_order = Some(0);
        let src = [1.0, 2.5, 1.5];
        let mic = [2.7, 2.5, 1.5];
        let rir = simulate_rir(
            &room,
            &src,
            &ArrayGeometry::new(vec![mic]).unwrap(),
            Absorption::Sabine,
            16_000,
        )
        .unwrap();
        let h = rir.channel(0);
        let (peak, &val) = h
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap();
        assert_eq!(peak, 79);
        let expected_delay: f64 = 1.7 / 343.0 * 16_000.0;
        assert!((expected_delay - 79.3).abs() < 0.05);
        assert!(val > 0.0);
        // Passband magnitude is the free-field amplitude; the high-pass costs
        // well under 1 % at 2 kHz and above.
        for hz in [2000.0, 4000.0] {
            let w = 2.0 * PI * hz / 16_000.0;
            let z: Complex64 = h
                .iter()
                .enumerate()
                .map(|(n, &v)| Complex64::from_polar(v, -w * n as f64))
                .sum();
            let want = 1.0 / (4.0 * PI * 1.7);
            assert!((z.norm() / want - 1.0).abs() < 0.01, "{hz} Hz: {}", z.norm() / want);
        }
    }

    #[test]
    fn first_order_has_seven_arrivals() {
        let room = RoomSpec::new([5.0, 4.0, 3.0], 0.4);
        let src = [1.2, 1.5, 1.1];
        let imgs = image_sources(&room, &src, Some(1), &[2.0, 2.0, 1.5], 1e6);
        assert_eq!(imgs.len(), 7);
        assert_eq!(imgs.iter().filter(|i| i.reflections == 0).count(), 1);
    }

    #[test]
    fn image_counts_match_enumeration() {
        let room = RoomSpec::new([4.0, 3.5, 2.8], 0.4);
        let src = [1.0, 2.0, 1.3];
        for q in 0..=2 {
            // Oracle: enumerate every (q, p) triple directly and count by reflection total.
            let mut brute = 0;
            for qx in -3i64..=3 {
                for px in 0..=1i64 {
                    for qy in -3i64..=3 {
                        for py in 0..=1i64 {
                            for qz in -3i64..=3 {
                                for pz in 0..=1i64 {
                                    let r = (qx - px).abs()
                                        + qx.abs()
                                        + (qy - py).abs()
                                        + qy.abs()
                                        + (qz - pz).abs()
                                        + qz.abs();
                                    if r <= q as i64 {
                                        brute += 1;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            assert_eq!(brute, image_count_closed_form(q));
            let imgs = image_sources(&room, &src, Some(q), &[2.0, 2.0, 1.4], 1e6);
            assert_eq!(imgs.len(), brute, "order {q}");
        }
        assert_eq!(image_count_closed_form(1), 7);
        assert_eq!(image_count_closed_form(2), 25);
    }

    #[test]
    fn direct_tap_dominates_reflections() {
        let mut room = RoomSpec::new([5.0, 4.0, 3.0], 0.5);
        room.max_order = Some(3);
        let src = [1.5, 1.0, 1.2];
        let mic = [3.2, 2.6, 1.4];
        let (_, beta) = absorption_from_rt60(&room).unwrap();
        let d0 = distance(&src, &mic);
        let direct = (1.0 / (4.0 * PI * d0)).powi(2);
        for img in image_sources(&room, &src, Some(3), &mic, 1e6) {
            if img.reflections == 0 {
                continue;
            }
            let d = distance(&img.position, &mic);
            let e = (beta.powi(img.reflections as i32) / (4.0 * PI * d)).powi(2);
            assert!(e < direct);
        }
    }

    #[test]
    fn calibrated_decay_matches_target() {
        for (dims, rt60) in [([3.2, 3.1, 2.6], 0.12), ([5.0, 4.0, 3.0], 0.35), ([7.5, 5.5, 3.5], 0.6)] {
            let room = RoomSpec::new(dims, rt60);
            let arr = ArrayGeometry::protocol([dims[0] / 2.0, dims[1] / 2.0, 1.3]);
            let src = [dims[0] / 2.0 + 0.3, dims[1] / 2.0 + 1.0, 1.5];
            let rir = simulate_rir(&room, &src, &arr, Absorption::Calibrated, 16_000).unwrap();
            let t = super::super::measure_rt60(&rir).unwrap();
            assert!((t / rt60 - 1.0).abs() < 0.1, "{dims:?}: {t} vs {rt60}");
        }
    }

    #[test]
    fn sinc_kernel_matches_direct_formula() {
        let k = SincKernel::new();
        let mut taps = [0.0; SINC_TAPS];
        for frac in [-0.5, -0.31, -1e-3, 0.0, 0.2, 0.4999] {
            k.fill(frac, &mut taps);
            for (j, &t) in taps.iter().enumerate() {
                let x = j as f64 - SINC_HALF as f64 - frac;
                let window = 0.5 * (1.0 + (2.0 * PI * x / SINC_TAPS as f64).cos());
                let sinc = if x == 0.0 { 1.0 } else { (PI * x).sin() / (PI * x) };
                assert!((t - window * sinc).abs() < 1e-12, "frac {frac} tap {j}");
            }
        }
    }

    #[test]
    fn high_pass_removes_dc() {
        let mut h = vec![1.0; 16_000];
        high_pass(&mut h, 16_000.0);
        assert!(h[15_999].abs() < 1e-6);
        let mut imp = vec![0.0; 64];
        imp[0] = 1.0;
        high_pass(&mut imp, 16_000.0);
        let r = (-2.0 * PI * HIGH_PASS_HZ / 16_000.0).exp();
        assert!((imp[0] - (0.5 * (1.0 + r)).powi(2)).abs() < 1e-15);
        // Unit gain at Nyquist once the transient has died out.
        let mut alt: Vec<f64> = (0..4000).map(|n| if n % 2 == 0 { 1.0 } else { -1.0 }).collect();
        high_pass(&mut alt, 16_000.0);
        assert!((alt[3999].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_points_outside() {
        let room = RoomSpec::new([5.0, 4.0, 3.0], 0.4);
        let arr = ArrayGeometry::new(vec![[1.0, 1.0, 1.0]]).unwrap();
        assert!(simulate_rir(&room, &[6.0, 1.0, 1.0], &arr, Absorption::Sabine, 16_000).is_err());
        let bad = ArrayGeometry::new(vec![[1.0, -1.0, 1.0]]).unwrap();
        assert!(simulate_rir(&room, &[2.0, 1.0, 1.0], &bad, Absorption::Sabine, 16_000).is_err());
    }
}
