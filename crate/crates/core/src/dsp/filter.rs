use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::par::*;

/// Full linear convolution through a zero-padded FFT.
pub fn convolve(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + kernel.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let load = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf.iter_mut().zip(x).for_each(|(b, &v)| b.re = v);
        buf
    };
    let mut a = load(signal);
    let mut b = load(kernel);
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a[..out_len].iter().map(|z| z.re * scale).collect()
}

/// Per-frequency cross-correlation along the frame axis:
///
/// `out(t, f) = Σ_{n<k} conj(kernel(n, f)) · spec(t + n, f)`
///
/// Frames past the end of `spec` read as zero. Bins never mix.
pub fn matched_filter_time_axis(
    spec: ArrayView2<'_, Complex64>,
    kernel: ArrayView2<'_, Complex64>,
    k: usize,
) -> Result<Array2<Complex64>> {
    let (frames, bins) = spec.dim();
    let (taps, kbins) = kernel.dim();
    if kbins != bins {
        return Err(Error::shape(format!("kernel has {kbins} bins, spectrogram has {bins}")));
    }
    if k == 0 || k > taps {
        return Err(Error::range(format!("k = {k} frames, kernel provides 1..={taps}")));
    }

    let columns: Vec<Vec<Complex64>> = (0..bins)
        .into_par_iter()
        .map(|f| {
            let taps: Vec<Complex64> = (0..k).map(|n| kernel[[n, f]].conj()).collect();
            (0..frames)
                .map(|t| {
                    let reach = k.min(frames - t);
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (n, tap) in taps.iter().enumerate().take(reach) {
                        acc += tap * spec[[t + n, f]];
                    }
                    acc
                })
                .collect()
        })
        .collect();

    let mut out = Array2::zeros((frames, bins));
    for (f, col) in columns.into_iter().enumerate() {
        out.column_mut(f).iter_mut().zip(col).for_each(|(o, v)| *o = v);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn direct(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; signal.len() + kernel.len() - 1];
        for (i, &s) in signal.iter().enumerate() {
            for (j, &h) in kernel.iter().enumerate() {
                out[i + j] += s * h;
            }
        }
        out
    }

    fn random_complex(rows: usize, cols: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = crate::seed::rng(seed);
        Array2::from_shape_fn((rows, cols), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    /// Brute-force triple loop over (t, n, f).
    fn brute(spec: &Array2<Complex64>, kernel: &Array2<Complex64>, k: usize) -> Array2<Complex64> {
        let (frames, bins) = spec.dim();
        let mut out = Array2::zeros((frames, bins));
        for t in 0..frames {
            for n in 0..k {
                for f in 0..bins {
                    if t + n < frames {
                        out[[t, f]] += kernel[[n, f]].conj() * spec[[t + n, f]];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let mut rng = crate::seed::rng(9);
        let a: Vec<f64> = (0..777).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..301).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = convolve(&a, &b);
        let slow = direct(&a, &b);
        assert_eq!(fast.len(), slow.len());
        let err = fast.iter().zip(&slow).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn single_tap_is_conjugate_scaling() {
        let spec = random_complex(20, 9, 1);
        let kernel = random_complex(4, 9, 2);
        let out = matched_filter_time_axis(spec.view(), kernel.view(), 1).unwrap();
        for t in 0..20 {
            for f in 0..9 {
                let want = kernel[[0, f]].conj() * spec[[t, f]];
                assert!((out[[t, f]] - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn identity_kernel_passes_input() {
        let spec = random_complex(15, 5, 3);
        let mut kernel = Array2::zeros((6, 5));
        kernel.row_mut(0).fill(Complex64::new(1.0, 0.0));
        let out = matched_filter_time_axis(spec.view(), kernel.view(), 6).unwrap();
        assert_eq!(out, spec);
    }

    #[test]
    fn k_out_of_range() {
        let spec = random_complex(5, 3, 4);
        let kernel = random_complex(2, 3, 5);
        assert!(matches!(
            matched_filter_time_axis(spec.view(), kernel.view(), 0),
            Err(Error::Range(_))
        ));
        assert!(matched_filter_time_axis(spec.view(), kernel.view(), 3).is_err());
        let wrong = random_complex(2, 4, 6);
        assert!(matches!(
            matched_filter_time_axis(spec.view(), wrong.view(), 1),
            Err(Error::Shape(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn matches_brute_force(t in 1usize..=64, f in 1usize..=65, taps in 1usize..=16, seed in 0u64..10_000) {
            let k = 1 + (seed as usize % taps);
            let spec = random_complex(t, f, seed);
            let kernel = random_complex(taps, f, seed + 1);
            let fast = matched_filter_time_axis(spec.view(), kernel.view(), k).unwrap();
            let slow = brute(&spec, &kernel, k);
            let err = (&fast - &slow).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-10);
        }

        #[test]
        fn linear_in_spectrogram(seed in 0u64..10_000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let s1 = random_complex(12, 7, seed);
            let s2 = random_complex(12, 7, seed + 7);
            let kernel = random_complex(5, 7, seed + 13);
            let combo = s1.mapv(|z| z * a) + s2.mapv(|z| z * b);
            let lhs = matched_filter_time_axis(combo.view(), kernel.view(), 5).unwrap();
            let r1 = matched_filter_time_axis(s1.view(), kernel.view(), 5).unwrap();
            let r2 = matched_filter_time_axis(s2.view(), kernel.view(), 5).unwrap();
            let rhs = r1.mapv(|z| z * a) + r2.mapv(|z| z * b);
            let err = (&lhs - &rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(err <= 1e-10);
        }
    }
}
