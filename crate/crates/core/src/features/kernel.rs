use ndarray::{Array3, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par::*;
use crate::room::CtfFilter;

/// Reported concentration when every lag past zero vanishes.
pub const CONCENTRATION_SENTINEL: f64 = f64::MAX;

/// `C(t, f) = Σ_{n<k} R(t+n, f) · conj(R(n, f))` per channel, `[M × K × F]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CKernel {
    pub values: Array3<Complex64>,
    pub k: usize,
}

pub fn compute_c_kernel(ctf: &CtfFilter, k: usize) -> Result<CKernel> {
    let (channels, frames, bins) = ctf.frames.dim();
    if k == 0 || k > frames {
        return Err(Error::range(format!("k = {k} frames, CTF provides 1..={frames}")));
    }
    let layers: Vec<Vec<Complex64>> = (0..channels)
        .into_par_iter()
        .map(|m| {
            let r = ctf.channel(m);
            let mut out = vec![Complex64::new(0.0, 0.0); frames * bins];
            for t in 0..frames {
                for f in 0..bins {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for n in 0..k.min(frames - t) {
                        acc += r[[t + n, f]] * r[[n, f]].conj();
                    }
                    out[t * bins + f] = acc;
                }
            }
            // Lag 0 is Σ|R|², real by construction.
            for f in 0..bins {
                let e: f64 = (0..k).map(|n| r[[n, f]].norm_sqr()).sum();
                out[f] = Complex64::new(e, 0.0);
            }
            out
        })
        .collect();
    let mut values = Array3::zeros((channels, frames, bins));
    for (m, layer) in layers.into_iter().enumerate() {
        values
            .index_axis_mut(Axis(0), m)
            .iter_mut()
            .zip(layer)
            .for_each(|(o, v)| *o = v);
    }
    Ok(CKernel { values, k })
}

/// Per channel `‖C(0)‖ / max_{t≥1} ‖C(t)‖`, norms taken over frequency.
pub fn kernel_concentration(ctf: &CtfFilter, k: usize) -> Result<Vec<f64>> {
    let kernel = compute_c_kernel(ctf, k)?;
    let (channels, frames, _) = kernel.values.dim();
    (0..channels)
        .map(|m| {
            let c = kernel.values.index_axis(Axis(0), m);
            let norm = |t: usize| c.row(t).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let peak = norm(0);
            if peak == 0.0 {
                return Err(Error::Degenerate(format!("channel {m}: all-zero C-kernel")));
            }
            let side = (1..frames).map(norm).fold(0.0, f64::max);
            Ok(if side == 0.0 {
                CONCENTRATION_SENTINEL
            } else {
                peak / side
            })
        })
        .collect()
}
