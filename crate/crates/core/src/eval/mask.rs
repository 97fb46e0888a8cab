use ndarray::Array2;

use crate::dsp::Spectrogram;
use crate::error::{Error, Result};

/// Bins weaker than this (relative to the strongest image bin) are inactive.
pub const ENERGY_FLOOR_DB: f64 = -60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Target,
    Interferer,
    Neither,
}

impl Label {
    pub fn code(self) -> f32 {
        match self {
            Label::Neither => 0.0,
            Label::Target => 1.0,
            Label::Interferer => 2.0,
        }
    }
}

/// Oracle per-bin dominance from the separate reverberant images.
#[derive(Debug, Clone, PartialEq)]
pub struct DominanceMask {
    pub labels: Array2<Label>,
    /// Bins above the energy floor.
    pub active: Array2<bool>,
    pub margin_db: f64,
    pub ref_channel: usize,
}

impl DominanceMask {
    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// Fraction of active bins labelled target.
    pub fn target_fraction(&self) -> f64 {
        self.count(Label::Target) as f64 / self.active_count().max(1) as f64
    }

    pub fn dim(&self) -> (usize, usize) {
        self.labels.dim()
    }
}

/// A bin belongs to the target when the target image exceeds the interferer
/// image by more than `margin_db` on `ref_channel`, and symmetrically for the
/// interferer; everything else, and every bin below the energy floor, is
/// `Neither`.
pub fn dominance_mask(
    target: &Spectrogram,
    interferer: &Spectrogram,
    margin_db: f64,
    ref_channel: usize,
) -> Result<DominanceMask> {
    if target.bins.dim() != interferer.bins.dim() {
        return Err(Error::shape(format!(
            "target image {:?} vs interferer image {:?}",
            target.bins.dim(),
            interferer.bins.dim()
        )));
    }
    if ref_channel >= target.channels() {
        return Err(Error::range(format!(
            "reference channel {ref_channel} of {}",
            target.channels()
        )));
    }
    if !(margin_db.is_finite() && margin_db >= 0.0) {
        return Err(Error::config(format!(
            "margin must be a non-negative dB value, got {margin_db}"
        )));
    }
    let pt = target.channel(ref_channel).mapv(|z| z.norm_sqr());
    let pi = interferer.channel(ref_channel).mapv(|z| z.norm_sqr());
    let peak = pt.iter().chain(pi.iter()).copied().fold(0.0, f64::max);
    let floor = peak * 10f64.powf(ENERGY_FLOOR_DB / 10.0);
    let ratio = 10f64.powf(margin_db / 10.0);
    let active = ndarray::Zip::from(&pt)
        .and(&pi)
        .map_collect(|&a, &b| peak > 0.0 && a.max(b) >= floor);
    let labels = ndarray::Zip::from(&pt)
        .and(&pi)
        .and(&active)
        .map_collect(|&a, &b, &on| {
            if !on {
                Label::Neither
            } else if a > b * ratio {
                Label::Target
            } else if b > a * ratio {
                Label::Interferer
            } else {
                Label::Neither
            }
        });
    Ok(DominanceMask {
        labels,
        active,
        margin_db,
        ref_channel,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::FrameParams;
    use ndarray::Array3;
    use num_complex::Complex64;
    use rand::Rng;

    fn spec(seed: u64, scale: f64) -> Spectrogram {
        let p = FrameParams::default();
        let len = 4000;
        let mut rng = crate::seed::rng(seed);
        let bins = Array3::from_shape_fn((2, p.num_frames(len), p.num_bins()), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale
        });
        Spectrogram::new(bins, p, len).unwrap()
    }

    #[test]
    fn silent_interferer_gives_all_target() {
        let t = spec(1, 1.0);
        let i = spec(2, 0.0);
        let m = dominance_mask(&t, &i, 3.0, 0).unwrap();
        assert_eq!(m.count(Label::Target), m.active_count());
        assert_eq!(m.count(Label::Interferer), 0);
    }

    #[test]
    fn zero_margin_partitions_active_bins() {
        let m = dominance_mask(&spec(1, 1.0), &spec(2, 1.0), 0.0, 1).unwrap();
        assert_eq!(m.count(Label::Target) + m.count(Label::Interferer), m.active_count());
        for (l, a) in m.labels.iter().zip(m.active.iter()) {
            if !a {
                assert_eq!(*l, Label::Neither);
            }
        }
    }

    #[test]
    fn louder_target_gains_bins() {
        let t = spec(1, 1.0);
        let i = spec(2, 1.0);
        let base = dominance_mask(&t, &i, 3.0, 0).unwrap().target_fraction();
        let louder = dominance_mask(&t.scaled(2.0), &i, 3.0, 0).unwrap().target_fraction();
        assert!(louder > base);
    }

    #[test]
    fn shape_and_channel_errors() {
        let t = spec(1, 1.0);
        let p = FrameParams::default();
        let other = Spectrogram::new(Array3::zeros((2, p.num_frames(100), p.num_bins())), p, 100).unwrap();
        assert!(matches!(dominance_mask(&t, &other, 3.0, 0), Err(Error::Shape(_))));
        assert!(dominance_mask(&t, &t, 3.0, 5).is_err());
    }
}
