//! Two-talker reverberant mixtures with controlled SIR and overlap.

use std::ops::Range;

use ndarray::{s, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::room::{synth_reverberant, Rir};
use crate::seed;

/// Channel on which SIR and SNR powers are measured.
pub const REFERENCE_CHANNEL: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixSpec {
    pub sir_db: f64,
    /// Fraction of the target's duration that the interferer overlaps.
    pub overlap_ratio: f64,
    pub noise_snr_db: Option<f64>,
    pub seed: u64,
}

impl MixSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.overlap_ratio) {
            return Err(Error::config(format!(
                "overlap ratio {} outside [0.5, 1]",
                self.overlap_ratio
            )));
        }
        if !self.sir_db.is_finite() {
            return Err(Error::config("SIR must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixMeta {
    pub sir_db: f64,
    pub overlap_ratio: f64,
    pub seed: u64,
    /// Start of each dry utterance on the mixture timeline, in samples.
    pub target_onset: usize,
    pub interferer_onset: usize,
    /// Gain applied to the interferer image.
    pub interferer_gain: f64,
    /// Overlapped span of the two dry utterances on the mixture timeline.
    pub overlap: Range<usize>,
    pub noise_snr_db: Option<f64>,
    pub noise_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureBundle {
    pub mixture: Waveform,
    pub target: Waveform,
    /// Interferer image after SIR scaling.
    pub interferer: Waveform,
    pub noise: Option<Waveform>,
    pub meta: MixMeta,
}

fn region_power(w: &Waveform, region: &Range<usize>) -> f64 {
    let ch = w.channel(REFERENCE_CHANNEL);
    let end = region.end.min(ch.len());
    if region.start >= end {
        return 0.0;
    }
    ch.slice(s![region.start..end]).iter().map(|v| v * v).sum::<f64>() / (end - region.start) as f64
}

/// Gain for the interferer image so that the target-to-interferer power
/// ratio over `region` on the reference channel equals `sir_db`.
pub fn scale_to_sir(target: &Waveform, interferer: &Waveform, sir_db: f64, region: Range<usize>) -> Result<f64> {
    let pt = region_power(target, &region);
    let pi = region_power(interferer, &region);
    if pt <= 0.0 || pi <= 0.0 {
        return Err(Error::Degenerate(format!(
            "silent image over samples {}..{} (target power {pt:e}, interferer power {pi:e})",
            region.start, region.end
        )));
    }
    Ok((pt / (pi * 10f64.powf(sir_db / 10.0))).sqrt())
}

/// Measured SIR in dB over `region` on the reference channel.
pub fn measure_sir(target: &Waveform, interferer: &Waveform, region: Range<usize>) -> f64 {
    10.0 * (region_power(target, &region) / region_power(interferer, &region)).log10()
}

/// Interferer onsets `o` (relative to the target start) giving exactly
/// `wanted` samples of overlap with a `target_len`-sample target.
fn feasible_onsets(target_len: usize, interferer_len: usize, wanted: usize) -> Vec<isize> {
    let (nt, ni) = (target_len as isize, interferer_len as isize);
    (-ni..=nt)
        .filter(|&o| {
            let overlap = (nt.min(o + ni) - o.max(0)).max(0);
            overlap == wanted as isize
        })
        .collect()
}

fn shifted(w: &Waveform, offset: usize, len: usize) -> Waveform {
    let mut out = Array2::zeros((w.channels(), len));
    out.slice_mut(s![.., offset..offset + w.len()]).assign(w.samples());
    Waveform::new(out, w.sample_rate()).expect("shifted copy of a valid waveform")
}

/// Convolve both dry signals with their responses, place the interferer for
/// the requested overlap, scale it to the requested SIR and sum.
pub fn make_mixture(
    dry_target: &Waveform,
    dry_interferer: &Waveform,
    rirs: (&Rir, &Rir),
    spec: &MixSpec,
) -> Result<MixtureBundle> {
    spec.validate()?;
    if dry_target.channels() != 1 || dry_interferer.channels() != 1 {
        return Err(Error::shape("dry signals must be mono"));
    }
    if dry_target.sample_rate() != dry_interferer.sample_rate() {
        return Err(Error::config("dry signals have different sample rates"));
    }
    if rirs.0.channels() != rirs.1.channels() {
        return Err(Error::shape("target and interferer responses differ in channel count"));
    }
    let (nt, ni) = (dry_target.len(), dry_interferer.len());
    let wanted = (spec.overlap_ratio * nt as f64).round() as usize;
    let onsets = feasible_onsets(nt, ni, wanted);
    if onsets.is_empty() || wanted == 0 {
        return Err(Error::Infeasible(format!(
            "cannot overlap {wanted} of {nt} target samples with a {ni}-sample interferer"
        )));
    }
    let mut rng = seed::rng(spec.seed);
    let o = onsets[rng.random_range(0..onsets.len())];
    let (target_onset, interferer_onset) = if o >= 0 {
        (0usize, o as usize)
    } else {
        ((-o) as usize, 0usize)
    };
    let overlap = interferer_onset.max(target_onset)..(target_onset + nt).min(interferer_onset + ni);

    let target_img = synth_reverberant(dry_target, rirs.0)?;
    let interferer_img = synth_reverberant(dry_interferer, rirs.1)?;
    let len = (target_onset + target_img.len()).max(interferer_onset + interferer_img.len());
    let target = shifted(&target_img, target_onset, len);
    let raw_interferer = shifted(&interferer_img, interferer_onset, len);

    let gain = scale_to_sir(&target, &raw_interferer, spec.sir_db, overlap.clone())?;
    let interferer = Waveform::new(raw_interferer.samples() * gain, target.sample_rate())?;
    let mixture = Waveform::new(target.samples() + interferer.samples(), target.sample_rate())?;

    let bundle = MixtureBundle {
        mixture,
        target,
        interferer,
        noise: None,
        meta: MixMeta {
            sir_db: spec.sir_db,
            overlap_ratio: spec.overlap_ratio,
            seed: spec.seed,
            target_onset,
            interferer_onset,
            interferer_gain: gain,
            overlap,
            noise_snr_db: None,
            noise_seed: None,
        },
    };
    match spec.noise_snr_db {
        Some(snr) => add_noise(bundle, snr, seed::derive(spec.seed, &[1])),
        None => Ok(bundle),
    }
}

/// Adds white Gaussian noise, scaled per channel so that the noise-free
/// mixture power over noise power equals `snr_db`. Infinite SNR is a no-op.
pub fn add_noise(mut bundle: MixtureBundle, snr_db: f64, seed: u64) -> Result<MixtureBundle> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::config(format!("invalid SNR {snr_db}")));
    }
    if snr_db == f64::INFINITY {
        return Ok(bundle);
    }
    let clean = bundle.target.samples() + bundle.interferer.samples();
    let (channels, len) = clean.dim();
    let mut rng = seed::rng(seed);
    let mut noise = Array2::<f64>::zeros((channels, len));
    for m in 0..channels {
        let raw: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
        let p_noise = raw.iter().map(|v| v * v).sum::<f64>() / len as f64;
        let p_mix = clean.row(m).iter().map(|v| v * v).sum::<f64>() / len as f64;
        let scale = if p_noise > 0.0 {
            (p_mix / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt()
        } else {
            0.0
        };
        noise.row_mut(m).iter_mut().zip(raw).for_each(|(o, v)| *o = v * scale);
    }
    let sr = bundle.mixture.sample_rate();
    bundle.mixture = Waveform::new(&clean + &noise, sr)?;
    bundle.noise = Some(Waveform::new(noise, sr)?);
    bundle.meta.noise_snr_db = Some(snr_db);
    bundle.meta.noise_seed = Some(seed);
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = seed::rng(seed);
        Waveform::mono((0..len).map(|_| rng.random_range(-1.0..1.0)).collect(), 16_000).unwrap()
    }

    fn two_channel_rir(seed: u64) -> Rir {
        let mut rng = seed::rng(seed);
        let mut taps = Array2::from_shape_fn((2, 64), |(_, i)| {
            rng.random_range(-1.0..1.0) * (-(i as f64) / 10.0).exp()
        });
        taps[[0, 0]] = 1.0;
        taps[[1, 3]] = 0.8;
        Rir::new(taps, 16_000).unwrap()
    }

    fn spec(sir: f64, overlap: f64) -> MixSpec {
        MixSpec {
            sir_db: sir,
            overlap_ratio: overlap,
            noise_snr_db: None,
            seed: 11,
        }
    }

    #[test]
    fn equal_power_gains() {
        let a = Waveform::mono(vec![1.0, -1.0, 1.0, -1.0], 16_000).unwrap();
        let b = Waveform::mono(vec![-1.0, 1.0, -1.0, 1.0], 16_000).unwrap();
        assert!((scale_to_sir(&a, &b, 0.0, 0..4).unwrap() - 1.0).abs() < 1e-15);
        let g = scale_to_sir(&a, &b, 6.0, 0..4).unwrap();
        assert!((g - 10f64.powf(-6.0 / 20.0)).abs() < 1e-15);
        assert!((g - 0.5012).abs() < 1e-4);
    }

    #[test]
    fn silent_region_is_an_error() {
        let a = Waveform::mono(vec![0.0; 8], 16_000).unwrap();
        let b = noise(8, 1);
        assert!(matches!(scale_to_sir(&a, &b, 0.0, 0..8), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mixture_is_sum_of_images_and_hits_sir() {
        let b = make_mixture(
            &noise(4000, 1),
            &noise(3000, 2),
            (&two_channel_rir(3), &two_channel_rir(4)),
            &spec(4.5, 0.6),
        )
        .unwrap();
        let sum = b.target.samples() + b.interferer.samples();
        assert_eq!(&sum, b.mixture.samples());
        let sir = measure_sir(&b.target, &b.interferer, b.meta.overlap.clone());
        assert!((sir - 4.5).abs() < 1e-9);
        assert_eq!(b.meta.overlap.len(), 2400);
    }

    #[test]
    fn full_overlap_places_interferer_over_target() {
        let b = make_mixture(
            &noise(2000, 1),
            &noise(2500, 2),
            (&two_channel_rir(3), &two_channel_rir(4)),
            &spec(0.0, 1.0),
        )
        .unwrap();
        let m = &b.meta;
        assert!(m.interferer_onset <= m.target_onset);
        assert!(m.interferer_onset + 2500 >= m.target_onset + 2000);
        assert_eq!(m.overlap, m.target_onset..m.target_onset + 2000);
    }

    #[test]
    fn infeasible_overlap() {
        let r = make_mixture(
            &noise(4000, 1),
            &noise(1000, 2),
            (&two_channel_rir(3), &two_channel_rir(4)),
            &spec(0.0, 1.0),
        );
        assert!(matches!(r, Err(Error::Infeasible(_))));
        let r = make_mixture(
            &noise(4000, 1),
            &noise(5000, 2),
            (&two_channel_rir(3), &two_channel_rir(4)),
            &spec(0.0, 0.3),
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn same_seed_same_bundle() {
        let run = || {
            make_mixture(
                &noise(3000, 1),
                &noise(3000, 2),
                (&two_channel_rir(3), &two_channel_rir(4)),
                &MixSpec {
                    noise_snr_db: Some(15.0),
                    ..spec(-3.0, 0.75)
                },
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn noise_at_requested_snr() {
        let b = make_mixture(
            &noise(3000, 1),
            &noise(3000, 2),
            (&two_channel_rir(3), &two_channel_rir(4)),
            &spec(0.0, 0.8),
        )
        .unwrap();
        let same = add_noise(b.clone(), f64::INFINITY, 5).unwrap();
        assert_eq!(same, b);
        let n = add_noise(b.clone(), 20.0, 5).unwrap();
        let noise = n.noise.as_ref().unwrap();
        for m in 0..2 {
            let pm = b.mixture.channel(m).iter().map(|v| v * v).sum::<f64>();
            let pn = noise.channel(m).iter().map(|v| v * v).sum::<f64>();
            assert!(((pn - pm / 100.0) / (pm / 100.0)).abs() < 1e-9);
            assert!((10.0 * (pm / pn).log10() - 20.0).abs() < 1e-6);
        }
        let recon = &(n.target.samples() + n.interferer.samples()) + noise.samples();
        assert_eq!(&recon, n.mixture.samples());
    }
}
