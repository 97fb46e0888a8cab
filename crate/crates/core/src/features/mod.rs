//! Phase-difference spatial features.
//!
//! * IPD: observed phase difference between two microphones.
//! * TPD: phase difference the target's direct path predicts (steering vector).
//! * SF: `Σ_pairs cos(IPD − TPD)`, close to `|pairs|` where the target
//!   dominates and the direct path explains the observation.
//! * RP: phase of the mixture after matched filtering every channel and bin
//!   with the conjugated first `k` frames of the target's CTF.
//! * RSF: `Σ_pairs cos(RP_m1 − RP_m2)`; identical to SF at `k = 1`.
//! * C-kernel: the effective filter `Σ_{n<k} R(t+n) R(n)^*` the clean target
//!   sees after matched filtering. The sharper its lag-0 peak, the more
//!   channel independent RP becomes.

mod kernel;

use ndarray::{Array2, Array3, Axis};
use num_complex::Complex64;

use crate::dsp::{matched_filter_time_axis, phase, wrap_phase, Spectrogram};
use crate::error::{Error, Result};
use crate::par::*;
use crate::room::CtfFilter;

pub use kernel::{compute_c_kernel, kernel_concentration, CKernel, CONCENTRATION_SENTINEL};

/// Microphone pairs a feature is accumulated over.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PairSet(Vec<(usize, usize)>);

impl PairSet {
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::config("pair set is empty"));
        }
        if let Some(&(a, b)) = pairs.iter().find(|(a, b)| a == b) {
            return Err(Error::config(format!("pair ({a}, {b}) repeats a channel")));
        }
        Ok(PairSet(pairs))
    }

    /// Outer-in symmetric pairs `(0, M−1), (1, M−2), …`.
    pub fn symmetric(channels: usize) -> Result<Self> {
        Self::new((0..channels / 2).map(|i| (i, channels - 1 - i)).collect())
    }

    pub fn check(&self, channels: usize) -> Result<()> {
        match self.0.iter().find(|(a, b)| *a >= channels || *b >= channels) {
            Some(&(a, b)) => Err(Error::range(format!(
                "pair ({a}, {b}) addresses a {channels}-channel input"
            ))),
            None => Ok(()),
        }
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `"0-7,1-6"` form used in config files and tensor headers.
    pub fn to_spec_string(&self) -> String {
        self.0
            .iter()
            .map(|(a, b)| format!("{a}-{b}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse(s: &str) -> Result<Self> {
        let pairs = s
            .split(',')
            .map(|p| {
                let (a, b) = p
                    .trim()
                    .split_once('-')
                    .ok_or_else(|| Error::config(format!("pair '{p}' is not of the form a-b")))?;
                let parse = |v: &str| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::config(format!("bad channel index in pair '{p}'")))
                };
                Ok((parse(a)?, parse(b)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureKind {
    Sf,
    Rsf,
    Ipd,
    Tpd,
    Rp,
    Diagnostic,
}

impl FeatureKind {
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Sf => "sf",
            FeatureKind::Rsf => "rsf",
            FeatureKind::Ipd => "ipd",
            FeatureKind::Tpd => "tpd",
            FeatureKind::Rp => "rp",
            FeatureKind::Diagnostic => "diagnostic",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "sf" => FeatureKind::Sf,
            "rsf" => FeatureKind::Rsf,
            "ipd" => FeatureKind::Ipd,
            "tpd" => FeatureKind::Tpd,
            "rp" => FeatureKind::Rp,
            "diagnostic" => FeatureKind::Diagnostic,
            other => return Err(Error::config(format!("unknown feature kind '{other}'"))),
        })
    }
}

/// Real `[frames × bins]` map.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub values: Array2<f64>,
    pub kind: FeatureKind,
    pub k: Option<usize>,
    /// Pairs summed over; `None` for single-channel maps (RP).
    pub pairs: Option<PairSet>,
    pub channel: Option<usize>,
}

impl FeatureMap {
    pub fn pair_count(&self) -> usize {
        self.pairs.as_ref().map_or(1, PairSet::len)
    }

    /// Values divided by the number of pairs (pair-averaged rather than summed).
    pub fn per_pair(&self) -> Array2<f64> {
        let p = self.pair_count() as f64;
        self.values.mapv(|v| v / p)
    }
}

/// Steering entries `[M × F]`; the TPD reference.
#[derive(Debug, Clone, PartialEq)]
pub struct Steering(pub Array2<Complex64>);

impl Steering {
    pub fn from_ctf(ctf: &CtfFilter) -> Self {
        Steering(ctf.steering())
    }

    pub fn channels(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_bins(&self) -> usize {
        self.0.ncols()
    }
}

fn check_pair(pair: (usize, usize), channels: usize) -> Result<()> {
    PairSet::new(vec![pair])?.check(channels)
}

fn check_bins(spec: &Spectrogram, bins: usize, what: &str) -> Result<()> {
    if spec.num_bins() != bins {
        return Err(Error::shape(format!(
            "spectrogram has {} bins, {what} has {bins}",
            spec.num_bins()
        )));
    }
    Ok(())
}

pub fn compute_ipd(spec: &Spectrogram, pair: (usize, usize)) -> Result<FeatureMap> {
    check_pair(pair, spec.channels())?;
    let a = spec.channel(pair.0);
    let b = spec.channel(pair.1);
    let values = Array2::from_shape_fn(a.dim(), |ix| wrap_phase(phase(a[ix]) - phase(b[ix])));
    Ok(FeatureMap {
        values,
        kind: FeatureKind::Ipd,
        k: None,
        pairs: Some(PairSet::new(vec![pair])?),
        channel: None,
    })
}

/// Frame-constant TPD map with `frames` rows.
pub fn compute_tpd(steering: &Steering, pair: (usize, usize), frames: usize) -> Result<FeatureMap> {
    check_pair(pair, steering.channels())?;
    let row: Vec<f64> = (0..steering.num_bins())
        .map(|f| wrap_phase(phase(steering.0[[pair.0, f]]) - phase(steering.0[[pair.1, f]])))
        .collect();
    let values = Array2::from_shape_fn((frames, row.len()), |(_, f)| row[f]);
    Ok(FeatureMap {
        values,
        kind: FeatureKind::Tpd,
        k: None,
        pairs: Some(PairSet::new(vec![pair])?),
        channel: None,
    })
}

/// SF with the TPD taken from CTF frame 0.
pub fn compute_sf(spec: &Spectrogram, ctf: &CtfFilter, pairs: &PairSet) -> Result<FeatureMap> {
    compute_sf_with_steering(spec, &Steering::from_ctf(ctf), pairs)
}

pub fn compute_sf_with_steering(spec: &Spectrogram, steering: &Steering, pairs: &PairSet) -> Result<FeatureMap> {
    pairs.check(spec.channels())?;
    pairs.check(steering.channels())?;
    check_bins(spec, steering.num_bins(), "steering")?;
    let (frames, bins) = (spec.frames(), spec.num_bins());
    let phases = spec.bins.mapv(phase);
    let mut values = Array2::zeros((frames, bins));
    for &(m1, m2) in pairs.pairs() {
        for f in 0..bins {
            let tpd = phase(steering.0[[m1, f]]) - phase(steering.0[[m2, f]]);
            for t in 0..frames {
                let ipd = phases[[m1, t, f]] - phases[[m2, t, f]];
                values[[t, f]] += (ipd - tpd).cos();
            }
        }
    }
    Ok(FeatureMap {
        values,
        kind: FeatureKind::Sf,
        k: None,
        pairs: Some(pairs.clone()),
        channel: None,
    })
}

fn check_rp_inputs(spec: &Spectrogram, ctf: &CtfFilter, k: usize) -> Result<()> {
    check_bins(spec, ctf.num_bins(), "CTF")?;
    if ctf.channels() != spec.channels() {
        return Err(Error::shape(format!(
            "spectrogram has {} channels, CTF has {}",
            spec.channels(),
            ctf.channels()
        )));
    }
    if k == 0 || k > ctf.num_frames() {
        return Err(Error::range(format!(
            "k = {k} frames, CTF provides 1..={}",
            ctf.num_frames()
        )));
    }
    Ok(())
}

/// RIR-convolved phase of one channel.
pub fn compute_rp(spec: &Spectrogram, ctf: &CtfFilter, channel: usize, k: usize) -> Result<FeatureMap> {
    check_rp_inputs(spec, ctf, k)?;
    if channel >= spec.channels() {
        return Err(Error::range(format!(
            "channel {channel} of a {}-channel spectrogram",
            spec.channels()
        )));
    }
    let filtered = matched_filter_time_axis(spec.channel(channel), ctf.channel(channel), k)?;
    Ok(FeatureMap {
        values: filtered.mapv(phase),
        kind: FeatureKind::Rp,
        k: Some(k),
        pairs: None,
        channel: Some(channel),
    })
}

/// RP for every channel, `[M × T × F]`. Channels not named in `used` stay zero.
fn rp_stack(spec: &Spectrogram, ctf: &CtfFilter, k: usize, used: &[bool]) -> Result<Array3<f64>> {
    let layers: Vec<Option<Array2<f64>>> = (0..spec.channels())
        .into_par_iter()
        .map(|m| {
            if !used[m] {
                return Ok(None);
            }
            matched_filter_time_axis(spec.channel(m), ctf.channel(m), k).map(|z| Some(z.mapv(phase)))
        })
        .collect::<Result<_>>()?;
    let mut out = Array3::zeros(spec.bins.dim());
    for (m, layer) in layers.into_iter().enumerate() {
        if let Some(l) = layer {
            out.index_axis_mut(Axis(0), m).assign(&l);
        }
    }
    Ok(out)
}

/// RIR-based spatial feature: matched filtering per channel and bin, then a
/// fixed pair-difference and a summation over pairs.
pub fn compute_rsf(spec: &Spectrogram, ctf: &CtfFilter, pairs: &PairSet, k: usize) -> Result<FeatureMap> {
    check_rp_inputs(spec, ctf, k)?;
    pairs.check(spec.channels())?;
    let mut used = vec![false; spec.channels()];
    for &(a, b) in pairs.pairs() {
        used[a] = true;
        used[b] = true;
    }
    let rp = rp_stack(spec, ctf, k, &used)?;
    let (frames, bins) = (spec.frames(), spec.num_bins());
    let mut values = Array2::zeros((frames, bins));
    for &(m1, m2) in pairs.pairs() {
        let a = rp.index_axis(Axis(0), m1);
        let b = rp.index_axis(Axis(0), m2);
        ndarray::Zip::from(&mut values)
            .and(&a)
            .and(&b)
            .for_each(|v, &x, &y| *v += (x - y).cos());
    }
    Ok(FeatureMap {
        values,
        kind: FeatureKind::Rsf,
        k: Some(k),
        pairs: Some(pairs.clone()),
        channel: None,
    })
}
