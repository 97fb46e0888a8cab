use ndarray::{Array2, ArrayView2};

use super::mask::{DominanceMask, Label};
use crate::dsp::Spectrogram;
use crate::error::{Error, Result};

/// Discriminability of one feature map against the oracle mask. `None`
/// marks a metric whose mask class was empty.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MetricsRow {
    pub n_target: usize,
    pub n_interferer: usize,
    pub mean_on_target: Option<f64>,
    pub mean_on_interferer: Option<f64>,
    pub auc: Option<f64>,
    pub lps_correlation: Option<f64>,
}

/// Mann–Whitney estimate of P(positive > negative) with midranks for ties.
pub fn auc(positives: &[f64], negatives: &[f64]) -> Option<f64> {
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    let mut all: Vec<(f64, bool)> = positives
        .iter()
        .map(|&v| (v, true))
        .chain(negatives.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        // Ranks i+1 ..= j share their mean.
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * all[i..j].iter().filter(|e| e.1).count() as f64;
        i = j;
    }
    let (np, nn) = (positives.len() as f64, negatives.len() as f64);
    Some((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if a.len() != b.len() || a.len() < 2 || constant(a) || constant(b) {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// `10 log10(|X|² + ε)` of one channel.
pub fn log_power_spectrum(spec: &Spectrogram, channel: usize) -> Array2<f64> {
    spec.channel(channel).mapv(|z| 10.0 * (z.norm_sqr() + 1e-12).log10())
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn feature_metrics(
    feature: ArrayView2<'_, f64>,
    mask: &DominanceMask,
    target_lps: ArrayView2<'_, f64>,
) -> Result<MetricsRow> {
    if feature.dim() != mask.dim() || target_lps.dim() != mask.dim() {
        return Err(Error::shape(format!(
            "feature {:?}, mask {:?}, target LPS {:?}",
            feature.dim(),
            mask.dim(),
            target_lps.dim()
        )));
    }
    let mut on_target = Vec::new();
    let mut on_interferer = Vec::new();
    let mut active_feature = Vec::new();
    let mut active_lps = Vec::new();
    for ((ix, &v), &label) in feature.indexed_iter().zip(mask.labels.iter()) {
        match label {
            Label::Target => on_target.push(v),
            Label::Interferer => on_interferer.push(v),
            Label::Neither => {}
        }
        if mask.active[ix] {
            active_feature.push(v);
            active_lps.push(target_lps[ix]);
        }
    }
    Ok(MetricsRow {
        n_target: on_target.len(),
        n_interferer: on_interferer.len(),
        mean_on_target: mean(&on_target),
        mean_on_interferer: mean(&on_interferer),
        auc: auc(&on_target, &on_interferer),
        lps_correlation: pearson(&active_feature, &active_lps),
    })
}
