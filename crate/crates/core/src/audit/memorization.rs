//! Nearest-neighbour memorization test for generated samples.
//!
//! A generated sample `x̄` scores `ℓ₂(x̄, nearest) / mean ℓ₂(x̄, S)` where
//! `S` is the set of its `n` closest training points. Samples whose score is
//! at or below a threshold `δ` count as memorized; the count over a generated
//! set is the memorized quantity `MQ_δ`.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};

/// Default neighbourhood size.
pub const DEFAULT_NEIGHBORS: usize = 50;
/// Default thresholds.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.4, 0.5, 0.6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnScore {
    pub raw_l2: f64,
    pub ratio: f64,
    pub nearest_id: u64,
}

pub(crate) fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Scores `xbar` against `train` with neighbourhood size `n` (clamped to the
/// number of available neighbours). With `exclude_nearest`, the nearest
/// point is left out of the normalizing set, which then holds the next `n`
/// points.
///
/// Ties in distance are broken by position in `train`.
pub fn nn_ratio(xbar: &[f64], train: &Dataset, n: usize, exclude_nearest: bool) -> Result<NnScore> {
    if train.len() < 2 {
        return Err(Error::config("nearest-neighbour scoring needs at least 2 training points"));
    }
    if n == 0 {
        return Err(Error::config("neighbourhood size must be positive"));
    }
    if xbar.len() != train.dim() {
        return Err(Error::shape(format!(
            "sample has dimension {}, training set {}",
            xbar.len(),
            train.dim()
        )));
    }
    let mut dist: Vec<(f64, usize)> = train
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| (l2(xbar, &s.x), i))
        .collect();
    let skip = usize::from(exclude_nearest);
    let n = n.min(dist.len() - skip);
    let keep = n + skip;
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if keep < dist.len() {
        dist.select_nth_unstable_by(keep - 1, cmp);
        dist.truncate(keep);
    }
    dist.sort_by(cmp);
    let (raw, idx) = dist[0];
    let mean = dist[skip..].iter().map(|d| d.0).sum::<f64>() / n as f64;
    let ratio = if mean > 0.0 {
        raw / mean
    } else if raw == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(NnScore {
        raw_l2: raw,
        ratio,
        nearest_id: train.samples()[idx].id,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorizationVerdict {
    pub generated_id: u64,
    pub nearest_train_id: u64,
    pub raw_l2: f64,
    pub nn_ratio: f64,
    /// `(threshold, ratio <= threshold)` in threshold order.
    pub flags: Vec<(f64, bool)>,
}

/// Memorized quantity per threshold plus the per-sample verdicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MqReport {
    pub neighbors: usize,
    pub generated: usize,
    pub thresholds: Vec<f64>,
    pub counts: Vec<usize>,
    #[serde(skip)]
    pub verdicts: Vec<MemorizationVerdict>,
}

impl MqReport {
    /// Count at `threshold`, if it was evaluated.
    pub fn count_at(&self, threshold: f64) -> Option<usize> {
        self.thresholds
            .iter()
            .position(|t| (t - threshold).abs() < 1e-12)
            .map(|i| self.counts[i])
    }
}

pub fn mq_counts(
    generated: &[Sample],
    train: &Dataset,
    n: usize,
    thresholds: &[f64],
    exclude_nearest: bool,
) -> Result<MqReport> {
    if generated.is_empty() {
        return Err(Error::config("no generated samples to audit"));
    }
    let mut counts = vec![0; thresholds.len()];
    let mut verdicts = Vec::with_capacity(generated.len());
    for g in generated {
        let s = nn_ratio(&g.x, train, n, exclude_nearest)?;
        let flags: Vec<(f64, bool)> = thresholds.iter().map(|d| (*d, s.ratio <= *d)).collect();
        for (c, (_, f)) in counts.iter_mut().zip(&flags) {
            *c += usize::from(*f);
        }
        verdicts.push(MemorizationVerdict {
            generated_id: g.id,
            nearest_train_id: s.nearest_id,
            raw_l2: s.raw_l2,
            nn_ratio: s.ratio,
            flags,
        });
    }
    Ok(MqReport {
        neighbors: n.min(train.len()),
        generated: generated.len(),
        thresholds: thresholds.to_vec(),
        counts,
        verdicts,
    })
}
