//! Analysis procedures: per-timestep loss profiles, skip-frequency
//! histograms, distance clustering and spectral energy.

use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::agc::SkipRecord;
use crate::audit::memorization::l2;
use crate::data::{Dataset, Sample};
use crate::denoiser::DenoiserParams;
use crate::diffusion::{BatchEval, NoiseDraw};
use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::seed;

/// Quantile of sorted data with linear interpolation between order
/// statistics (`q` in `[0, 1]`). Returns NaN for empty input.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupLoss {
    pub mean: f64,
    pub p15: f64,
    pub p85: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossProfileRow {
    pub t: usize,
    pub memorized: GroupLoss,
    pub control: GroupLoss,
}

const PROFILE_CHUNK: usize = 4096;

fn group_losses(
    params: &DenoiserParams,
    group: &[Sample],
    schedule: &Schedule,
    t: usize,
    draws: usize,
    seed_base: u64,
) -> Result<Vec<f64>> {
    let dim = params.architecture().data_dim;
    let mut rng = seed::rng(seed_base, "profile", &[t as u64]);
    let noise: Vec<NoiseDraw> = (0..draws)
        .map(|_| NoiseDraw {
            eps: (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect(),
            t,
        })
        .collect();
    let mut items: Vec<(&[f64], &NoiseDraw)> = Vec::with_capacity(group.len() * draws);
    for s in group {
        for d in &noise {
            items.push((s.x.as_slice(), d));
        }
    }
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(PROFILE_CHUNK) {
        out.extend_from_slice(BatchEval::new(params, chunk, schedule)?.losses());
    }
    Ok(out)
}

fn summarize(mut losses: Vec<f64>) -> GroupLoss {
    losses.sort_by(f64::total_cmp);
    GroupLoss {
        mean: mean(&losses),
        p15: quantile(&losses, 0.15),
        p85: quantile(&losses, 0.85),
    }
}

/// Monte-Carlo loss statistics of two sample groups at each `t` in `grid`.
///
/// At each `t` the same `draws_per_t` noise vectors, keyed by `(seed, t)`,
/// are applied to every member of both groups. The groups therefore differ
/// only through the model, not through the noise they happened to draw.
pub fn loss_profile(
    params: &DenoiserParams,
    memorized: &[Sample],
    control: &[Sample],
    schedule: &Schedule,
    grid: &[usize],
    draws_per_t: usize,
    seed: u64,
) -> Result<Vec<LossProfileRow>> {
    if memorized.is_empty() || control.is_empty() {
        return Err(Error::config("loss profile needs two nonempty groups"));
    }
    if draws_per_t == 0 {
        return Err(Error::config("draws per timestep must be positive"));
    }
    grid.iter()
        .map(|&t| {
            schedule.check_step(t)?;
            Ok(LossProfileRow {
                t,
                memorized: summarize(group_losses(params, memorized, schedule, t, draws_per_t, seed)?),
                control: summarize(group_losses(params, control, schedule, t, draws_per_t, seed)?),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipHistogram {
    pub total_epochs: usize,
    /// Skip count of every sample id, including zeros.
    pub counts: BTreeMap<u64, usize>,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub bins: Vec<HistogramBin>,
}

impl SkipHistogram {
    /// Ids of the most- and least-skipped deciles (at least one sample each),
    /// ties broken by id.
    pub fn deciles(&self) -> (Vec<u64>, Vec<u64>) {
        let mut order: Vec<(u64, usize)> = self.counts.iter().map(|(i, c)| (*i, *c)).collect();
        let size = (order.len() / 10).max(1);
        order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let most = order[..size].iter().map(|p| p.0).collect();
        order.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
        let least = order[..size].iter().map(|p| p.0).collect();
        (most, least)
    }
}

const HISTOGRAM_BINS: usize = 20;

/// Per-sample skip counts over `ids` plus quantiles and a fixed 20-bin
/// histogram over `[0, total_epochs]`.
pub fn skip_histogram(records: &[SkipRecord], ids: &[u64], total_epochs: usize) -> SkipHistogram {
    let mut counts: BTreeMap<u64, usize> = ids.iter().map(|i| (*i, 0)).collect();
    for r in records {
        *counts.entry(r.sample_id).or_insert(0) += 1;
    }
    let mut sorted: Vec<f64> = counts.values().map(|c| *c as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let top = counts.values().copied().max().unwrap_or(0).max(total_epochs).max(1) as f64;
    let width = top / HISTOGRAM_BINS as f64;
    let mut bins: Vec<HistogramBin> = (0..HISTOGRAM_BINS)
        .map(|b| HistogramBin {
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for c in counts.values() {
        let b = ((*c as f64 / width) as usize).min(HISTOGRAM_BINS - 1);
        bins[b].count += 1;
    }
    SkipHistogram {
        total_epochs,
        p50: quantile(&sorted, 0.5),
        p90: quantile(&sorted, 0.9),
        p99: quantile(&sorted, 0.99),
        counts,
        bins,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringResult {
    pub most: Vec<f64>,
    pub least: Vec<f64>,
}

fn distances_to_rest(group: &[Sample], full: &Dataset) -> Vec<f64> {
    let mut out = Vec::with_capacity(group.len() * full.len());
    for g in group {
        for s in full.samples().iter().filter(|s| s.id != g.id) {
            out.push(l2(&g.x, &s.x));
        }
    }
    out
}

/// For each group, the multiset of ℓ₂ distances from every member to every
/// other sample of `full`.
pub fn clustering_analysis(most: &[Sample], least: &[Sample], full: &Dataset) -> Result<ClusteringResult> {
    if most.is_empty() || least.is_empty() {
        return Err(Error::config("clustering analysis needs two nonempty groups"));
    }
    Ok(ClusteringResult {
        most: distances_to_rest(most, full),
        least: distances_to_rest(least, full),
    })
}

/// Total squared magnitude of the unitary 2-D DFT of `x` (read row-major as
/// a `√d × √d` grid) with the DC term excluded. With unitary scaling the
/// total energy equals `Σ x²` (Parseval).
pub fn spectral_energy(x: &[f64]) -> Result<f64> {
    let grid = (x.len() as f64).sqrt().round() as usize;
    if grid == 0 || grid * grid != x.len() {
        return Err(Error::shape(format!("dimension {} is not a perfect square", x.len())));
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|v| Complex::new(*v, 0.0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(grid);
    for row in buf.chunks_mut(grid) {
        fft.process(row);
    }
    let mut col = vec![Complex::new(0.0, 0.0); grid];
    for c in 0..grid {
        for r in 0..grid {
            col[r] = buf[r * grid + c];
        }
        fft.process(&mut col);
        for r in 0..grid {
            buf[r * grid + c] = col[r];
        }
    }
    Ok(buf[1..].iter().map(|z| z.norm_sqr()).sum::<f64>() / x.len() as f64)
}
