//! Single-model training loop and its method variants.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::agc::{self, LossEntry, MemoryBank, SkipRecord};
use crate::data::Dataset;
use crate::denoiser::DenoiserParams;
use crate::diffusion::{BatchEval, NoiseDraw};
use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::seed;

/// Per-model training method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain noise-prediction training.
    Default,
    /// Loss masking against the memory bank.
    Agc,
    /// Gradient noise with standard deviation `‖g‖·τ`.
    DpSgd,
    /// Gaussian noise added to every training input.
    InputNoise,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Default => "default",
            Method::Agc => "agc",
            Method::DpSgd => "dp_sgd",
            Method::InputNoise => "input_noise",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Method::Default),
            "agc" => Ok(Method::Agc),
            "dp_sgd" | "dp-sgd" => Ok(Method::DpSgd),
            "input_noise" | "input-noise" => Ok(Method::InputNoise),
            other => Err(Error::config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub eta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub tau: f64,
    pub input_noise_var: f64,
    pub seed: u64,
    /// Replay the literal per-sample mask-then-update order instead of
    /// evaluating a whole batch against the bank state at batch start.
    pub per_sample_update: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Default,
            eta: 0.05,
            batch_size: 64,
            epochs: 100,
            lambda: agc::DEFAULT_LAMBDA,
            gamma: agc::DEFAULT_GAMMA,
            tau: 0.0005,
            input_noise_var: 0.1,
            seed: 0,
            per_sample_update: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch size must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.tau >= 0.0) {
            return Err(Error::config(format!("tau must be nonnegative, got {}", self.tau)));
        }
        if !(self.input_noise_var >= 0.0) {
            return Err(Error::config("input noise variance must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the unmasked per-sample losses.
    pub mean_loss: f64,
    pub samples: usize,
    pub skipped: usize,
    /// Mean and max over batches of the (pre-noise) gradient norm.
    pub grad_norm_mean: f64,
    pub grad_norm_max: f64,
}

/// `θ <- θ - η·g`.
pub fn sgd_step(params: &mut DenoiserParams, grad: &[f64], eta: f64) -> Result<()> {
    let flat = params.as_flat_mut();
    if flat.len() != grad.len() {
        return Err(Error::shape(format!(
            "gradient has {} entries, parameters {}",
            grad.len(),
            flat.len()
        )));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Diverged {
            epoch: 0,
            batch: 0,
            what: "gradient",
            last_good_epoch: None,
        });
    }
    for (p, g) in flat.iter_mut().zip(grad) {
        *p -= eta * g;
    }
    Ok(())
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Adds `N(0, σ²)` noise to every coordinate with `σ = ‖g‖₂·τ`. No clipping.
pub fn dp_noise<R: Rng + ?Sized>(grad: &[f64], tau: f64, rng: &mut R) -> Vec<f64> {
    if tau == 0.0 {
        return grad.to_vec();
    }
    let sigma = l2_norm(grad) * tau;
    grad.iter()
        .map(|g| {
            let z: f64 = StandardNormal.sample(rng);
            g + sigma * z
        })
        .collect()
}

/// `x + N(0, var)` elementwise.
pub fn add_input_noise<R: Rng + ?Sized>(x: &[f64], var: f64, rng: &mut R) -> Vec<f64> {
    if var == 0.0 {
        return x.to_vec();
    }
    let sd = var.sqrt();
    x.iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sd * z
        })
        .collect()
}

/// Everything a call to [`train_epochs`] produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: DenoiserParams,
    pub bank: MemoryBank,
    pub stats: Vec<EpochStats>,
    pub skips: Vec<SkipRecord>,
}

/// Runs `cfg.epochs` shuffled passes over `data`.
///
/// `epoch_offset` is the global index of the first epoch; all per-epoch
/// randomness derives from `(cfg.seed, global epoch)`, so splitting a run
/// into consecutive calls reproduces one long call exactly.
pub fn train_epochs(
    params: DenoiserParams,
    data: &Dataset,
    cfg: &TrainConfig,
    bank: MemoryBank,
    schedule: &Schedule,
    epoch_offset: usize,
) -> Result<TrainOutcome> {
    train_epochs_with(params, data, cfg, bank, schedule, epoch_offset, |_, _, _| Ok(()))
}

/// [`train_epochs`] with a callback after every completed epoch (used for
/// periodic checkpoints).
pub fn train_epochs_with<F>(
    mut params: DenoiserParams,
    data: &Dataset,
    cfg: &TrainConfig,
    mut bank: MemoryBank,
    schedule: &Schedule,
    epoch_offset: usize,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochStats, &DenoiserParams, &MemoryBank) -> Result<()>,
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::config("cannot train on an empty dataset"));
    }
    if data.dim() != params.architecture().data_dim {
        return Err(Error::shape(format!(
            "dataset dimension {} differs from network input {}",
            data.dim(),
            params.architecture().data_dim
        )));
    }
    if bank.steps() != schedule.steps() {
        return Err(Error::shape("memory bank and schedule disagree on T"));
    }
    let steps = schedule.steps();
    let samples = data.samples();
    let mut stats = Vec::with_capacity(cfg.epochs);
    let mut skips = Vec::new();

    for local in 0..cfg.epochs {
        let epoch = epoch_offset + local;
        let last_good_epoch = epoch.checked_sub(1);
        let diverged = |batch: usize, what: &'static str| Error::Diverged {
            epoch,
            batch,
            what,
            last_good_epoch,
        };
        let mut rng = seed::rng(cfg.seed, "epoch", &[epoch as u64]);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);

        let (mut loss_sum, mut skipped, mut norm_sum, mut norm_max) = (0.0, 0usize, 0.0, 0.0f64);
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let draws: Vec<NoiseDraw> = chunk
                .iter()
                .map(|_| NoiseDraw::sample(&mut rng, data.dim(), steps))
                .collect();
            let inputs: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&i| match cfg.method {
                    Method::InputNoise => add_input_noise(&samples[i].x, cfg.input_noise_var, &mut rng),
                    _ => samples[i].x.clone(),
                })
                .collect();
            let batch: Vec<(&[f64], &NoiseDraw)> =
                inputs.iter().map(Vec::as_slice).zip(draws.iter()).collect();
            let eval = BatchEval::new(&params, &batch, schedule)?;
            let losses = eval.losses();
            if losses.iter().any(|l| !l.is_finite()) {
                return Err(diverged(b, "loss"));
            }

            let entries: Vec<LossEntry> = chunk
                .iter()
                .zip(&draws)
                .zip(losses)
                .map(|((&i, d), &loss)| LossEntry {
                    sample_id: samples[i].id,
                    t: d.t,
                    loss,
                })
                .collect();
            let lambda = if cfg.method == Method::Agc { cfg.lambda } else { 0.0 };
            let weights = if cfg.per_sample_update {
                let mut w = Vec::with_capacity(entries.len());
                for e in &entries {
                    let (_, mut rec) = agc::apply_mask(std::slice::from_ref(e), &bank, lambda, epoch)?;
                    w.push(if rec.is_empty() { 1.0 } else { 0.0 });
                    skipped += rec.len();
                    skips.append(&mut rec);
                    bank.update(e.t, e.loss)?;
                }
                w
            } else {
                let (masked, mut rec) = agc::apply_mask(&entries, &bank, lambda, epoch)?;
                // A skipped entry with loss exactly 0 keeps weight 1, which is
                // harmless: its gradient is zero either way.
                let w = entries
                    .iter()
                    .zip(&masked)
                    .map(|(e, m)| if m.to_bits() == e.loss.to_bits() { 1.0 } else { 0.0 })
                    .collect();
                skipped += rec.len();
                skips.append(&mut rec);
                for e in &entries {
                    bank.update(e.t, e.loss)?;
                }
                w
            };
            loss_sum += losses.iter().sum::<f64>();

            let mut grad = eval.gradient(&params, &weights)?;
            let norm = l2_norm(&grad);
            if !norm.is_finite() {
                return Err(diverged(b, "gradient"));
            }
            norm_sum += norm;
            norm_max = norm_max.max(norm);
            batches += 1;
            if cfg.method == Method::DpSgd {
                let mut dp_rng = seed::rng(cfg.seed, "dp", &[epoch as u64, b as u64]);
                grad = dp_noise(&grad, cfg.tau, &mut dp_rng);
            }
            sgd_step(&mut params, &grad, cfg.eta).map_err(|e| match e {
                Error::Diverged { what, .. } => diverged(b, what),
                other => other,
            })?;
            if !params.is_finite() {
                return Err(diverged(b, "parameter"));
            }
        }
        let st = EpochStats {
            epoch,
            mean_loss: loss_sum / samples.len() as f64,
            samples: samples.len(),
            skipped,
            grad_norm_mean: norm_sum / batches as f64,
            grad_norm_max: norm_max,
        };
        on_epoch(&st, &params, &bank)?;
        stats.push(st);
    }
    Ok(TrainOutcome {
        params,
        bank,
        stats,
        skips,
    })
}
