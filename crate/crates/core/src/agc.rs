//! Per-timestep loss memory bank and anti-gradient-control masking.
//!
//! The bank holds an exponential moving average `l[t]` of observed losses at
//! each timestep. A sample whose loss is below `lambda · l[t]` is treated as
//! likely memorized and its loss is masked to zero for the gradient step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default EMA smoothing factor.
pub const DEFAULT_GAMMA: f64 = 0.8;
/// Default skipping threshold.
pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryBank {
    /// `levels[t - 1]` is the EMA at timestep `t`.
    levels: Vec<f64>,
    gamma: f64,
    update_count: Vec<u64>,
}

impl MemoryBank {
    /// Zero-initialized bank over `steps` timesteps.
    pub fn new(steps: usize, gamma: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("memory bank needs at least one timestep"));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::config(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        Ok(Self {
            levels: vec![0.0; steps],
            gamma,
            update_count: vec![0; steps],
        })
    }

    pub(crate) fn from_parts(levels: Vec<f64>, gamma: f64, update_count: Vec<u64>) -> Result<Self> {
        let mut bank = Self::new(levels.len(), gamma)?;
        if update_count.len() != levels.len() {
            return Err(Error::shape("bank levels and counts differ in length"));
        }
        if levels.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::config("bank levels must be finite and nonnegative"));
        }
        bank.levels = levels;
        bank.update_count = update_count;
        Ok(bank)
    }

    pub fn steps(&self) -> usize {
        self.levels.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// EMA level at `t` in `1..=T`.
    pub fn level(&self, t: usize) -> f64 {
        self.levels[t - 1]
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn update_count(&self, t: usize) -> u64 {
        self.update_count[t - 1]
    }

    pub fn update_counts(&self) -> &[u64] {
        &self.update_count
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.levels.len() {
            return Err(Error::shape(format!(
                "timestep {t} outside [1, {}]",
                self.levels.len()
            )));
        }
        Ok(())
    }

    /// `loss / l[t]`, or `+inf` while `l[t]` is still zero.
    pub fn ratio(&self, loss: f64, t: usize) -> Result<f64> {
        self.check(t)?;
        let level = self.level(t);
        Ok(if level == 0.0 { f64::INFINITY } else { loss / level })
    }

    /// `l[t] <- γ·l[t] + (1-γ)·loss`.
    pub fn update(&mut self, t: usize, loss: f64) -> Result<()> {
        self.check(t)?;
        if !(loss.is_finite() && loss >= 0.0) {
            return Err(Error::Numerical(format!("bank update with loss {loss}")));
        }
        let l = &mut self.levels[t - 1];
        *l = self.gamma * *l + (1.0 - self.gamma) * loss;
        self.update_count[t - 1] += 1;
        Ok(())
    }
}

/// One loss observation submitted to [`apply_mask`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEntry {
    pub sample_id: u64,
    pub t: usize,
    pub loss: f64,
}

/// A masking decision that skipped a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkipRecord {
    pub sample_id: u64,
    pub epoch: usize,
    pub t: usize,
    pub loss: f64,
    pub ratio: f64,
}

/// Masks every entry whose ratio against `bank` is strictly below `lambda`.
///
/// Returns the masked losses (zero where skipped, unchanged otherwise) and
/// one [`SkipRecord`] per skipped entry. The bank is not modified.
pub fn apply_mask(
    entries: &[LossEntry],
    bank: &MemoryBank,
    lambda: f64,
    epoch: usize,
) -> Result<(Vec<f64>, Vec<SkipRecord>)> {
    if !(lambda >= 0.0) {
        return Err(Error::config(format!("lambda must be nonnegative, got {lambda}")));
    }
    let mut masked = Vec::with_capacity(entries.len());
    let mut skips = Vec::new();
    for e in entries {
        let ratio = bank.ratio(e.loss, e.t)?;
        if ratio < lambda {
            masked.push(0.0);
            skips.push(SkipRecord {
                sample_id: e.sample_id,
                epoch,
                t: e.t,
                loss: e.loss,
                ratio,
            });
        } else {
            masked.push(e.loss);
        }
    }
    Ok((masked, skips))
}
