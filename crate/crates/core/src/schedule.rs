//! Variance schedule for the forward diffusion process.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible terminal signal coefficient for schedules built with
/// [`Schedule::linear`].
pub const TERMINAL_ALPHA_MAX: f64 = 1e-4;

/// Record of an automatic increase of `beta_max` made by [`Schedule::linear`]
/// so that the terminal signal coefficient falls below [`TERMINAL_ALPHA_MAX`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaAdjustment {
    pub requested_beta_max: f64,
    pub used_beta_max: f64,
}

/// Cumulative signal coefficients `alpha[0..=T]` and per-step variances
/// `beta[1..=T]` (stored zero-based, so `beta(t)` reads `betas[t - 1]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    alpha: Vec<f64>,
    betas: Vec<f64>,
    adjustment: Option<BetaAdjustment>,
}

fn cumulative(betas: &[f64]) -> Vec<f64> {
    let mut alpha = Vec::with_capacity(betas.len() + 1);
    alpha.push(1.0);
    let mut acc = 1.0;
    for b in betas {
        acc *= 1.0 - b;
        alpha.push(acc);
    }
    alpha
}

fn linear_betas(steps: usize, beta_min: f64, beta_max: f64) -> Vec<f64> {
    (0..steps)
        .map(|i| beta_min + (beta_max - beta_min) * i as f64 / (steps - 1) as f64)
        .collect()
}

impl Schedule {
    /// Linear beta schedule from `beta_min` to `beta_max` over `steps` steps.
    ///
    /// If the resulting `alpha[T]` exceeds [`TERMINAL_ALPHA_MAX`], `beta_max`
    /// is raised (by bisection) to the smallest value meeting the bound and
    /// the change is recorded in [`Schedule::adjustment`].
    pub fn linear(steps: usize, beta_min: f64, beta_max: f64) -> Result<Self> {
        if steps < 2 {
            return Err(Error::config(format!(
                "schedule needs at least 2 steps, got {steps}"
            )));
        }
        if !(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0) {
            return Err(Error::config(format!(
                "beta range must satisfy 0 < beta_min <= beta_max < 1, got ({beta_min}, {beta_max})"
            )));
        }
        let terminal = |bmax: f64| *cumulative(&linear_betas(steps, beta_min, bmax)).last().unwrap();

        let mut used = beta_max;
        let mut adjustment = None;
        if terminal(beta_max) > TERMINAL_ALPHA_MAX {
            // terminal(b) is decreasing in b and tends to 0 as b -> 1.
            let (mut lo, mut hi) = (beta_max, 1.0 - 1e-12);
            if terminal(hi) > TERMINAL_ALPHA_MAX {
                return Err(Error::config(
                    "cannot reach the terminal alpha bound with beta_max < 1",
                ));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if terminal(mid) > TERMINAL_ALPHA_MAX {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            used = hi;
            adjustment = Some(BetaAdjustment {
                requested_beta_max: beta_max,
                used_beta_max: used,
            });
        }
        let betas = linear_betas(steps, beta_min, used);
        let mut s = Self::from_betas(betas)?;
        s.adjustment = adjustment;
        Ok(s)
    }

    /// Schedule from explicit per-step variances, each in `(0, 1)`.
    ///
    /// Unlike [`Schedule::linear`] this does not enforce the terminal bound,
    /// which makes it convenient for hand-built schedules in tests.
    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::config("schedule needs at least one step"));
        }
        if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && **b < 1.0)) {
            return Err(Error::config(format!("beta {b} outside (0, 1)")));
        }
        Ok(Self {
            alpha: cumulative(&betas),
            betas,
            adjustment: None,
        })
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// Cumulative signal coefficient at `t` in `0..=T`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t]
    }

    /// Per-step variance at `t` in `1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn adjustment(&self) -> Option<BetaAdjustment> {
        self.adjustment
    }

    /// Posterior variance of `x_{t-1}` given `x_t` and `x_0`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.beta(t) * (1.0 - self.alpha(t - 1)) / (1.0 - self.alpha(t))
    }

    pub(crate) fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::shape(format!(
                "timestep {t} outside [1, {}]",
                self.steps()
            )));
        }
        Ok(())
    }
}
