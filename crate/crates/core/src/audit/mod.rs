//! Memorization extraction, generation quality and analysis procedures.

pub mod analysis;
pub mod frechet;
pub mod memorization;

use serde::{Deserialize, Serialize};

pub use analysis::{
    clustering_analysis, loss_profile, quantile, skip_histogram, spectral_energy, ClusteringResult,
    GroupLoss, LossProfileRow, SkipHistogram,
};
pub use frechet::frechet_distance;
pub use memorization::{
    mq_counts, nn_ratio, MemorizationVerdict, MqReport, NnScore, DEFAULT_NEIGHBORS, DEFAULT_THRESHOLDS,
};

/// Summary of auditing one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    /// Free-form label of the audited run (e.g. `default`, `iet-agc`).
    pub label: String,
    pub generated: usize,
    pub neighbors: usize,
    pub exclude_nearest: bool,
    pub thresholds: Vec<f64>,
    pub mq: Vec<usize>,
    /// Fréchet distance between the generated set and the training set.
    pub frechet: f64,
    pub seed: u64,
}

impl AuditReport {
    pub fn mq_at(&self, threshold: f64) -> Option<usize> {
        self.thresholds
            .iter()
            .position(|t| (t - threshold).abs() < 1e-12)
            .map(|i| self.mq[i])
    }
}
