//! Iterative ensemble training: shard the dataset, train one model per
//! shard for `E` epochs starting from the current global model, average the
//! shard models, repeat for `M` rounds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::agc::{MemoryBank, SkipRecord};
use crate::data::Dataset;
use crate::denoiser::DenoiserParams;
use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::seed;
use crate::trainer::{self, EpochStats, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShardMode {
    /// Every shard receives an equal share of every class.
    IidClasswise,
    /// Uniformly random equal split, ignoring labels.
    IidRandom,
    /// Per-class shard proportions drawn from a symmetric Dirichlet.
    Dirichlet,
}

impl fmt::Display for ShardMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShardMode::IidClasswise => "iid_classwise",
            ShardMode::IidRandom => "iid_random",
            ShardMode::Dirichlet => "dirichlet",
        })
    }
}

impl FromStr for ShardMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid_classwise" => Ok(ShardMode::IidClasswise),
            "iid_random" => Ok(ShardMode::IidRandom),
            "dirichlet" => Ok(ShardMode::Dirichlet),
            other => Err(Error::config(format!("unknown shard mode `{other}`"))),
        }
    }
}

/// Assignment of every sample id to one of `k` shards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardPlan {
    pub k: usize,
    pub mode: ShardMode,
    pub dirichlet_alpha: Option<f64>,
    pub assignment: BTreeMap<u64, usize>,
}

impl ShardPlan {
    pub fn shard_ids(&self, shard: usize) -> BTreeSet<u64> {
        self.assignment
            .iter()
            .filter(|(_, s)| **s == shard)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for s in self.assignment.values() {
            sizes[*s] += 1;
        }
        sizes
    }
}

/// Splits `data` into `k` shards. Remainders go to the lowest-indexed
/// shards. Unlabelled data always uses random-equal semantics for the IID
/// modes.
pub fn split_dataset(
    data: &Dataset,
    k: usize,
    mode: ShardMode,
    seed: u64,
    dirichlet_alpha: Option<f64>,
) -> Result<ShardPlan> {
    let n = data.len();
    if k == 0 || k > n {
        return Err(Error::config(format!(
            "shard count must lie in [1, {n}], got {k}"
        )));
    }
    let mut rng = seed::rng(seed, "split", &[k as u64]);
    let mut assignment = BTreeMap::new();
    let ids: Vec<u64> = data.samples().iter().map(|s| s.id).collect();
    let by_class = || {
        let mut classes: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
        for s in data.samples() {
            classes.entry(s.label.unwrap_or(0)).or_default().push(s.id);
        }
        classes
    };

    let effective = match mode {
        ShardMode::IidClasswise if !data.labels_present() => ShardMode::IidRandom,
        m => m,
    };
    match effective {
        ShardMode::IidRandom => {
            let mut shuffled = ids;
            shuffled.shuffle(&mut rng);
            deal(&shuffled, k, &mut assignment);
        }
        ShardMode::IidClasswise => {
            for (_, mut members) in by_class() {
                members.shuffle(&mut rng);
                deal(&members, k, &mut assignment);
            }
        }
        ShardMode::Dirichlet => {
            if !data.labels_present() {
                return Err(Error::config("dirichlet sharding requires class labels"));
            }
            let alpha = dirichlet_alpha
                .filter(|a| *a > 0.0 && a.is_finite())
                .ok_or_else(|| Error::config("dirichlet sharding requires a positive alpha"))?;
            let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::config(e.to_string()))?;
            for (_, mut members) in by_class() {
                members.shuffle(&mut rng);
                let w: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
                let total: f64 = w.iter().sum();
                let m = members.len();
                let mut acc = 0.0;
                let mut start = 0;
                for (shard, wi) in w.iter().enumerate() {
                    acc += wi / total;
                    let end = if shard + 1 == k { m } else { ((acc * m as f64).floor() as usize).min(m) };
                    for id in &members[start..end.max(start)] {
                        assignment.insert(*id, shard);
                    }
                    start = end.max(start);
                }
            }
            // Empty shards cannot be trained; move one sample into each from
            // the currently largest shard.
            loop {
                let mut sizes = vec![0usize; k];
                for s in assignment.values() {
                    sizes[*s] += 1;
                }
                let Some(empty) = sizes.iter().position(|s| *s == 0) else { break };
                let largest = (0..k).max_by_key(|i| (sizes[*i], std::cmp::Reverse(*i))).unwrap();
                let donor = *assignment.iter().find(|(_, s)| **s == largest).unwrap().0;
                assignment.insert(donor, empty);
            }
        }
    }
    Ok(ShardPlan {
        k,
        mode: effective,
        dirichlet_alpha: if effective == ShardMode::Dirichlet { dirichlet_alpha } else { None },
        assignment,
    })
}

/// Deals `ids` so that the first `len % k` shards receive one extra element.
fn deal(ids: &[u64], k: usize, assignment: &mut BTreeMap<u64, usize>) {
    let base = ids.len() / k;
    let extra = ids.len() % k;
    let mut pos = 0;
    for shard in 0..k {
        let take = base + usize::from(shard < extra);
        for id in &ids[pos..pos + take] {
            assignment.insert(*id, shard);
        }
        pos += take;
    }
}

/// Mean of `values` that is bit-identical under any permutation of the
/// inputs and exact when all inputs are equal: the values are sorted and
/// averaged as `min + Σ(v - min) / n`.
fn canonical_mean(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let lo = values[0];
    let spread: f64 = values.iter().map(|v| v - lo).sum();
    lo + spread / values.len() as f64
}

/// Unweighted elementwise mean of the flat parameter vectors.
pub fn aggregate(models: &[DenoiserParams]) -> Result<DenoiserParams> {
    let first = models.first().ok_or_else(|| Error::shape("no models to aggregate"))?;
    let arch = first.architecture();
    if let Some(m) = models.iter().find(|m| m.architecture() != arch) {
        return Err(Error::shape(format!(
            "architecture mismatch: {:?} vs {:?}",
            arch,
            m.architecture()
        )));
    }
    let mut column = vec![0.0; models.len()];
    let flat = (0..arch.param_count())
        .map(|j| {
            for (c, m) in column.iter_mut().zip(models) {
                *c = m.as_flat()[j];
            }
            canonical_mean(&mut column)
        })
        .collect();
    DenoiserParams::from_flat(arch, flat)
}

/// Elementwise mean of bank levels; update counts are summed.
pub fn aggregate_banks(banks: &[MemoryBank]) -> Result<MemoryBank> {
    let first = banks.first().ok_or_else(|| Error::shape("no banks to aggregate"))?;
    if banks
        .iter()
        .any(|b| b.steps() != first.steps() || b.gamma() != first.gamma())
    {
        return Err(Error::shape("memory banks differ in T or gamma"));
    }
    let mut column = vec![0.0; banks.len()];
    let mut levels = Vec::with_capacity(first.steps());
    let mut counts = Vec::with_capacity(first.steps());
    for t in 1..=first.steps() {
        for (c, b) in column.iter_mut().zip(banks) {
            *c = b.level(t);
        }
        levels.push(canonical_mean(&mut column));
        counts.push(banks.iter().map(|b| b.update_count(t)).sum());
    }
    MemoryBank::from_parts(levels, first.gamma(), counts)
}

/// How memory banks are handled across the shards of a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankPolicy {
    /// Each shard starts from the global bank; banks are averaged after the
    /// round like the weights.
    Average,
    /// One bank is threaded through the shards in index order and persists
    /// across rounds.
    SequentialShared,
}

impl FromStr for BankPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "average" => Ok(BankPolicy::Average),
            "sequential_shared" => Ok(BankPolicy::SequentialShared),
            other => Err(Error::config(format!("unknown bank policy `{other}`"))),
        }
    }
}

impl fmt::Display for BankPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BankPolicy::Average => "average",
            BankPolicy::SequentialShared => "sequential_shared",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundConfig {
    pub rounds: usize,
    pub epochs_per_round: usize,
    /// Inner per-shard training settings; `train.epochs` is ignored and
    /// `train.seed` is the base seed for the shard streams.
    pub train: TrainConfig,
    pub bank_policy: BankPolicy,
}

impl RoundConfig {
    pub fn total_epochs(&self) -> usize {
        self.rounds * self.epochs_per_round
    }
}

/// Seed of shard `shard`'s training stream. Per-epoch randomness is further
/// derived from the global epoch `round · E + e`, so every stream is a
/// function of `(base, round, shard)`.
pub fn shard_seed(base: u64, shard: usize) -> u64 {
    seed::derive(base, "shard", &[shard as u64])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardRoundLog {
    pub shard: usize,
    pub samples: usize,
    pub epochs: usize,
    /// Mean loss of the last epoch of the round (NaN when `E = 0`).
    pub mean_loss: f64,
    pub skipped: usize,
    /// `‖θ_i - θ̂‖₂` against the post-aggregation global model.
    pub distance_to_global: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub shards: Vec<ShardRoundLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentLog {
    pub k: usize,
    pub rounds: usize,
    pub epochs_per_round: usize,
    pub bank_policy: BankPolicy,
    pub round_logs: Vec<RoundLog>,
}

/// Per-epoch statistics of one shard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShardEpochStats {
    pub round: usize,
    pub shard: usize,
    #[serde(flatten)]
    pub stats: EpochStats,
}

#[derive(Debug, Clone)]
pub struct IetOutcome {
    pub params: DenoiserParams,
    pub bank: MemoryBank,
    pub log: ExperimentLog,
    pub epoch_stats: Vec<ShardEpochStats>,
    pub skips: Vec<SkipRecord>,
}

/// Runs `rc.rounds` rounds of shard training and averaging from `init`.
pub fn run_iet(
    data: &Dataset,
    plan: &ShardPlan,
    rc: &RoundConfig,
    schedule: &Schedule,
    init: DenoiserParams,
) -> Result<IetOutcome> {
    run_iet_with(data, plan, rc, schedule, init, |_, _, _| Ok(()))
}

/// [`run_iet`] with a hook called after each round's aggregation with the
/// round index and the new global model and bank.
pub fn run_iet_with<F>(
    data: &Dataset,
    plan: &ShardPlan,
    rc: &RoundConfig,
    schedule: &Schedule,
    init: DenoiserParams,
    mut on_round: F,
) -> Result<IetOutcome>
where
    F: FnMut(usize, &DenoiserParams, &MemoryBank) -> Result<()>,
{
    if plan.assignment.len() != data.len() {
        return Err(Error::config("shard plan does not cover the dataset"));
    }
    if data.dim() != init.architecture().data_dim {
        return Err(Error::shape("dataset dimension differs from network input"));
    }
    let shards: Vec<Dataset> = (0..plan.k).map(|i| data.subset(&plan.shard_ids(i))).collect();
    let mut global = init;
    let mut global_bank = MemoryBank::new(schedule.steps(), rc.train.gamma)?;
    let mut log = ExperimentLog {
        k: plan.k,
        rounds: rc.rounds,
        epochs_per_round: rc.epochs_per_round,
        bank_policy: rc.bank_policy,
        round_logs: Vec::with_capacity(rc.rounds),
    };
    let mut epoch_stats = Vec::new();
    let mut skips = Vec::new();

    for round in 0..rc.rounds {
        let mut models = Vec::with_capacity(plan.k);
        let mut banks = Vec::with_capacity(plan.k);
        let mut shard_logs = Vec::with_capacity(plan.k);
        let mut shared = global_bank.clone();
        for (i, shard) in shards.iter().enumerate() {
            let cfg = TrainConfig {
                epochs: rc.epochs_per_round,
                seed: shard_seed(rc.train.seed, i),
                ..rc.train.clone()
            };
            let bank_in = match rc.bank_policy {
                BankPolicy::Average => global_bank.clone(),
                BankPolicy::SequentialShared => shared.clone(),
            };
            let out = trainer::train_epochs(
                global.clone(),
                shard,
                &cfg,
                bank_in,
                schedule,
                round * rc.epochs_per_round,
            )?;
            shard_logs.push(ShardRoundLog {
                shard: i,
                samples: shard.len(),
                epochs: rc.epochs_per_round,
                mean_loss: out.stats.last().map_or(f64::NAN, |s| s.mean_loss),
                skipped: out.stats.iter().map(|s| s.skipped).sum(),
                distance_to_global: 0.0,
            });
            epoch_stats.extend(out.stats.into_iter().map(|stats| ShardEpochStats {
                round,
                shard: i,
                stats,
            }));
            skips.extend(out.skips);
            models.push(out.params);
            match rc.bank_policy {
                BankPolicy::Average => banks.push(out.bank),
                BankPolicy::SequentialShared => shared = out.bank,
            }
        }
        global = aggregate(&models)?;
        global_bank = match rc.bank_policy {
            BankPolicy::Average => aggregate_banks(&banks)?,
            BankPolicy::SequentialShared => shared,
        };
        for (entry, m) in shard_logs.iter_mut().zip(&models) {
            entry.distance_to_global = trainer::l2_norm(
                &m.as_flat()
                    .iter()
                    .zip(global.as_flat())
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            );
        }
        log.round_logs.push(RoundLog {
            round,
            shards: shard_logs,
        });
        on_round(round, &global, &global_bank)?;
    }
    Ok(IetOutcome {
        params: global,
        bank: global_bank,
        log,
        epoch_stats,
        skips,
    })
}
