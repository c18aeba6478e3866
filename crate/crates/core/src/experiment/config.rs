//! Flat `key = value` experiment configuration.
//!
//! Keys are dotted (`iet.k`, `agc.lambda`, ...). A file may contain blank
//! lines and `#` comments; the same keys can be overridden from the
//! environment (`IETAGC_` prefix, `.` written as `__`, e.g.
//! `IETAGC_TRAIN__ETA=0.1`) and from command-line flags (`--train.eta 0.1`).
//! Precedence is flags over environment over file over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::data::{DupSpec, MixtureSpec, PatternSpec};
use crate::error::{Error, Result};
use crate::iet::{BankPolicy, ShardMode};
use crate::schedule::Schedule;
use crate::seed;
use crate::trainer::{Method, TrainConfig};

/// Environment variable prefix for overrides.
pub const ENV_PREFIX: &str = "IETAGC_";

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Mixture(MixtureSpec),
    Patterns(PatternSpec),
    /// A dataset file written by `gen-data` or [`crate::data::Dataset::save`].
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSettings {
    pub samples: usize,
    pub neighbors: usize,
    pub thresholds: Vec<f64>,
    pub exclude_nearest: bool,
    /// Generation seed; derived from the base seed when absent.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyzeSettings {
    /// Noise draws per timestep for the loss profile.
    pub draws: usize,
    /// Loss profile covers `t = 1..=round(max_t_fraction · T)`.
    pub max_t_fraction: f64,
    pub grid_step: usize,
    /// Training samples whose duplicate count exceeds this form the
    /// memorized group of the loss profile.
    pub dup_threshold: usize,
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub seed: u64,
    /// Report label; empty means "derive from method and K".
    pub label: String,
    pub out: PathBuf,
    pub data: DataSource,
    pub data_seed: u64,
    pub steps: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub hidden: usize,
    pub time_embed: usize,
    /// `train.epochs` is the total per-model budget `M · E`.
    pub train: TrainConfig,
    pub k: usize,
    pub rounds: usize,
    pub shard_mode: ShardMode,
    pub dirichlet_alpha: Option<f64>,
    pub bank_policy: BankPolicy,
    /// Write an intermediate checkpoint every this many rounds (0 = never).
    pub checkpoint_every: usize,
    pub audit: AuditSettings,
    pub analyze: AnalyzeSettings,
}

/// Default per-model epoch budget of the shipped experiments.
pub const DEFAULT_EPOCHS: usize = 2000;
/// Default learning rate of the shipped experiments.
pub const DEFAULT_ETA: f64 = 0.05;

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            label: String::new(),
            out: PathBuf::from("runs/default"),
            data: DataSource::Mixture(MixtureSpec::desk_default(0)),
            data_seed: 0,
            steps: 100,
            beta_min: 1e-4,
            beta_max: 0.02,
            hidden: 128,
            time_embed: 32,
            train: TrainConfig {
                eta: DEFAULT_ETA,
                epochs: DEFAULT_EPOCHS,
                ..TrainConfig::default()
            },
            k: 10,
            rounds: 10,
            shard_mode: ShardMode::IidClasswise,
            dirichlet_alpha: None,
            bank_policy: BankPolicy::Average,
            checkpoint_every: 0,
            audit: AuditSettings {
                samples: 4096,
                neighbors: crate::audit::DEFAULT_NEIGHBORS,
                thresholds: crate::audit::DEFAULT_THRESHOLDS.to_vec(),
                exclude_nearest: false,
                seed: None,
            },
            analyze: AnalyzeSettings {
                draws: 64,
                max_t_fraction: 0.6,
                grid_step: 1,
                dup_threshold: 1,
            },
        }
    }
}

/// Every recognised key, in the canonical order used when writing specs.
pub const KEYS: &[&str] = &[
    "seed",
    "label",
    "out",
    "data.kind",
    "data.path",
    "data.seed",
    "data.components",
    "data.per_component",
    "data.dim",
    "data.spread",
    "data.count",
    "data.grid",
    "data.mix",
    "data.dups",
    "schedule.steps",
    "schedule.beta_min",
    "schedule.beta_max",
    "model.hidden",
    "model.time_embed",
    "train.method",
    "train.eta",
    "train.batch_size",
    "train.epochs",
    "agc.lambda",
    "agc.gamma",
    "agc.per_sample_update",
    "dp.tau",
    "noise.var",
    "iet.k",
    "iet.rounds",
    "iet.mode",
    "iet.alpha",
    "iet.bank_policy",
    "checkpoint.every",
    "audit.samples",
    "audit.neighbors",
    "audit.thresholds",
    "audit.exclude_nearest",
    "audit.seed",
    "analyze.draws",
    "analyze.max_t_fraction",
    "analyze.grid_step",
    "analyze.dup_threshold",
];

fn parse_err(key: &str, reason: impl Into<String>) -> Error {
    Error::Parse {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e: T::Err| parse_err(key, format!("`{v}`: {e}")))
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(parse_err(key, format!("`{other}` is not a boolean"))),
    }
}

fn list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

fn parse_dups(key: &str, v: &str) -> Result<Vec<DupSpec>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            let (c, n) = item
                .split_once(':')
                .ok_or_else(|| parse_err(key, format!("`{item}` is not component:copies")))?;
            Ok(DupSpec {
                component: num(key, c)?,
                copies: num(key, n)?,
            })
        })
        .collect()
}

fn format_dups(dups: &[DupSpec]) -> String {
    dups.iter()
        .map(|d| format!("{}:{}", d.component, d.copies))
        .collect::<Vec<_>>()
        .join(",")
}

/// Splits config text into raw `(key, value)` pairs, rejecting malformed
/// lines and repeated keys.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(&format!("line {}", no + 1), "expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(parse_err(&format!("line {}", no + 1), "empty key"));
        }
        if let Some(prev) = seen.insert(k.to_string(), no + 1) {
            return Err(parse_err(k, format!("set on lines {prev} and {}", no + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

/// Maps `IETAGC_TRAIN__ETA` to `train.eta`; `None` for unrelated variables.
pub fn env_key(name: &str) -> Option<String> {
    name.strip_prefix(ENV_PREFIX)
        .map(|rest| rest.to_ascii_lowercase().replace("__", "."))
}

impl ExperimentSpec {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = num(key, v)?,
            "label" => self.label = v.to_string(),
            "out" => self.out = PathBuf::from(v),
            "data.kind" => {
                self.data = match v {
                    "mixture" => match &self.data {
                        DataSource::Mixture(_) => return Ok(()),
                        _ => DataSource::Mixture(MixtureSpec::desk_default(self.data_seed)),
                    },
                    "patterns" => match &self.data {
                        DataSource::Patterns(_) => return Ok(()),
                        _ => DataSource::Patterns(PatternSpec::desk_default(self.data_seed)),
                    },
                    "file" => match &self.data {
                        DataSource::File(_) => return Ok(()),
                        _ => DataSource::File(PathBuf::new()),
                    },
                    other => return Err(parse_err(key, format!("unknown data kind `{other}`"))),
                }
            }
            "data.path" => match &mut self.data {
                DataSource::File(p) => *p = PathBuf::from(v),
                _ if v.is_empty() => {}
                _ => return Err(parse_err(key, "only valid with data.kind = file")),
            },
            "data.seed" => {
                self.data_seed = num(key, v)?;
                match &mut self.data {
                    DataSource::Mixture(m) => m.seed = self.data_seed,
                    DataSource::Patterns(p) => p.seed = self.data_seed,
                    DataSource::File(_) => {}
                }
            }
            "data.components" | "data.per_component" | "data.dim" | "data.spread" => {
                let DataSource::Mixture(m) = &mut self.data else {
                    return Err(parse_err(key, "only valid with data.kind = mixture"));
                };
                match key {
                    "data.components" => m.components = num(key, v)?,
                    "data.per_component" => m.per_component = num(key, v)?,
                    "data.dim" => m.dim = num(key, v)?,
                    _ => m.spread = num(key, v)?,
                }
            }
            "data.count" | "data.grid" | "data.mix" => {
                let DataSource::Patterns(p) = &mut self.data else {
                    return Err(parse_err(key, "only valid with data.kind = patterns"));
                };
                match key {
                    "data.count" => p.count = num(key, v)?,
                    "data.grid" => p.grid = num(key, v)?,
                    _ => {
                        let w: Vec<f64> = list(key, v)?;
                        p.mix = w
                            .try_into()
                            .map_err(|_| parse_err(key, "expected three weights"))?;
                    }
                }
            }
            "data.dups" => {
                let dups = parse_dups(key, v)?;
                match &mut self.data {
                    DataSource::Mixture(m) => m.dups = dups,
                    DataSource::Patterns(p) => p.dups = dups,
                    DataSource::File(_) if dups.is_empty() => {}
                    DataSource::File(_) => {
                        return Err(parse_err(key, "duplicates of a file dataset are fixed"))
                    }
                }
            }
            "schedule.steps" => self.steps = num(key, v)?,
            "schedule.beta_min" => self.beta_min = num(key, v)?,
            "schedule.beta_max" => self.beta_max = num(key, v)?,
            "model.hidden" => self.hidden = num(key, v)?,
            "model.time_embed" => self.time_embed = num(key, v)?,
            "train.method" => self.train.method = v.parse::<Method>().map_err(|e| parse_err(key, e.to_string()))?,
            "train.eta" => self.train.eta = num(key, v)?,
            "train.batch_size" => self.train.batch_size = num(key, v)?,
            "train.epochs" => self.train.epochs = num(key, v)?,
            "agc.lambda" => self.train.lambda = num(key, v)?,
            "agc.gamma" => self.train.gamma = num(key, v)?,
            "agc.per_sample_update" => self.train.per_sample_update = boolean(key, v)?,
            "dp.tau" => self.train.tau = num(key, v)?,
            "noise.var" => self.train.input_noise_var = num(key, v)?,
            "iet.k" => self.k = num(key, v)?,
            "iet.rounds" => self.rounds = num(key, v)?,
            "iet.mode" => self.shard_mode = v.parse::<ShardMode>().map_err(|e| parse_err(key, e.to_string()))?,
            "iet.alpha" => {
                self.dirichlet_alpha = if v.is_empty() { None } else { Some(num(key, v)?) }
            }
            "iet.bank_policy" => {
                self.bank_policy = v.parse::<BankPolicy>().map_err(|e| parse_err(key, e.to_string()))?
            }
            "checkpoint.every" => self.checkpoint_every = num(key, v)?,
            "audit.samples" => self.audit.samples = num(key, v)?,
            "audit.neighbors" => self.audit.neighbors = num(key, v)?,
            "audit.thresholds" => self.audit.thresholds = list(key, v)?,
            "audit.exclude_nearest" => self.audit.exclude_nearest = boolean(key, v)?,
            "audit.seed" => self.audit.seed = if v.is_empty() { None } else { Some(num(key, v)?) },
            "analyze.draws" => self.analyze.draws = num(key, v)?,
            "analyze.max_t_fraction" => self.analyze.max_t_fraction = num(key, v)?,
            "analyze.grid_step" => self.analyze.grid_step = num(key, v)?,
            "analyze.dup_threshold" => self.analyze.dup_threshold = num(key, v)?,
            other => return Err(parse_err(other, "unknown key")),
        }
        Ok(())
    }

    /// Current value of `key` in the textual form accepted by [`Self::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let mix = match &self.data {
            DataSource::Mixture(m) => Some(m),
            _ => None,
        };
        let pat = match &self.data {
            DataSource::Patterns(p) => Some(p),
            _ => None,
        };
        let opt = |o: Option<String>| Some(o.unwrap_or_default());
        match key {
            "seed" => Some(self.seed.to_string()),
            "label" => Some(self.label.clone()),
            "out" => Some(self.out.display().to_string()),
            "data.kind" => Some(
                match self.data {
                    DataSource::Mixture(_) => "mixture",
                    DataSource::Patterns(_) => "patterns",
                    DataSource::File(_) => "file",
                }
                .to_string(),
            ),
            "data.path" => opt(match &self.data {
                DataSource::File(p) => Some(p.display().to_string()),
                _ => None,
            }),
            "data.seed" => Some(self.data_seed.to_string()),
            "data.components" => opt(mix.map(|m| m.components.to_string())),
            "data.per_component" => opt(mix.map(|m| m.per_component.to_string())),
            "data.dim" => opt(mix.map(|m| m.dim.to_string())),
            "data.spread" => opt(mix.map(|m| m.spread.to_string())),
            "data.count" => opt(pat.map(|p| p.count.to_string())),
            "data.grid" => opt(pat.map(|p| p.grid.to_string())),
            "data.mix" => opt(pat.map(|p| join(&p.mix))),
            "data.dups" => Some(match &self.data {
                DataSource::Mixture(m) => format_dups(&m.dups),
                DataSource::Patterns(p) => format_dups(&p.dups),
                DataSource::File(_) => String::new(),
            }),
            "schedule.steps" => Some(self.steps.to_string()),
            "schedule.beta_min" => Some(self.beta_min.to_string()),
            "schedule.beta_max" => Some(self.beta_max.to_string()),
            "model.hidden" => Some(self.hidden.to_string()),
            "model.time_embed" => Some(self.time_embed.to_string()),
            "train.method" => Some(self.train.method.to_string()),
            "train.eta" => Some(self.train.eta.to_string()),
            "train.batch_size" => Some(self.train.batch_size.to_string()),
            "train.epochs" => Some(self.train.epochs.to_string()),
            "agc.lambda" => Some(self.train.lambda.to_string()),
            "agc.gamma" => Some(self.train.gamma.to_string()),
            "agc.per_sample_update" => Some(self.train.per_sample_update.to_string()),
            "dp.tau" => Some(self.train.tau.to_string()),
            "noise.var" => Some(self.train.input_noise_var.to_string()),
            "iet.k" => Some(self.k.to_string()),
            "iet.rounds" => Some(self.rounds.to_string()),
            "iet.mode" => Some(self.shard_mode.to_string()),
            "iet.alpha" => opt(self.dirichlet_alpha.map(|a| a.to_string())),
            "iet.bank_policy" => Some(self.bank_policy.to_string()),
            "checkpoint.every" => Some(self.checkpoint_every.to_string()),
            "audit.samples" => Some(self.audit.samples.to_string()),
            "audit.neighbors" => Some(self.audit.neighbors.to_string()),
            "audit.thresholds" => Some(join(&self.audit.thresholds)),
            "audit.exclude_nearest" => Some(self.audit.exclude_nearest.to_string()),
            "audit.seed" => opt(self.audit.seed.map(|s| s.to_string())),
            "analyze.draws" => Some(self.analyze.draws.to_string()),
            "analyze.max_t_fraction" => Some(self.analyze.max_t_fraction.to_string()),
            "analyze.grid_step" => Some(self.analyze.grid_step.to_string()),
            "analyze.dup_threshold" => Some(self.analyze.dup_threshold.to_string()),
            _ => None,
        }
    }

    /// All keys with their current values, in canonical order. Keys that do
    /// not apply to the current data source are omitted.
    pub fn entries(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .filter(|k| self.applies(k))
            .map(|k| (k.to_string(), self.get(k).unwrap()))
            .collect()
    }

    fn applies(&self, key: &str) -> bool {
        match key {
            "data.path" => matches!(self.data, DataSource::File(_)),
            "data.components" | "data.per_component" | "data.dim" | "data.spread" => {
                matches!(self.data, DataSource::Mixture(_))
            }
            "data.count" | "data.grid" | "data.mix" => matches!(self.data, DataSource::Patterns(_)),
            "data.dups" => !matches!(self.data, DataSource::File(_)),
            _ => true,
        }
    }

    /// These settings as config-file text, which [`Self::from_pairs`] reads back
    /// to equal settings.
    pub fn to_config_string(&self) -> String {
        self.entries()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Applies `pairs` in order over the defaults and validates the result.
    /// `data.kind` and `data.seed` are applied first so that data-specific
    /// keys land on the right generator.
    pub fn from_pairs<'a, I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let pairs: Vec<(&str, &str)> = pairs.into_iter().collect();
        let mut spec = Self::default();
        for first in ["data.seed", "data.kind"] {
            for (k, v) in pairs.iter().filter(|(k, _)| *k == first) {
                spec.set(k, v)?;
            }
        }
        for (k, v) in &pairs {
            spec.set(k, v)?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Resolves the layered configuration: defaults, then `file` (if any),
    /// then environment variables carrying [`ENV_PREFIX`], then `flags`.
    pub fn resolve(
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        flags: &[(String, String)],
    ) -> Result<Self> {
        Self::resolve_over(Vec::new(), file, env, flags)
    }

    /// [`Self::resolve`] starting from `base` pairs (e.g. a run's recorded
    /// settings) instead of bare defaults.
    pub fn resolve_over(
        base: Vec<(String, String)>,
        file: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
        flags: &[(String, String)],
    ) -> Result<Self> {
        let mut layered = base;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Missing(format!("config file {}: {e}", path.display())))?;
            layered.extend(parse_pairs(&text)?);
        }
        let mut env_pairs: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| env_key(&k).map(|k| (k, v)))
            .collect();
        env_pairs.sort();
        layered.extend(env_pairs);
        layered.extend(flags.iter().cloned());
        Self::from_pairs(layered.iter().map(|(k, v)| (k.as_str(), v.as_str())))
    }

    /// Enforces every cross-field constraint at parse time.
    pub fn validate(&self) -> Result<()> {
        let wrap = |key: &str, e: Error| match e {
            Error::Parse { .. } => e,
            other => parse_err(key, other.to_string()),
        };
        self.train.validate().map_err(|e| wrap("train", e))?;
        self.schedule().map_err(|e| wrap("schedule", e))?;
        if self.hidden == 0 {
            return Err(parse_err("model.hidden", "must be positive"));
        }
        if self.time_embed == 0 || self.time_embed % 2 != 0 {
            return Err(parse_err("model.time_embed", "must be a positive even number"));
        }
        if self.k == 0 {
            return Err(parse_err("iet.k", "must be positive"));
        }
        if self.rounds == 0 {
            return Err(parse_err("iet.rounds", "must be positive"));
        }
        if self.train.epochs % self.rounds != 0 {
            return Err(parse_err(
                "train.epochs",
                format!(
                    "budget {} is not a multiple of iet.rounds = {}",
                    self.train.epochs, self.rounds
                ),
            ));
        }
        if self.shard_mode == ShardMode::Dirichlet && self.dirichlet_alpha.is_none() {
            return Err(parse_err("iet.alpha", "dirichlet sharding needs a concentration"));
        }
        if let Some(a) = self.dirichlet_alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(parse_err("iet.alpha", "must be positive"));
            }
        }
        match &self.data {
            DataSource::Mixture(m) => {
                if m.components == 0 || m.dim == 0 || m.per_component == 0 {
                    return Err(parse_err("data", "mixture needs components, points and dimension"));
                }
                if !(m.spread > 0.0) {
                    return Err(parse_err("data.spread", "must be positive"));
                }
                for d in &m.dups {
                    if d.component >= m.components || d.copies < 2 {
                        return Err(parse_err("data.dups", "needs an existing component and at least 2 copies"));
                    }
                }
            }
            DataSource::Patterns(p) => {
                if p.count == 0 || p.grid == 0 {
                    return Err(parse_err("data", "patterns need a count and a grid"));
                }
                if p.mix.iter().any(|w| !(*w >= 0.0)) || p.mix.iter().sum::<f64>() <= 0.0 {
                    return Err(parse_err("data.mix", "weights must be nonnegative with a positive sum"));
                }
                for d in &p.dups {
                    if d.component >= 3 || d.copies < 2 {
                        return Err(parse_err("data.dups", "needs a family in 0..3 and at least 2 copies"));
                    }
                }
            }
            DataSource::File(p) => {
                if p.as_os_str().is_empty() {
                    return Err(parse_err("data.path", "a file data source needs a path"));
                }
            }
        }
        if self.audit.samples == 0 {
            return Err(parse_err("audit.samples", "must be positive"));
        }
        if self.audit.neighbors == 0 {
            return Err(parse_err("audit.neighbors", "must be positive"));
        }
        if self.audit.thresholds.is_empty() || self.audit.thresholds.iter().any(|t| !(*t >= 0.0)) {
            return Err(parse_err("audit.thresholds", "need at least one nonnegative threshold"));
        }
        if self.analyze.draws == 0 || self.analyze.grid_step == 0 {
            return Err(parse_err("analyze", "draws and grid step must be positive"));
        }
        if !(self.analyze.max_t_fraction > 0.0 && self.analyze.max_t_fraction <= 1.0) {
            return Err(parse_err("analyze.max_t_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::linear(self.steps, self.beta_min, self.beta_max)
    }

    pub fn epochs_per_round(&self) -> usize {
        self.train.epochs / self.rounds
    }

    /// Label for reports: the explicit `label`, or method plus shard count.
    pub fn display_label(&self) -> String {
        if !self.label.is_empty() {
            return self.label.clone();
        }
        match (self.k, self.train.method) {
            (1, m) => m.to_string(),
            (k, Method::Default) => format!("iet k={k}"),
            (k, m) => format!("iet_{m} k={k}"),
        }
    }

    pub fn audit_seed(&self) -> u64 {
        self.audit.seed.unwrap_or_else(|| seed::derive(self.seed, "audit", &[]))
    }

    pub fn split_seed(&self) -> u64 {
        seed::derive(self.seed, "split", &[])
    }

    pub fn init_seed(&self) -> u64 {
        seed::derive(self.seed, "init-params", &[])
    }

    pub fn profile_seed(&self) -> u64 {
        seed::derive(self.seed, "profile", &[])
    }

    /// `(key, value)` pairs that define the experiment's outputs: every key
    /// except the output directory.
    pub fn manifest_entries(&self) -> BTreeMap<String, String> {
        self.entries().into_iter().filter(|(k, _)| k != "out").collect()
    }
}
