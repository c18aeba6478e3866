//! The `train`, `audit`, `analyze`, `compare` and `gen-data` commands, plus
//! reruns from a manifest and parameter sweeps.
//!
//! A run directory holds:
//!
//! | file | content |
//! |------|---------|
//! | `dataset.bin` | the training set |
//! | `checkpoint.bin` | final model and memory bank |
//! | `checkpoints/round_NNNN.bin` | intermediate checkpoints |
//! | `epochs.csv` | `epoch,mean_loss,skipped,grad_norm_mean,grad_norm_max,round,shard` |
//! | `skips.csv` | `sample_id,epoch,t,loss,ratio` |
//! | `experiment.json` | per-round, per-shard log |
//! | `manifest.json` | resolved settings, dataset hash, artifact hashes |
//! | `report.json`, `verdicts.csv` | audit results |
//! | `loss_profile.csv`, `skip_counts.csv`, `skip_histogram.csv`, `distances.csv`, `energy.csv`, `analysis.json` | analysis tables |

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agc::SkipRecord;
use crate::audit::{self, AuditReport};
use crate::checkpoint::Checkpoint;
use crate::data::{self, hex_digest, Dataset, Sample};
use crate::denoiser::{Architecture, DenoiserParams};
use crate::diffusion::sample_generate;
use crate::error::{Error, Result};
use crate::iet::{self, RoundConfig};

use super::config::{DataSource, ExperimentSpec};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DATASET_FILE: &str = "dataset.bin";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const EPOCHS_FILE: &str = "epochs.csv";
pub const SKIPS_FILE: &str = "skips.csv";
pub const LOG_FILE: &str = "experiment.json";
pub const REPORT_FILE: &str = "report.json";
pub const VERDICTS_FILE: &str = "verdicts.csv";

const MANIFEST_FORMAT: u32 = 1;

/// Process exit code for an error: 2 for configuration and parse errors,
/// 3 for divergence, 4 for incompatible artifacts, 5 for missing inputs,
/// 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Config(_) => 2,
        Error::Diverged { .. } => 3,
        Error::Aborted { cause, .. } => exit_code(cause),
        Error::Incompatible(_) => 4,
        Error::Missing(_) => 5,
        _ => 1,
    }
}

/// Record of one training run, sufficient to reproduce every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: u32,
    /// Resolved settings, every key except the output directory.
    pub spec: BTreeMap<String, String>,
    pub dataset_hash: String,
    pub dataset_samples: usize,
    pub total_epochs: usize,
    pub total_skips: usize,
    /// SHA-256 of each training artifact, by file name.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Missing(format!("manifest {}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text)?;
        if m.format != MANIFEST_FORMAT {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: m.format,
                expected: MANIFEST_FORMAT,
            });
        }
        Ok(m)
    }

    /// The recorded settings, writing its outputs to `out`.
    pub fn spec(&self, out: &Path) -> Result<ExperimentSpec> {
        let mut pairs: Vec<(&str, &str)> =
            self.spec.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
        let out = out.display().to_string();
        pairs.push(("out", &out));
        ExperimentSpec::from_pairs(pairs)
    }
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(hex_digest(&fs::read(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv: {other:?}")),
    }
}

/// Builds (or loads) the dataset named by the experiment settings.
pub fn materialize(spec: &ExperimentSpec) -> Result<Dataset> {
    match &spec.data {
        DataSource::Mixture(m) => Ok(data::gen_mixture(m)?.dataset),
        DataSource::Patterns(p) => data::gen_patterns(p),
        DataSource::File(path) => Dataset::load(path),
    }
}

/// Writes the configured dataset to `out/dataset.bin` plus a CSV view.
pub fn cmd_gen_data(spec: &ExperimentSpec) -> Result<Dataset> {
    fs::create_dir_all(&spec.out)?;
    let ds = materialize(spec)?;
    ds.save(&spec.out.join(DATASET_FILE))?;
    ds.write_csv(&spec.out.join("dataset.csv"))?;
    Ok(ds)
}

#[derive(Serialize)]
struct EpochRow {
    epoch: usize,
    mean_loss: f64,
    skipped: usize,
    grad_norm_mean: f64,
    grad_norm_max: f64,
    round: usize,
    shard: usize,
}

/// Trains as configured (IET over `iet.k` shards; plain training when
/// `iet.k = 1`) and writes the run directory's training artifacts.
pub fn cmd_train(spec: &ExperimentSpec) -> Result<Manifest> {
    spec.validate()?;
    let out = &spec.out;
    fs::create_dir_all(out)?;
    let ds = materialize(spec)?;
    ds.save(&out.join(DATASET_FILE))?;
    let schedule = spec.schedule()?;
    let arch = Architecture {
        data_dim: ds.dim(),
        hidden: spec.hidden,
        time_embed: spec.time_embed,
    };
    let init = DenoiserParams::init(arch, spec.init_seed())?;
    let plan = iet::split_dataset(&ds, spec.k, spec.shard_mode, spec.split_seed(), spec.dirichlet_alpha)?;
    let rc = RoundConfig {
        rounds: spec.rounds,
        epochs_per_round: spec.epochs_per_round(),
        train: crate::trainer::TrainConfig {
            seed: spec.seed,
            ..spec.train.clone()
        },
        bank_policy: spec.bank_policy,
    };

    let mut last_checkpoint: Option<PathBuf> = None;
    let result = iet::run_iet_with(&ds, &plan, &rc, &schedule, init, |round, params, bank| {
        let done = round + 1;
        if spec.checkpoint_every > 0 && done % spec.checkpoint_every == 0 && done < rc.rounds {
            let dir = out.join("checkpoints");
            fs::create_dir_all(&dir)?;
            let path = dir.join(format!("round_{done:04}.bin"));
            Checkpoint::new(params.clone(), schedule.clone(), Some(bank.clone()), done * rc.epochs_per_round)?
                .save(&path)?;
            last_checkpoint = Some(path);
        }
        Ok(())
    });
    let outcome = match result {
        Ok(o) => o,
        Err(e @ Error::Diverged { .. }) => {
            return Err(Error::Aborted {
                cause: Box::new(e),
                checkpoint: last_checkpoint,
            })
        }
        Err(e) => return Err(e),
    };

    Checkpoint::new(outcome.params, schedule, Some(outcome.bank), rc.total_epochs())?
        .save(&out.join(CHECKPOINT_FILE))?;
    let mut w = csv_writer(&out.join(EPOCHS_FILE))?;
    for s in &outcome.epoch_stats {
        w.serialize(EpochRow {
            epoch: s.stats.epoch,
            mean_loss: s.stats.mean_loss,
            skipped: s.stats.skipped,
            grad_norm_mean: s.stats.grad_norm_mean,
            grad_norm_max: s.stats.grad_norm_max,
            round: s.round,
            shard: s.shard,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = csv_writer(&out.join(SKIPS_FILE))?;
    for r in &outcome.skips {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    write_json(&out.join(LOG_FILE), &outcome.log)?;

    let mut artifacts = BTreeMap::new();
    for f in [DATASET_FILE, CHECKPOINT_FILE, EPOCHS_FILE, SKIPS_FILE, LOG_FILE] {
        artifacts.insert(f.to_string(), file_hash(&out.join(f))?);
    }
    let manifest = Manifest {
        format: MANIFEST_FORMAT,
        spec: spec.manifest_entries(),
        dataset_hash: ds.content_hash(),
        dataset_samples: ds.len(),
        total_epochs: rc.total_epochs(),
        total_skips: outcome.skips.len(),
        artifacts,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn dataset_descriptor(ds: &Dataset) -> String {
    format!("dataset(d={}, N={})", ds.dim(), ds.len())
}

/// Generates `spec.audit.samples` samples from the checkpoint and scores
/// them against the dataset; writes `report.json` and `verdicts.csv` to
/// `spec.out`.
pub fn cmd_audit(checkpoint: &Path, dataset: &Path, spec: &ExperimentSpec) -> Result<AuditReport> {
    let ck = Checkpoint::load(checkpoint)?;
    let ds = Dataset::load(dataset)?;
    audit_loaded(&ck, &ds, spec)
}

fn audit_loaded(ck: &Checkpoint, ds: &Dataset, spec: &ExperimentSpec) -> Result<AuditReport> {
    if ck.params.architecture().data_dim != ds.dim() || ck.schedule.steps() != spec.steps {
        return Err(Error::Incompatible(format!(
            "{} cannot be audited against {} with T={}",
            ck.descriptor(),
            dataset_descriptor(ds),
            spec.steps
        )));
    }
    let a = &spec.audit;
    let seed = spec.audit_seed();
    let generated = sample_generate(&ck.params, &ck.schedule, a.samples, seed)?;
    let mq = audit::mq_counts(&generated, ds, a.neighbors, &a.thresholds, a.exclude_nearest)?;
    let frechet = audit::frechet_distance(&generated, ds.samples())?;
    let report = AuditReport {
        label: spec.display_label(),
        generated: generated.len(),
        neighbors: mq.neighbors,
        exclude_nearest: a.exclude_nearest,
        thresholds: mq.thresholds.clone(),
        mq: mq.counts.clone(),
        frechet,
        seed,
    };
    fs::create_dir_all(&spec.out)?;
    write_json(&spec.out.join(REPORT_FILE), &report)?;
    let mut w = csv_writer(&spec.out.join(VERDICTS_FILE))?;
    let mut header = vec![
        "generated_id".to_string(),
        "nearest_train_id".to_string(),
        "raw_l2".to_string(),
        "nn_ratio".to_string(),
    ];
    header.extend(a.thresholds.iter().map(|t| format!("mem_{t}")));
    w.write_record(&header).map_err(csv_err)?;
    for v in &mq.verdicts {
        let mut row = vec![
            v.generated_id.to_string(),
            v.nearest_train_id.to_string(),
            v.raw_l2.to_string(),
            v.nn_ratio.to_string(),
        ];
        row.extend(v.flags.iter().map(|(_, f)| u8::from(*f).to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(report)
}

/// Audits a run directory in place using the audit settings of `spec`.
pub fn audit_run(run: &Path, spec: &ExperimentSpec) -> Result<AuditReport> {
    let spec = ExperimentSpec {
        out: run.to_path_buf(),
        ..spec.clone()
    };
    cmd_audit(&run.join(CHECKPOINT_FILE), &run.join(DATASET_FILE), &spec)
}

/// Trains and then audits, all under `spec.out`.
pub fn cmd_run(spec: &ExperimentSpec) -> Result<(Manifest, AuditReport)> {
    let manifest = cmd_train(spec)?;
    let report = audit_run(&spec.out, spec)?;
    Ok((manifest, report))
}

/// Re-executes the experiment recorded in `manifest` into `out`, checking
/// that the dataset it builds is the recorded one.
pub fn rerun(manifest: &Path, out: &Path) -> Result<(Manifest, AuditReport)> {
    let recorded = Manifest::load(manifest)?;
    let spec = recorded.spec(out)?;
    let ds = materialize(&spec)?;
    if ds.content_hash() != recorded.dataset_hash {
        return Err(Error::Incompatible(format!(
            "dataset hash {} differs from the manifest's {}",
            ds.content_hash(),
            recorded.dataset_hash
        )));
    }
    cmd_run(&spec)
}

/// One run per value of `key`, each in `spec.out/<key>=<value>`. Returns the
/// run directories in `values` order.
pub fn sweep(spec: &ExperimentSpec, key: &str, values: &[String], audit: bool) -> Result<Vec<PathBuf>> {
    let mut dirs = Vec::with_capacity(values.len());
    for v in values {
        let mut s = spec.clone();
        s.set(key, v)?;
        s.out = spec.out.join(format!("{key}={v}"));
        s.validate()?;
        if audit {
            cmd_run(&s)?;
        } else {
            cmd_train(&s)?;
        }
        dirs.push(s.out);
    }
    Ok(dirs)
}

fn read_skips(path: &Path) -> Result<Vec<SkipRecord>> {
    if !path.exists() {
        return Err(Error::Missing(format!("skip records {}", path.display())));
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

/// Summary written to `analysis.json` by [`cmd_analyze`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub total_epochs: usize,
    pub total_skips: usize,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub most_skipped: Vec<u64>,
    pub least_skipped: Vec<u64>,
    /// Median skip count over duplicated samples, when there are any.
    pub duplicate_median_skips: Option<f64>,
    pub unique_median_skips: Option<f64>,
    pub mean_distance_most: f64,
    pub mean_distance_least: f64,
    /// Only for square-grid data.
    pub mean_energy_most: Option<f64>,
    pub mean_energy_least: Option<f64>,
    /// Number of loss-profile rows written (0 without a memorized group).
    pub profile_rows: usize,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(audit::quantile(&v, 0.5))
}

/// Memorized group for the loss profile: members of duplicate groups larger
/// than `threshold`. The control group is every other sample.
pub fn memorized_split(ds: &Dataset, threshold: usize) -> (Vec<Sample>, Vec<Sample>) {
    let ids: std::collections::BTreeSet<u64> = ds
        .duplicate_groups()
        .into_values()
        .filter(|g| g.len() > threshold)
        .flatten()
        .collect();
    ds.samples().iter().cloned().partition(|s| ids.contains(&s.id))
}

/// Writes the loss-profile, skip, distance and energy tables for a run
/// directory, using `spec`'s analysis settings.
pub fn cmd_analyze(run: &Path, spec: &ExperimentSpec) -> Result<AnalysisSummary> {
    let manifest = Manifest::load(&run.join(MANIFEST_FILE))?;
    let ck_path = run.join(CHECKPOINT_FILE);
    let ds_path = run.join(DATASET_FILE);
    for p in [&ck_path, &ds_path] {
        if !p.exists() {
            return Err(Error::Missing(format!("{} (needed by analyze)", p.display())));
        }
    }
    let ck = Checkpoint::load(&ck_path)?;
    let ds = Dataset::load(&ds_path)?;
    if ck.params.architecture().data_dim != ds.dim() {
        return Err(Error::Incompatible(format!(
            "{} vs {}",
            ck.descriptor(),
            dataset_descriptor(&ds)
        )));
    }
    let skips = read_skips(&run.join(SKIPS_FILE))?;
    let an = &spec.analyze;

    let (memorized, control) = memorized_split(&ds, an.dup_threshold);
    let mut profile_rows = 0;
    if !memorized.is_empty() && !control.is_empty() {
        let top = ((an.max_t_fraction * ck.schedule.steps() as f64).round() as usize).max(1);
        let grid: Vec<usize> = (1..=top).step_by(an.grid_step).collect();
        let rows = audit::loss_profile(&ck.params, &memorized, &control, &ck.schedule, &grid, an.draws, spec.profile_seed())?;
        let mut w = csv_writer(&run.join("loss_profile.csv"))?;
        w.write_record([
            "t",
            "memorized_mean",
            "memorized_p15",
            "memorized_p85",
            "control_mean",
            "control_p15",
            "control_p85",
        ])
        .map_err(csv_err)?;
        for r in &rows {
            w.write_record([
                r.t.to_string(),
                r.memorized.mean.to_string(),
                r.memorized.p15.to_string(),
                r.memorized.p85.to_string(),
                r.control.mean.to_string(),
                r.control.p15.to_string(),
                r.control.p85.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush()?;
        profile_rows = rows.len();
    }

    let ids: Vec<u64> = ds.samples().iter().map(|s| s.id).collect();
    let hist = audit::skip_histogram(&skips, &ids, manifest.total_epochs);
    let dup_ids = ds.duplicated_ids();
    let mut w = csv_writer(&run.join("skip_counts.csv"))?;
    w.write_record(["sample_id", "skips", "duplicated"]).map_err(csv_err)?;
    for (id, c) in &hist.counts {
        w.write_record([id.to_string(), c.to_string(), u8::from(dup_ids.contains(id)).to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = csv_writer(&run.join("skip_histogram.csv"))?;
    for b in &hist.bins {
        w.serialize(b).map_err(csv_err)?;
    }
    w.flush()?;

    let (most, least) = hist.deciles();
    let pick = |ids: &[u64]| -> Vec<Sample> {
        let set: std::collections::BTreeSet<u64> = ids.iter().copied().collect();
        ds.samples().iter().filter(|s| set.contains(&s.id)).cloned().collect()
    };
    let (most_s, least_s) = (pick(&most), pick(&least));
    let clusters = audit::clustering_analysis(&most_s, &least_s, &ds)?;
    let mut w = csv_writer(&run.join("distances.csv"))?;
    w.write_record(["group", "distance"]).map_err(csv_err)?;
    for (g, ds_) in [("most", &clusters.most), ("least", &clusters.least)] {
        for d in ds_.iter() {
            w.write_record([g.to_string(), d.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;

    let grid = (ds.dim() as f64).sqrt().round() as usize;
    let (mut mean_energy_most, mut mean_energy_least) = (None, None);
    if grid * grid == ds.dim() && grid > 1 {
        let mut w = csv_writer(&run.join("energy.csv"))?;
        w.write_record(["group", "sample_id", "energy"]).map_err(csv_err)?;
        let mut means = Vec::new();
        for (g, group) in [("most", &most_s), ("least", &least_s)] {
            let mut es = Vec::with_capacity(group.len());
            for s in group.iter() {
                let e = audit::spectral_energy(&s.x)?;
                w.write_record([g.to_string(), s.id.to_string(), e.to_string()]).map_err(csv_err)?;
                es.push(e);
            }
            means.push(audit::analysis::mean(&es));
        }
        w.flush()?;
        mean_energy_most = Some(means[0]);
        mean_energy_least = Some(means[1]);
    }

    let counts_of = |dup: bool| -> Vec<f64> {
        hist.counts
            .iter()
            .filter(|(id, _)| dup_ids.contains(id) == dup)
            .map(|(_, c)| *c as f64)
            .collect()
    };
    let summary = AnalysisSummary {
        total_epochs: manifest.total_epochs,
        total_skips: skips.len(),
        p50: hist.p50,
        p90: hist.p90,
        p99: hist.p99,
        most_skipped: most,
        least_skipped: least,
        duplicate_median_skips: median(counts_of(true)),
        unique_median_skips: median(counts_of(false)),
        mean_distance_most: audit::analysis::mean(&clusters.most),
        mean_distance_least: audit::analysis::mean(&clusters.least),
        mean_energy_most,
        mean_energy_least,
        profile_rows,
    };
    write_json(&run.join("analysis.json"), &summary)?;
    Ok(summary)
}

/// Output of [`cmd_compare`].
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub csv: String,
    pub table: String,
    pub warnings: Vec<String>,
}

const COMPARE_THRESHOLDS: [f64; 3] = [0.4, 0.5, 0.6];

/// Aligns audit reports into one table with columns
/// `report,label,generated,neighbors,mq_0.4,mq_0.5,mq_0.6,frechet`. Fields a
/// report lacks become empty cells; differing audit settings produce
/// warnings rather than errors.
pub fn cmd_compare(reports: &[PathBuf]) -> Result<Comparison> {
    if reports.len() < 2 {
        return Err(Error::config("compare needs at least two reports"));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut settings: Vec<(String, String)> = Vec::new();
    for path in reports {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Missing(format!("report {}: {e}", path.display())))?;
        let v: serde_json::Value = serde_json::from_str(&text)?;
        let field = |k: &str| -> String {
            match v.get(k) {
                Some(serde_json::Value::String(s)) => s.clone(),
                Some(serde_json::Value::Null) | None => String::new(),
                Some(other) => other.to_string(),
            }
        };
        let thresholds: Vec<f64> = v
            .get("thresholds")
            .and_then(|t| serde_json::from_value(t.clone()).ok())
            .unwrap_or_default();
        let mq: Vec<serde_json::Value> = v
            .get("mq")
            .and_then(|m| m.as_array().cloned())
            .unwrap_or_default();
        let mut row = vec![
            path.display().to_string(),
            field("label"),
            field("generated"),
            field("neighbors"),
        ];
        for want in COMPARE_THRESHOLDS {
            let cell = thresholds
                .iter()
                .position(|t| (t - want).abs() < 1e-12)
                .and_then(|i| mq.get(i))
                .map(|c| c.to_string())
                .unwrap_or_default();
            row.push(cell);
        }
        row.push(field("frechet"));
        rows.push(row);
        settings.push((
            path.display().to_string(),
            format!(
                "generated={} neighbors={} exclude_nearest={} thresholds={}",
                field("generated"),
                field("neighbors"),
                field("exclude_nearest"),
                v.get("thresholds").map(|t| t.to_string()).unwrap_or_default()
            ),
        ));
    }
    let mut warnings = Vec::new();
    let reference = &settings[0].1;
    for (path, s) in &settings[1..] {
        if s != reference {
            warnings.push(format!(
                "audit settings differ: {} has [{}], {} has [{}]",
                settings[0].0, reference, path, s
            ));
        }
    }

    let header: Vec<String> = ["report", "label", "generated", "neighbors", "mq_0.4", "mq_0.5", "mq_0.6", "frechet"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).map_err(csv_err)?;
    for r in &rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let csv = String::from_utf8(w.into_inner().map_err(|e| Error::Numerical(e.to_string()))?)
        .expect("csv output is utf-8");

    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].len()])
                .max()
                .unwrap()
        })
        .collect();
    let line = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut table = line(&header);
    table.push('\n');
    for r in &rows {
        table.push_str(&line(r));
        table.push('\n');
    }
    for w in &warnings {
        table.push_str(&format!("warning: {w}\n"));
    }
    Ok(Comparison { csv, table, warnings })
}

/// Loads an audit report written by [`cmd_audit`].
pub fn load_report(path: &Path) -> Result<AuditReport> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Missing(format!("report {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}
