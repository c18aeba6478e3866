//! `ietagc` command-line driver.
//!
//! Every experiment key can be given as `--key value` (or `--key=value`)
//! after the subcommand; see `ietagc keys` for the full list.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ietagc::experiment::{self, ExperimentSpec, Manifest};
use ietagc::{Error, Result};

#[derive(Parser)]
#[command(name = "ietagc", version, about = "Memorization-mitigating diffusion training and auditing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SpecArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Key overrides: `--iet.k 4 --train.method agc ...`.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write checkpoint, logs and manifest to `--out`.
    Train(SpecArgs),
    /// Train and then audit in one go.
    Run(SpecArgs),
    /// Generate samples from a checkpoint and count memorized ones.
    Audit {
        /// Run directory (provides checkpoint, dataset and recorded settings).
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, conflicts_with = "run", requires = "dataset")]
        checkpoint: Option<PathBuf>,
        #[arg(long, conflicts_with = "run", requires = "checkpoint")]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Write loss-profile, skip, distance and energy tables for a run.
    Analyze {
        #[arg(long)]
        run: PathBuf,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// Align two or more audit reports into one table.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// Also write the table as CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Write the configured dataset to `--out`.
    GenData(SpecArgs),
    /// Re-execute the experiment recorded in a manifest.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One run per value of a key, each in its own subdirectory of `--out`.
    Sweep {
        #[arg(long)]
        key: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Audit every run after training.
        #[arg(long)]
        audit: bool,
        #[command(flatten)]
        spec: SpecArgs,
    },
    /// List every configuration key with its default value.
    Keys,
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    let mut it = raw.iter();
    while let Some(tok) = it.next() {
        let key = tok.strip_prefix("--").ok_or_else(|| Error::Parse {
            key: tok.clone(),
            reason: "expected `--key value`".into(),
        })?;
        match key.split_once('=') {
            Some((k, v)) => out.push((k.to_string(), v.to_string())),
            None => {
                let v = it.next().ok_or_else(|| Error::Parse {
                    key: key.to_string(),
                    reason: "missing value".into(),
                })?;
                out.push((key.to_string(), v.clone()));
            }
        }
    }
    Ok(out)
}

fn resolve(args: &SpecArgs, base: Vec<(String, String)>) -> Result<ExperimentSpec> {
    let flags = parse_overrides(&args.overrides)?;
    ExperimentSpec::resolve_over(base, args.config.as_deref(), std::env::vars(), &flags)
}

/// Spec of an existing run, with later layers applied and outputs going
/// back into the run directory unless `--out` is given.
fn resolve_for_run(run: &Path, args: &SpecArgs) -> Result<ExperimentSpec> {
    let manifest = Manifest::load(&run.join(experiment::commands::MANIFEST_FILE))?;
    let mut base: Vec<(String, String)> = manifest.spec.into_iter().collect();
    base.push(("out".into(), run.display().to_string()));
    resolve(args, base)
}

fn print_report(r: &ietagc::audit::AuditReport) {
    let counts: Vec<String> = r
        .thresholds
        .iter()
        .zip(&r.mq)
        .map(|(t, c)| format!("MQ_{t}={c}"))
        .collect();
    println!(
        "{}: {} of {} generated; frechet={:.6}",
        r.label,
        counts.join(" "),
        r.generated,
        r.frechet
    );
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let spec = resolve(&args, Vec::new())?;
            let m = experiment::cmd_train(&spec)?;
            println!(
                "trained {} epochs on {} samples ({} skips); outputs in {}",
                m.total_epochs,
                m.dataset_samples,
                m.total_skips,
                spec.out.display()
            );
        }
        Command::Run(args) => {
            let spec = resolve(&args, Vec::new())?;
            let (_, report) = experiment::cmd_run(&spec)?;
            print_report(&report);
        }
        Command::Audit {
            run,
            checkpoint,
            dataset,
            spec,
        } => {
            let report = match (run, checkpoint, dataset) {
                (Some(run), _, _) => {
                    let s = resolve_for_run(&run, &spec)?;
                    experiment::cmd_audit(
                        &run.join(experiment::commands::CHECKPOINT_FILE),
                        &run.join(experiment::commands::DATASET_FILE),
                        &s,
                    )?
                }
                (None, Some(c), Some(d)) => experiment::cmd_audit(&c, &d, &resolve(&spec, Vec::new())?)?,
                _ => return Err(Error::Missing("audit needs --run or --checkpoint with --dataset".into())),
            };
            print_report(&report);
        }
        Command::Analyze { run, spec } => {
            let s = resolve_for_run(&run, &spec)?;
            let a = experiment::cmd_analyze(&run, &s)?;
            println!(
                "skips p50={} p90={} p99={}; mean distance most={:.4} least={:.4}; tables in {}",
                a.p50,
                a.p90,
                a.p99,
                a.mean_distance_most,
                a.mean_distance_least,
                run.display()
            );
        }
        Command::Compare { reports, csv } => {
            let c = experiment::cmd_compare(&reports)?;
            print!("{}", c.table);
            if let Some(path) = csv {
                std::fs::write(path, c.csv)?;
            }
        }
        Command::GenData(args) => {
            let spec = resolve(&args, Vec::new())?;
            let ds = experiment::cmd_gen_data(&spec)?;
            println!(
                "{} samples of dimension {} written to {}",
                ds.len(),
                ds.dim(),
                spec.out.display()
            );
        }
        Command::Rerun { manifest, out } => {
            let (_, report) = experiment::rerun(&manifest, &out)?;
            print_report(&report);
        }
        Command::Sweep {
            key,
            values,
            audit,
            spec,
        } => {
            let s = resolve(&spec, Vec::new())?;
            for dir in experiment::sweep(&s, &key, &values, audit)? {
                println!("{}", dir.display());
            }
        }
        Command::Keys => print!("{}", ExperimentSpec::default().to_config_string()),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(experiment::exit_code(&e) as u8)
        }
    }
}
