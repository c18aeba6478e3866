mod common;

use std::collections::BTreeMap;

use common::{bits, small_mixture, small_params};
use ietagc::agc::MemoryBank;
use ietagc::audit::skip_histogram;
use ietagc::data::{gen_mixture, gen_patterns, Dataset, MixtureSpec, PatternSpec, Sample};
use ietagc::denoiser::{Architecture, DenoiserParams};
use ietagc::iet::{aggregate, run_iet, shard_seed, split_dataset, BankPolicy, RoundConfig, ShardMode};
use ietagc::schedule::Schedule;
use ietagc::trainer::{train_epochs, Method, TrainConfig};

fn schedule() -> Schedule {
    Schedule::linear(20, 1e-4, 0.02).unwrap()
}

#[test]
fn methods_collapse_to_plain_training() {
    for (name, holds) in common::collapse_identities() {
        assert!(holds, "{name}");
    }
}

#[test]
fn training_is_deterministic() {
    let ds = small_mixture(1);
    let cfg = TrainConfig {
        method: Method::Agc,
        batch_size: 8,
        epochs: 5,
        seed: 3,
        ..TrainConfig::default()
    };
    let run = || train_epochs(small_params(2), &ds, &cfg, MemoryBank::new(20, 0.8).unwrap(), &schedule(), 0).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(bits(&a.params), bits(&b.params));
    assert_eq!(a.skips, b.skips);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn skip_counts_match_records() {
    let ds = small_mixture(2);
    let cfg = TrainConfig {
        method: Method::Agc,
        lambda: 0.8,
        batch_size: 8,
        epochs: 10,
        ..TrainConfig::default()
    };
    let out = train_epochs(small_params(1), &ds, &cfg, MemoryBank::new(20, 0.8).unwrap(), &schedule(), 0).unwrap();
    assert!(out.skips.len() > 0);
    for st in &out.stats {
        let n = out.skips.iter().filter(|r| r.epoch == st.epoch).count();
        assert_eq!(st.skipped, n);
    }
}

#[test]
fn zero_epochs_return_init() {
    let ds = small_mixture(3);
    let init = small_params(4);
    let plan = split_dataset(&ds, 3, ShardMode::IidClasswise, 0, None).unwrap();
    let rc = RoundConfig {
        rounds: 1,
        epochs_per_round: 0,
        train: TrainConfig::default(),
        bank_policy: BankPolicy::Average,
    };
    let out = run_iet(&ds, &plan, &rc, &schedule(), init.clone()).unwrap();
    assert_eq!(bits(&out.params), bits(&init));
    assert!(out.skips.is_empty());
}

#[test]
fn shard_order_does_not_change_the_round() {
    let ds = small_mixture(4);
    let init = small_params(5);
    let s = schedule();
    let train = TrainConfig {
        method: Method::Agc,
        batch_size: 4,
        seed: 9,
        ..TrainConfig::default()
    };
    let plan = split_dataset(&ds, 3, ShardMode::IidClasswise, 2, None).unwrap();
    let rc = RoundConfig {
        rounds: 1,
        epochs_per_round: 3,
        train: train.clone(),
        bank_policy: BankPolicy::Average,
    };
    let got = run_iet(&ds, &plan, &rc, &s, init.clone()).unwrap();

    // Train the shards by hand in reverse order, each with its own seed.
    let mut models = Vec::new();
    for shard in (0..3).rev() {
        let cfg = TrainConfig {
            epochs: 3,
            seed: shard_seed(train.seed, shard),
            ..train.clone()
        };
        let part = ds.subset(&plan.shard_ids(shard));
        models.push(train_epochs(init.clone(), &part, &cfg, MemoryBank::new(20, 0.8).unwrap(), &s, 0).unwrap().params);
    }
    assert_eq!(bits(&aggregate(&models).unwrap()), bits(&got.params));
}

#[test]
fn single_sample_is_fitted() {
    let x = vec![0.3, -0.7];
    let ds = Dataset::new(2, vec![Sample { id: 0, x, label: None }], BTreeMap::new()).unwrap();
    let cfg = TrainConfig {
        eta: 0.05,
        batch_size: 1,
        epochs: 20_000,
        ..TrainConfig::default()
    };
    let p = DenoiserParams::init(Architecture::new(2), 0).unwrap();
    let out = train_epochs(p, &ds, &cfg, MemoryBank::new(20, 0.8).unwrap(), &schedule(), 0).unwrap();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let losses: Vec<f64> = out.stats.iter().map(|s| s.mean_loss).collect();
    let first = mean(&losses[..20]);
    let last = mean(&losses[losses.len() - 2000..]);
    assert!(last < 0.1 * first, "first {first} last {last}");
}

#[test]
fn duplicated_sample_is_skipped_more() {
    // 48 unique points plus one point repeated 16 times.
    let ds = gen_mixture(&MixtureSpec {
        components: 4,
        per_component: 12,
        dim: 2,
        spread: 0.3,
        dups: vec![ietagc::data::DupSpec { component: 1, copies: 16 }],
        seed: 8,
    })
    .unwrap()
    .dataset;
    assert_eq!(ds.len(), 64);
    let cfg = TrainConfig {
        method: Method::Agc,
        eta: 0.05,
        batch_size: 16,
        epochs: 400,
        seed: 1,
        ..TrainConfig::default()
    };
    let p = DenoiserParams::init(Architecture::new(2), 1).unwrap();
    let out = train_epochs(p, &ds, &cfg, MemoryBank::new(20, 0.8).unwrap(), &schedule(), 0).unwrap();
    let ids: Vec<u64> = ds.samples().iter().map(|s| s.id).collect();
    let h = skip_histogram(&out.skips, &ids, cfg.epochs);
    let dups = ds.duplicated_ids();
    let mut unique: Vec<f64> = h.counts.iter().filter(|(i, _)| !dups.contains(i)).map(|(_, c)| *c as f64).collect();
    let dup_min = h.counts.iter().filter(|(i, _)| dups.contains(i)).map(|(_, c)| *c).min().unwrap();
    unique.sort_by(f64::total_cmp);
    let unique_median = ietagc::audit::quantile(&unique, 0.5);
    assert!(dup_min as f64 > unique_median, "duplicate {dup_min} vs unique median {unique_median}");
}

fn loss_drops(ds: &Dataset, epochs: usize) -> (f64, f64) {
    let cfg = TrainConfig {
        eta: 0.1,
        epochs,
        ..TrainConfig::default()
    };
    let s = Schedule::linear(100, 1e-4, 0.02).unwrap();
    let p = DenoiserParams::init(Architecture::new(ds.dim()), 0).unwrap();
    let out = train_epochs(p, ds, &cfg, MemoryBank::new(100, 0.8).unwrap(), &s, 0).unwrap();
    let losses: Vec<f64> = out.stats.iter().map(|s| s.mean_loss).collect();
    let tenth = epochs / 10;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    (mean(&losses[..tenth]), mean(&losses[epochs - tenth..]))
}

#[test]
fn loss_falls_on_shipped_datasets() {
    let mix = gen_mixture(&MixtureSpec::desk_default(0)).unwrap().dataset;
    let pat = gen_patterns(&PatternSpec::desk_default(0)).unwrap();
    for (name, ds) in [("mixture", mix), ("patterns", pat)] {
        let (first, last) = loss_drops(&ds, 200);
        assert!(last < first, "{name}: first {first} last {last}");
    }
}
