mod common;

use std::collections::BTreeMap;
use std::path::Path;

use ietagc::agc::{apply_mask, LossEntry, MemoryBank};
use ietagc::audit::{frechet_distance, mq_counts, nn_ratio};
use ietagc::data::{gen_mixture, Dataset, DupSpec, MixtureSpec, Sample};
use ietagc::denoiser::{Architecture, DenoiserParams};
use ietagc::iet::{aggregate, aggregate_banks, split_dataset, ShardMode};
use ietagc::schedule::Schedule;
use ietagc::seed;
use proptest::prelude::*;

fn small_arch() -> Architecture {
    Architecture {
        data_dim: 2,
        hidden: 4,
        time_embed: 2,
    }
}

fn model(seed: u64) -> DenoiserParams {
    DenoiserParams::init(small_arch(), seed).unwrap()
}

fn dataset(points: Vec<Vec<f64>>) -> Dataset {
    let dim = points[0].len();
    let samples = points
        .into_iter()
        .enumerate()
        .map(|(i, x)| Sample {
            id: i as u64,
            x,
            label: None,
        })
        .collect();
    Dataset::new(dim, samples, BTreeMap::new()).unwrap()
}

fn cloud(d: usize, max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, d), (d + 2)..max)
}

/// Random orthogonal matrix by Gram-Schmidt on a random square matrix.
fn orthogonal(d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = common::rng(seed);
    let mut q: Vec<Vec<f64>> = Vec::new();
    while q.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| common::gauss(&mut r)).collect();
        for u in &q {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (vi, ui) in v.iter_mut().zip(u) {
                *vi -= dot * ui;
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn aggregate_ignores_model_order(seeds in prop::collection::vec(0u64..1000, 1..6), rot in 0usize..6) {
        let models: Vec<_> = seeds.iter().map(|s| model(*s)).collect();
        let mut shuffled = models.clone();
        shuffled.rotate_left(rot % models.len());
        shuffled.reverse();
        let a = aggregate(&models).unwrap();
        let b = aggregate(&shuffled).unwrap();
        let bits = |p: &DenoiserParams| p.as_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn aggregate_of_identical_models_is_identity(seed in 0u64..1000, k in 1usize..8) {
        let m = model(seed);
        let agg = aggregate(&vec![m.clone(); k]).unwrap();
        prop_assert_eq!(agg.as_flat(), m.as_flat());
    }

    #[test]
    fn aggregate_commutes_with_common_shift(seeds in prop::collection::vec(0u64..1000, 1..6), shift in -2.0f64..2.0) {
        let models: Vec<_> = seeds.iter().map(|s| model(*s)).collect();
        let shifted: Vec<_> = models
            .iter()
            .map(|m| {
                let mut m = m.clone();
                m.as_flat_mut().iter_mut().for_each(|v| *v += shift);
                m
            })
            .collect();
        let a = aggregate(&models).unwrap();
        let b = aggregate(&shifted).unwrap();
        for (x, y) in a.as_flat().iter().zip(b.as_flat()) {
            prop_assert!((x + shift - y).abs() < 1e-12);
        }
    }

    #[test]
    fn mask_is_idempotent(losses in prop::collection::vec(0.0f64..4.0, 1..40), level in 0.01f64..3.0, lambda in 0.0f64..1.5) {
        let bank = {
            let mut b = MemoryBank::new(3, 0.5).unwrap();
            b.update(2, 2.0 * level).unwrap();
            b
        };
        let entries: Vec<LossEntry> = losses
            .iter()
            .enumerate()
            .map(|(i, l)| LossEntry { sample_id: i as u64, t: 2, loss: *l })
            .collect();
        let (once, _) = apply_mask(&entries, &bank, lambda, 0).unwrap();
        let again: Vec<LossEntry> = entries
            .iter()
            .zip(&once)
            .map(|(e, l)| LossEntry { loss: *l, ..*e })
            .collect();
        let (twice, _) = apply_mask(&again, &bank, lambda, 0).unwrap();
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn mask_does_not_depend_on_batch_order(losses in prop::collection::vec(0.0f64..4.0, 2..40), rot in 0usize..40, lambda in 0.0f64..1.5) {
        let mut bank = MemoryBank::new(2, 0.8).unwrap();
        bank.update(1, 1.0).unwrap();
        let entries: Vec<LossEntry> = losses
            .iter()
            .enumerate()
            .map(|(i, l)| LossEntry { sample_id: i as u64, t: 1, loss: *l })
            .collect();
        let mut permuted = entries.clone();
        permuted.rotate_left(rot % entries.len());
        let skipped = |es: &[LossEntry]| {
            let (_, s) = apply_mask(es, &bank, lambda, 0).unwrap();
            let mut ids: Vec<u64> = s.iter().map(|r| r.sample_id).collect();
            ids.sort_unstable();
            ids
        };
        prop_assert_eq!(skipped(&entries), skipped(&permuted));
    }

    #[test]
    fn zero_bank_never_skips(losses in prop::collection::vec(0.0f64..4.0, 1..40), lambda in 0.0f64..10.0) {
        let bank = MemoryBank::new(5, 0.8).unwrap();
        let entries: Vec<LossEntry> = losses
            .iter()
            .enumerate()
            .map(|(i, l)| LossEntry { sample_id: i as u64, t: 1 + i % 5, loss: *l })
            .collect();
        let (masked, skips) = apply_mask(&entries, &bank, lambda, 0).unwrap();
        prop_assert!(skips.is_empty());
        prop_assert_eq!(masked, losses);
    }

    #[test]
    fn bank_average_is_levelwise_mean(levels in prop::collection::vec(prop::collection::vec(0.0f64..5.0, 4), 1..5)) {
        let banks: Vec<MemoryBank> = levels
            .iter()
            .map(|ls| {
                let mut b = MemoryBank::new(4, 0.5).unwrap();
                for (t, l) in ls.iter().enumerate() {
                    b.update(t + 1, 2.0 * l).unwrap();
                }
                b
            })
            .collect();
        let avg = aggregate_banks(&banks).unwrap();
        for t in 1..=4 {
            let want = banks.iter().map(|b| b.level(t)).sum::<f64>() / banks.len() as f64;
            prop_assert!((avg.level(t) - want).abs() < 1e-12);
            prop_assert_eq!(avg.update_count(t), banks.len() as u64);
        }
    }

    #[test]
    fn nn_ratio_is_isometry_invariant(
        pts in cloud(3, 30),
        query in prop::collection::vec(-3.0f64..3.0, 3),
        shift in prop::collection::vec(-5.0f64..5.0, 3),
        rot_seed in 0u64..1000,
        n in 1usize..40,
    ) {
        let q = orthogonal(3, rot_seed);
        let map = |x: &[f64]| -> Vec<f64> {
            (0..3).map(|i| (0..3).map(|j| q[i][j] * x[j]).sum::<f64>() + shift[i]).collect()
        };
        let before = nn_ratio(&query, &dataset(pts.clone()), n, false).unwrap();
        let moved: Vec<Vec<f64>> = pts.iter().map(|p| map(p)).collect();
        let after = nn_ratio(&map(&query), &dataset(moved), n, false).unwrap();
        prop_assert!((before.ratio - after.ratio).abs() < 1e-9);
    }

    #[test]
    fn frechet_is_symmetric_and_zero_on_itself(a in cloud(3, 25), b in cloud(3, 25)) {
        let sa = dataset(a).samples().to_vec();
        let sb = dataset(b).samples().to_vec();
        let ab = frechet_distance(&sa, &sb).unwrap();
        let ba = frechet_distance(&sb, &sa).unwrap();
        prop_assert!(ab >= -1e-9);
        prop_assert!((ab - ba).abs() < 1e-9 * ab.abs().max(1.0));
        prop_assert!(frechet_distance(&sa, &sa).unwrap().abs() < 1e-9);
    }

    #[test]
    fn mq_is_monotone_in_threshold(train in cloud(2, 40), gen in cloud(2, 30), n in 1usize..60) {
        let train = dataset(train);
        let gen = dataset(gen).samples().to_vec();
        let r = mq_counts(&gen, &train, n, &[0.4, 0.5, 0.6], false).unwrap();
        prop_assert!(r.counts[0] <= r.counts[1] && r.counts[1] <= r.counts[2]);
        prop_assert!(r.counts[2] <= gen.len());
    }

    #[test]
    fn dataset_round_trips_and_hash_tracks_content(seed in 0u64..500, copies in 2usize..6, bump in 0usize..20) {
        let spec = MixtureSpec {
            components: 3,
            per_component: 5,
            dim: 2,
            spread: 0.3,
            dups: vec![DupSpec { component: 1, copies }],
            seed,
        };
        let ds = gen_mixture(&spec).unwrap().dataset;
        let back = Dataset::from_bytes(&ds.to_bytes(), Path::new("mem")).unwrap();
        prop_assert_eq!(&back, &ds);
        prop_assert_eq!(back.content_hash(), ds.content_hash());

        let mut samples = ds.samples().to_vec();
        let i = bump % samples.len();
        samples[i].x[0] = f64::from_bits(samples[i].x[0].to_bits() ^ 1);
        // Perturbing one duplicate breaks its group, so drop the metadata.
        let changed = Dataset::new(2, samples, BTreeMap::new()).unwrap();
        prop_assert_ne!(changed.content_hash(), ds.content_hash());
    }

    #[test]
    fn shards_partition_the_dataset(k in 1usize..12, seed in 0u64..500, mode in 0usize..3) {
        let ds = gen_mixture(&MixtureSpec {
            components: 4,
            per_component: 9,
            dim: 2,
            spread: 0.3,
            dups: vec![],
            seed,
        })
        .unwrap()
        .dataset;
        let mode = [ShardMode::IidClasswise, ShardMode::IidRandom, ShardMode::Dirichlet][mode];
        let plan = split_dataset(&ds, k, mode, seed, Some(0.5)).unwrap();
        prop_assert_eq!(plan.assignment.len(), ds.len());
        prop_assert_eq!(plan.sizes().iter().sum::<usize>(), ds.len());
        for s in ds.samples() {
            prop_assert!(plan.assignment[&s.id] < k);
        }
        if mode == ShardMode::IidClasswise {
            let sizes = plan.sizes();
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            // At most one leftover per class lands on any one shard.
            prop_assert!(spread <= 4);
        }
        if mode != ShardMode::Dirichlet {
            prop_assert_eq!(plan.clone(), split_dataset(&ds, k, mode, seed, Some(0.5)).unwrap());
        }
    }

    #[test]
    fn schedule_products_are_consistent(steps in 2usize..200, beta_max in 0.001f64..0.3) {
        let s = Schedule::linear(steps, 1e-4, beta_max).unwrap();
        let mut prod = 1.0;
        for t in 1..=steps {
            prod *= 1.0 - s.beta(t);
            prop_assert!((s.alpha(t) - prod).abs() < 1e-12);
            if t > 1 {
                prop_assert!(s.alpha(t) < s.alpha(t - 1));
            }
        }
        prop_assert!(s.alpha(steps) <= 1e-4);
    }

    #[test]
    fn seed_derivation_is_stable_and_label_sensitive(base in any::<u64>(), i in any::<u64>()) {
        prop_assert_eq!(seed::derive(base, "shard", &[i]), seed::derive(base, "shard", &[i]));
        prop_assert_ne!(seed::derive(base, "shard", &[i]), seed::derive(base, "epoch", &[i]));
        prop_assert_ne!(seed::derive(base, "shard", &[i]), seed::derive(base, "shard", &[i ^ 1]));
    }
}
