//! Independent reference implementations shared by the integration tests.
//! None of these call into the routines they check.

#![allow(dead_code)]

use ietagc::data::Sample;
use ietagc::denoiser::{Architecture, DenoiserParams};
use ietagc::diffusion::{loss_gradient, per_sample_loss, NoiseDraw};
use ietagc::schedule::Schedule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller, so the oracle side does not share the library's sampler.
    let u1: f64 = r.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn points(r: &mut ChaCha8Rng, n: usize, d: usize, id0: u64) -> Vec<Sample> {
    (0..n)
        .map(|i| Sample {
            id: id0 + i as u64,
            x: (0..d).map(|_| gauss(r)).collect(),
            label: None,
        })
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// `(raw_l2, ratio)` by sorting every distance.
pub fn brute_nn_ratio(x: &[f64], train: &[Sample], n: usize, exclude_nearest: bool) -> (f64, f64) {
    let mut ds: Vec<f64> = train.iter().map(|s| dist(x, &s.x)).collect();
    ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nearest = ds[0];
    let pool: Vec<f64> = if exclude_nearest { ds[1..].to_vec() } else { ds };
    let n = n.min(pool.len());
    let mean = pool[..n].iter().sum::<f64>() / n as f64;
    let ratio = if mean == 0.0 {
        if nearest == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        nearest / mean
    };
    (nearest, ratio)
}

pub fn brute_mq(gen: &[Sample], train: &[Sample], n: usize, thresholds: &[f64]) -> Vec<usize> {
    let ratios: Vec<f64> = gen.iter().map(|g| brute_nn_ratio(&g.x, train, n, false).1).collect();
    thresholds
        .iter()
        .map(|t| ratios.iter().filter(|r| **r <= *t).count())
        .collect()
}

// ---- dense matrices as Vec<Vec<f64>> ----

pub type Mat = Vec<Vec<f64>>;

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, m, p) = (a.len(), b.len(), b[0].len());
    let mut c = vec![vec![0.0; p]; n];
    for i in 0..n {
        for k in 0..m {
            for j in 0..p {
                c[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    c
}

pub fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a.iter().zip(identity(n)).map(|(r, e)| [r.clone(), e].concat()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap()).unwrap();
        m.swap(c, p);
        let piv = m[c][c];
        for v in m[c].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                let row = m[c].clone();
                for (v, w) in m[r].iter_mut().zip(row) {
                    *v -= f * w;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Principal square root by the Denman-Beavers iteration.
pub fn sqrtm_db(a: &Mat) -> Mat {
    let n = a.len();
    let (mut y, mut z) = (a.clone(), identity(n));
    for _ in 0..100 {
        let (yi, zi) = (inverse(&y), inverse(&z));
        let ny: Mat = (0..n).map(|i| (0..n).map(|j| 0.5 * (y[i][j] + zi[i][j])).collect()).collect();
        let nz: Mat = (0..n).map(|i| (0..n).map(|j| 0.5 * (z[i][j] + yi[i][j])).collect()).collect();
        let delta: f64 = ny.iter().flatten().zip(y.iter().flatten()).map(|(a, b)| (a - b).abs()).sum();
        y = ny;
        z = nz;
        if delta < 1e-15 {
            break;
        }
    }
    y
}

pub fn mean_cov(xs: &[Sample]) -> (Vec<f64>, Mat) {
    let (n, d) = (xs.len(), xs[0].x.len());
    let mut mu = vec![0.0; d];
    for s in xs {
        for j in 0..d {
            mu[j] += s.x[j] / n as f64;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for s in xs {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (s.x[i] - mu[i]) * (s.x[j] - mu[j]) / (n - 1) as f64;
            }
        }
    }
    (mu, cov)
}

/// Fréchet distance with `tr((Σa Σb)^½)` from Denman-Beavers on the
/// (non-symmetric) product.
pub fn frechet_oracle(a: &[Sample], b: &[Sample]) -> f64 {
    let (ma, ca) = mean_cov(a);
    let (mb, cb) = mean_cov(b);
    let d = ma.len();
    let mean_term: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y) * (x - y)).sum();
    let root = sqrtm_db(&matmul(&ca, &cb));
    let tr = |m: &Mat| (0..d).map(|i| m[i][i]).sum::<f64>();
    mean_term + tr(&ca) + tr(&cb) - 2.0 * tr(&root)
}

/// Mean loss over a batch, the objective whose gradient `loss_gradient`
/// returns.
pub fn batch_objective(p: &DenoiserParams, xs: &[Vec<f64>], draws: &[NoiseDraw], s: &Schedule) -> f64 {
    xs.iter()
        .zip(draws)
        .map(|(x, d)| per_sample_loss(p, x, d, s).unwrap())
        .sum::<f64>()
        / xs.len() as f64
}

/// Max over coordinates of `|analytic - numeric| / max(|analytic|, |numeric|, floor)`
/// with central differences of step `h`.
pub fn gradcheck(
    p: &DenoiserParams,
    xs: &[Vec<f64>],
    draws: &[NoiseDraw],
    s: &Schedule,
    h: f64,
    floor: f64,
) -> f64 {
    let batch: Vec<(&[f64], &NoiseDraw)> = xs.iter().map(Vec::as_slice).zip(draws).collect();
    let (g, _) = loss_gradient(p, &batch, s).unwrap();
    let mut worst = 0.0f64;
    for i in 0..g.len() {
        let mut plus = p.clone();
        plus.as_flat_mut()[i] += h;
        let mut minus = p.clone();
        minus.as_flat_mut()[i] -= h;
        let num = (batch_objective(&plus, xs, draws, s) - batch_objective(&minus, xs, draws, s)) / (2.0 * h);
        let rel = (g[i] - num).abs() / g[i].abs().max(num.abs()).max(floor);
        worst = worst.max(rel);
    }
    worst
}

/// A random small gradient-check configuration: network of at most 200
/// parameters, a batch, noise draws and a schedule.
pub fn random_grad_config(seed: u64) -> (DenoiserParams, Vec<Vec<f64>>, Vec<NoiseDraw>, Schedule) {
    let mut r = rng(seed);
    let d = r.random_range(1..=3);
    let e = 2 * r.random_range(1..=2);
    let h = r.random_range(3..=6);
    let arch = Architecture {
        data_dim: d,
        hidden: h,
        time_embed: e,
    };
    assert!(arch.param_count() <= 200);
    let mut p = DenoiserParams::init(arch, seed).unwrap();
    // Nonzero biases so every parameter block is exercised.
    for v in p.as_flat_mut() {
        if *v == 0.0 {
            *v = 0.1 * gauss(&mut r);
        }
    }
    let steps = r.random_range(2..=20);
    let s = Schedule::linear(steps, 1e-4, 0.02).unwrap();
    let b = r.random_range(1..=5);
    let xs: Vec<Vec<f64>> = (0..b).map(|_| (0..d).map(|_| gauss(&mut r)).collect()).collect();
    let draws = (0..b)
        .map(|_| NoiseDraw {
            eps: (0..d).map(|_| gauss(&mut r)).collect(),
            t: r.random_range(1..=steps),
        })
        .collect();
    (p, xs, draws, s)
}

/// Closed form of the zero-initialized EMA after `xs`:
/// `(1-γ) Σ_k γ^(n-1-k) x_k`.
pub fn ema_unrolled(xs: &[f64], gamma: f64) -> f64 {
    let n = xs.len();
    xs.iter()
        .enumerate()
        .map(|(k, x)| (1.0 - gamma) * gamma.powi((n - 1 - k) as i32) * x)
        .sum()
}

/// Lloyd's k-means from the given initial centroids.
pub fn kmeans(xs: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, iters: usize) -> Vec<Vec<f64>> {
    let d = xs[0].len();
    for _ in 0..iters {
        let mut sums = vec![vec![0.0; d]; centroids.len()];
        let mut counts = vec![0usize; centroids.len()];
        for x in xs {
            let c = (0..centroids.len())
                .min_by(|&a, &b| dist(x, &centroids[a]).partial_cmp(&dist(x, &centroids[b])).unwrap())
                .unwrap();
            counts[c] += 1;
            for j in 0..d {
                sums[c][j] += x[j];
            }
        }
        for c in 0..centroids.len() {
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    centroids
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub struct AuditOracleSummary {
    pub max_ratio_err: f64,
    pub max_frechet_err: f64,
    pub mq_mismatches: usize,
    pub monotone: bool,
}

/// Compares `nn_ratio`, `mq_counts` and `frechet_distance` against the
/// brute-force routines above on `instances` random clouds of at most 100
/// points in at most 8 dimensions.
pub fn audit_oracle_sweep(instances: u64) -> AuditOracleSummary {
    use ietagc::audit::{frechet_distance, mq_counts, nn_ratio};
    use ietagc::data::Dataset;
    let mut out = AuditOracleSummary {
        max_ratio_err: 0.0,
        max_frechet_err: 0.0,
        mq_mismatches: 0,
        monotone: true,
    };
    let thresholds = [0.4, 0.5, 0.6];
    for inst in 0..instances {
        let mut r = rng(10_000 + inst);
        let d = r.random_range(1..=8);
        let nt = r.random_range(d + 2..=100);
        let ng = r.random_range(d + 2..=100);
        let n = r.random_range(1..=60);
        let mut train = points(&mut r, nt, d, 0);
        // Exact copies of training points so zero distances and ties occur.
        let mut gen = points(&mut r, ng, d, 0);
        for g in gen.iter_mut().step_by(7) {
            g.x = train[r.random_range(0..nt)].x.clone();
        }
        // Near-copies exercise ratios close to the thresholds.
        for g in gen.iter_mut().skip(3).step_by(5) {
            let base = &train[r.random_range(0..nt)].x;
            let scale = r.random_range(0.0..0.5);
            g.x = base.iter().map(|v| v + scale * gauss(&mut r)).collect();
        }
        for s in train.iter_mut().skip(1).step_by(11) {
            s.x = gen[0].x.clone();
        }
        let ds = Dataset::new(d, train.clone(), Default::default()).unwrap();
        for g in &gen {
            for excl in [false, true] {
                let got = nn_ratio(&g.x, &ds, n, excl).unwrap();
                let (raw, ratio) = brute_nn_ratio(&g.x, &train, n, excl);
                out.max_ratio_err = out.max_ratio_err.max((got.raw_l2 - raw).abs());
                let err = if got.ratio.is_infinite() && ratio.is_infinite() {
                    0.0
                } else {
                    (got.ratio - ratio).abs()
                };
                out.max_ratio_err = out.max_ratio_err.max(err);
            }
        }
        let report = mq_counts(&gen, &ds, n, &thresholds, false).unwrap();
        if report.counts != brute_mq(&gen, &train, n, &thresholds) {
            out.mq_mismatches += 1;
        }
        out.monotone &= report.counts.windows(2).all(|w| w[0] <= w[1]);
        let fd = frechet_distance(&gen, &train).unwrap();
        out.max_frechet_err = out.max_frechet_err.max((fd - frechet_oracle(&gen, &train)).abs());
    }
    out
}

/// Largest gap between the bank and the closed-form EMA over `sequences`
/// random update sequences spread across timesteps.
pub fn ema_sweep(sequences: u64) -> f64 {
    use ietagc::agc::MemoryBank;
    let mut worst = 0.0f64;
    for s in 0..sequences {
        let mut r = rng(50_000 + s);
        let steps = r.random_range(1..=10);
        let gamma = r.random_range(0.01..0.99);
        let len = r.random_range(1..=60);
        let mut bank = MemoryBank::new(steps, gamma).unwrap();
        let mut history = vec![Vec::new(); steps];
        for _ in 0..len {
            let t = r.random_range(1..=steps);
            let loss = r.random_range(0.0..5.0);
            bank.update(t, loss).unwrap();
            history[t - 1].push(loss);
        }
        for t in 1..=steps {
            worst = worst.max((bank.level(t) - ema_unrolled(&history[t - 1], gamma)).abs());
            assert_eq!(bank.update_count(t), history[t - 1].len() as u64);
        }
    }
    worst
}

pub fn bits(p: &DenoiserParams) -> Vec<u64> {
    p.as_flat().iter().map(|v| v.to_bits()).collect()
}

/// Small labelled mixture for the fast end-to-end checks.
pub fn small_mixture(seed: u64) -> ietagc::data::Dataset {
    use ietagc::data::{gen_mixture, DupSpec, MixtureSpec};
    gen_mixture(&MixtureSpec {
        components: 3,
        per_component: 10,
        dim: 2,
        spread: 0.3,
        dups: vec![DupSpec { component: 0, copies: 4 }],
        seed,
    })
    .unwrap()
    .dataset
}

pub fn small_params(seed: u64) -> DenoiserParams {
    DenoiserParams::init(
        Architecture {
            data_dim: 2,
            hidden: 16,
            time_embed: 8,
        },
        seed,
    )
    .unwrap()
}

/// The four collapse identities, each as `(name, holds)`:
/// one-shard IET against plain training, `λ = 0` against default,
/// `τ = 0` against default, and averaging identical models.
pub fn collapse_identities() -> Vec<(&'static str, bool)> {
    use ietagc::agc::MemoryBank;
    use ietagc::iet::{aggregate, run_iet, shard_seed, split_dataset, BankPolicy, RoundConfig, ShardMode};
    use ietagc::trainer::{train_epochs, Method, TrainConfig};

    let ds = small_mixture(5);
    let s = Schedule::linear(20, 1e-4, 0.02).unwrap();
    let init = small_params(6);
    let base = TrainConfig {
        eta: 0.05,
        batch_size: 8,
        epochs: 12,
        seed: 77,
        ..TrainConfig::default()
    };
    let plain = |cfg: &TrainConfig| {
        train_epochs(init.clone(), &ds, cfg, MemoryBank::new(20, cfg.gamma).unwrap(), &s, 0).unwrap()
    };
    let mut out = Vec::new();

    let mut one_shard = true;
    for method in [Method::Default, Method::Agc] {
        let cfg = TrainConfig { method, ..base.clone() };
        let aligned = TrainConfig {
            seed: shard_seed(cfg.seed, 0),
            ..cfg.clone()
        };
        let reference = plain(&aligned);
        let plan = split_dataset(&ds, 1, ShardMode::IidClasswise, 1, None).unwrap();
        for (rounds, epochs) in [(1, 12), (3, 4), (12, 1)] {
            let rc = RoundConfig {
                rounds,
                epochs_per_round: epochs,
                train: cfg.clone(),
                bank_policy: BankPolicy::Average,
            };
            let got = run_iet(&ds, &plan, &rc, &s, init.clone()).unwrap();
            one_shard &= bits(&got.params) == bits(&reference.params) && got.skips == reference.skips;
        }
    }
    out.push(("one-shard IET equals plain training", one_shard));

    let default = plain(&base);
    let agc0 = plain(&TrainConfig {
        method: Method::Agc,
        lambda: 0.0,
        ..base.clone()
    });
    out.push((
        "AGC with zero threshold equals default",
        bits(&agc0.params) == bits(&default.params) && agc0.skips.is_empty(),
    ));
    let dp0 = plain(&TrainConfig {
        method: Method::DpSgd,
        tau: 0.0,
        ..base.clone()
    });
    out.push(("DP-SGD with zero noise equals default", bits(&dp0.params) == bits(&default.params)));

    let same = (1..=6).all(|k| bits(&aggregate(&vec![init.clone(); k]).unwrap()) == bits(&init));
    out.push(("averaging identical models is the identity", same));
    out
}
