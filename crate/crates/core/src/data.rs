//! Datasets: synthetic generators with controlled duplication, and a
//! versioned binary container.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

/// A single datum.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: u64,
    pub x: Vec<f64>,
    pub label: Option<usize>,
}

/// A set of equal-dimension samples with unique ids plus ground-truth
/// duplication metadata (`representative id -> number of identical copies`,
/// the representative included).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    samples: Vec<Sample>,
    duplication: BTreeMap<u64, usize>,
}

impl Dataset {
    pub fn new(dim: usize, samples: Vec<Sample>, duplication: BTreeMap<u64, usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("dataset dimension must be positive"));
        }
        let mut ids = HashSet::with_capacity(samples.len());
        for s in &samples {
            if s.x.len() != dim {
                return Err(Error::shape(format!(
                    "sample {} has dimension {}, dataset has {dim}",
                    s.id,
                    s.x.len()
                )));
            }
            if !ids.insert(s.id) {
                return Err(Error::config(format!("duplicate sample id {}", s.id)));
            }
        }
        let labelled = samples.iter().filter(|s| s.label.is_some()).count();
        if labelled != 0 && labelled != samples.len() {
            return Err(Error::config("either all samples carry labels or none do"));
        }
        for rep in duplication.keys() {
            if !ids.contains(rep) {
                return Err(Error::config(format!("duplication entry for unknown id {rep}")));
            }
        }
        Ok(Self {
            dim,
            samples,
            duplication,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn labels_present(&self) -> bool {
        self.samples.first().is_some_and(|s| s.label.is_some())
    }

    /// Number of classes (`max label + 1`), or 1 for unlabelled data.
    pub fn num_classes(&self) -> usize {
        self.samples
            .iter()
            .filter_map(|s| s.label)
            .max()
            .map_or(1, |m| m + 1)
    }

    pub fn duplication(&self) -> &BTreeMap<u64, usize> {
        &self.duplication
    }

    /// Ids of every sample bytewise equal to some representative, grouped by
    /// representative.
    pub fn duplicate_groups(&self) -> BTreeMap<u64, Vec<u64>> {
        let by_id: BTreeMap<u64, &Sample> = self.samples.iter().map(|s| (s.id, s)).collect();
        self.duplication
            .keys()
            .map(|rep| {
                let key = bits(&by_id[rep].x);
                let members = self
                    .samples
                    .iter()
                    .filter(|s| bits(&s.x) == key)
                    .map(|s| s.id)
                    .collect();
                (*rep, members)
            })
            .collect()
    }

    /// Set of ids belonging to any duplicate group.
    pub fn duplicated_ids(&self) -> BTreeSet<u64> {
        self.duplicate_groups().into_values().flatten().collect()
    }

    /// Sub-dataset with the given ids, keeping this dataset's sample order.
    /// Duplication entries are kept when their representative is included.
    pub fn subset(&self, ids: &BTreeSet<u64>) -> Dataset {
        let samples: Vec<Sample> = self
            .samples
            .iter()
            .filter(|s| ids.contains(&s.id))
            .cloned()
            .collect();
        let kept: HashSet<u64> = samples.iter().map(|s| s.id).collect();
        let duplication = self
            .duplication
            .iter()
            .filter(|(rep, _)| kept.contains(rep))
            .map(|(r, c)| (*r, *c))
            .collect();
        Dataset {
            dim: self.dim,
            samples,
            duplication,
        }
    }

    /// Serialized container bytes (see [`Dataset::save`]).
    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.samples.len();
        let labelled = self.labels_present();
        let mut out = Vec::with_capacity(32 + n * (self.dim + 2) * 8);
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.push(u8::from(labelled));
        for s in &self.samples {
            for v in &s.x {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for s in &self.samples {
            out.extend_from_slice(&s.id.to_le_bytes());
        }
        if labelled {
            for s in &self.samples {
                out.extend_from_slice(&(s.label.unwrap() as u64).to_le_bytes());
            }
        }
        out.extend_from_slice(&(self.duplication.len() as u64).to_le_bytes());
        for (rep, count) in &self.duplication {
            out.extend_from_slice(&rep.to_le_bytes());
            out.extend_from_slice(&(*count as u64).to_le_bytes());
        }
        out
    }

    /// Parses container bytes; `path` is only used in error messages.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |reason: &str| Error::Corrupt {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let mut r = ByteReader::new(bytes);
        let magic = r.take(DATASET_MAGIC.len()).ok_or_else(|| corrupt("truncated header"))?;
        if magic != DATASET_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32().ok_or_else(|| corrupt("truncated header"))?;
        if version != DATASET_VERSION {
            return Err(Error::Version {
                path: path.to_path_buf(),
                found: version,
                expected: DATASET_VERSION,
            });
        }
        let dim = r.u64().ok_or_else(|| corrupt("truncated header"))? as usize;
        let n = r.u64().ok_or_else(|| corrupt("truncated header"))? as usize;
        let labelled = match r.take(1).ok_or_else(|| corrupt("truncated header"))?[0] {
            0 => false,
            1 => true,
            _ => return Err(corrupt("bad label flag")),
        };
        let needed = n
            .checked_mul(dim + 1 + usize::from(labelled))
            .and_then(|w| w.checked_mul(8))
            .ok_or_else(|| corrupt("size overflow"))?;
        if r.remaining() < needed {
            return Err(corrupt("truncated sample block"));
        }
        let mut xs = Vec::with_capacity(n);
        for _ in 0..n {
            xs.push((0..dim).map(|_| r.f64().unwrap()).collect::<Vec<_>>());
        }
        let ids: Vec<u64> = (0..n).map(|_| r.u64().unwrap()).collect();
        let labels: Vec<Option<usize>> = if labelled {
            (0..n).map(|_| Some(r.u64().unwrap() as usize)).collect()
        } else {
            vec![None; n]
        };
        let entries = r.u64().ok_or_else(|| corrupt("truncated duplication table"))?;
        let mut duplication = BTreeMap::new();
        for _ in 0..entries {
            let rep = r.u64().ok_or_else(|| corrupt("truncated duplication table"))?;
            let count = r.u64().ok_or_else(|| corrupt("truncated duplication table"))?;
            duplication.insert(rep, count as usize);
        }
        if r.remaining() != 0 {
            return Err(corrupt("trailing bytes"));
        }
        let samples = xs
            .into_iter()
            .zip(ids)
            .zip(labels)
            .map(|((x, id), label)| Sample { id, x, label })
            .collect();
        Dataset::new(dim, samples, duplication).map_err(|e| corrupt(&e.to_string()))
    }

    /// Writes the binary container: magic, version, `d`, `N`, label flag,
    /// then the `N × d` little-endian `f64` sample block, the id block, the
    /// optional label block and the duplication table.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes, path)
    }

    /// SHA-256 of the serialized container, hex encoded.
    pub fn content_hash(&self) -> String {
        hex_digest(&self.to_bytes())
    }

    /// CSV view for inspection: `id,label,x0,...,x{d-1}`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        let cols: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        writeln!(f, "id,label,{}", cols.join(","))?;
        for s in &self.samples {
            let label = s.label.map(|l| l.to_string()).unwrap_or_default();
            let xs: Vec<String> = s.x.iter().map(|v| format!("{v:?}")).collect();
            writeln!(f, "{},{},{}", s.id, label, xs.join(","))?;
        }
        Ok(())
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

const DATASET_MAGIC: &[u8; 8] = b"IETDSET\0";
const DATASET_VERSION: u32 = 1;

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub(crate) fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        if self.remaining() < n {
            return None;
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Some(s)
    }

    pub(crate) fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Option<f64> {
        self.take(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// One duplicate injection: a fresh point from `component` (or pattern
/// family) repeated `copies` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DupSpec {
    pub component: usize,
    pub copies: usize,
}

fn check_dups(dups: &[DupSpec], groups: usize, what: &str) -> Result<()> {
    for d in dups {
        if d.component >= groups {
            return Err(Error::config(format!(
                "duplicate spec names {what} {} but only {groups} exist",
                d.component
            )));
        }
        if d.copies < 2 {
            return Err(Error::config("a duplicate group needs at least 2 copies"));
        }
    }
    Ok(())
}

/// Parameters of the Gaussian-mixture generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: usize,
    pub per_component: usize,
    pub dim: usize,
    /// Per-coordinate standard deviation of each component, relative to the
    /// spread of the component means.
    pub spread: f64,
    pub dups: Vec<DupSpec>,
    pub seed: u64,
}

impl MixtureSpec {
    /// Shipped desk-scale mixture: 8 components of 62 points in `d = 8`
    /// plus one point repeated 16 times (512 samples).
    pub fn desk_default(seed: u64) -> Self {
        Self {
            components: 8,
            per_component: 62,
            dim: 8,
            spread: 0.2,
            dups: vec![DupSpec {
                component: 0,
                copies: 16,
            }],
            seed,
        }
    }
}

/// Output of [`gen_mixture`]: the dataset and the component means expressed
/// in the dataset's normalized coordinates.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub dataset: Dataset,
    pub means: Vec<Vec<f64>>,
}

/// Gaussian mixture with exact-duplicate injections. Labels are component
/// indices. Every coordinate is finally mapped affinely onto `[-1, 1]`.
pub fn gen_mixture(spec: &MixtureSpec) -> Result<Mixture> {
    if spec.components == 0 || spec.dim == 0 {
        return Err(Error::config("mixture needs at least one component and dimension"));
    }
    if !(spec.spread > 0.0) {
        return Err(Error::config("mixture spread must be positive"));
    }
    check_dups(&spec.dups, spec.components, "component")?;
    let mut rng = seed::rng(spec.seed, "mixture", &[]);
    let means: Vec<Vec<f64>> = (0..spec.components)
        .map(|_| (0..spec.dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let draw = |c: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        means[c]
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + spec.spread * z
            })
            .collect()
    };

    let mut raw: Vec<(Vec<f64>, usize)> = Vec::new();
    for c in 0..spec.components {
        for _ in 0..spec.per_component {
            raw.push((draw(c, &mut rng), c));
        }
    }
    let mut duplication = BTreeMap::new();
    for d in &spec.dups {
        let x = draw(d.component, &mut rng);
        duplication.insert(raw.len() as u64, d.copies);
        for _ in 0..d.copies {
            raw.push((x.clone(), d.component));
        }
    }

    let (lo, hi) = coordinate_range(raw.iter().map(|(x, _)| x.as_slice()), spec.dim);
    let scale = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(j, v)| {
                let w = hi[j] - lo[j];
                if w > 0.0 {
                    2.0 * (v - lo[j]) / w - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    let samples = raw
        .iter()
        .enumerate()
        .map(|(i, (x, c))| Sample {
            id: i as u64,
            x: scale(x),
            label: Some(*c),
        })
        .collect();
    let means = means.iter().map(|m| scale(m)).collect();
    Ok(Mixture {
        dataset: Dataset::new(spec.dim, samples, duplication)?,
        means,
    })
}

fn coordinate_range<'a>(xs: impl Iterator<Item = &'a [f64]>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for x in xs {
        for j in 0..dim {
            lo[j] = lo[j].min(x[j]);
            hi[j] = hi[j].max(x[j]);
        }
    }
    (lo, hi)
}

/// Pattern families, used as labels by [`gen_patterns`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatternFamily {
    /// Constant image.
    Flat = 0,
    /// Linear ramp in a random direction.
    Gradient = 1,
    /// Sum of high-frequency plane waves.
    Texture = 2,
}

impl PatternFamily {
    pub const ALL: [PatternFamily; 3] = [Self::Flat, Self::Gradient, Self::Texture];
}

/// Parameters of the grid-image generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub count: usize,
    pub grid: usize,
    /// Relative weights of (flat, gradient, texture).
    pub mix: [f64; 3],
    /// `component` indexes [`PatternFamily`].
    pub dups: Vec<DupSpec>,
    pub seed: u64,
}

impl PatternSpec {
    /// Shipped desk-scale pattern set: 512 images on an 8×8 grid.
    pub fn desk_default(seed: u64) -> Self {
        Self {
            count: 496,
            grid: 8,
            mix: [0.3, 0.3, 0.4],
            dups: vec![DupSpec {
                component: 0,
                copies: 16,
            }],
            seed,
        }
    }
}

fn pattern(family: PatternFamily, grid: usize, rng: &mut impl Rng) -> Vec<f64> {
    let coord = |i: usize| 2.0 * i as f64 / (grid - 1).max(1) as f64 - 1.0;
    let mut img = vec![0.0; grid * grid];
    match family {
        PatternFamily::Flat => {
            let c = rng.random_range(-0.8..0.8);
            img.iter_mut().for_each(|v| *v = c);
        }
        PatternFamily::Gradient => {
            let phi = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.2..0.5);
            let c = rng.random_range(-0.4..0.4);
            for r in 0..grid {
                for k in 0..grid {
                    img[r * grid + k] = c + amp * (phi.cos() * coord(k) + phi.sin() * coord(r));
                }
            }
        }
        PatternFamily::Texture => {
            let half = (grid / 2).max(1);
            for _ in 0..3 {
                let fu = rng.random_range(half / 2..=half) as f64;
                let fv = rng.random_range(0..=half) as f64;
                let phase = rng.random_range(0.0..2.0 * PI);
                let amp = rng.random_range(0.15..0.3);
                for r in 0..grid {
                    for k in 0..grid {
                        let arg = 2.0 * PI * (fu * k as f64 + fv * r as f64) / grid as f64 + phase;
                        img[r * grid + k] += amp * arg.cos();
                    }
                }
            }
        }
    }
    img.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    img
}

/// Procedural `grid × grid` images from the three [`PatternFamily`] kinds,
/// flattened row-major, plus duplicate injections.
pub fn gen_patterns(spec: &PatternSpec) -> Result<Dataset> {
    if spec.grid < 2 {
        return Err(Error::config("pattern grid must be at least 2"));
    }
    let total: f64 = spec.mix.iter().sum();
    if spec.mix.iter().any(|w| *w < 0.0) || !(total > 0.0) {
        return Err(Error::config("pattern mix weights must be nonnegative and not all zero"));
    }
    check_dups(&spec.dups, 3, "pattern family")?;
    let mut rng = seed::rng(spec.seed, "patterns", &[]);
    let mut samples = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let u = rng.random_range(0.0..total);
        let family = if u < spec.mix[0] {
            PatternFamily::Flat
        } else if u < spec.mix[0] + spec.mix[1] {
            PatternFamily::Gradient
        } else {
            PatternFamily::Texture
        };
        samples.push(Sample {
            id: i as u64,
            x: pattern(family, spec.grid, &mut rng),
            label: Some(family as usize),
        });
    }
    let mut duplication = BTreeMap::new();
    for d in &spec.dups {
        let family = PatternFamily::ALL[d.component];
        let x = pattern(family, spec.grid, &mut rng);
        duplication.insert(samples.len() as u64, d.copies);
        for _ in 0..d.copies {
            let id = samples.len() as u64;
            samples.push(Sample {
                id,
                x: x.clone(),
                label: Some(family as usize),
            });
        }
    }
    Dataset::new(spec.grid * spec.grid, samples, duplication)
}
