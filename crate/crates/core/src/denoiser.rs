//! Noise-prediction network: a two-hidden-layer MLP over `concat(x_t, emb(t))`
//! with SiLU activations and no output bias.
//!
//! Parameters live in one flat `Vec<f64>` so that averaging, checkpointing
//! and finite-difference checks all operate on the same representation. The
//! layout is fixed:
//!
//! | block | shape                      |
//! |-------|----------------------------|
//! | `W1`  | `hidden × (d + embed)`     |
//! | `b1`  | `hidden`                   |
//! | `W2`  | `hidden × hidden`          |
//! | `b2`  | `hidden`                   |
//! | `W3`  | `d × hidden`               |
//!
//! All matrices are row-major.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Layer widths of the denoiser.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub data_dim: usize,
    pub hidden: usize,
    /// Width of the sinusoidal time embedding; must be even.
    pub time_embed: usize,
}

impl Architecture {
    /// Default desk-scale architecture: width-128 hidden layers and a
    /// 32-wide time embedding.
    pub fn new(data_dim: usize) -> Self {
        Self {
            data_dim,
            hidden: 128,
            time_embed: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_dim == 0 || self.hidden == 0 {
            return Err(Error::config("architecture widths must be positive"));
        }
        if self.time_embed == 0 || self.time_embed % 2 != 0 {
            return Err(Error::config(format!(
                "time embedding width must be positive and even, got {}",
                self.time_embed
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.data_dim + self.time_embed
    }

    pub fn param_count(&self) -> usize {
        let Layout { total, .. } = self.layout();
        total
    }

    fn layout(&self) -> Layout {
        let (d, h, i) = (self.data_dim, self.hidden, self.input_dim());
        let w1 = 0;
        let b1 = w1 + h * i;
        let w2 = b1 + h;
        let b2 = w2 + h * h;
        let w3 = b2 + h;
        let total = w3 + d * h;
        Layout {
            w1,
            b1,
            w2,
            b2,
            w3,
            total,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    total: usize,
}

/// Sinusoidal embedding of an integer timestep: `[sin(t ω_k)..., cos(t ω_k)...]`
/// with `ω_k = 10000^(-k / (width/2))`.
pub fn time_embedding(t: usize, width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut out = vec![0.0; width];
    for k in 0..half {
        let freq = (-(10000f64.ln()) * k as f64 / half as f64).exp();
        let arg = t as f64 * freq;
        out[k] = arg.sin();
        out[half + k] = arg.cos();
    }
    out
}

/// All weights of the denoiser as a flat vector plus its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    arch: Architecture,
    flat: Vec<f64>,
}

impl DenoiserParams {
    /// Gaussian initialization with standard deviation `1/sqrt(fan_in)` for
    /// every weight matrix; biases start at zero.
    pub fn init(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let l = arch.layout();
        let mut flat = vec![0.0; l.total];
        let mut rng = seed::rng(seed, "init", &[]);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize| {
            let scale = 1.0 / (fan_in as f64).sqrt();
            for v in &mut flat[range] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = scale * z;
            }
        };
        fill(l.w1..l.b1, arch.input_dim());
        fill(l.w2..l.b2, arch.hidden);
        fill(l.w3..l.total, arch.hidden);
        Ok(Self { arch, flat })
    }

    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        Ok(Self {
            arch,
            flat: vec![0.0; arch.param_count()],
        })
    }

    pub fn from_flat(arch: Architecture, flat: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if flat.len() != arch.param_count() {
            return Err(Error::shape(format!(
                "flat vector has {} entries, architecture needs {}",
                flat.len(),
                arch.param_count()
            )));
        }
        Ok(Self { arch, flat })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.flat
    }

    pub fn is_finite(&self) -> bool {
        self.flat.iter().all(|v| v.is_finite())
    }

    fn views(&self) -> Views<'_> {
        let a = self.arch;
        let l = a.layout();
        let f = &self.flat;
        Views {
            w1: ArrayView2::from_shape((a.hidden, a.input_dim()), &f[l.w1..l.b1]).unwrap(),
            b1: ArrayView1::from(&f[l.b1..l.w2]),
            w2: ArrayView2::from_shape((a.hidden, a.hidden), &f[l.w2..l.b2]).unwrap(),
            b2: ArrayView1::from(&f[l.b2..l.w3]),
            w3: ArrayView2::from_shape((a.data_dim, a.hidden), &f[l.w3..l.total]).unwrap(),
        }
    }

    /// Predicted noise for a single input.
    pub fn predict(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        let pass = self.forward(&[x_t], &[t])?;
        Ok(pass.output.row(0).to_vec())
    }

    /// Batched forward pass, keeping activations for [`ForwardPass::backward`].
    pub fn forward(&self, inputs: &[&[f64]], steps: &[usize]) -> Result<ForwardPass> {
        let a = self.arch;
        if inputs.len() != steps.len() {
            return Err(Error::shape("inputs and timesteps differ in length"));
        }
        let batch = inputs.len();
        let mut x = Array2::<f64>::zeros((batch, a.input_dim()));
        for (b, (row, &t)) in inputs.iter().zip(steps).enumerate() {
            if row.len() != a.data_dim {
                return Err(Error::shape(format!(
                    "input has dimension {}, network expects {}",
                    row.len(),
                    a.data_dim
                )));
            }
            let mut r = x.row_mut(b);
            for (j, v) in row.iter().enumerate() {
                r[j] = *v;
            }
            for (j, v) in time_embedding(t, a.time_embed).into_iter().enumerate() {
                r[a.data_dim + j] = v;
            }
        }

        let v = self.views();
        let z1 = affine(&x, &v.w1, Some(&v.b1));
        let h1 = z1.mapv(silu);
        let z2 = affine(&h1, &v.w2, Some(&v.b2));
        let h2 = z2.mapv(silu);
        let output = affine(&h2, &v.w3, None);
        Ok(ForwardPass {
            x,
            z1,
            h1,
            z2,
            h2,
            output,
        })
    }
}

struct Views<'a> {
    w1: ArrayView2<'a, f64>,
    b1: ArrayView1<'a, f64>,
    w2: ArrayView2<'a, f64>,
    b2: ArrayView1<'a, f64>,
    w3: ArrayView2<'a, f64>,
}

/// `input · weightᵀ + bias`.
fn affine(input: &Array2<f64>, weight: &ArrayView2<f64>, bias: Option<&ArrayView1<f64>>) -> Array2<f64> {
    let mut out = Array2::<f64>::zeros((input.nrows(), weight.nrows()));
    if let Some(b) = bias {
        out += b;
    }
    general_mat_mul(1.0, input, &weight.t(), 1.0, &mut out);
    out
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn silu(z: f64) -> f64 {
    z * sigmoid(z)
}

fn silu_grad(z: f64) -> f64 {
    let s = sigmoid(z);
    s * (1.0 + z * (1.0 - s))
}

/// Cached activations of one batched forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    x: Array2<f64>,
    z1: Array2<f64>,
    h1: Array2<f64>,
    z2: Array2<f64>,
    h2: Array2<f64>,
    output: Array2<f64>,
}

impl ForwardPass {
    /// Network outputs, one row per batch entry.
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    /// Back-propagates `d_output` (the gradient of the objective with respect
    /// to each output row) and returns the flat parameter gradient.
    pub fn backward(&self, params: &DenoiserParams, d_output: &Array2<f64>) -> Vec<f64> {
        let a = params.arch;
        let l = a.layout();
        let v = params.views();
        let mut grad = vec![0.0; l.total];
        {
            let (g_w12, g_w3) = grad.split_at_mut(l.w3);
            let (g_w1b1, g_w2b2) = g_w12.split_at_mut(l.w2);
            let (g_w1, g_b1) = g_w1b1.split_at_mut(l.b1);
            let (g_w2, g_b2) = g_w2b2.split_at_mut(l.b2 - l.w2);

            let mut g_w3 = ArrayViewMut2::from_shape((a.data_dim, a.hidden), g_w3).unwrap();
            general_mat_mul(1.0, &d_output.t(), &self.h2, 0.0, &mut g_w3);

            let mut d_z2 = d_output.dot(&v.w3);
            d_z2.zip_mut_with(&self.z2, |g, z| *g *= silu_grad(*z));
            let mut g_w2 = ArrayViewMut2::from_shape((a.hidden, a.hidden), g_w2).unwrap();
            general_mat_mul(1.0, &d_z2.t(), &self.h1, 0.0, &mut g_w2);
            ArrayViewMut1::from(g_b2).assign(&d_z2.sum_axis(Axis(0)));

            let mut d_z1 = d_z2.dot(&v.w2);
            d_z1.zip_mut_with(&self.z1, |g, z| *g *= silu_grad(*z));
            let mut g_w1 = ArrayViewMut2::from_shape((a.hidden, a.input_dim()), g_w1).unwrap();
            general_mat_mul(1.0, &d_z1.t(), &self.x, 0.0, &mut g_w1);
            ArrayViewMut1::from(g_b1).assign(&d_z1.sum_axis(Axis(0)));
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Architecture {
        Architecture {
            data_dim: 3,
            hidden: 5,
            time_embed: 4,
        }
    }

    #[test]
    fn param_count_matches_layout() {
        let a = Architecture::new(8);
        assert_eq!(a.param_count(), 128 * 40 + 128 + 128 * 128 + 128 + 8 * 128);
    }

    #[test]
    fn flat_round_trip_is_bit_exact() {
        let p = DenoiserParams::init(tiny(), 3).unwrap();
        let q = DenoiserParams::from_flat(tiny(), p.clone().into_flat()).unwrap();
        assert_eq!(p, q);
        assert!(p.is_finite());
    }

    #[test]
    fn wrong_flat_length_is_a_shape_error() {
        let err = DenoiserParams::from_flat(tiny(), vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
    }

    #[test]
    fn zero_network_predicts_zero() {
        let p = DenoiserParams::zeros(tiny()).unwrap();
        assert_eq!(p.predict(&[0.3, -1.0, 2.0], 4).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn prediction_is_deterministic_and_shaped() {
        let p = DenoiserParams::init(tiny(), 11).unwrap();
        let a = p.predict(&[0.1, 0.2, 0.3], 7).unwrap();
        let b = p.predict(&[0.1, 0.2, 0.3], 7).unwrap();
        assert_eq!(a.len(), 3);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn batched_rows_match_single_predictions() {
        let p = DenoiserParams::init(tiny(), 5).unwrap();
        let xs = [[0.5, -0.1, 0.0], [1.0, 1.0, -2.0]];
        let pass = p.forward(&[&xs[0], &xs[1]], &[2, 9]).unwrap();
        for (i, (x, t)) in xs.iter().zip([2, 9]).enumerate() {
            let single = p.predict(x, t).unwrap();
            for j in 0..3 {
                assert!((pass.output()[[i, j]] - single[j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn input_dimension_is_checked() {
        let p = DenoiserParams::init(tiny(), 5).unwrap();
        assert!(matches!(p.predict(&[1.0], 1), Err(Error::Shape(_))));
    }

    #[test]
    fn odd_embedding_rejected() {
        let a = Architecture {
            time_embed: 3,
            ..tiny()
        };
        assert!(DenoiserParams::init(a, 0).is_err());
    }
}
