//! Forward noising, the noise-prediction loss and its gradient, and
//! ancestral sampling.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Sample;
use crate::denoiser::{DenoiserParams, ForwardPass};
use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::seed;

/// One draw of Gaussian noise together with its timestep `t` in `[1, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub eps: Vec<f64>,
    pub t: usize,
}

impl NoiseDraw {
    /// Draws `t ~ Uniform{1..=T}` and then `eps ~ N(0, I_dim)`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R, dim: usize, steps: usize) -> Self {
        let t = rng.random_range(1..=steps);
        let eps = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        Self { eps, t }
    }
}

/// `sqrt(alpha)·x + sqrt(1-alpha)·eps`.
pub fn noise_with_alpha(x: &[f64], eps: &[f64], alpha: f64) -> Vec<f64> {
    let (a, b) = (alpha.sqrt(), (1.0 - alpha).sqrt());
    x.iter().zip(eps).map(|(x, e)| a * x + b * e).collect()
}

/// Noised version of `x` at the draw's timestep.
pub fn forward_noise(x: &[f64], draw: &NoiseDraw, schedule: &Schedule) -> Result<Vec<f64>> {
    schedule.check_step(draw.t)?;
    if x.len() != draw.eps.len() {
        return Err(Error::shape(format!(
            "sample has dimension {}, noise has {}",
            x.len(),
            draw.eps.len()
        )));
    }
    Ok(noise_with_alpha(x, &draw.eps, schedule.alpha(draw.t)))
}

fn squared_error(eps: &[f64], pred: impl Iterator<Item = f64>) -> f64 {
    eps.iter().zip(pred).map(|(e, p)| (e - p) * (e - p)).sum()
}

/// `‖eps - eps_θ(x_t, t)‖²`, summed over dimensions.
pub fn per_sample_loss(
    params: &DenoiserParams,
    x: &[f64],
    draw: &NoiseDraw,
    schedule: &Schedule,
) -> Result<f64> {
    let xt = forward_noise(x, draw, schedule)?;
    let pred = params.predict(&xt, draw.t)?;
    Ok(squared_error(&draw.eps, pred.into_iter()))
}

/// Per-sample losses of a batch, with the activations needed to
/// back-propagate a (possibly masked) batch objective.
#[derive(Debug, Clone)]
pub struct BatchEval {
    pass: ForwardPass,
    eps: Array2<f64>,
    losses: Vec<f64>,
}

impl BatchEval {
    pub fn new(
        params: &DenoiserParams,
        batch: &[(&[f64], &NoiseDraw)],
        schedule: &Schedule,
    ) -> Result<Self> {
        if batch.is_empty() {
            return Err(Error::shape("empty batch"));
        }
        let dim = params.architecture().data_dim;
        let mut noised = Vec::with_capacity(batch.len());
        let mut steps = Vec::with_capacity(batch.len());
        let mut eps = Array2::zeros((batch.len(), dim));
        for (b, (x, draw)) in batch.iter().enumerate() {
            noised.push(forward_noise(x, draw, schedule)?);
            steps.push(draw.t);
            if draw.eps.len() != dim {
                return Err(Error::shape("noise dimension differs from network"));
            }
            for (j, e) in draw.eps.iter().enumerate() {
                eps[[b, j]] = *e;
            }
        }
        let rows: Vec<&[f64]> = noised.iter().map(Vec::as_slice).collect();
        let pass = params.forward(&rows, &steps)?;
        let losses = pass
            .output()
            .rows()
            .into_iter()
            .zip(eps.rows())
            .map(|(out, e)| squared_error(e.as_slice().unwrap(), out.iter().copied()))
            .collect();
        Ok(Self { pass, eps, losses })
    }

    pub fn losses(&self) -> &[f64] {
        &self.losses
    }

    /// Gradient of `(1/B) Σ_b weight_b · loss_b`. A zero weight removes the
    /// sample's contribution entirely.
    pub fn gradient(&self, params: &DenoiserParams, weights: &[f64]) -> Result<Vec<f64>> {
        if weights.len() != self.losses.len() {
            return Err(Error::shape("one weight per batch entry required"));
        }
        let scale = 1.0 / self.losses.len() as f64;
        let mut d_out = self.pass.output() - &self.eps;
        for (mut row, w) in d_out.rows_mut().into_iter().zip(weights) {
            let c = 2.0 * scale * w;
            row.mapv_inplace(|v| c * v);
        }
        Ok(self.pass.backward(params, &d_out))
    }
}

/// Gradient of the mean per-sample loss over `batch`, plus the per-sample
/// losses from the same forward pass.
pub fn loss_gradient(
    params: &DenoiserParams,
    batch: &[(&[f64], &NoiseDraw)],
    schedule: &Schedule,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let eval = BatchEval::new(params, batch, schedule)?;
    let grad = eval.gradient(params, &vec![1.0; batch.len()])?;
    Ok((grad, eval.losses))
}

const SAMPLER_CHUNK: usize = 256;

/// Ancestral (DDPM) sampling of `n` vectors from pure noise over all `T`
/// steps, using the posterior variance for the injected noise.
///
/// Each generated sample `i` draws its noise from its own stream, so the
/// output does not depend on internal batching.
pub fn sample_generate(
    params: &DenoiserParams,
    schedule: &Schedule,
    n: usize,
    seed: u64,
) -> Result<Vec<Sample>> {
    if n == 0 {
        return Err(Error::config("sample count must be at least 1"));
    }
    let dim = params.architecture().data_dim;
    let steps = schedule.steps();
    let mut out = Vec::with_capacity(n);
    for start in (0..n).step_by(SAMPLER_CHUNK) {
        let end = (start + SAMPLER_CHUNK).min(n);
        let mut rngs: Vec<_> = (start..end)
            .map(|i| seed::rng(seed, "sample", &[i as u64]))
            .collect();
        let mut xs: Vec<Vec<f64>> = rngs
            .iter_mut()
            .map(|r| (0..dim).map(|_| StandardNormal.sample(r)).collect())
            .collect();
        for t in (1..=steps).rev() {
            let rows: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
            let pass = params.forward(&rows, &vec![t; rows.len()])?;
            let beta = schedule.beta(t);
            let coef = beta / (1.0 - schedule.alpha(t)).sqrt();
            let inv_sqrt = 1.0 / (1.0 - beta).sqrt();
            let sigma = schedule.posterior_variance(t).sqrt();
            for ((x, pred), rng) in xs.iter_mut().zip(pass.output().rows()).zip(&mut rngs) {
                for (xj, pj) in x.iter_mut().zip(pred) {
                    *xj = inv_sqrt * (*xj - coef * pj);
                }
                if t > 1 {
                    for xj in x.iter_mut() {
                        let z: f64 = StandardNormal.sample(rng);
                        *xj += sigma * z;
                    }
                }
            }
        }
        for (k, x) in xs.into_iter().enumerate() {
            out.push(Sample {
                id: (start + k) as u64,
                x,
                label: None,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::Architecture;

    #[test]
    fn noising_endpoints_are_exact() {
        let x = [0.3, -1.7, 2.0];
        let e = [1.1, 0.2, -0.4];
        assert_eq!(noise_with_alpha(&x, &e, 1.0), x.to_vec());
        assert_eq!(noise_with_alpha(&x, &e, 0.0), e.to_vec());
    }

    #[test]
    fn noising_hand_example() {
        let y = noise_with_alpha(&[2.0, 0.0], &[0.0, 4.0], 0.25);
        assert_eq!(y[0], 1.0);
        assert!((y[1] - 0.75f64.sqrt() * 4.0).abs() < 1e-15);
        assert!((y[1] - 3.464_101_615_137_754_6).abs() < 1e-12);
    }

    #[test]
    fn forward_noise_checks_shape_and_step() {
        let s = Schedule::from_betas(vec![0.5, 0.5]).unwrap();
        let d = NoiseDraw { eps: vec![0.0; 2], t: 1 };
        assert!(matches!(forward_noise(&[1.0], &d, &s), Err(Error::Shape(_))));
        let d = NoiseDraw { eps: vec![0.0], t: 3 };
        assert!(forward_noise(&[1.0], &d, &s).is_err());
    }

    #[test]
    fn loss_with_zero_prediction_is_squared_noise() {
        let arch = Architecture {
            data_dim: 2,
            hidden: 4,
            time_embed: 2,
        };
        let p = DenoiserParams::zeros(arch).unwrap();
        let s = Schedule::from_betas(vec![0.1, 0.2, 0.3]).unwrap();
        let d = NoiseDraw { eps: vec![1.0, 0.0], t: 2 };
        assert_eq!(per_sample_loss(&p, &[0.5, 0.5], &d, &s).unwrap(), 1.0);
    }

    #[test]
    fn zero_sample_count_rejected() {
        let p = DenoiserParams::zeros(Architecture::new(2)).unwrap();
        let s = Schedule::from_betas(vec![0.1, 0.2]).unwrap();
        assert!(sample_generate(&p, &s, 0, 1).is_err());
    }
}
