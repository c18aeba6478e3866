//! Fréchet distance between Gaussian fits of two sample sets, computed in
//! raw sample space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::data::Sample;
use crate::error::{Error, Result};

/// Mean and unbiased covariance of a set of equal-length vectors.
pub fn gaussian_fit(xs: &[&[f64]]) -> (DVector<f64>, DMatrix<f64>) {
    let n = xs.len();
    let d = xs[0].len();
    let mut mean = DVector::zeros(d);
    for x in xs {
        mean += DVector::from_column_slice(x);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for x in xs {
        let c = DVector::from_column_slice(x) - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= (n - 1) as f64;
    (mean, cov)
}

/// Relative tolerance on negative eigenvalues of `√Σa Σb √Σa` before the
/// product is declared not positive semi-definite.
const PSD_TOLERANCE: f64 = 1e-8;

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    if let Some(v) = eig.eigenvalues.iter().find(|v| **v < -PSD_TOLERANCE * scale) {
        return Err(Error::Numerical(format!(
            "matrix is not positive semi-definite (eigenvalue {v})"
        )));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

/// `‖μa - μb‖² + tr(Σa + Σb - 2 (Σa Σb)^{1/2})`.
///
/// The trace of `(Σa Σb)^{1/2}` is evaluated as the trace of the symmetric
/// square root of `√Σa Σb √Σa`, which has the same eigenvalues.
pub fn frechet_from_stats(
    mu_a: &DVector<f64>,
    cov_a: &DMatrix<f64>,
    mu_b: &DVector<f64>,
    cov_b: &DMatrix<f64>,
) -> Result<f64> {
    let root_a = psd_sqrt(cov_a)?;
    let inner = &root_a * cov_b * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = psd_sqrt(&inner)?.trace();
    let diff = mu_a - mu_b;
    Ok((diff.dot(&diff) + cov_a.trace() + cov_b.trace() - 2.0 * cross).max(0.0))
}

pub fn frechet_distance(a: &[Sample], b: &[Sample]) -> Result<f64> {
    let d = a.first().map(|s| s.x.len()).unwrap_or(0);
    if a.len() <= d || b.len() <= d || d == 0 {
        return Err(Error::config(format!(
            "Fréchet distance needs more samples than dimensions (got {} and {} for d = {d})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|s| s.x.len() != d) {
        return Err(Error::shape("sample sets differ in dimension"));
    }
    let xa: Vec<&[f64]> = a.iter().map(|s| s.x.as_slice()).collect();
    let xb: Vec<&[f64]> = b.iter().map(|s| s.x.as_slice()).collect();
    let (ma, ca) = gaussian_fit(&xa);
    let (mb, cb) = gaussian_fit(&xb);
    frechet_from_stats(&ma, &ca, &mb, &cb)
}
