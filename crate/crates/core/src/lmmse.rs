//! Module A: per-subcarrier LMMSE estimation with a row-orthonormal pilot
//! matrix, and extrinsic extraction.

use num_complex::Complex64;

use crate::channel::PilotMatrix;
use crate::dist::extrinsic_variance_clamped;
use crate::error::{Error, Result};

/// Posterior variances are floored at this fraction of the prior variance so
/// that exactly determined systems stay finite downstream.
const RELATIVE_VARIANCE_FLOOR: f64 = 1e-20;

/// Gaussian message over a length-`N` vector with one shared variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrinsicPair {
    pub mean: Vec<Complex64>,
    pub variance: f64,
}

impl ExtrinsicPair {
    pub fn new(mean: Vec<Complex64>, variance: f64) -> Self {
        Self { mean, variance }
    }

    /// Zero-mean message with the given variance.
    pub fn flat(n: usize, variance: f64) -> Self {
        Self {
            mean: vec![Complex64::new(0.0, 0.0); n],
            variance,
        }
    }
}

/// LMMSE posterior of `h` given `y = A h + w`, `w ~ CN(0, σ² I)` and the prior
/// `CN(h_pri, v_pri I)`.
///
/// With `A Aᴴ = I` this is
/// `h_post = h_pri + v/(v+σ²) · Aᴴ (y − A h_pri)` and
/// `v_post = v − (M/N) v² / (v+σ²)`, computed through the FFT.
pub fn lmmse_update(
    y: &[Complex64],
    a: &PilotMatrix,
    pri: &ExtrinsicPair,
    sigma2: f64,
) -> Result<ExtrinsicPair> {
    if pri.mean.len() != a.n() || y.len() != a.m() {
        return Err(Error::Dimension(format!(
            "LMMSE expects y of length {} and prior of length {}, got {} and {}",
            a.m(),
            a.n(),
            y.len(),
            pri.mean.len()
        )));
    }
    let v = pri.variance;
    if !(v >= 0.0) || !v.is_finite() || !(sigma2 >= 0.0) {
        return Err(Error::Numeric(format!(
            "LMMSE needs v_pri >= 0 and sigma2 >= 0, got {v} and {sigma2}"
        )));
    }
    let pred = a.apply(&pri.mean);
    let residual: Vec<Complex64> = y.iter().zip(&pred).map(|(y, p)| y - p).collect();
    let denom = v + sigma2;
    if denom == 0.0 {
        if residual.iter().any(|r| r.norm_sqr() > 0.0) {
            return Err(Error::Numeric(
                "zero prior and noise variance with inconsistent measurements".into(),
            ));
        }
        return Ok(pri.clone());
    }
    let gain = v / denom;
    let back = a.adjoint(&residual);
    let mean = pri
        .mean
        .iter()
        .zip(&back)
        .map(|(h, b)| h + b * gain)
        .collect();
    let ratio = a.m() as f64 / a.n() as f64;
    let variance = (v - ratio * v * gain).max(v * RELATIVE_VARIANCE_FLOOR);
    Ok(ExtrinsicPair { mean, variance })
}

/// Extrinsic message `post / pri` with a shared scalar variance.
///
/// Returns the message and whether the variance cap was hit. When the cap is
/// hit the posterior mean is passed through with the capped variance.
pub fn extrinsic_a(post: &ExtrinsicPair, pri: &ExtrinsicPair, cap: f64) -> (ExtrinsicPair, bool) {
    let (variance, clamped) = extrinsic_variance_clamped(post.variance, pri.variance, cap);
    if clamped {
        return (
            ExtrinsicPair {
                mean: post.mean.clone(),
                variance,
            },
            true,
        );
    }
    let wp = variance / post.variance;
    let wq = variance / pri.variance;
    let mean = post
        .mean
        .iter()
        .zip(&pri.mean)
        .map(|(hp, hq)| hp * wp - hq * wq)
        .collect();
    (ExtrinsicPair { mean, variance }, false)
}
