//! Scalar distribution algebra shared by the estimators.
//!
//! Everything here is a pure function on small value types. Gaussian messages
//! are circularly-symmetric complex Gaussians `CN(mean, variance)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Default cap applied to extrinsic variances that would otherwise blow up.
pub const DEFAULT_EXTRINSIC_CAP: f64 = 1e8;

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before ratios.
pub const PROB_FLOOR: f64 = 1e-12;

/// Which digamma to use when taking Gamma / Beta log-expectations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DigammaMode {
    /// `ln x - 1/(2x)`, the truncated asymptotic series.
    #[default]
    Approx,
    /// The true digamma function.
    Exact,
}

impl DigammaMode {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            DigammaMode::Approx => x.ln() - 0.5 / x,
            DigammaMode::Exact => statrs::function::gamma::digamma(x),
        }
    }
}

/// `ψ̂(x) = ln x − 1/(2x)`.
pub fn psi_hat(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("psi_hat requires x > 0, got {x}")));
    }
    Ok(DigammaMode::Approx.eval(x))
}

/// Complex Gaussian message `CN(mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianMsg {
    pub mean: Complex64,
    pub variance: f64,
}

impl GaussianMsg {
    pub fn new(mean: Complex64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::Domain(format!(
                "Gaussian variance must be positive and finite, got {variance}"
            )));
        }
        Ok(Self { mean, variance })
    }

    pub fn real(mean: f64, variance: f64) -> Result<Self> {
        Self::new(Complex64::new(mean, 0.0), variance)
    }
}

/// Product of two Gaussian messages (precision-weighted combination).
pub fn gaussian_multiply(a: GaussianMsg, b: GaussianMsg) -> GaussianMsg {
    let prec = 1.0 / a.variance + 1.0 / b.variance;
    let variance = 1.0 / prec;
    let mean = (a.mean / a.variance + b.mean / b.variance) * variance;
    GaussianMsg { mean, variance }
}

/// Extrinsic message `post / pri`.
///
/// Fails when the posterior is not strictly more informative than the prior.
pub fn gaussian_extrinsic(post: GaussianMsg, pri: GaussianMsg) -> Result<GaussianMsg> {
    let prec = 1.0 / post.variance - 1.0 / pri.variance;
    if !(prec > 0.0) {
        return Err(Error::NonInformativePosterior {
            post: post.variance,
            pri: pri.variance,
        });
    }
    let variance = 1.0 / prec;
    let mean = (post.mean / post.variance - pri.mean / pri.variance) * variance;
    Ok(GaussianMsg { mean, variance })
}

/// Extrinsic variance with the cap policy applied.
///
/// Returns `(variance, clamped)`. When the precision difference is not
/// positive or the resulting variance exceeds `cap`, the variance is `cap`.
pub fn extrinsic_variance_clamped(v_post: f64, v_pri: f64, cap: f64) -> (f64, bool) {
    let prec = 1.0 / v_post - 1.0 / v_pri;
    if prec > 1.0 / cap {
        (1.0 / prec, false)
    } else {
        (cap, true)
    }
}

/// `CN(x; mean, variance)` density.
pub fn cgauss_pdf(x: Complex64, mean: Complex64, variance: f64) -> Result<f64> {
    Ok(cgauss_log_pdf(x, mean, variance)?.exp())
}

/// Natural log of the `CN(x; mean, variance)` density.
pub fn cgauss_log_pdf(x: Complex64, mean: Complex64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::Domain(format!(
            "complex Gaussian variance must be positive, got {variance}"
        )));
    }
    Ok(ln_cn(x, mean, variance))
}

/// Unchecked log-density used in hot loops.
#[inline]
pub(crate) fn ln_cn(x: Complex64, mean: Complex64, variance: f64) -> f64 {
    -(PI * variance).ln() - (x - mean).norm_sqr() / variance
}

/// Gamma belief over a precision, parameterised by (shape, rate).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaBelief {
    pub shape: f64,
    pub rate: f64,
}

impl GammaBelief {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if !(shape > 0.0 && rate > 0.0) || !shape.is_finite() || !rate.is_finite() {
            return Err(Error::Domain(format!(
                "Gamma parameters must be positive, got shape={shape} rate={rate}"
            )));
        }
        Ok(Self { shape, rate })
    }

    /// `E[v] = shape / rate`.
    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    /// `E[ln v] = ψ(shape) − ln(rate)`.
    pub fn log_mean(&self, mode: DigammaMode) -> f64 {
        mode.eval(self.shape) - self.rate.ln()
    }
}

/// Beta belief over a probability, parameterised by pseudo-counts (a, b).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaBelief {
    pub a: f64,
    pub b: f64,
}

impl BetaBelief {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!(
                "Beta parameters must be positive, got a={a} b={b}"
            )));
        }
        Ok(Self { a, b })
    }

    /// `(⟨ln p⟩, ⟨ln(1−p)⟩)` under the chosen digamma.
    pub fn log_expectations(&self, mode: DigammaMode) -> (f64, f64) {
        let total = mode.eval(self.a + self.b);
        (mode.eval(self.a) - total, mode.eval(self.b) - total)
    }
}

/// `(⟨ln p⟩, ⟨ln(1−p)⟩)` with `ψ̂`.
pub fn beta_log_expectations(b: BetaBelief) -> (f64, f64) {
    b.log_expectations(DigammaMode::Approx)
}

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR)
}

/// `ln(p / (1 − p))` of a clamped probability.
#[inline]
pub fn logit(p: f64) -> f64 {
    let p = clamp_prob(p);
    p.ln() - (-p).ln_1p()
}

/// Logistic function; stable for large |x|.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln Σ e^{x_i}`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
