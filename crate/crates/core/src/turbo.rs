//! The structured turbo loop (module A ⇄ module B), NMSE, and the
//! state-evolution predictor.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{cn_standard, ChannelRealization, ChannelSpec, MeasurementSet, PilotMatrix};
use crate::denoiser::{EstimatorB, PriorConfig};
use crate::dist::{extrinsic_variance_clamped, DEFAULT_EXTRINSIC_CAP};
use crate::error::{Error, Result};
use crate::lmmse::{extrinsic_a, lmmse_update, ExtrinsicPair};
use crate::rng;

/// `‖estimate − truth‖² / ‖truth‖²`.
pub fn nmse(estimate: &[Complex64], truth: &[Complex64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "estimate has {} entries, truth has {}",
            estimate.len(),
            truth.len()
        )));
    }
    let power: f64 = truth.iter().map(|h| h.norm_sqr()).sum();
    if power == 0.0 {
        return Err(Error::ZeroTruth);
    }
    let err: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / power)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Settings of one turbo run.
#[derive(Debug, Clone, PartialEq)]
pub struct TurboConfig {
    pub prior: PriorConfig,
    /// Initial module-A prior variance.
    pub init_variance: f64,
    /// Stop once the NMSE (or, without a reference, the relative change of
    /// the estimate) moves less than this between iterations.
    pub early_stop: Option<f64>,
    pub extrinsic_cap: f64,
}

impl TurboConfig {
    pub fn new(prior: PriorConfig, init_variance: f64) -> Self {
        Self {
            prior,
            init_variance,
            early_stop: Some(1e-6),
            extrinsic_cap: DEFAULT_EXTRINSIC_CAP,
        }
    }
}

/// One turbo iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// NMSE of the module-B posterior mean, when a reference was given.
    pub nmse: Option<f64>,
    pub v_a_ext: Vec<f64>,
    pub v_b_ext: Vec<f64>,
    /// Average module-B posterior variance per subcarrier.
    pub v_b_post: Vec<f64>,
}

/// Per-iteration trace of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TurboTrace {
    pub iterations: Vec<IterationRecord>,
    /// Largest relative error of `post ≈ ext × pri` over every unclamped
    /// extrinsic extraction of the run.
    pub roundtrip_max_error: f64,
    pub roundtrip_checks: usize,
    /// Extractions where the extrinsic variance hit the cap.
    pub clamp_events: usize,
    pub stopped_early: bool,
}

#[derive(Debug, Clone)]
pub struct TurboOutput {
    pub trace: TurboTrace,
    pub estimate: Vec<Complex64>,
}

/// Relative error of `ext × pri` against `post` for a shared-variance message.
fn roundtrip_error(post_mean: &[Complex64], post_var: f64, ext: &ExtrinsicPair, pri_mean: &[Complex64], pri_var: f64) -> f64 {
    let prec = 1.0 / ext.variance + 1.0 / pri_var;
    let v = 1.0 / prec;
    let mut worst = ((v - post_var) / post_var).abs();
    let scale = post_var.sqrt();
    for ((m_post, m_ext), m_pri) in post_mean.iter().zip(&ext.mean).zip(pri_mean) {
        let m = (m_ext / ext.variance + m_pri / pri_var) * v;
        worst = worst.max((m - m_post).norm() / (m_post.norm() + scale));
    }
    worst
}

/// Runs the turbo loop for `prior.max_iters` iterations (or until the early
/// stop fires). `truth` is used only for the NMSE trace and stopping rule.
pub fn run_turbo(
    measurements: &MeasurementSet,
    pilots: &[PilotMatrix],
    truth: Option<&ChannelRealization>,
    cfg: &TurboConfig,
) -> Result<TurboOutput> {
    let p = pilots.len();
    if p == 0 || measurements.y.len() != p {
        return Err(Error::Dimension(format!(
            "{} measurement vectors for {} pilot matrices",
            measurements.y.len(),
            p
        )));
    }
    let n = pilots[0].n();
    if pilots.iter().any(|a| a.n() != n) {
        return Err(Error::Dimension("pilot matrices disagree on N".into()));
    }
    if let Some(t) = truth {
        if t.n != n || t.p != p {
            return Err(Error::Dimension(format!(
                "reference channel is {}x{}, problem is {n}x{p}",
                t.n, t.p
            )));
        }
    }
    if !(cfg.init_variance > 0.0) || !cfg.init_variance.is_finite() {
        return Err(Error::Config(format!("initial variance must be positive, got {}", cfg.init_variance)));
    }
    let sigma2 = measurements.noise_variance;
    let mut est_b = EstimatorB::new(n, p, cfg.prior.clone())?;

    let mut pri_a: Vec<ExtrinsicPair> = (0..p).map(|_| ExtrinsicPair::flat(n, cfg.init_variance)).collect();
    let mut trace = TurboTrace {
        iterations: Vec::new(),
        roundtrip_max_error: 0.0,
        roundtrip_checks: 0,
        clamp_events: 0,
        stopped_early: false,
    };
    let mut estimate = vec![Complex64::new(0.0, 0.0); n * p];
    let mut prev_nmse: Option<f64> = None;

    for it in 1..=cfg.prior.max_iters {
        // module A
        let a_out: Vec<(ExtrinsicPair, ExtrinsicPair, bool)> = pilots
            .par_iter()
            .zip(&measurements.y)
            .zip(&pri_a)
            .map(|((a, y), pri)| {
                let post = lmmse_update(y, a, pri, sigma2)?;
                let (ext, clamped) = extrinsic_a(&post, pri, cfg.extrinsic_cap);
                Ok((post, ext, clamped))
            })
            .collect::<Result<_>>()?;
        let mut h_pri_b = Vec::with_capacity(n * p);
        let mut v_pri_b = Vec::with_capacity(p);
        for (pi, (post, ext, clamped)) in a_out.iter().enumerate() {
            if *clamped {
                trace.clamp_events += 1;
            } else {
                let e = roundtrip_error(&post.mean, post.variance, ext, &pri_a[pi].mean, pri_a[pi].variance);
                trace.roundtrip_max_error = trace.roundtrip_max_error.max(e);
                trace.roundtrip_checks += 1;
            }
            h_pri_b.extend_from_slice(&ext.mean);
            v_pri_b.push(ext.variance);
        }
        check_finite(it, "module A extrinsic", &h_pri_b, &v_pri_b)?;

        // module B
        let out = est_b.run(&h_pri_b, &v_pri_b)?;
        check_finite(it, "module B posterior", &out.h_post, &out.v_post)?;
        let mut next_pri = Vec::with_capacity(p);
        let mut v_b_ext = Vec::with_capacity(p);
        for pi in 0..p {
            let post_mean = &out.h_post[pi * n..(pi + 1) * n];
            let pri_mean = &h_pri_b[pi * n..(pi + 1) * n];
            let (v_post, v_pri) = (out.v_post[pi], v_pri_b[pi]);
            let (v_ext, clamped) = if v_post > 0.0 {
                extrinsic_variance_clamped(v_post, v_pri, cfg.extrinsic_cap)
            } else {
                (0.0, false)
            };
            let ext = if v_post <= 0.0 {
                // exact recovery; nothing left to learn from module A
                ExtrinsicPair::new(post_mean.to_vec(), v_post.max(f64::MIN_POSITIVE))
            } else if clamped {
                trace.clamp_events += 1;
                ExtrinsicPair::new(post_mean.to_vec(), v_ext)
            } else {
                let (wp, wq) = (v_ext / v_post, v_ext / v_pri);
                let mean = post_mean.iter().zip(pri_mean).map(|(a, b)| a * wp - b * wq).collect();
                let ext = ExtrinsicPair::new(mean, v_ext);
                let e = roundtrip_error(post_mean, v_post, &ext, pri_mean, v_pri);
                trace.roundtrip_max_error = trace.roundtrip_max_error.max(e);
                trace.roundtrip_checks += 1;
                ext
            };
            v_b_ext.push(ext.variance);
            next_pri.push(ext);
        }
        let vb: Vec<f64> = v_b_ext.clone();
        check_finite(it, "module B extrinsic", &[], &vb)?;

        estimate = out.h_post;
        let nmse_now = truth.map(|t| nmse(&estimate, &t.gains)).transpose()?;
        trace.iterations.push(IterationRecord {
            nmse: nmse_now,
            v_a_ext: v_pri_b,
            v_b_ext,
            v_b_post: out.v_post,
        });
        let converged = match (cfg.early_stop, nmse_now, prev_nmse) {
            (Some(tol), Some(a), Some(b)) => (a - b).abs() < tol,
            (Some(tol), None, _) if it > 1 => {
                let prev: Vec<Complex64> = pri_a.iter().flat_map(|e| e.mean.iter().copied()).collect();
                relative_change(&estimate, &prev) < tol
            }
            _ => false,
        };
        prev_nmse = nmse_now;
        pri_a = next_pri;
        if converged && it < cfg.prior.max_iters {
            trace.stopped_early = true;
            break;
        }
    }
    Ok(TurboOutput { trace, estimate })
}

fn relative_change(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = a.iter().map(|x| x.norm_sqr()).sum();
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

fn check_finite(iteration: usize, what: &str, means: &[Complex64], vars: &[f64]) -> Result<()> {
    let bad_mean = means.iter().any(|m| !m.re.is_finite() || !m.im.is_finite());
    let bad_var = vars.iter().any(|v| !v.is_finite());
    if bad_mean || bad_var {
        return Err(Error::NonFinite {
            iteration,
            what: what.into(),
        });
    }
    Ok(())
}

/// Scalar prior used by the state evolution: a zero-mean complex Gaussian
/// mixture `Σ w_k CN(0, var_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarPrior {
    pub weights: Vec<f64>,
    pub variances: Vec<f64>,
}

/// Nodes used to discretise the log-uniform precision law.
const LOG_UNIFORM_NODES: usize = 32;

impl ScalarPrior {
    pub fn gaussian(variance: f64) -> Self {
        Self {
            weights: vec![1.0],
            variances: vec![variance],
        }
    }

    /// The synthetic-channel prior with the support chain replaced by its
    /// stationary activation probability `lambda`. The log-uniform precision
    /// of the non-zero component is discretised on a midpoint grid in
    /// log-precision.
    pub fn from_channel(spec: &ChannelSpec, lambda: f64) -> Result<Self> {
        spec.validate()?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Config(format!("activation probability {lambda} outside [0, 1]")));
        }
        let (lo, hi) = spec.vl_spread;
        let mut weights = vec![1.0 - lambda];
        let mut variances = vec![1.0 / spec.vs];
        if hi == lo {
            weights.push(lambda);
            variances.push(1.0 / lo);
        } else {
            let span = (hi / lo).ln();
            for k in 0..LOG_UNIFORM_NODES {
                let prec = (lo.ln() + span * (k as f64 + 0.5) / LOG_UNIFORM_NODES as f64).exp();
                weights.push(lambda / LOG_UNIFORM_NODES as f64);
                variances.push(1.0 / prec);
            }
        }
        Ok(Self { weights, variances })
    }

    pub fn power(&self) -> f64 {
        self.weights.iter().zip(&self.variances).map(|(w, v)| w * v).sum()
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> Complex64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (w, v) in self.weights.iter().zip(&self.variances) {
            acc += w;
            if u < acc {
                return cn_standard(rng) * v.sqrt();
            }
        }
        cn_standard(rng) * self.variances.last().copied().unwrap_or(0.0).sqrt()
    }

    /// `E[h | r]` for `r = h + ξ`, `ξ ~ CN(0, noise)`.
    fn posterior_mean(&self, r: Complex64, noise: f64) -> Complex64 {
        let mut logs = Vec::with_capacity(self.weights.len());
        for (w, v) in self.weights.iter().zip(&self.variances) {
            let s = v + noise;
            logs.push(if *w > 0.0 { w.ln() - s.ln() - r.norm_sqr() / s } else { f64::NEG_INFINITY });
        }
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut num, mut den) = (0.0, 0.0);
        for (l, v) in logs.iter().zip(&self.variances) {
            let a = (l - m).exp();
            num += a * v / (v + noise);
            den += a;
        }
        r * (num / den)
    }
}

/// Monte-Carlo MMSE with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmseEstimate {
    pub mmse: f64,
    pub std_error: f64,
}

pub const DEFAULT_MMSE_SAMPLES: usize = 200_000;
const MMSE_CHUNK: usize = 4096;

/// `E|h − E[h | h + ξ]|²` with `ξ ~ CN(0, 1/eta)`, by Monte Carlo.
pub fn mmse_oracle(eta: f64, prior: &ScalarPrior, num_samples: usize, seed: u64) -> Result<MmseEstimate> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("mmse oracle needs eta > 0, got {eta}")));
    }
    if num_samples < 2 {
        return Err(Error::Config("mmse oracle needs at least two samples".into()));
    }
    let noise = 1.0 / eta;
    let chunks = num_samples.div_ceil(MMSE_CHUNK);
    let (sum, sum_sq) = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = rng::stream(seed, &[0x5e, c as u64]);
            let count = MMSE_CHUNK.min(num_samples - c * MMSE_CHUNK);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let h = prior.sample(&mut rng);
                let r = if noise.is_finite() { h + cn_standard(&mut rng) * noise.sqrt() } else { h };
                let e = (h - prior.posterior_mean(r, noise)).norm_sqr();
                s += e;
                s2 += e * e;
            }
            (s, s2)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let k = num_samples as f64;
    let mean = sum / k;
    let var = ((sum_sq / k - mean * mean) * k / (k - 1.0)).max(0.0);
    Ok(MmseEstimate {
        mmse: mean,
        std_error: (var / k).sqrt(),
    })
}

/// One state-evolution step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeStep {
    pub eta: f64,
    pub mmse: MmseEstimate,
    pub v_next: f64,
}

/// Module-A map `η = 1/((N/M)(v+σ²) − v)`.
pub fn se_eta(v: f64, sigma2: f64, n: usize, m: usize, step: usize) -> Result<f64> {
    if n == 0 || m == 0 {
        return Err(Error::Config("SE needs N, M > 0".into()));
    }
    let denominator = (n as f64 / m as f64) * (v + sigma2) - v;
    if !(denominator > 0.0) || !denominator.is_finite() {
        return Err(Error::SeUndefined { step, denominator });
    }
    Ok(1.0 / denominator)
}

/// Both maps of one step: `η` and `v′` with `1/v′ = 1/mmse(η) − η`.
pub fn se_step(
    v: f64,
    sigma2: f64,
    n: usize,
    m: usize,
    prior: &ScalarPrior,
    num_samples: usize,
    seed: u64,
    cap: f64,
) -> Result<SeStep> {
    let eta = se_eta(v, sigma2, n, m, 0)?;
    let mmse = mmse_oracle(eta, prior, num_samples, seed)?;
    let inv = 1.0 / mmse.mmse - eta;
    let v_next = if inv > 1.0 / cap { 1.0 / inv } else { cap };
    Ok(SeStep { eta, mmse, v_next })
}

/// One row of the SE trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeRow {
    /// Module-A prior variance at this step.
    pub v: f64,
    pub eta: f64,
    /// `mmse(η) / prior power`.
    pub predicted_nmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeTrace {
    pub rows: Vec<SeRow>,
    pub converged: bool,
}

/// Settings of the SE recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct SeConfig {
    pub n: usize,
    pub m: usize,
    pub sigma2: f64,
    pub v0: f64,
    pub max_steps: usize,
    pub tol: f64,
    pub num_samples: usize,
    pub seed: u64,
    pub cap: f64,
}

/// Runs the recursion until `|Δv|/v < tol` or `max_steps` rows. The same
/// Monte-Carlo stream is reused at every step so the map is deterministic.
pub fn run_se(prior: &ScalarPrior, cfg: &SeConfig) -> Result<SeTrace> {
    let power = prior.power();
    let mut v = cfg.v0;
    let mut rows = Vec::new();
    for step in 1..=cfg.max_steps {
        let eta = se_eta(v, cfg.sigma2, cfg.n, cfg.m, step)?;
        let mmse = mmse_oracle(eta, prior, cfg.num_samples, cfg.seed)?;
        rows.push(SeRow {
            v,
            eta,
            predicted_nmse: mmse.mmse / power,
        });
        let inv = 1.0 / mmse.mmse - eta;
        let next = if inv > 1.0 / cfg.cap { 1.0 / inv } else { cfg.cap };
        if ((next - v) / v).abs() < cfg.tol {
            return Ok(SeTrace { rows, converged: true });
        }
        v = next;
    }
    Ok(SeTrace { rows, converged: false })
}
