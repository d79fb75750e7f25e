use num_complex::Complex64;
use rayon::prelude::*;

use super::config::{PriorConfig, PriorVariant, UpwardInit};
use crate::dist::{clamp_prob, ln_cn, logit, sigmoid, BetaBelief, DigammaMode, GammaBelief};
use crate::error::{Error, Result};

/// Normalised belief over `(s_n, s_{n-1})`, ordered `[00, 01, 10, 11]` where the
/// first digit is `s_n`.
pub type PairBelief = [f64; 4];

/// Output of one module-B pass.
#[derive(Debug, Clone)]
pub struct ModuleBOutput {
    /// Posterior means, subcarrier-major (`p * N + n`).
    pub h_post: Vec<Complex64>,
    /// Average posterior variance per subcarrier.
    pub v_post: Vec<f64>,
    /// Final activation beliefs `B_h` per element.
    pub activation: Vec<f64>,
}

/// All messages and beliefs held by module B.
///
/// Per-element arrays use the subcarrier-major layout `p * N + n`; chain
/// messages are indexed by `n` only.
#[derive(Debug, Clone)]
pub struct EstimatorBState {
    pub n: usize,
    pub p: usize,
    pub pi_right: Vec<f64>,
    pub pi_left: Vec<f64>,
    /// `λ↓_n`, message from the transition factor into `s_n`.
    pub lambda_down: Vec<f64>,
    /// `λ⇓_n`, message from `s_n` into the next transition factor.
    pub lambda_down_var: Vec<f64>,
    /// `λ↑_n`, message from the transition factor above into `s_n`.
    pub lambda_up: Vec<f64>,
    /// `λ⇑_n`, message from `s_n` into the transition factor below.
    pub lambda_up_var: Vec<f64>,
    /// Belief of the large-component precision of each element.
    pub gamma_l: Vec<GammaBelief>,
    /// Belief of the near-zero precision of each subcarrier.
    pub gamma_s: Vec<GammaBelief>,
    pub beta_10: BetaBelief,
    pub beta_01: BetaBelief,
    pub b_s1: f64,
    /// Pair beliefs for `n = 2..N`, stored at `n - 2`.
    pub b_pair: Vec<PairBelief>,
    /// Joint beliefs `B_hs` computed in part 5.
    pub b_hs: Vec<f64>,
}

fn prior_gamma_l(cfg: &PriorConfig) -> GammaBelief {
    GammaBelief {
        shape: cfg.eps0,
        rate: cfg.eta0,
    }
}

fn prior_gamma_s(cfg: &PriorConfig) -> GammaBelief {
    GammaBelief {
        shape: cfg.alpha0,
        rate: cfg.beta0,
    }
}

/// Transition weights `exp⟨ln f_d⟩` derived from the Beta beliefs.
#[derive(Debug, Clone, Copy)]
struct Con {
    /// 1 → 1
    c1: f64,
    /// 0 → 1
    c2: f64,
    /// 0 → 0
    c3: f64,
    /// 1 → 0
    c4: f64,
}

impl Con {
    fn new(b10: BetaBelief, b01: BetaBelief, mode: DigammaMode) -> Self {
        let (ln_p10, ln_q10) = b10.log_expectations(mode);
        let (ln_p01, ln_q01) = b01.log_expectations(mode);
        Self {
            c1: ln_q01.exp(),
            c2: ln_p10.exp(),
            c3: ln_q10.exp(),
            c4: ln_p01.exp(),
        }
    }
}

/// Mixture weight of a Gamma-distributed precision, in log domain.
#[inline]
fn log_weight(g: GammaBelief, mode: DigammaMode, std_weight: bool) -> f64 {
    let denom = if std_weight { g.rate } else { g.shape };
    mode.eval(g.shape) - denom.ln()
}

/// Activation likelihood of one element given its prior message and the
/// current precision beliefs.
#[inline]
fn pi_right_one(
    h: Complex64,
    v: f64,
    gl: GammaBelief,
    gs: GammaBelief,
    cfg: &PriorConfig,
) -> f64 {
    let zero = Complex64::new(0.0, 0.0);
    let llr = match cfg.variant {
        PriorVariant::Bg => ln_cn(h, zero, v + gl.rate / gl.shape) - ln_cn(h, zero, v),
        _ => {
            let wl = log_weight(gl, cfg.digamma, cfg.std_gamma_weight);
            let ws = log_weight(gs, cfg.digamma, cfg.std_gamma_weight);
            wl + ln_cn(h, zero, v + gl.rate / gl.shape) - ws - ln_cn(h, zero, v + gs.rate / gs.shape)
        }
    };
    clamp_prob(sigmoid(llr))
}

/// Bernoulli-Gaussian activation likelihoods for a fixed slab precision
/// `v_l`: `CN(h; 0, v + 1/v_l)` against `CN(h; 0, v)`.
pub fn bg_variant_pi(h_pri: &[Complex64], v_pri: f64, v_l: f64) -> Result<Vec<f64>> {
    if !(v_pri > 0.0) || !(v_l > 0.0) || !v_l.is_finite() {
        return Err(Error::Domain(format!(
            "need positive variance and precision, got v_pri={v_pri} v_l={v_l}"
        )));
    }
    let slab_variance = 1.0 / v_l;
    let zero = Complex64::new(0.0, 0.0);
    Ok(h_pri
        .iter()
        .map(|&h| clamp_prob(sigmoid(ln_cn(h, zero, v_pri + slab_variance) - ln_cn(h, zero, v_pri))))
        .collect())
}

/// Gaussian moments of the two components of one element.
#[derive(Debug, Clone, Copy)]
struct Moments {
    mu_l: Complex64,
    var_l: f64,
    mu_s: Complex64,
    var_s: f64,
}

#[inline]
fn moments(h: Complex64, v: f64, gl: GammaBelief, gs: GammaBelief, variant: PriorVariant) -> Moments {
    let var_l = 1.0 / (1.0 / v + gl.mean());
    let mu_l = h * (var_l / v);
    let (mu_s, var_s) = match variant {
        PriorVariant::Bg => (Complex64::new(0.0, 0.0), 0.0),
        _ => {
            let var_s = 1.0 / (1.0 / v + gs.mean());
            (h * (var_s / v), var_s)
        }
    };
    Moments {
        mu_l,
        var_l,
        mu_s,
        var_s,
    }
}

impl EstimatorBState {
    pub fn new(n: usize, p: usize, cfg: &PriorConfig) -> Self {
        Self {
            n,
            p,
            pi_right: vec![0.5; n * p],
            pi_left: vec![0.5; n * p],
            lambda_down: vec![0.5; n],
            lambda_down_var: vec![0.5; n],
            lambda_up: vec![0.5; n],
            lambda_up_var: vec![0.5; n],
            gamma_l: vec![prior_gamma_l(cfg); n * p],
            gamma_s: vec![prior_gamma_s(cfg); p],
            beta_10: BetaBelief { a: cfg.e0, b: cfg.f0 },
            beta_01: BetaBelief { a: cfg.c0, b: cfg.d0 },
            b_s1: 0.5,
            b_pair: vec![[0.25; 4]; n.saturating_sub(1)],
            b_hs: vec![0.5; n * p],
        }
    }

    /// Restores the Gamma and Beta beliefs to their priors.
    pub fn reset_beliefs(&mut self, cfg: &PriorConfig) {
        self.gamma_l.fill(prior_gamma_l(cfg));
        self.gamma_s.fill(prior_gamma_s(cfg));
        self.beta_10 = BetaBelief { a: cfg.e0, b: cfg.f0 };
        self.beta_01 = BetaBelief { a: cfg.c0, b: cfg.d0 };
    }

    pub(crate) fn check_inputs(&self, h_pri: &[Complex64], v_pri: &[f64]) -> Result<()> {
        if h_pri.len() != self.n * self.p || v_pri.len() != self.p {
            return Err(Error::Dimension(format!(
                "module B expects {} means and {} variances, got {} and {}",
                self.n * self.p,
                self.p,
                h_pri.len(),
                v_pri.len()
            )));
        }
        if let Some(v) = v_pri.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(format!("prior variance must be positive, got {v}")));
        }
        if h_pri.iter().any(|h| !h.re.is_finite() || !h.im.is_finite()) {
            return Err(Error::Domain("prior mean contains non-finite values".into()));
        }
        Ok(())
    }

    /// Sum over subcarriers of `logit π→` at position `n`.
    fn evidence_llr(&self, n: usize) -> f64 {
        (0..self.p).map(|p| logit(self.pi_right[p * self.n + n])).sum()
    }

    fn con(&self, cfg: &PriorConfig) -> Con {
        Con::new(self.beta_10, self.beta_01, cfg.digamma)
    }

    /// Part 1: activation likelihoods `π→` from the prior messages.
    pub fn part1_pi_right(&mut self, h_pri: &[Complex64], v_pri: &[f64], cfg: &PriorConfig) {
        let n = self.n;
        let gamma_l = &self.gamma_l;
        let gamma_s = &self.gamma_s;
        self.pi_right
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(p, out)| {
                let v = v_pri[p];
                for (i, o) in out.iter_mut().enumerate() {
                    let k = p * n + i;
                    *o = pi_right_one(h_pri[k], v, gamma_l[k], gamma_s[p], cfg);
                }
            });
    }

    /// Part 2: forward sweep down the support chain.
    pub fn part2_downward(&mut self, cfg: &PriorConfig) {
        let c = self.con(cfg);
        self.lambda_down[0] = clamp_prob(c.c2 / (c.c2 + c.c3));
        for i in 0..self.n {
            if i > 0 {
                let l = self.lambda_down_var[i - 1];
                let num = l * c.c1 + (1.0 - l) * c.c2;
                let den = l * (c.c1 + c.c4) + (1.0 - l) * (c.c2 + c.c3);
                self.lambda_down[i] = clamp_prob(num / den);
            }
            let llr = logit(self.lambda_down[i]) + self.evidence_llr(i);
            self.lambda_down_var[i] = clamp_prob(sigmoid(llr));
        }
    }

    /// Part 3: backward sweep up the support chain.
    pub fn part3_upward(&mut self, cfg: &PriorConfig) {
        let c = self.con(cfg);
        let last = self.n - 1;
        self.lambda_up[last] = 0.5;
        self.lambda_up_var[last] = match cfg.upward_init {
            UpwardInit::FactorMessage => clamp_prob(sigmoid(self.evidence_llr(last))),
            UpwardInit::VariableMessage => 0.5,
        };
        for i in (0..last).rev() {
            let l = self.lambda_up_var[i + 1];
            let num = l * c.c1 + (1.0 - l) * c.c4;
            let den = l * (c.c1 + c.c2) + (1.0 - l) * (c.c3 + c.c4);
            self.lambda_up[i] = clamp_prob(num / den);
            let llr = logit(self.lambda_up[i]) + self.evidence_llr(i);
            self.lambda_up_var[i] = clamp_prob(sigmoid(llr));
        }
    }

    /// Part 4: first-state and pair beliefs, then the Beta updates of the
    /// transition probabilities.
    pub fn part4_update_transitions(&mut self, cfg: &PriorConfig) {
        let c = self.con(cfg);
        self.b_s1 = clamp_prob(sigmoid(
            logit(self.lambda_up[0]) + logit(self.lambda_down[0]) + self.evidence_llr(0),
        ));
        let (mut s00, mut s01, mut s10, mut s11) = (0.0, 0.0, 0.0, 0.0);
        for i in 1..self.n {
            let up = self.lambda_up_var[i];
            let down = self.lambda_down_var[i - 1];
            let b00 = (1.0 - up) * (1.0 - down) * c.c3;
            let b01 = (1.0 - up) * down * c.c4;
            let b10 = up * (1.0 - down) * c.c2;
            let b11 = up * down * c.c1;
            let rho = b00 + b01 + b10 + b11;
            let pair = [b00 / rho, b01 / rho, b10 / rho, b11 / rho];
            s00 += pair[0];
            s01 += pair[1];
            s10 += pair[2];
            s11 += pair[3];
            self.b_pair[i - 1] = pair;
        }
        self.beta_10 = BetaBelief {
            a: cfg.e0 + self.b_s1 + s10,
            b: cfg.f0 + 1.0 - self.b_s1 + s00,
        };
        self.beta_01 = BetaBelief {
            a: cfg.c0 + s01,
            b: cfg.d0 + s11,
        };
    }

    /// Part 5a: messages `π←` back towards each element.
    pub fn part5_pi_left(&mut self) {
        let n = self.n;
        for i in 0..n {
            let total = logit(self.lambda_up[i]) + logit(self.lambda_down[i]) + self.evidence_llr(i);
            for p in 0..self.p {
                let k = p * n + i;
                self.pi_left[k] = clamp_prob(sigmoid(total - logit(self.pi_right[k])));
            }
        }
    }

    /// Part 5b: joint beliefs `B_hs` and the Gamma precision updates.
    pub fn part5_update_precisions(&mut self, h_pri: &[Complex64], v_pri: &[f64], cfg: &PriorConfig) {
        let n = self.n;
        for (k, b) in self.b_hs.iter_mut().enumerate() {
            *b = sigmoid(logit(self.pi_right[k]) + logit(self.pi_left[k]));
        }
        let b_hs = &self.b_hs;
        let gamma_s = &self.gamma_s;
        let per_sub: Vec<(Vec<GammaBelief>, GammaBelief)> = self
            .gamma_l
            .par_chunks(n)
            .enumerate()
            .map(|(p, gl)| {
                let v = v_pri[p];
                let gs = gamma_s[p];
                let mut new_l = Vec::with_capacity(n);
                let (mut sum_b, mut sum_bl, mut sum_nb, mut sum_bs) = (0.0, 0.0, 0.0, 0.0);
                for i in 0..n {
                    let k = p * n + i;
                    let b = b_hs[k];
                    let m = moments(h_pri[k], v, gl[i], gs, cfg.variant);
                    let el = m.mu_l.norm_sqr() + m.var_l;
                    let es = m.mu_s.norm_sqr() + m.var_s;
                    sum_b += b;
                    sum_bl += b * el;
                    sum_nb += 1.0 - b;
                    sum_bs += (1.0 - b) * es;
                    if cfg.variant == PriorVariant::TsgmLvd {
                        new_l.push(GammaBelief {
                            shape: cfg.eps0 + b,
                            rate: cfg.eta0 + b * el,
                        });
                    }
                }
                if cfg.variant != PriorVariant::TsgmLvd {
                    let pooled = GammaBelief {
                        shape: cfg.eps0 + sum_b,
                        rate: cfg.eta0 + sum_bl,
                    };
                    new_l = vec![pooled; n];
                }
                let new_s = match cfg.variant {
                    PriorVariant::Bg => gs,
                    _ => GammaBelief {
                        shape: cfg.alpha0 + sum_nb,
                        rate: cfg.beta0 + sum_bs,
                    },
                };
                (new_l, new_s)
            })
            .collect();
        for (p, (gl, gs)) in per_sub.into_iter().enumerate() {
            self.gamma_l[p * n..(p + 1) * n].copy_from_slice(&gl);
            self.gamma_s[p] = gs;
        }
    }

    /// Posterior mean and variance under the updated precision beliefs.
    pub fn posterior_output(&self, h_pri: &[Complex64], v_pri: &[f64], cfg: &PriorConfig) -> ModuleBOutput {
        let n = self.n;
        let per_sub: Vec<(Vec<Complex64>, Vec<f64>, f64)> = (0..self.p)
            .into_par_iter()
            .map(|p| {
                let v = v_pri[p];
                let gs = self.gamma_s[p];
                let mut hs = Vec::with_capacity(n);
                let mut bs = Vec::with_capacity(n);
                let mut acc = 0.0;
                for i in 0..n {
                    let k = p * n + i;
                    let gl = self.gamma_l[k];
                    let pr = pi_right_one(h_pri[k], v, gl, gs, cfg);
                    let b = sigmoid(logit(pr) + logit(self.pi_left[k]));
                    let m = moments(h_pri[k], v, gl, gs, cfg.variant);
                    hs.push(m.mu_l * b + m.mu_s * (1.0 - b));
                    // second moment minus squared mean, written without cancellation
                    acc += b * (1.0 - b) * (m.mu_l - m.mu_s).norm_sqr() + b * m.var_l + (1.0 - b) * m.var_s;
                    bs.push(b);
                }
                (hs, bs, acc / n as f64)
            })
            .collect();
        let mut out = ModuleBOutput {
            h_post: Vec::with_capacity(n * self.p),
            v_post: Vec::with_capacity(self.p),
            activation: Vec::with_capacity(n * self.p),
        };
        for (hs, bs, v) in per_sub {
            out.h_post.extend(hs);
            out.activation.extend(bs);
            out.v_post.push(v);
        }
        out
    }

    /// Belief of `s_n = 1` from the chain messages and all evidence.
    pub fn support_posterior(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                sigmoid(logit(self.lambda_up[i]) + logit(self.lambda_down[i]) + self.evidence_llr(i))
            })
            .collect()
    }
}
