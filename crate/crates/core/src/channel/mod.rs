//! Synthetic clustered-sparse channels, PDFT-RP pilots and measurements.
//!
//! Channels live in the angle-frequency (AF) domain: one length-`N` vector
//! per pilot subcarrier, all subcarriers sharing the same support.

mod io;
mod pilots;
mod scenario;

pub use io::{load_channel_file, save_channel_file, CHANNEL_MAGIC};
pub use pilots::{make_pdft_rp, PilotMatrix};
pub use scenario::{Scenario, Trial};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

const SUPPORT_STREAM: u64 = 0x5355_5050;
const GAIN_STREAM: u64 = 0x4741_494e;
const NOISE_STREAM: u64 = 0x4e4f_4953;

/// AF-domain channel for `P` subcarriers of `N` antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub n: usize,
    pub p: usize,
    /// Gains in subcarrier-major order: entry `(n, p)` lives at `p * N + n`.
    pub gains: Vec<Complex64>,
    pub support: Option<Vec<bool>>,
    /// Per-element precision of the non-zero component, same layout as `gains`.
    pub precisions_l: Option<Vec<f64>>,
    /// Precision of the near-zero component, one per subcarrier.
    pub precision_s: Option<Vec<f64>>,
}

impl ChannelRealization {
    pub fn from_gains(n: usize, p: usize, gains: Vec<Complex64>) -> Result<Self> {
        if gains.len() != n * p {
            return Err(Error::Dimension(format!(
                "expected {} gains for N={n}, P={p}, got {}",
                n * p,
                gains.len()
            )));
        }
        Ok(Self {
            n,
            p,
            gains,
            support: None,
            precisions_l: None,
            precision_s: None,
        })
    }

    pub fn subcarrier(&self, p: usize) -> &[Complex64] {
        &self.gains[p * self.n..(p + 1) * self.n]
    }

    pub fn subcarriers(&self) -> impl Iterator<Item = &[Complex64]> {
        self.gains.chunks(self.n)
    }

    pub fn energy(&self) -> f64 {
        self.gains.iter().map(|g| g.norm_sqr()).sum()
    }

    /// Checks that the recorded support is consistent with the per-element
    /// precisions: on-support elements carry a large-component precision on
    /// every subcarrier, off-support elements none.
    pub fn check_common_support(&self) -> Result<()> {
        let (Some(support), Some(prec)) = (&self.support, &self.precisions_l) else {
            return Ok(());
        };
        if support.len() != self.n {
            return Err(Error::Dimension("support length differs from N".into()));
        }
        for p in 0..self.p {
            for (n, &on) in support.iter().enumerate() {
                let has = prec[p * self.n + n].is_finite();
                if has != on {
                    return Err(Error::Dimension(format!(
                        "subcarrier {p} breaks the common support at antenna {n}"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn check_prob(name: &str, x: f64) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Config(format!("{name} must lie in (0, 1), got {x}")));
    }
    Ok(())
}

/// Draws a support vector from the two-state Markov chain with
/// `Pr(s_1 = 1) = p10`, `Pr(1 | 0) = p10`, `Pr(0 | 1) = p01`.
pub fn sample_support(n: usize, p10: f64, p01: f64, seed: u64) -> Result<Vec<bool>> {
    check_prob("p10", p10)?;
    check_prob("p01", p01)?;
    let mut rng = rng::stream(seed, &[SUPPORT_STREAM]);
    let mut out = Vec::with_capacity(n);
    let mut prev = None;
    for _ in 0..n {
        let u: f64 = rng.random();
        let on = match prev {
            None | Some(false) => u < p10,
            Some(true) => u >= p01,
        };
        out.push(on);
        prev = Some(on);
    }
    Ok(out)
}

/// Stationary activation probability `(1 + p01/p10)^{-1}` of the chain.
pub fn stationary_activation(p10: f64, p01: f64) -> f64 {
    1.0 / (1.0 + p01 / p10)
}

/// Statistical parameters of the synthetic TSGM-LVD channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    /// Range `(min, max)` of the non-zero precisions, drawn log-uniformly.
    pub vl_spread: (f64, f64),
    /// Precision of the near-zero component.
    pub vs: f64,
}

impl Default for ChannelSpec {
    fn default() -> Self {
        Self {
            vl_spread: (0.1, 10.0),
            vs: 100.0,
        }
    }
}

impl ChannelSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.vl_spread;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::Config(format!("invalid precision range ({lo}, {hi})")));
        }
        if !(self.vs > 0.0 && self.vs.is_finite()) {
            return Err(Error::Config(format!("invalid near-zero precision {}", self.vs)));
        }
        Ok(())
    }

    /// Mean power of a non-zero element, `E[1/v_L]` under the log-uniform law.
    pub fn mean_large_variance(&self) -> f64 {
        let (lo, hi) = self.vl_spread;
        if hi - lo <= 1e-12 * hi {
            return 1.0 / lo;
        }
        (1.0 / lo - 1.0 / hi) / (hi / lo).ln()
    }

    /// Average element power for activation probability `lambda`.
    pub fn mean_power(&self, lambda: f64) -> f64 {
        lambda * self.mean_large_variance() + (1.0 - lambda) / self.vs
    }

    fn draw_precision<R: Rng>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.vl_spread;
        if hi == lo {
            return lo;
        }
        let u: f64 = rng.random();
        (lo.ln() + u * (hi / lo).ln()).exp()
    }
}

/// Standard complex normal `CN(0, 1)` draw.
pub fn cn_standard<R: Rng>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws AF gains for a fixed support: `CN(0, 1/v_L)` on the support with a
/// per-element log-uniform `v_L`, `CN(0, 1/v_S)` elsewhere.
pub fn sample_channel(
    support: &[bool],
    p: usize,
    spec: &ChannelSpec,
    seed: u64,
) -> Result<ChannelRealization> {
    spec.validate()?;
    let n = support.len();
    let columns: Vec<(Vec<Complex64>, Vec<f64>)> = (0..p)
        .into_par_iter()
        .map(|pi| {
            let mut rng = rng::stream(seed, &[GAIN_STREAM, pi as u64]);
            let mut gains = Vec::with_capacity(n);
            let mut prec = Vec::with_capacity(n);
            for &on in support {
                let z = cn_standard(&mut rng);
                if on {
                    let v = spec.draw_precision(&mut rng);
                    gains.push(z / v.sqrt());
                    prec.push(v);
                } else {
                    gains.push(z / spec.vs.sqrt());
                    prec.push(f64::NAN);
                }
            }
            (gains, prec)
        })
        .collect();
    let mut gains = Vec::with_capacity(n * p);
    let mut precisions = Vec::with_capacity(n * p);
    for (g, v) in columns {
        gains.extend(g);
        precisions.extend(v);
    }
    let out = ChannelRealization {
        n,
        p,
        gains,
        support: Some(support.to_vec()),
        precisions_l: Some(precisions),
        precision_s: Some(vec![spec.vs; p]),
    };
    out.check_common_support()?;
    Ok(out)
}

/// Noisy pilot observations, one length-`M` vector per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub y: Vec<Vec<Complex64>>,
    pub noise_variance: f64,
}

fn check_pilots(channel: &ChannelRealization, pilots: &[PilotMatrix]) -> Result<()> {
    if pilots.len() != channel.p {
        return Err(Error::Dimension(format!(
            "{} pilot matrices for {} subcarriers",
            pilots.len(),
            channel.p
        )));
    }
    if let Some(a) = pilots.iter().find(|a| a.n() != channel.n) {
        return Err(Error::Dimension(format!(
            "pilot matrix has N={} but channel has N={}",
            a.n(),
            channel.n
        )));
    }
    Ok(())
}

/// `y_p = A_p h_p + w_p` with `w ~ CN(0, sigma2 I)`.
pub fn synthesize_with_noise_variance(
    channel: &ChannelRealization,
    pilots: &[PilotMatrix],
    sigma2: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    check_pilots(channel, pilots)?;
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(Error::Config(format!("noise variance must be >= 0, got {sigma2}")));
    }
    let sd = sigma2.sqrt();
    let y = pilots
        .par_iter()
        .enumerate()
        .map(|(pi, a)| {
            let mut y = a.apply(channel.subcarrier(pi));
            if sd > 0.0 {
                let mut rng = rng::stream(seed, &[NOISE_STREAM, pi as u64]);
                for v in y.iter_mut() {
                    *v += cn_standard(&mut rng) * sd;
                }
            }
            y
        })
        .collect();
    Ok(MeasurementSet {
        y,
        noise_variance: sigma2,
    })
}

/// Measurements at a target SNR, defined on the noiseless pilot outputs:
/// `SNR = ‖A H‖² / (P M σ²)`.
pub fn synthesize_measurements(
    channel: &ChannelRealization,
    pilots: &[PilotMatrix],
    snr_db: f64,
    seed: u64,
) -> Result<MeasurementSet> {
    check_pilots(channel, pilots)?;
    let (energy, count) = pilots
        .iter()
        .enumerate()
        .map(|(pi, a)| {
            let y = a.apply(channel.subcarrier(pi));
            (y.iter().map(|v| v.norm_sqr()).sum::<f64>(), y.len())
        })
        .fold((0.0, 0usize), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    if count == 0 || energy <= 0.0 {
        return Err(Error::Numeric("zero signal power; SNR undefined".into()));
    }
    let snr = 10f64.powf(snr_db / 10.0);
    let sigma2 = energy / count as f64 / snr;
    synthesize_with_noise_variance(channel, pilots, sigma2, seed)
}

/// Direction of the angular transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `h_a = Bᴴ h_f`.
    ToAngle,
    /// `h_f = B h_a`.
    ToFrequency,
}

/// Unitary DFT between the antenna (frequency-domain) and angular
/// representations, with `B` the unitary DFT matrix.
pub fn angle_transform(h: &[Complex64], direction: Direction) -> Vec<Complex64> {
    let n = h.len();
    if n == 0 {
        return Vec::new();
    }
    let plan = pilots::plans(n);
    let mut buf = h.to_vec();
    match direction {
        Direction::ToAngle => plan.inverse.process(&mut buf),
        Direction::ToFrequency => plan.forward.process(&mut buf),
    }
    let scale = 1.0 / (n as f64).sqrt();
    buf.iter_mut().for_each(|v| *v *= scale);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_limits() {
        let s = sample_support(9, 1.0 - 1e-15, 1.0 - 1e-15, 3).unwrap();
        let want: Vec<bool> = (0..9).map(|i| i % 2 == 0).collect();
        assert_eq!(s, want);
        let s = sample_support(50, 1e-15, 0.5, 3).unwrap();
        assert!(s.iter().all(|&x| !x));
        assert!(sample_support(4, 0.0, 0.5, 1).is_err());
        assert!(sample_support(4, 0.5, 1.0, 1).is_err());
    }

    #[test]
    fn support_transition_frequencies() {
        let (p10, p01) = (0.05, 0.2);
        let s = sample_support(1_000_000, p10, p01, 11).unwrap();
        let (mut n0, mut n01, mut n1, mut n10) = (0usize, 0usize, 0usize, 0usize);
        for w in s.windows(2) {
            if w[0] {
                n1 += 1;
                if !w[1] {
                    n10 += 1;
                }
            } else {
                n0 += 1;
                if w[1] {
                    n01 += 1;
                }
            }
        }
        let f10 = n01 as f64 / n0 as f64;
        let f01 = n10 as f64 / n1 as f64;
        let se10 = (p10 * (1.0 - p10) / n0 as f64).sqrt();
        let se01 = (p01 * (1.0 - p01) / n1 as f64).sqrt();
        assert!((f10 - p10).abs() < 3.0 * se10, "p10 {f10}");
        assert!((f01 - p01).abs() < 3.0 * se01, "p01 {f01}");
    }

    #[test]
    fn support_fraction_matches_stationary_law() {
        let (p10, p01) = (0.05, 0.2);
        let lambda = stationary_activation(p10, p01);
        assert!((lambda - 0.2).abs() < 1e-15);
        let mut on = 0usize;
        let mut total = 0usize;
        // long chains: s_1 starts below the stationary law
        for seed in 0..1000 {
            let s = sample_support(2048, p10, p01, seed).unwrap();
            on += s.iter().filter(|&&x| x).count();
            total += s.len();
        }
        let frac = on as f64 / total as f64;
        assert!((frac - lambda).abs() / lambda < 0.02, "fraction {frac}");
    }

    #[test]
    fn near_zero_power() {
        let support = vec![false; 1000];
        let ch = sample_channel(&support, 100, &ChannelSpec::default(), 5).unwrap();
        let power = ch.energy() / ch.gains.len() as f64;
        assert!((power - 0.01).abs() / 0.01 < 0.05, "power {power}");
    }

    #[test]
    fn collapsed_spread_is_tsgm() {
        let spec = ChannelSpec {
            vl_spread: (1.0, 1.0),
            vs: 100.0,
        };
        let support = vec![true; 16];
        let ch = sample_channel(&support, 4, &spec, 1).unwrap();
        assert!(ch.precisions_l.unwrap().iter().all(|&v| v == 1.0));
        assert_eq!(spec.mean_large_variance(), 1.0);
    }

    #[test]
    fn generation_is_reproducible_and_common_support() {
        let s = sample_support(64, 0.05, 0.2, 9).unwrap();
        let a = sample_channel(&s, 8, &ChannelSpec::default(), 21).unwrap();
        let b = sample_channel(&s, 8, &ChannelSpec::default(), 21).unwrap();
        assert_eq!(a.gains, b.gains);
        a.check_common_support().unwrap();
        let c = sample_channel(&s, 8, &ChannelSpec::default(), 22).unwrap();
        assert_ne!(a.gains, c.gains);
    }

    #[test]
    fn mean_large_variance_log_uniform() {
        let spec = ChannelSpec::default();
        let want = (10.0 - 0.1) / 100f64.ln();
        assert!((spec.mean_large_variance() - want).abs() < 1e-12);
    }

    #[test]
    fn angle_transform_properties() {
        let n = 16;
        let h: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let a = angle_transform(&h, Direction::ToAngle);
        let back = angle_transform(&a, Direction::ToFrequency);
        let err = h.iter().zip(&back).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        let e0: f64 = h.iter().map(|v| v.norm_sqr()).sum();
        let e1: f64 = a.iter().map(|v| v.norm_sqr()).sum();
        assert!((e0 - e1).abs() < 1e-12 * e0);

        let dc = vec![Complex64::new(2.0, 0.0); n];
        let a = angle_transform(&dc, Direction::ToAngle);
        assert!((a[0].norm() - 2.0 * (n as f64).sqrt()).abs() < 1e-12);
        assert!(a[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn noiseless_measurements_equal_ah() {
        let s = sample_support(32, 0.1, 0.3, 1).unwrap();
        let ch = sample_channel(&s, 3, &ChannelSpec::default(), 2).unwrap();
        let pilots: Vec<_> = (0..3).map(|i| make_pdft_rp(32, 12, i).unwrap()).collect();
        let m = synthesize_with_noise_variance(&ch, &pilots, 0.0, 3).unwrap();
        for (pi, y) in m.y.iter().enumerate() {
            assert_eq!(*y, pilots[pi].apply(ch.subcarrier(pi)));
        }
    }

    #[test]
    fn snr_calibration() {
        // Per-sample noise power tracks per-sample signal power at 0 dB.
        let n = 128;
        let mut sig = 0.0;
        let mut noise = 0.0;
        for trial in 0..200u64 {
            let s = sample_support(n, 0.05, 0.2, trial).unwrap();
            let ch = sample_channel(&s, 1, &ChannelSpec::default(), trial + 1000).unwrap();
            let a = make_pdft_rp(n, 51, trial).unwrap();
            let clean = a.apply(ch.subcarrier(0));
            let m = synthesize_measurements(&ch, std::slice::from_ref(&a), 0.0, trial).unwrap();
            sig += clean.iter().map(|v| v.norm_sqr()).sum::<f64>();
            noise += m.y[0]
                .iter()
                .zip(&clean)
                .map(|(y, c)| (y - c).norm_sqr())
                .sum::<f64>();
        }
        assert!((noise / sig - 1.0).abs() < 0.03, "ratio {}", noise / sig);
    }

    #[test]
    fn doubling_noise_halves_snr() {
        let s = sample_support(32, 0.1, 0.3, 1).unwrap();
        let ch = sample_channel(&s, 2, &ChannelSpec::default(), 2).unwrap();
        let pilots: Vec<_> = (0..2).map(|i| make_pdft_rp(32, 12, i).unwrap()).collect();
        let a = synthesize_measurements(&ch, &pilots, 10.0, 3).unwrap();
        let b = synthesize_measurements(&ch, &pilots, 10.0 - 10.0 * 2f64.log10(), 3).unwrap();
        assert!((b.noise_variance / a.noise_variance - 2.0).abs() < 1e-12);
    }
}
