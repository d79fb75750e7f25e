use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::rng;

const PILOT_STREAM: u64 = 0x5049_4c54;

#[derive(Clone)]
pub(crate) struct FftPlans {
    pub forward: Arc<dyn Fft<f64>>,
    pub inverse: Arc<dyn Fft<f64>>,
}

/// Shared FFT plans keyed by length.
pub(crate) fn plans(n: usize) -> FftPlans {
    static CACHE: OnceLock<Mutex<HashMap<usize, FftPlans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            FftPlans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            }
        })
        .clone()
}

/// Row-orthonormal pilot matrix `A = S F Θ`.
///
/// `Θ` permutes and phase-rotates the input, `F` is the unitary `N`-point DFT
/// and `S` keeps the rows listed in `rows`. The matrix is never formed; all
/// products go through the FFT.
#[derive(Clone)]
pub struct PilotMatrix {
    n: usize,
    rows: Vec<usize>,
    perm: Vec<usize>,
    phases: Vec<Complex64>,
    plans: FftPlans,
}

impl fmt::Debug for PilotMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PilotMatrix")
            .field("n", &self.n)
            .field("m", &self.rows.len())
            .finish_non_exhaustive()
    }
}

/// Draws a PDFT-RP pilot matrix with `M < N` rows.
pub fn make_pdft_rp(n: usize, m: usize, seed: u64) -> Result<PilotMatrix> {
    if m >= n {
        return Err(Error::Config(format!(
            "pilot count M={m} must be smaller than N={n}"
        )));
    }
    if m == 0 {
        return Err(Error::Config("pilot count M must be positive".into()));
    }
    let mut rng = rng::stream(seed, &[PILOT_STREAM]);
    let mut rows = index::sample(&mut rng, n, m).into_vec();
    rows.sort_unstable();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let phases = (0..n)
        .map(|_| {
            let theta: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            Complex64::from_polar(1.0, theta)
        })
        .collect();
    PilotMatrix::from_parts(n, rows, perm, phases)
}

impl PilotMatrix {
    /// Builds a pilot matrix from an explicit descriptor. `M = N` is allowed.
    pub fn from_parts(
        n: usize,
        rows: Vec<usize>,
        perm: Vec<usize>,
        phases: Vec<Complex64>,
    ) -> Result<Self> {
        if n == 0 || rows.is_empty() || rows.len() > n {
            return Err(Error::Config(format!(
                "invalid pilot shape: {} rows for N={n}",
                rows.len()
            )));
        }
        if perm.len() != n || phases.len() != n {
            return Err(Error::Dimension("permutation and phases must have length N".into()));
        }
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n || std::mem::replace(&mut seen[r], true) {
                return Err(Error::Config(format!("row selector entry {r} repeated or out of range")));
            }
        }
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::Config("permutation is not a bijection".into()));
            }
        }
        if phases.iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
            return Err(Error::Config("phases must have unit modulus".into()));
        }
        Ok(Self {
            n,
            rows,
            perm,
            phases,
            plans: plans(n),
        })
    }

    /// Full unitary DFT with identity permutation and phases.
    pub fn dft(n: usize) -> Result<Self> {
        Self::from_parts(
            n,
            (0..n).collect(),
            (0..n).collect(),
            vec![Complex64::new(1.0, 0.0); n],
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn phases(&self) -> &[Complex64] {
        &self.phases
    }

    /// `A h`.
    pub fn apply(&self, h: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(h.len(), self.n, "input length must equal N");
        let mut buf: Vec<Complex64> = self
            .perm
            .iter()
            .zip(&self.phases)
            .map(|(&j, &ph)| ph * h[j])
            .collect();
        self.plans.forward.process(&mut buf);
        let scale = 1.0 / (self.n as f64).sqrt();
        self.rows.iter().map(|&r| buf[r] * scale).collect()
    }

    /// `Aᴴ r`.
    pub fn adjoint(&self, r: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(r.len(), self.rows.len(), "input length must equal M");
        let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
        for (&row, &v) in self.rows.iter().zip(r) {
            buf[row] = v;
        }
        self.plans.inverse.process(&mut buf);
        let scale = 1.0 / (self.n as f64).sqrt();
        let mut out = vec![Complex64::new(0.0, 0.0); self.n];
        for ((&j, &ph), &v) in self.perm.iter().zip(&self.phases).zip(&buf) {
            out[j] = ph.conj() * v * scale;
        }
        out
    }

    /// Dense `M × N` matrix, row-major. Test and diagnostic use only.
    pub fn dense(&self) -> Vec<Vec<Complex64>> {
        let n = self.n as f64;
        self.rows
            .iter()
            .map(|&r| {
                let mut row = vec![Complex64::new(0.0, 0.0); self.n];
                for (i, (&j, &ph)) in self.perm.iter().zip(&self.phases).enumerate() {
                    let angle = -std::f64::consts::TAU * ((r * i) % self.n) as f64 / n;
                    row[j] = Complex64::from_polar(1.0 / n.sqrt(), angle) * ph;
                }
                row
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::cn_standard;

    fn gram_error(a: &PilotMatrix) -> f64 {
        let d = a.dense();
        let mut worst = 0.0f64;
        for (i, ri) in d.iter().enumerate() {
            for (j, rj) in d.iter().enumerate() {
                let dot: Complex64 = ri.iter().zip(rj).map(|(x, y)| x * y.conj()).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).norm());
            }
        }
        worst
    }

    #[test]
    fn rows_are_orthonormal() {
        for seed in 0..5 {
            let a = make_pdft_rp(24, 10, seed).unwrap();
            assert!(gram_error(&a) < 1e-12);
        }
    }

    #[test]
    fn full_dft_is_unitary() {
        let a = PilotMatrix::dft(12).unwrap();
        assert!(gram_error(&a) < 1e-12);
        let mut rng = rng::stream(1, &[]);
        let h: Vec<Complex64> = (0..12).map(|_| cn_standard(&mut rng)).collect();
        let back = a.adjoint(&a.apply(&h));
        let err = h.iter().zip(&back).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
    }

    #[test]
    fn matrix_free_matches_dense() {
        let a = make_pdft_rp(20, 7, 4).unwrap();
        let d = a.dense();
        let mut rng = rng::stream(2, &[]);
        let h: Vec<Complex64> = (0..20).map(|_| cn_standard(&mut rng)).collect();
        let y = a.apply(&h);
        for (k, row) in d.iter().enumerate() {
            let want: Complex64 = row.iter().zip(&h).map(|(x, y)| x * y).sum();
            assert!((want - y[k]).norm() < 1e-12);
        }
        let r: Vec<Complex64> = (0..7).map(|_| cn_standard(&mut rng)).collect();
        let z = a.adjoint(&r);
        for j in 0..20 {
            let want: Complex64 = (0..7).map(|k| d[k][j].conj() * r[k]).sum();
            assert!((want - z[j]).norm() < 1e-12);
        }
    }

    #[test]
    fn row_selection_energy_fraction() {
        let (n, m) = (64, 16);
        let a = make_pdft_rp(n, m, 3).unwrap();
        let mut rng = rng::stream(9, &[]);
        let draws = 10_000;
        let mut acc = 0.0;
        for _ in 0..draws {
            let h: Vec<Complex64> = (0..n).map(|_| cn_standard(&mut rng)).collect();
            let norm: f64 = h.iter().map(|v| v.norm_sqr()).sum();
            let y = a.apply(&h);
            acc += y.iter().map(|v| v.norm_sqr()).sum::<f64>() / norm;
        }
        let ratio = acc / draws as f64;
        let want = m as f64 / n as f64;
        assert!((ratio - want).abs() / want < 0.02, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(make_pdft_rp(8, 8, 0).is_err());
        assert!(make_pdft_rp(8, 9, 0).is_err());
        assert!(PilotMatrix::from_parts(3, vec![0, 0], vec![0, 1, 2], vec![Complex64::new(1.0, 0.0); 3]).is_err());
        assert!(PilotMatrix::from_parts(3, vec![0], vec![0, 0, 2], vec![Complex64::new(1.0, 0.0); 3]).is_err());
    }
}
