//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hmp_core::engine::{EdgeTag, Entry, FactorGraph, Family, Potential, Term};
use hmp_core::Complex64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cn<R: Rng>(r: &mut R, var: f64) -> Complex64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = r.sample(StandardNormal);
    let im: f64 = r.sample(StandardNormal);
    Complex64::new(re, im) * s
}

// ---------------------------------------------------------------------------
// Markov support chain by enumeration

/// Support chain with unnormalised transition weights `w[from][to]`,
/// first-state weights and per-position evidence `[weight of 0, weight of 1]`.
pub struct Chain {
    pub first: [f64; 2],
    pub w: [[f64; 2]; 2],
    pub evidence: Vec<[f64; 2]>,
}

impl Chain {
    /// Weights from `exp⟨ln p⟩` of the Beta beliefs `p10 ~ Beta(e, f)` and
    /// `p01 ~ Beta(c, d)`.
    pub fn from_beta(e: f64, f: f64, c: f64, d: f64, evidence: Vec<[f64; 2]>) -> Self {
        use statrs::function::gamma::digamma;
        let p10 = (digamma(e) - digamma(e + f)).exp();
        let q10 = (digamma(f) - digamma(e + f)).exp();
        let p01 = (digamma(c) - digamma(c + d)).exp();
        let q01 = (digamma(d) - digamma(c + d)).exp();
        Self {
            first: [q10 / (p10 + q10), p10 / (p10 + q10)],
            w: [[q10, p10], [p01, q01]],
            evidence,
        }
    }

    /// Unnormalised weight of states `s` on positions `start..start + s.len()`;
    /// `first` is applied to the first of them.
    fn weight(&self, start: usize, s: &[usize], first: [f64; 2]) -> f64 {
        let mut w = first[s[0]];
        for (i, &x) in s.iter().enumerate() {
            w *= self.evidence[start + i][x];
            if i > 0 {
                w *= self.w[s[i - 1]][x];
            }
        }
        w
    }

    fn for_each(len: usize, mut f: impl FnMut(&[usize])) {
        let mut s = vec![0; len];
        for code in 0..1usize << len {
            for (i, x) in s.iter_mut().enumerate() {
                *x = (code >> (len - 1 - i)) & 1;
            }
            f(&s);
        }
    }

    fn n(&self) -> usize {
        self.evidence.len()
    }

    /// `P(s_n = 1 | evidence up to n)` for every n.
    pub fn filtered(&self) -> Vec<f64> {
        (0..self.n())
            .map(|n| {
                let (mut z, mut one) = (0.0, 0.0);
                Self::for_each(n + 1, |s| {
                    let w = self.weight(0, s, self.first);
                    z += w;
                    if s[n] == 1 {
                        one += w;
                    }
                });
                one / z
            })
            .collect()
    }

    /// `P(s_n = 1 | evidence from n on)` with a flat start at n.
    pub fn backward(&self) -> Vec<f64> {
        let n_all = self.n();
        (0..n_all)
            .map(|n| {
                let (mut z, mut one) = (0.0, 0.0);
                Self::for_each(n_all - n, |s| {
                    let w = self.weight(n, s, [1.0, 1.0]);
                    z += w;
                    if s[0] == 1 {
                        one += w;
                    }
                });
                one / z
            })
            .collect()
    }

    /// Full-chain marginals `P(s_n = 1)` and pair marginals ordered
    /// `[(s_n, s_{n-1}) = 00, 01, 10, 11]` for n = 1..N−1.
    pub fn smoothed(&self) -> (Vec<f64>, Vec<[f64; 4]>) {
        let n = self.n();
        let mut z = 0.0;
        let mut one = vec![0.0; n];
        let mut pairs = vec![[0.0; 4]; n.saturating_sub(1)];
        Self::for_each(n, |s| {
            let w = self.weight(0, s, self.first);
            z += w;
            for i in 0..n {
                if s[i] == 1 {
                    one[i] += w;
                }
                if i > 0 {
                    pairs[i - 1][2 * s[i] + s[i - 1]] += w;
                }
            }
        });
        one.iter_mut().for_each(|x| *x /= z);
        pairs.iter_mut().flatten().for_each(|x| *x /= z);
        (one, pairs)
    }
}

/// Spike-and-slab evidence per position: the observations `h[p·N + n]`
/// are `CN(0, v_p)` under the spike and `CN(0, v_p + slab)` under the slab.
pub fn spike_slab_evidence(h: &[Complex64], n: usize, v: &[f64], slab: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|i| {
            // ratio only: common factors cancel, kept in log form
            let mut l0 = 0.0;
            let mut l1 = 0.0;
            for (p, &vp) in v.iter().enumerate() {
                let a = h[p * n + i].norm_sqr();
                l0 += -vp.ln() - a / vp;
                l1 += -(vp + slab).ln() - a / (vp + slab);
            }
            let m = l0.max(l1);
            [(l0 - m).exp(), (l1 - m).exp()]
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dense LMMSE

/// Dense `M × N` pilot matrix: row r, column perm[i] holds
/// `phase[i]·exp(−2πj r i / N)/√N`.
pub fn dense_pilot(n: usize, rows: &[usize], perm: &[usize], phases: &[Complex64]) -> DMatrix<Complex64> {
    let mut a = DMatrix::from_element(rows.len(), n, Complex64::new(0.0, 0.0));
    for (ri, &r) in rows.iter().enumerate() {
        for i in 0..n {
            let ang = -std::f64::consts::TAU * (r * i) as f64 / n as f64;
            a[(ri, perm[i])] = phases[i] * Complex64::from_polar(1.0 / (n as f64).sqrt(), ang);
        }
    }
    a
}

/// Posterior mean and average posterior variance of `h ~ CN(h_pri, v I)`
/// observed through `y = A h + CN(0, σ² I)`, by a dense solve.
pub fn dense_lmmse(
    a: &DMatrix<Complex64>,
    y: &[Complex64],
    h_pri: &[Complex64],
    v: f64,
    sigma2: f64,
) -> (Vec<Complex64>, f64) {
    let n = a.ncols();
    let ah = a.adjoint();
    let prec = &ah * a / Complex64::new(sigma2, 0.0)
        + DMatrix::<Complex64>::identity(n, n) / Complex64::new(v, 0.0);
    let cov = prec.try_inverse().expect("invertible");
    let rhs = &ah * DVector::from_column_slice(y) / Complex64::new(sigma2, 0.0)
        + DVector::from_column_slice(h_pri) / Complex64::new(v, 0.0);
    let mean = &cov * rhs;
    let avg_var = cov.diagonal().iter().map(|c| c.re).sum::<f64>() / n as f64;
    (mean.iter().copied().collect(), avg_var)
}

// ---------------------------------------------------------------------------
// Toy factor graphs

fn random_table<R: Rng>(r: &mut R, len: usize) -> Potential {
    Potential::log_table((0..len).map(|_| r.random_range(-2.0..2.0)).collect())
}

/// Random tree of discrete variables with unary and pairwise tables and
/// possibly one ternary table; every edge tagged `tag`.
pub fn random_tree(seed: u64, tag: EdgeTag) -> FactorGraph {
    let mut r = rng(seed);
    let mut g = FactorGraph::new();
    let nv = r.random_range(3..=6);
    let sizes: Vec<usize> = (0..nv).map(|_| r.random_range(2..=3)).collect();
    let vars: Vec<_> = (0..nv).map(|i| g.add_var(format!("x{i}"), Family::Discrete(sizes[i]))).collect();
    for i in 0..nv {
        if r.random_bool(0.7) {
            g.add_factor(format!("u{i}"), &[(vars[i], tag)], random_table(&mut r, sizes[i])).unwrap();
        }
    }
    let mut i = 1;
    while i < nv {
        if i + 1 < nv && r.random_bool(0.3) {
            let parent = r.random_range(0..i);
            let len = sizes[parent] * sizes[i] * sizes[i + 1];
            g.add_factor(
                format!("t{i}"),
                &[(vars[parent], tag), (vars[i], tag), (vars[i + 1], tag)],
                random_table(&mut r, len),
            )
            .unwrap();
            i += 2;
        } else {
            let parent = r.random_range(0..i);
            let len = sizes[parent] * sizes[i];
            g.add_factor(format!("f{i}"), &[(vars[parent], tag), (vars[i], tag)], random_table(&mut r, len))
                .unwrap();
            i += 1;
        }
    }
    g
}

/// Exact marginals of the discrete variables of a graph whose potentials
/// are plain tables.
pub fn exact_marginals(g: &FactorGraph) -> Vec<Vec<f64>> {
    let sizes: Vec<usize> = g
        .vars()
        .iter()
        .map(|v| match v.family {
            Family::Discrete(k) => k,
            _ => panic!("discrete graphs only"),
        })
        .collect();
    let total: usize = sizes.iter().product();
    let mut logs = Vec::with_capacity(total);
    let mut x = vec![0; sizes.len()];
    for code in 0..total {
        let mut c = code;
        for i in (0..sizes.len()).rev() {
            x[i] = c % sizes[i];
            c /= sizes[i];
        }
        let mut l = 0.0;
        for f in g.factors() {
            let mut idx = 0;
            for &v in &f.args {
                idx = idx * sizes[v] + x[v];
            }
            l += f.potential.entries[idx].constant;
        }
        logs.push((l, x.clone()));
    }
    let m = logs.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let mut marg: Vec<Vec<f64>> = sizes.iter().map(|&k| vec![0.0; k]).collect();
    let mut z = 0.0;
    for (l, x) in &logs {
        let w = (l - m).exp();
        z += w;
        for (v, &xv) in x.iter().enumerate() {
            marg[v][xv] += w;
        }
    }
    marg.iter_mut().flatten().for_each(|p| *p /= z);
    marg
}

/// Random hybrid graph: discrete variables with priors feeding one factor
/// `g(x.., v)` whose BP side is the discrete variables and whose MF side is
/// a Gamma precision `v` (and sometimes one more discrete variable).
/// Configurations are either "active", a complex Gaussian observation with
/// precision `v`, or "inactive", a fixed-precision Gaussian.
pub fn random_hybrid(seed: u64) -> FactorGraph {
    let mut r = rng(seed);
    let mut g = FactorGraph::new();
    let nb = r.random_range(1..=2);
    let mut args = Vec::new();
    for i in 0..nb {
        let k = r.random_range(2..=3);
        let x = g.add_var(format!("b{i}"), Family::Discrete(k));
        g.add_factor(format!("pb{i}"), &[(x, EdgeTag::Bp)], random_table(&mut r, k)).unwrap();
        args.push((x, EdgeTag::Bp, k));
    }
    if r.random_bool(0.5) {
        let x = g.add_var("m", Family::Discrete(2));
        g.add_factor("pm", &[(x, EdgeTag::Bp)], random_table(&mut r, 2)).unwrap();
        args.push((x, EdgeTag::Mf, 2));
    }
    // a BP chain partner for the first discrete variable
    if r.random_bool(0.5) {
        let k0 = args[0].2;
        let y = g.add_var("c", Family::Discrete(2));
        g.add_factor("fc", &[(args[0].0, EdgeTag::Bp), (y, EdgeTag::Bp)], random_table(&mut r, 2 * k0))
            .unwrap();
    }
    let v = g.add_var("v", Family::Gamma);
    let (a0, b0) = (r.random_range(1.0..3.0), r.random_range(0.5..2.0));
    g.add_factor(
        "pv",
        &[(v, EdgeTag::Mf)],
        Potential::new(vec![Entry {
            constant: 0.0,
            terms: vec![
                Term { coeff: a0 - 1.0, stats: vec![(0, 0)] },
                Term { coeff: -b0, stats: vec![(0, 1)] },
            ],
        }]),
    )
    .unwrap();
    let vpos = args.len();
    let count: usize = args.iter().map(|a| a.2).product();
    let entries = (0..count)
        .map(|_| {
            let h2: f64 = r.random_range(0.01..3.0);
            if r.random_bool(0.6) {
                Entry {
                    constant: -std::f64::consts::PI.ln(),
                    terms: vec![
                        Term { coeff: 1.0, stats: vec![(vpos, 0)] },
                        Term { coeff: -h2, stats: vec![(vpos, 1)] },
                    ],
                }
            } else {
                let prec: f64 = r.random_range(5.0..50.0);
                Entry {
                    constant: -std::f64::consts::PI.ln() + prec.ln() - prec * h2,
                    terms: vec![],
                }
            }
        })
        .collect();
    let mut fargs: Vec<_> = args.iter().map(|a| (a.0, a.1)).collect();
    fargs.push((v, EdgeTag::Mf));
    g.add_factor("g", &fargs, Potential::new(entries)).unwrap();
    g
}
