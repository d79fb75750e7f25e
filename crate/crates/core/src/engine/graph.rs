use crate::dist::DigammaMode;
use crate::error::{Error, Result};

pub type VarId = usize;
pub type FactorId = usize;

/// Message-passing rule attached to a factor-variable edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    Bp,
    Mf,
}

/// Domain of a variable.
///
/// Continuous families are handled through their sufficient statistics:
///
/// - `Gamma` over a precision `v > 0`: `(ln v, v)`,
/// - `Beta` over a probability `p`: `(ln p, ln(1 − p))`,
/// - `ComplexGaussian` over `h`: `(Re h, Im h, |h|²)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Discrete(usize),
    Gamma,
    Beta,
    ComplexGaussian,
}

impl Family {
    pub fn is_discrete(self) -> bool {
        matches!(self, Family::Discrete(_))
    }

    pub fn num_stats(self) -> usize {
        match self {
            Family::Discrete(_) => 0,
            Family::Gamma | Family::Beta => 2,
            Family::ComplexGaussian => 3,
        }
    }

    /// Expected sufficient statistics under the density `∝ exp⟨c, T(x)⟩`.
    /// `None` when the natural parameters do not define a proper density.
    pub fn expected_stats(self, natural: &[f64]) -> Option<Vec<f64>> {
        let psi = |x: f64| DigammaMode::Exact.eval(x);
        match self {
            Family::Discrete(_) => None,
            Family::Gamma => {
                let (shape, rate) = (natural[0] + 1.0, -natural[1]);
                (shape > 0.0 && rate > 0.0).then(|| vec![psi(shape) - rate.ln(), shape / rate])
            }
            Family::Beta => {
                let (a, b) = (natural[0] + 1.0, natural[1] + 1.0);
                (a > 0.0 && b > 0.0).then(|| {
                    let t = psi(a + b);
                    vec![psi(a) - t, psi(b) - t]
                })
            }
            Family::ComplexGaussian => {
                let prec = -natural[2];
                (prec > 0.0).then(|| {
                    let (mr, mi) = (natural[0] / (2.0 * prec), natural[1] / (2.0 * prec));
                    vec![mr, mi, mr * mr + mi * mi + 1.0 / prec]
                })
            }
        }
    }
}

/// A message or belief.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    /// Uniform (finite domain) or improper flat (continuous domain).
    Flat,
    /// Normalised probability vector.
    Discrete(Vec<f64>),
    /// Natural parameters of a continuous family, in the order of
    /// [`Family`]'s statistics.
    Natural(Vec<f64>),
}

impl Message {
    /// Probability of value `x` on a domain of size `k`.
    pub(crate) fn prob(&self, x: usize, k: usize) -> f64 {
        match self {
            Message::Discrete(p) => p[x],
            _ => 1.0 / k as f64,
        }
    }

    pub(crate) fn natural(&self, family: Family) -> Vec<f64> {
        match self {
            Message::Natural(c) => c.clone(),
            _ => vec![0.0; family.num_stats()],
        }
    }

    /// Largest absolute difference between two messages of the same variable.
    pub fn distance(&self, other: &Message, family: Family) -> f64 {
        match family {
            Family::Discrete(k) => (0..k)
                .map(|x| (self.prob(x, k) - other.prob(x, k)).abs())
                .fold(0.0, f64::max),
            _ => {
                let (a, b) = (self.natural(family), other.natural(family));
                a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            }
        }
    }
}

/// `coeff · ∏ T_stat(x_arg)` over continuous arguments, each used at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coeff: f64,
    /// `(argument position, statistic index)` pairs.
    pub stats: Vec<(usize, usize)>,
}

/// Log-potential for one configuration of the discrete arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    /// May be `-inf` for hard constraints.
    pub constant: f64,
    pub terms: Vec<Term>,
}

/// `ln f` as a table over the joint configurations of the discrete arguments
/// (mixed radix, first discrete argument most significant), each entry
/// multilinear in the statistics of the continuous arguments.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub entries: Vec<Entry>,
}

impl Potential {
    /// Purely discrete potential from its log-values.
    pub fn log_table(values: Vec<f64>) -> Self {
        Self {
            entries: values
                .into_iter()
                .map(|constant| Entry {
                    constant,
                    terms: Vec::new(),
                })
                .collect(),
        }
    }

    pub fn new(entries: Vec<Entry>) -> Self {
        Self { entries }
    }
}

#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub family: Family,
}

#[derive(Debug, Clone)]
pub struct Factor {
    pub name: String,
    pub args: Vec<VarId>,
    pub tags: Vec<EdgeTag>,
    pub potential: Potential,
}

/// Bipartite factor graph with one tag per edge.
#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    pub(crate) vars: Vec<Variable>,
    pub(crate) factors: Vec<Factor>,
    /// First edge index of each factor; edge `offset[f] + slot`.
    pub(crate) offset: Vec<usize>,
    /// `(factor, slot)` pairs for each variable.
    pub(crate) var_edges: Vec<Vec<(FactorId, usize)>>,
    pub(crate) num_edges: usize,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, family: Family) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            family,
        });
        self.var_edges.push(Vec::new());
        self.vars.len() - 1
    }

    /// Adds a factor; `args` pairs each argument with its edge tag.
    ///
    /// Continuous arguments may carry a BP tag only on single-argument
    /// factors (priors), where both rules coincide.
    pub fn add_factor(
        &mut self,
        name: impl Into<String>,
        args: &[(VarId, EdgeTag)],
        potential: Potential,
    ) -> Result<FactorId> {
        let name = name.into();
        let bad = |msg: String| Error::Config(format!("factor {name}: {msg}"));
        if args.is_empty() {
            return Err(bad("no arguments".into()));
        }
        let mut configs = 1usize;
        for (pos, &(v, tag)) in args.iter().enumerate() {
            let var = self.vars.get(v).ok_or_else(|| bad(format!("unknown variable {v}")))?;
            if args[..pos].iter().any(|&(u, _)| u == v) {
                return Err(bad(format!("variable {} appears twice", var.name)));
            }
            match var.family {
                Family::Discrete(k) => {
                    if k == 0 {
                        return Err(bad(format!("variable {} has an empty domain", var.name)));
                    }
                    configs *= k;
                }
                _ if tag == EdgeTag::Bp && args.len() > 1 => {
                    return Err(Error::Unsupported(format!(
                        "factor {name}: BP edge to continuous variable {} on a factor with other arguments",
                        var.name
                    )));
                }
                _ => {}
            }
        }
        if potential.entries.len() != configs {
            return Err(bad(format!(
                "potential has {} entries, expected {configs}",
                potential.entries.len()
            )));
        }
        for e in &potential.entries {
            if e.constant.is_nan() || e.constant == f64::INFINITY {
                return Err(bad("log-potential must be finite or -inf".into()));
            }
            for t in &e.terms {
                if !t.coeff.is_finite() {
                    return Err(bad("non-finite term coefficient".into()));
                }
                for (i, &(pos, stat)) in t.stats.iter().enumerate() {
                    let fam = args
                        .get(pos)
                        .map(|&(v, _)| self.vars[v].family)
                        .ok_or_else(|| bad(format!("term refers to argument {pos}")))?;
                    if fam.is_discrete() || stat >= fam.num_stats() {
                        return Err(bad(format!("invalid statistic ({pos}, {stat})")));
                    }
                    if t.stats[..i].iter().any(|&(p, _)| p == pos) {
                        return Err(bad("term uses an argument twice".into()));
                    }
                }
            }
        }
        let id = self.factors.len();
        for (slot, &(v, _)) in args.iter().enumerate() {
            self.var_edges[v].push((id, slot));
        }
        self.offset.push(self.num_edges);
        self.num_edges += args.len();
        self.factors.push(Factor {
            name,
            args: args.iter().map(|a| a.0).collect(),
            tags: args.iter().map(|a| a.1).collect(),
            potential,
        });
        Ok(id)
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn edge(&self, factor: FactorId, slot: usize) -> usize {
        self.offset[factor] + slot
    }

    /// `(factor, slot)` pairs of the edges at a variable.
    pub fn edges_of(&self, var: VarId) -> &[(FactorId, usize)] {
        &self.var_edges[var]
    }

    pub fn family(&self, var: VarId) -> Family {
        self.vars[var].family
    }

    /// Retags one edge.
    pub fn set_tag(&mut self, factor: FactorId, slot: usize, tag: EdgeTag) -> Result<()> {
        let f = &self.factors[factor];
        if tag == EdgeTag::Bp && f.args.len() > 1 && !self.vars[f.args[slot]].family.is_discrete() {
            return Err(Error::Unsupported(format!(
                "factor {}: BP edge to a continuous variable",
                f.name
            )));
        }
        self.factors[factor].tags[slot] = tag;
        Ok(())
    }

    /// Retags every edge of the graph where allowed: continuous arguments of
    /// multi-argument factors stay MF.
    pub fn set_all_tags(&mut self, tag: EdgeTag) {
        for f in &mut self.factors {
            for (slot, &v) in f.args.iter().enumerate() {
                if tag == EdgeTag::Bp && f.args.len() > 1 && !self.vars[v].family.is_discrete() {
                    continue;
                }
                f.tags[slot] = tag;
            }
        }
    }
}

/// Mixed-radix enumeration of the discrete configurations of a factor.
pub(crate) struct Configs {
    /// Argument positions of the discrete arguments.
    pub positions: Vec<usize>,
    pub sizes: Vec<usize>,
    pub count: usize,
}

impl Configs {
    pub fn of(graph: &FactorGraph, factor: &Factor) -> Self {
        let mut positions = Vec::new();
        let mut sizes = Vec::new();
        for (pos, &v) in factor.args.iter().enumerate() {
            if let Family::Discrete(k) = graph.vars[v].family {
                positions.push(pos);
                sizes.push(k);
            }
        }
        let count = sizes.iter().product();
        Self {
            positions,
            sizes,
            count,
        }
    }

    /// Values of the discrete arguments for configuration `idx`, in the
    /// order of `positions`.
    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for i in (0..self.sizes.len()).rev() {
            out[i] = idx % self.sizes[i];
            idx /= self.sizes[i];
        }
        out
    }
}
