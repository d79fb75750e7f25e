//! The hybrid message rules.

use super::graph::{Configs, EdgeTag, Entry, Factor, FactorGraph, FactorId, Family, Message, VarId};
use crate::dist::log_sum_exp;
use crate::error::{Error, Result};

/// Expected statistics of every continuous argument except `skip`, taken
/// under the incoming variable-to-factor messages.
fn continuous_expectations(
    graph: &FactorGraph,
    factor: &Factor,
    incoming: &[Message],
    skip: Option<usize>,
) -> Result<Vec<Option<Vec<f64>>>> {
    factor
        .args
        .iter()
        .enumerate()
        .map(|(pos, &v)| {
            let fam = graph.vars[v].family;
            if fam.is_discrete() || Some(pos) == skip {
                return Ok(None);
            }
            let nat = incoming[pos].natural(fam);
            fam.expected_stats(&nat).map(Some).ok_or_else(|| Error::Unnormalizable {
                factor: format!("{} (belief of {} is improper)", factor.name, graph.vars[v].name),
            })
        })
        .collect()
}

/// `⟨ln f⟩` of one entry with all continuous arguments averaged, except the
/// target whose statistic coefficients are returned separately.
fn entry_expectation(
    entry: &Entry,
    exps: &[Option<Vec<f64>>],
    target: Option<(usize, usize)>,
) -> (f64, Vec<f64>) {
    let mut coefs = vec![0.0; target.map_or(0, |t| t.1)];
    let mut constant = entry.constant;
    for term in &entry.terms {
        let mut c = term.coeff;
        let mut hit = None;
        for &(pos, stat) in &term.stats {
            if target.map(|t| t.0) == Some(pos) {
                hit = Some(stat);
            } else {
                c *= exps[pos].as_ref().map_or(0.0, |e| e[stat]);
            }
        }
        match hit {
            Some(stat) => coefs[stat] += c,
            None => constant += c,
        }
    }
    (constant, coefs)
}

/// `w · L` with the convention `0 · (−∞) = 0`.
#[inline]
fn weighted(w: f64, l: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * l
    }
}

fn normalize_log(logs: Vec<f64>, factor: &Factor) -> Result<Message> {
    let z = log_sum_exp(&logs);
    if !z.is_finite() {
        return Err(Error::Unnormalizable {
            factor: factor.name.clone(),
        });
    }
    Ok(Message::Discrete(logs.iter().map(|l| (l - z).exp()).collect()))
}

/// Precomputed view of one factor with its incoming messages.
struct View<'a> {
    graph: &'a FactorGraph,
    factor: &'a Factor,
    incoming: &'a [Message],
    configs: Configs,
}

impl<'a> View<'a> {
    fn new(graph: &'a FactorGraph, factor_id: FactorId, incoming: &'a [Message]) -> Self {
        let factor = &graph.factors[factor_id];
        Self {
            graph,
            factor,
            incoming,
            configs: Configs::of(graph, factor),
        }
    }

    fn is_bp(&self, pos: usize) -> bool {
        self.factor.tags[pos] == EdgeTag::Bp
    }

    fn prob(&self, pos: usize, x: usize) -> f64 {
        self.incoming[pos].prob(x, self.configs.sizes[self.disc_index(pos)])
    }

    fn disc_index(&self, pos: usize) -> usize {
        self.configs.positions.iter().position(|&p| p == pos).expect("discrete argument")
    }

    /// Product of the MF-side discrete weights of a configuration, leaving
    /// out `skip`.
    fn mf_weight(&self, vals: &[usize], skip: Option<usize>) -> f64 {
        self.configs
            .positions
            .iter()
            .zip(vals)
            .filter(|(&pos, _)| !self.is_bp(pos) && Some(pos) != skip)
            .map(|(&pos, &x)| self.prob(pos, x))
            .product()
    }

    /// Sum of `ln n` over the BP discrete arguments of a configuration,
    /// leaving out `skip`.
    fn bp_log_weight(&self, vals: &[usize], skip: Option<usize>) -> f64 {
        self.configs
            .positions
            .iter()
            .zip(vals)
            .filter(|(&pos, _)| self.is_bp(pos) && Some(pos) != skip)
            .map(|(&pos, &x)| self.prob(pos, x).ln())
            .sum()
    }

    /// Index of the BP part of a configuration.
    fn bp_key(&self, vals: &[usize]) -> usize {
        self.configs
            .positions
            .iter()
            .zip(vals)
            .zip(&self.configs.sizes)
            .filter(|((&pos, _), _)| self.is_bp(pos))
            .fold(0, |acc, ((_, &x), &k)| acc * k + x)
    }

    fn bp_count(&self) -> usize {
        self.configs
            .positions
            .iter()
            .zip(&self.configs.sizes)
            .filter(|(&pos, _)| self.is_bp(pos))
            .map(|(_, &k)| k)
            .product()
    }

    /// `g(x_BP) = ⟨ln f⟩` over the MF beliefs (including every MF argument),
    /// indexed by the BP configuration.
    fn mf_averaged(&self, exps: &[Option<Vec<f64>>]) -> Vec<f64> {
        let mut g = vec![0.0; self.bp_count()];
        for idx in 0..self.configs.count {
            let vals = self.configs.decode(idx);
            let w = self.mf_weight(&vals, None);
            let (l, _) = entry_expectation(&self.factor.potential.entries[idx], exps, None);
            let key = self.bp_key(&vals);
            g[key] += weighted(w, l);
        }
        g
    }

    /// Normalised combined belief of the BP arguments: `exp⟨ln f⟩_MF · ∏ n`.
    fn combined_bp_belief(&self, exps: &[Option<Vec<f64>>]) -> Result<Vec<f64>> {
        let g = self.mf_averaged(exps);
        let mut logs = vec![f64::NEG_INFINITY; g.len()];
        let mut seen = vec![false; g.len()];
        for idx in 0..self.configs.count {
            let vals = self.configs.decode(idx);
            let key = self.bp_key(&vals);
            if !seen[key] {
                seen[key] = true;
                logs[key] = g[key] + self.bp_log_weight(&vals, None);
            }
        }
        match normalize_log(logs, self.factor)? {
            Message::Discrete(p) => Ok(p),
            _ => unreachable!(),
        }
    }
}

/// BP-rule message from `factor` to its argument at `slot`:
/// `Σ exp⟨ln f⟩_MF · ∏_{other BP} n`, normalised.
pub fn hmp_factor_to_bp_var(
    graph: &FactorGraph,
    factor: FactorId,
    slot: usize,
    incoming: &[Message],
) -> Result<Message> {
    let view = View::new(graph, factor, incoming);
    let f = view.factor;
    let fam = graph.vars[f.args[slot]].family;
    if f.tags[slot] != EdgeTag::Bp {
        return Err(Error::Config(format!("edge {}:{slot} is not a BP edge", f.name)));
    }
    let Family::Discrete(k) = fam else {
        // single-argument factor: both rules give the potential itself
        return natural_message(&view, slot, None);
    };
    let exps = continuous_expectations(graph, f, incoming, None)?;
    let g = view.mf_averaged(&exps);
    let ti = view.disc_index(slot);
    let mut per_value: Vec<Vec<f64>> = vec![Vec::new(); k];
    let mut seen = vec![false; g.len()];
    for idx in 0..view.configs.count {
        let vals = view.configs.decode(idx);
        let key = view.bp_key(&vals);
        if seen[key] {
            continue;
        }
        seen[key] = true;
        per_value[vals[ti]].push(g[key] + view.bp_log_weight(&vals, Some(slot)));
    }
    normalize_log(per_value.iter().map(|v| log_sum_exp(v)).collect(), f)
}

/// MF-rule message from `factor` to its argument at `slot`:
/// `exp⟨ln f⟩` under the combined BP belief and the other MF beliefs.
pub fn hmp_factor_to_mf_var(
    graph: &FactorGraph,
    factor: FactorId,
    slot: usize,
    incoming: &[Message],
) -> Result<Message> {
    let view = View::new(graph, factor, incoming);
    let f = view.factor;
    if f.tags[slot] != EdgeTag::Mf {
        return Err(Error::Config(format!("edge {}:{slot} is not an MF edge", f.name)));
    }
    let has_bp = f.tags.iter().any(|&t| t == EdgeTag::Bp);
    let b = if has_bp {
        let exps = continuous_expectations(graph, f, incoming, None)?;
        Some(view.combined_bp_belief(&exps)?)
    } else {
        None
    };
    match graph.vars[f.args[slot]].family {
        Family::Discrete(k) => {
            let exps = continuous_expectations(graph, f, incoming, Some(slot))?;
            let ti = view.disc_index(slot);
            let mut logs = vec![0.0; k];
            for idx in 0..view.configs.count {
                let vals = view.configs.decode(idx);
                let wb = b.as_ref().map_or(1.0, |b| b[view.bp_key(&vals)]);
                let w = wb * view.mf_weight(&vals, Some(slot));
                let (l, _) = entry_expectation(&f.potential.entries[idx], &exps, None);
                logs[vals[ti]] += weighted(w, l);
            }
            normalize_log(logs, f)
        }
        _ => natural_message(&view, slot, b.as_deref()),
    }
}

/// Natural-parameter message to a continuous argument.
fn natural_message(view: &View<'_>, slot: usize, b: Option<&[f64]>) -> Result<Message> {
    let f = view.factor;
    let fam = view.graph.vars[f.args[slot]].family;
    let exps = continuous_expectations(view.graph, f, view.incoming, Some(slot))?;
    let mut coefs = vec![0.0; fam.num_stats()];
    for idx in 0..view.configs.count {
        let vals = view.configs.decode(idx);
        let wb = b.map_or(1.0, |b| b[view.bp_key(&vals)]);
        let w = wb * view.mf_weight(&vals, None);
        if w == 0.0 {
            continue;
        }
        let (_, c) = entry_expectation(&f.potential.entries[idx], &exps, Some((slot, fam.num_stats())));
        for (acc, c) in coefs.iter_mut().zip(c) {
            *acc += w * c;
        }
    }
    Ok(Message::Natural(coefs))
}

/// Dispatches on the edge tag.
pub fn factor_to_var(
    graph: &FactorGraph,
    factor: FactorId,
    slot: usize,
    incoming: &[Message],
) -> Result<Message> {
    match graph.factors[factor].tags[slot] {
        EdgeTag::Bp => hmp_factor_to_bp_var(graph, factor, slot, incoming),
        EdgeTag::Mf => hmp_factor_to_mf_var(graph, factor, slot, incoming),
    }
}

/// Product of factor-to-variable messages at `var`, optionally leaving out
/// the edge `(factor, slot)`. Discrete results are normalised; an empty
/// product is [`Message::Flat`].
pub fn product_of_messages(
    graph: &FactorGraph,
    var: VarId,
    f2v: &[Message],
    except: Option<(FactorId, usize)>,
) -> Result<Message> {
    let fam = graph.vars[var].family;
    let msgs: Vec<&Message> = graph.var_edges[var]
        .iter()
        .filter(|&&e| Some(e) != except)
        .map(|&(f, s)| &f2v[graph.edge(f, s)])
        .filter(|m| !matches!(m, Message::Flat))
        .collect();
    if msgs.is_empty() {
        return Ok(Message::Flat);
    }
    match fam {
        Family::Discrete(k) => {
            let logs: Vec<f64> = (0..k)
                .map(|x| msgs.iter().map(|m| m.prob(x, k).ln()).sum())
                .collect();
            let z = log_sum_exp(&logs);
            if !z.is_finite() {
                return Err(Error::Unnormalizable {
                    factor: format!("belief of {}", graph.vars[var].name),
                });
            }
            Ok(Message::Discrete(logs.iter().map(|l| (l - z).exp()).collect()))
        }
        _ => {
            let mut acc = vec![0.0; fam.num_stats()];
            for m in msgs {
                for (a, c) in acc.iter_mut().zip(m.natural(fam)) {
                    *a += c;
                }
            }
            Ok(Message::Natural(acc))
        }
    }
}

/// Variable-to-factor message: on a BP edge the product of all other
/// incoming messages, on an MF edge the full belief.
pub fn variable_to_factor(
    graph: &FactorGraph,
    var: VarId,
    factor: FactorId,
    slot: usize,
    f2v: &[Message],
) -> Result<Message> {
    match graph.factors[factor].tags[slot] {
        EdgeTag::Bp => product_of_messages(graph, var, f2v, Some((factor, slot))),
        EdgeTag::Mf => product_of_messages(graph, var, f2v, None),
    }
}
