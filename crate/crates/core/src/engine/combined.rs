//! Plain combined BP-MF: every factor is either a BP factor or an MF factor.
//!
//! Written separately from the hybrid rules so the two can be checked
//! against each other.

use super::graph::{Configs, EdgeTag, FactorGraph, FactorId, Family, Message, VarId};
use super::{drive, RunReport, Schedule};
use crate::error::{Error, Result};

fn factor_kind(graph: &FactorGraph, fid: FactorId) -> Result<EdgeTag> {
    let f = &graph.factors[fid];
    if f.args.len() == 1 {
        return Ok(f.tags[0]);
    }
    let first = f.tags[0];
    if f.tags.iter().any(|&t| t != first) {
        return Err(Error::Unsupported(format!(
            "factor {} mixes BP and MF edges; combined BP-MF needs one rule per factor",
            f.name
        )));
    }
    Ok(first)
}

fn normalize(weights: Vec<f64>, name: &str) -> Result<Message> {
    let z: f64 = weights.iter().sum();
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::Unnormalizable { factor: name.into() });
    }
    Ok(Message::Discrete(weights.into_iter().map(|w| w / z).collect()))
}

/// Expected statistics of continuous argument `pos` under its incoming message.
fn stats_of(graph: &FactorGraph, fid: FactorId, pos: usize, incoming: &[Message]) -> Result<Vec<f64>> {
    let f = &graph.factors[fid];
    let fam = graph.vars[f.args[pos]].family;
    let nat = match &incoming[pos] {
        Message::Natural(c) => c.clone(),
        _ => vec![0.0; fam.num_stats()],
    };
    fam.expected_stats(&nat).ok_or_else(|| Error::Unnormalizable {
        factor: format!("{}: improper belief of {}", f.name, graph.vars[f.args[pos]].name),
    })
}

fn message_rule(graph: &FactorGraph, fid: FactorId, slot: usize, incoming: &[Message]) -> Result<Message> {
    let f = &graph.factors[fid];
    let kind = factor_kind(graph, fid)?;
    let cfg = Configs::of(graph, f);
    let target_fam = graph.vars[f.args[slot]].family;

    // expectations of all continuous arguments other than the target
    let mut stats: Vec<Option<Vec<f64>>> = vec![None; f.args.len()];
    for (pos, &v) in f.args.iter().enumerate() {
        if pos != slot && !graph.vars[v].family.is_discrete() {
            stats[pos] = Some(stats_of(graph, fid, pos, incoming)?);
        }
    }
    let prob = |pos: usize, x: usize| -> f64 {
        let k = match graph.vars[f.args[pos]].family {
            Family::Discrete(k) => k,
            _ => 1,
        };
        match &incoming[pos] {
            Message::Discrete(p) => p[x],
            _ => 1.0 / k as f64,
        }
    };
    // ln f of configuration idx, averaged over the continuous arguments,
    // with the target's statistic coefficients pulled out
    let log_f = |idx: usize| -> (f64, Vec<f64>) {
        let entry = &f.potential.entries[idx];
        let mut c0 = entry.constant;
        let mut coefs = vec![0.0; target_fam.num_stats()];
        for t in &entry.terms {
            let mut val = t.coeff;
            let mut target_stat = None;
            for &(pos, s) in &t.stats {
                if pos == slot {
                    target_stat = Some(s);
                } else {
                    val *= stats[pos].as_ref().expect("continuous argument")[s];
                }
            }
            match target_stat {
                Some(s) => coefs[s] += val,
                None => c0 += val,
            }
        }
        (c0, coefs)
    };

    match target_fam {
        Family::Discrete(k) => {
            let tpos = cfg.positions.iter().position(|&p| p == slot).expect("discrete target");
            match kind {
                EdgeTag::Bp => {
                    // sum-product in the probability domain, shifted by the max entry
                    let logs: Vec<f64> = (0..cfg.count).map(|i| log_f(i).0).collect();
                    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if shift == f64::NEG_INFINITY {
                        return Err(Error::Unnormalizable { factor: f.name.clone() });
                    }
                    let mut out = vec![0.0; k];
                    for (idx, l) in logs.iter().enumerate() {
                        let vals = cfg.decode(idx);
                        let mut w = (l - shift).exp();
                        for (j, &pos) in cfg.positions.iter().enumerate() {
                            if pos != slot {
                                w *= prob(pos, vals[j]);
                            }
                        }
                        out[vals[tpos]] += w;
                    }
                    normalize(out, &f.name)
                }
                EdgeTag::Mf => {
                    let mut acc = vec![0.0; k];
                    for idx in 0..cfg.count {
                        let vals = cfg.decode(idx);
                        let mut w = 1.0;
                        for (j, &pos) in cfg.positions.iter().enumerate() {
                            if pos != slot {
                                w *= prob(pos, vals[j]);
                            }
                        }
                        if w > 0.0 {
                            acc[vals[tpos]] += w * log_f(idx).0;
                        }
                    }
                    let shift = acc.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if !shift.is_finite() {
                        return Err(Error::Unnormalizable { factor: f.name.clone() });
                    }
                    normalize(acc.iter().map(|a| (a - shift).exp()).collect(), &f.name)
                }
            }
        }
        _ => {
            if kind == EdgeTag::Bp && f.args.len() > 1 {
                return Err(Error::Unsupported(format!(
                    "BP message to continuous variable from factor {}",
                    f.name
                )));
            }
            let mut nat = vec![0.0; target_fam.num_stats()];
            for idx in 0..cfg.count {
                let vals = cfg.decode(idx);
                let w: f64 = cfg
                    .positions
                    .iter()
                    .zip(&vals)
                    .map(|(&pos, &x)| prob(pos, x))
                    .product();
                if w > 0.0 {
                    for (n, c) in nat.iter_mut().zip(log_f(idx).1) {
                        *n += w * c;
                    }
                }
            }
            Ok(Message::Natural(nat))
        }
    }
}

/// Product of all messages into `var`, except the one from `(factor, slot)`
/// if given.
fn incoming_product(
    graph: &FactorGraph,
    var: VarId,
    f2v: &[Message],
    except: Option<(FactorId, usize)>,
) -> Result<Message> {
    let fam = graph.vars[var].family;
    let edges: Vec<usize> = graph.var_edges[var]
        .iter()
        .filter(|&&e| Some(e) != except)
        .map(|&(f, s)| graph.edge(f, s))
        .collect();
    match fam {
        Family::Discrete(k) => {
            let mut acc = vec![1.0; k];
            let mut any = false;
            for e in edges {
                if let Message::Discrete(p) = &f2v[e] {
                    any = true;
                    for (a, q) in acc.iter_mut().zip(p) {
                        *a *= q;
                    }
                    let m = acc.iter().copied().fold(0.0, f64::max);
                    if m > 0.0 {
                        acc.iter_mut().for_each(|a| *a /= m);
                    }
                }
            }
            if !any {
                return Ok(Message::Flat);
            }
            normalize(acc, &format!("belief of {}", graph.vars[var].name))
        }
        _ => {
            let mut acc = vec![0.0; fam.num_stats()];
            let mut any = false;
            for e in edges {
                if let Message::Natural(c) = &f2v[e] {
                    any = true;
                    for (a, x) in acc.iter_mut().zip(c) {
                        *a += x;
                    }
                }
            }
            Ok(if any { Message::Natural(acc) } else { Message::Flat })
        }
    }
}

fn n_rule(graph: &FactorGraph, var: VarId, fid: FactorId, slot: usize, f2v: &[Message]) -> Result<Message> {
    match factor_kind(graph, fid)? {
        EdgeTag::Bp => incoming_product(graph, var, f2v, Some((fid, slot))),
        EdgeTag::Mf => incoming_product(graph, var, f2v, None),
    }
}

/// Runs combined BP-MF on a graph whose factors each use a single rule.
pub fn run_combined_bp_mf(graph: &FactorGraph, schedule: Schedule) -> Result<RunReport> {
    for fid in 0..graph.factors.len() {
        factor_kind(graph, fid)?;
    }
    drive(
        graph,
        schedule,
        |f, slot, inc| message_rule(graph, f, slot, inc),
        |v, f, slot, f2v| n_rule(graph, v, f, slot, f2v),
    )
}
