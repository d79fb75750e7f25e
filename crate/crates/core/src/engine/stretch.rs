//! Equivalence of the hybrid rule with combined BP-MF on a stretched graph.
//!
//! The BP neighbours `x_1..x_K` of the hybrid factor `f(x, h)` are tied to a
//! single variable `X'` by a hard-constraint BP factor `f_δ(x_1..x_K, X')`,
//! and `f` is replaced by the pure MF factor `f'(X', h) = f(x(X'), h)`.
//! Combined BP-MF on that graph has the same fixed point as the hybrid rule
//! on the original one.

use super::graph::{Configs, EdgeTag, Entry, FactorGraph, FactorId, Family, Message, Potential};
use super::{belief, run_combined_bp_mf, run_hmp, Schedule};
use crate::error::{Error, Result};

/// Outcome of [`stretched_graph_equivalence_check`].
#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    /// Largest absolute difference over all corresponding messages and beliefs.
    pub max_discrepancy: f64,
    /// Number of message / belief pairs compared.
    pub compared: usize,
    pub hmp_sweeps: usize,
    pub stretched_sweeps: usize,
    pub converged: bool,
    /// The factor that was stretched, if any factor mixes tags.
    pub hybrid_factor: Option<FactorId>,
}

struct Stretched {
    graph: FactorGraph,
    /// For each original edge, the edge carrying the corresponding message.
    edge_map: Vec<usize>,
}

fn stretch(graph: &FactorGraph, hybrid: FactorId) -> Result<Stretched> {
    let f = &graph.factors[hybrid];
    let bp_pos: Vec<usize> = (0..f.args.len()).filter(|&p| f.tags[p] == EdgeTag::Bp).collect();
    let mut bp_sizes = Vec::new();
    for &p in &bp_pos {
        match graph.vars[f.args[p]].family {
            Family::Discrete(k) => bp_sizes.push(k),
            _ => {
                return Err(Error::Unsupported(format!(
                    "stretching needs finite BP neighbours; {} is continuous",
                    graph.vars[f.args[p]].name
                )))
            }
        }
    }
    let joint: usize = bp_sizes.iter().product();

    let mut out = FactorGraph::new();
    for v in &graph.vars {
        out.add_var(v.name.clone(), v.family);
    }
    let combined = out.add_var(format!("{}'", f.name), Family::Discrete(joint));
    let mut edge_map = vec![usize::MAX; graph.num_edges()];
    for (fid, g) in graph.factors.iter().enumerate() {
        if fid == hybrid {
            continue;
        }
        let args: Vec<_> = g.args.iter().copied().zip(g.tags.iter().copied()).collect();
        let nf = out.add_factor(g.name.clone(), &args, g.potential.clone())?;
        for slot in 0..g.args.len() {
            edge_map[graph.edge(fid, slot)] = out.edge(nf, slot);
        }
    }

    // f_δ(x_1..x_K, X'): 0 when X' encodes (x_1..x_K), −∞ otherwise
    let mut delta_args: Vec<_> = bp_pos.iter().map(|&p| (f.args[p], EdgeTag::Bp)).collect();
    delta_args.push((combined, EdgeTag::Bp));
    let mut table = Vec::with_capacity(joint * joint);
    for xs in 0..joint {
        for xc in 0..joint {
            table.push(if xs == xc { 0.0 } else { f64::NEG_INFINITY });
        }
    }
    let delta = out.add_factor(format!("{}_delta", f.name), &delta_args, Potential::log_table(table))?;
    for (i, &p) in bp_pos.iter().enumerate() {
        edge_map[graph.edge(hybrid, p)] = out.edge(delta, i);
    }

    // f'(X', h): MF on every edge
    let mf_pos: Vec<usize> = (0..f.args.len()).filter(|&p| f.tags[p] == EdgeTag::Mf).collect();
    let mut new_args = vec![(combined, EdgeTag::Mf)];
    new_args.extend(mf_pos.iter().map(|&p| (f.args[p], EdgeTag::Mf)));
    // argument position in the old factor -> position in f'
    let mut remap = vec![usize::MAX; f.args.len()];
    for (i, &p) in mf_pos.iter().enumerate() {
        remap[p] = i + 1;
    }
    let old_cfg = Configs::of(graph, f);
    let mf_disc: Vec<(usize, usize)> = old_cfg
        .positions
        .iter()
        .zip(&old_cfg.sizes)
        .filter(|(p, _)| f.tags[**p] == EdgeTag::Mf)
        .map(|(&p, &k)| (p, k))
        .collect();
    let mf_joint: usize = mf_disc.iter().map(|d| d.1).product();
    let mut entries = Vec::with_capacity(joint * mf_joint);
    for xc in 0..joint {
        // decode X' into the BP values
        let mut bp_vals = vec![0; bp_pos.len()];
        let mut r = xc;
        for i in (0..bp_pos.len()).rev() {
            bp_vals[i] = r % bp_sizes[i];
            r /= bp_sizes[i];
        }
        for mc in 0..mf_joint {
            let mut mf_vals = vec![0; mf_disc.len()];
            let mut r = mc;
            for i in (0..mf_disc.len()).rev() {
                mf_vals[i] = r % mf_disc[i].1;
                r /= mf_disc[i].1;
            }
            // index of the same configuration in the old table
            let mut idx = 0;
            for (&p, &k) in old_cfg.positions.iter().zip(&old_cfg.sizes) {
                let x = match bp_pos.iter().position(|&q| q == p) {
                    Some(i) => bp_vals[i],
                    None => mf_vals[mf_disc.iter().position(|d| d.0 == p).expect("mf argument")],
                };
                idx = idx * k + x;
            }
            let old = &f.potential.entries[idx];
            entries.push(Entry {
                constant: old.constant,
                terms: old
                    .terms
                    .iter()
                    .map(|t| super::graph::Term {
                        coeff: t.coeff,
                        stats: t.stats.iter().map(|&(p, s)| (remap[p], s)).collect(),
                    })
                    .collect(),
            });
        }
    }
    let fnew = out.add_factor(format!("{}'", f.name), &new_args, Potential::new(entries))?;
    for (i, &p) in mf_pos.iter().enumerate() {
        edge_map[graph.edge(hybrid, p)] = out.edge(fnew, i + 1);
    }
    Ok(Stretched { graph: out, edge_map })
}

/// Runs the hybrid rule on `graph` and combined BP-MF on its stretched
/// version, both to convergence, and compares every factor-to-variable
/// message and every belief of the original variables.
///
/// The stretched graph takes one extra hop between the two sides of the
/// hybrid factor, so the comparison is made at the fixed points.
pub fn stretched_graph_equivalence_check(graph: &FactorGraph, schedule: Schedule) -> Result<EquivalenceReport> {
    let mixed: Vec<FactorId> = (0..graph.factors.len())
        .filter(|&fid| {
            let t = &graph.factors[fid].tags;
            t.iter().any(|&x| x == EdgeTag::Bp) && t.iter().any(|&x| x == EdgeTag::Mf)
        })
        .collect();
    if mixed.len() > 1 {
        return Err(Error::Unsupported(format!(
            "{} factors mix BP and MF edges; only one hybrid factor is supported",
            mixed.len()
        )));
    }
    let hybrid = mixed.first().copied();
    let stretched = match hybrid {
        Some(h) => stretch(graph, h)?,
        None => Stretched {
            graph: graph.clone(),
            edge_map: (0..graph.num_edges()).collect(),
        },
    };

    let a = run_hmp(graph, schedule)?;
    let b = run_combined_bp_mf(&stretched.graph, schedule)?;

    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for (fid, f) in graph.factors.iter().enumerate() {
        for (slot, &v) in f.args.iter().enumerate() {
            let e = graph.edge(fid, slot);
            let d = a.state.f2v[e].distance(&b.state.f2v[stretched.edge_map[e]], graph.family(v));
            worst = worst.max(d);
            compared += 1;
        }
    }
    for v in 0..graph.vars.len() {
        let ba = belief(graph, &a.state, v)?;
        let bb = belief(&stretched.graph, &b.state, v)?;
        let d = match (&ba, &bb, graph.family(v)) {
            (_, _, Family::Discrete(_)) => ba.distance(&bb, graph.family(v)),
            (Message::Natural(_), Message::Natural(_), fam) => ba.distance(&bb, fam),
            _ => 0.0,
        };
        worst = worst.max(d);
        compared += 1;
    }
    Ok(EquivalenceReport {
        max_discrepancy: worst,
        compared,
        hmp_sweeps: a.sweeps,
        stretched_sweeps: b.sweeps,
        converged: a.converged && b.converged,
        hybrid_factor: hybrid,
    })
}
