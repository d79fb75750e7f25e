//! Edge-typed factor-graph engine.
//!
//! Every edge carries a BP or MF tag. A factor sends BP messages on its BP
//! edges and MF messages on its MF edges; MF neighbours enter through their
//! beliefs and BP neighbours through their extrinsic messages, with the MF
//! side of a factor seeing the BP neighbours only through their combined
//! belief. Tagging everything BP gives sum-product, tagging everything MF
//! gives variational mean field.
//!
//! Continuous variables need a proper prior factor; they may only be joined
//! to multi-argument factors through MF edges.

mod combined;
mod graph;
mod rules;
mod stretch;

pub use combined::run_combined_bp_mf;
pub use graph::{EdgeTag, Entry, Factor, FactorGraph, FactorId, Family, Message, Potential, Term, Variable, VarId};
pub use rules::{factor_to_var, hmp_factor_to_bp_var, hmp_factor_to_mf_var, product_of_messages, variable_to_factor};
pub use stretch::{stretched_graph_equivalence_check, EquivalenceReport};

use crate::error::{Error, Result};

/// Update order within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Order {
    /// Every message is recomputed from the previous sweep's messages.
    #[default]
    Synchronous,
    /// Edges are visited one at a time and every message is used as soon as
    /// it is computed.
    Sequential,
}

/// Sweep order and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub tol: f64,
    pub max_sweeps: usize,
    pub order: Order,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_sweeps: 200,
            order: Order::Synchronous,
        }
    }
}

/// All edge messages of a graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub f2v: Vec<Message>,
    pub v2f: Vec<Message>,
}

/// Result of running a schedule.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub state: MessageState,
    pub sweeps: usize,
    pub converged: bool,
    /// Largest change of any factor-to-variable message in the last sweep.
    pub last_change: f64,
}

/// Shared sweep driver. `f2v_rule` computes one factor's outgoing message on
/// `slot` from that factor's incoming messages.
pub(crate) fn drive<R, V>(graph: &FactorGraph, schedule: Schedule, f2v_rule: R, v2f_rule: V) -> Result<RunReport>
where
    R: Fn(FactorId, usize, &[Message]) -> Result<Message>,
    V: Fn(VarId, FactorId, usize, &[Message]) -> Result<Message>,
{
    let mut state = MessageState {
        f2v: vec![Message::Flat; graph.num_edges()],
        v2f: vec![Message::Flat; graph.num_edges()],
    };
    // priors first so that continuous beliefs are proper from the start
    for (fid, f) in graph.factors.iter().enumerate() {
        if f.args.len() == 1 {
            state.f2v[graph.edge(fid, 0)] = f2v_rule(fid, 0, &[Message::Flat])?;
        }
    }
    let mut last_change = f64::INFINITY;
    for sweep in 1..=schedule.max_sweeps {
        let previous = state.f2v.clone();
        match schedule.order {
            Order::Synchronous => {
                for (fid, f) in graph.factors.iter().enumerate() {
                    for (slot, &v) in f.args.iter().enumerate() {
                        state.v2f[graph.edge(fid, slot)] = v2f_rule(v, fid, slot, &state.f2v)?;
                    }
                }
                let mut next = state.f2v.clone();
                for (fid, f) in graph.factors.iter().enumerate() {
                    let e0 = graph.edge(fid, 0);
                    let incoming = &state.v2f[e0..e0 + f.args.len()];
                    for slot in 0..f.args.len() {
                        next[e0 + slot] = f2v_rule(fid, slot, incoming)?;
                    }
                }
                state.f2v = next;
            }
            Order::Sequential => {
                for (fid, f) in graph.factors.iter().enumerate() {
                    let e0 = graph.edge(fid, 0);
                    for slot in 0..f.args.len() {
                        for (s, &v) in f.args.iter().enumerate() {
                            state.v2f[e0 + s] = v2f_rule(v, fid, s, &state.f2v)?;
                        }
                        state.f2v[e0 + slot] = f2v_rule(fid, slot, &state.v2f[e0..e0 + f.args.len()])?;
                    }
                }
            }
        }
        last_change = 0.0;
        for (fid, f) in graph.factors.iter().enumerate() {
            for (slot, &v) in f.args.iter().enumerate() {
                let e = graph.edge(fid, slot);
                let d = state.f2v[e].distance(&previous[e], graph.family(v));
                if !d.is_finite() {
                    return Err(Error::NonFinite {
                        iteration: sweep,
                        what: format!("message {} -> {}", f.name, graph.vars[v].name),
                    });
                }
                last_change = last_change.max(d);
            }
        }
        if last_change < schedule.tol {
            return Ok(RunReport {
                state,
                sweeps: sweep,
                converged: true,
                last_change,
            });
        }
    }
    Ok(RunReport {
        state,
        sweeps: schedule.max_sweeps,
        converged: false,
        last_change,
    })
}

/// Runs the hybrid rule.
pub fn run_hmp(graph: &FactorGraph, schedule: Schedule) -> Result<RunReport> {
    drive(
        graph,
        schedule,
        |f, slot, inc| factor_to_var(graph, f, slot, inc),
        |v, f, slot, f2v| variable_to_factor(graph, v, f, slot, f2v),
    )
}

/// Belief of a variable: the product of all its incoming messages.
pub fn belief(graph: &FactorGraph, state: &MessageState, var: VarId) -> Result<Message> {
    product_of_messages(graph, var, &state.f2v, None)
}

/// One more synchronous sweep from `state`; returns the largest change of a
/// factor-to-variable message. Used to check fixed points.
pub fn fixed_point_residual(graph: &FactorGraph, state: &MessageState) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut v2f = state.v2f.clone();
    for (fid, f) in graph.factors.iter().enumerate() {
        for (slot, &v) in f.args.iter().enumerate() {
            v2f[graph.edge(fid, slot)] = variable_to_factor(graph, v, fid, slot, &state.f2v)?;
        }
    }
    for (fid, f) in graph.factors.iter().enumerate() {
        let e0 = graph.edge(fid, 0);
        for (slot, &v) in f.args.iter().enumerate() {
            let m = factor_to_var(graph, fid, slot, &v2f[e0..e0 + f.args.len()])?;
            worst = worst.max(m.distance(&state.f2v[e0 + slot], graph.family(v)));
        }
    }
    Ok(worst)
}
