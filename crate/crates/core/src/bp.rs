//! Sum-product belief propagation on reduced messages.
//!
//! A reduced message is `m_{u->v} = m_{u->v}(1) / m_{u->v}(0)`. One sweep maps
//! every directed edge to `f_{u->v}(prod_{w in N(u) \ v} m_{w->u})`, where
//! `f_{u->v}` is the Mobius map built from `psi_u` and `psi_{u,v}`.

use crate::bethe::{self, EdgeMarginals, NodeMarginals};
use crate::error::{Error, Result};
use crate::model::{Graph, Model};
use crate::solver::{SolveResult, SolveTrace, TraceRecord};

/// Above this degree, cavity products are accumulated as sums of logs.
pub const LOG_SPACE_DEGREE: usize = 16;

/// Reduced messages, two per undirected edge, laid out by
/// [`Graph::directed_index`].
#[derive(Debug, Clone, PartialEq)]
pub struct MessageSet {
    values: Vec<f64>,
}

impl MessageSet {
    pub fn constant(graph: &Graph, value: f64) -> Self {
        MessageSet {
            values: vec![value; 2 * graph.edge_count()],
        }
    }

    /// The standard start `m = 1` on every directed edge.
    pub fn ones(graph: &Graph) -> Self {
        Self::constant(graph, 1.0)
    }

    pub fn from_values(graph: &Graph, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * graph.edge_count() {
            return Err(Error::InvalidOptions(format!(
                "{} messages for {} directed edges",
                values.len(),
                2 * graph.edge_count()
            )));
        }
        if let Some(i) = values.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            let d = graph.directed_edge(i);
            return Err(Error::InvalidOptions(format!(
                "message {}->{} = {} is not positive and finite",
                d.from, d.to, values[i]
            )));
        }
        Ok(MessageSet { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `m_{from->to}` for edge `edge`.
    pub fn get(&self, graph: &Graph, edge: usize, from: usize) -> f64 {
        self.values[graph.directed_index(edge, from)]
    }

    pub fn between(&self, graph: &Graph, from: usize, to: usize) -> Option<f64> {
        graph.find_edge(from, to).map(|e| self.get(graph, e, from))
    }
}

/// Coefficients of `f(x) = (a + b x) / (c + d x)` for the directed edge
/// leaving `from` along `edge`.
fn mobius(model: &Model, edge: usize, from: usize) -> [f64; 4] {
    let t = model.oriented_table(edge, from).0;
    let [p0, p1] = model.node_potential(from);
    [t[0][1] * p0, t[1][1] * p1, t[0][0] * p0, t[1][0] * p1]
}

fn apply_mobius([a, b, c, d]: [f64; 4], x: f64) -> f64 {
    (a + b * x) / (c + d * x)
}

/// `f` evaluated at `x = e^{log_x}` without forming `x` when it would overflow.
fn apply_mobius_log([a, b, c, d]: [f64; 4], log_x: f64) -> f64 {
    if log_x <= 0.0 {
        apply_mobius([a, b, c, d], log_x.exp())
    } else {
        let r = (-log_x).exp();
        (a * r + b) / (c * r + d)
    }
}

/// `f_{u->v}(x)`.
pub fn f_edge(model: &Model, u: usize, v: usize, x: f64) -> Result<f64> {
    let e = model.graph().find_edge(u, v).ok_or(Error::UnknownEdge(u, v))?;
    Ok(apply_mobius(mobius(model, e, u), x))
}

/// `f_{from->to}( prod_{w in N(from) \ to} m_{w->from} )`, the right-hand side
/// of one BP update.
fn cavity_update(model: &Model, msgs: &MessageSet, edge: usize, from: usize) -> Result<f64> {
    let g = model.graph();
    let coeffs = mobius(model, edge, from);
    let incoming = g
        .neighbors(from)
        .iter()
        .filter(|n| n.edge != edge)
        .map(|n| msgs.get(g, n.edge, n.node));
    let to = if g.endpoints(edge).0 == from {
        g.endpoints(edge).1
    } else {
        g.endpoints(edge).0
    };
    if g.degree(from) > LOG_SPACE_DEGREE {
        let log_prod: f64 = incoming.map(f64::ln).sum();
        if log_prod.is_nan() {
            return Err(Error::NumericOverflow { from, to });
        }
        Ok(apply_mobius_log(coeffs, log_prod))
    } else {
        let prod: f64 = incoming.product();
        if !prod.is_finite() {
            return Err(Error::NumericOverflow { from, to });
        }
        Ok(apply_mobius(coeffs, prod))
    }
}

/// One synchronous (Jacobi) update of every directed message.
pub fn bp_sweep(model: &Model, msgs: &MessageSet) -> Result<MessageSet> {
    let g = model.graph();
    let values = g
        .directed_edges()
        .map(|d| cavity_update(model, msgs, d.edge, d.from))
        .collect::<Result<Vec<_>>>()?;
    Ok(MessageSet { values })
}

fn residual_against(current: &MessageSet, updated: &MessageSet) -> f64 {
    current
        .values
        .iter()
        .zip(&updated.values)
        .map(|(m, f)| (m / f - 1.0).abs())
        .fold(0.0, f64::max)
}

/// `max_{u->v} |m_{u->v} / f_{u->v}(prod ...) - 1|`. The messages form an
/// epsilon-approximate fixed point iff this is at most epsilon. Overflow in
/// the update yields `+inf`.
pub fn fixed_point_residual(model: &Model, msgs: &MessageSet) -> f64 {
    match bp_sweep(model, msgs) {
        Ok(updated) => residual_against(msgs, &updated),
        Err(_) => f64::INFINITY,
    }
}

/// BP beliefs: `node[v] = tau_v(1)` and `edge[e] = tau_{lo,hi}(x_lo, x_hi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEstimates {
    pub node: Vec<f64>,
    pub edge: Vec<[[f64; 2]; 2]>,
}

impl MarginalEstimates {
    /// `(y_v, y_{u,v}) = (tau_v(1), tau_{u,v}(1,1))`, the coordinates of the
    /// Bethe function.
    pub fn coordinates(&self) -> Result<(NodeMarginals, EdgeMarginals)> {
        Ok((
            NodeMarginals::new(self.node.clone())?,
            EdgeMarginals::new(self.edge.iter().map(|t| t[1][1]).collect())?,
        ))
    }
}

fn sigmoid(log_odds: f64) -> f64 {
    if log_odds >= 0.0 {
        1.0 / (1.0 + (-log_odds).exp())
    } else {
        let e = log_odds.exp();
        e / (1.0 + e)
    }
}

/// Node and edge beliefs from one message set (lifting `m(1) = m`, `m(0) = 1`).
///
/// Edge tables marginalize to the node beliefs only at a BP fixed point; the
/// mismatch is of the order of [`fixed_point_residual`].
pub fn bp_marginals(model: &Model, msgs: &MessageSet) -> MarginalEstimates {
    let g = model.graph();
    let log_in = |v: usize, skip: Option<usize>| -> f64 {
        g.neighbors(v)
            .iter()
            .filter(|n| Some(n.edge) != skip)
            .map(|n| msgs.get(g, n.edge, n.node).ln())
            .sum()
    };
    let node = (0..g.node_count())
        .map(|v| {
            let [p0, p1] = model.node_potential(v);
            sigmoid(p1.ln() - p0.ln() + log_in(v, None))
        })
        .collect();
    let edge = (0..g.edge_count())
        .map(|e| {
            let (u, v) = g.endpoints(e);
            let t = model.edge_table(e).0;
            let (pu, pv) = (model.node_potential(u), model.node_potential(v));
            let (cu, cv) = (log_in(u, Some(e)), log_in(v, Some(e)));
            let mut w = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    w[a][b] = pu[a].ln()
                        + pv[b].ln()
                        + t[a][b].ln()
                        + if a == 1 { cu } else { 0.0 }
                        + if b == 1 { cv } else { 0.0 };
                }
            }
            let max = w.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for row in w.iter_mut() {
                for x in row.iter_mut() {
                    *x = (*x - max).exp();
                    z += *x;
                }
            }
            w.map(|row| row.map(|x| x / z))
        })
        .collect();
    MarginalEstimates { node, edge }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    /// Geometric damping weight on the previous message, in `[0, 1)`; 0 is
    /// plain BP.
    pub damping: f64,
    pub track: Vec<usize>,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            epsilon: 1e-3,
            max_iters: 200,
            damping: 0.0,
            track: vec![0],
        }
    }
}

impl BpOptions {
    pub fn validate(&self, model: &Model) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidOptions(format!("epsilon {} not in (0,1)", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidOptions("max_iters must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::InvalidOptions(format!("damping {} not in [0,1)", self.damping)));
        }
        if let Some(&v) = self.track.iter().find(|&&v| v >= model.node_count()) {
            return Err(Error::InvalidOptions(format!("tracked node {v} does not exist")));
        }
        Ok(())
    }
}

fn bp_record(model: &Model, t: usize, msgs: &MessageSet, residual: f64, track: &[usize]) -> TraceRecord {
    let beliefs = bp_marginals(model, msgs);
    let (grad_inf, grad_l2) = match beliefs.coordinates() {
        Ok((yv, ye)) => match bethe::gradient(model, &yv, &ye) {
            Ok((gn, ge)) => bethe::norms(gn.iter().chain(&ge)),
            Err(_) => (f64::NAN, f64::NAN),
        },
        Err(_) => (f64::NAN, f64::NAN),
    };
    TraceRecord {
        t,
        grad_inf,
        grad_l2,
        bp_residual: residual,
        marginals: track.iter().map(|&v| beliefs.node[v]).collect(),
    }
}

/// Iterates [`bp_sweep`] from `init`. The state at iteration `t` is the
/// message set `m^t` with `m^1 = init`; the run stops at the first `t` whose
/// residual is at most `epsilon`, or after `t = max_iters`.
///
/// The returned `y` holds the node beliefs `tau_v(1)` of the final messages.
pub fn run_bp(model: &Model, init: MessageSet, opts: &BpOptions) -> Result<SolveResult> {
    opts.validate(model)?;
    if init.len() != 2 * model.edge_count() {
        return Err(Error::InvalidOptions("initial messages do not match the graph".into()));
    }
    let mut trace = SolveTrace::new(opts.track.clone());
    let mut msgs = init;
    let mut t = 1;
    loop {
        let updated = bp_sweep(model, &msgs)?;
        let residual = residual_against(&msgs, &updated);
        trace.push(bp_record(model, t, &msgs, residual, &opts.track));
        let converged = residual <= opts.epsilon;
        if converged || t == opts.max_iters {
            let y = NodeMarginals::new(bp_marginals(model, &msgs).node)?;
            return Ok(SolveResult {
                y,
                messages: msgs,
                iterations: t,
                converged,
                residual,
                trace,
            });
        }
        msgs = if opts.damping > 0.0 {
            let values = msgs
                .values
                .iter()
                .zip(&updated.values)
                .map(|(old, new)| (opts.damping * old.ln() + (1.0 - opts.damping) * new.ln()).exp())
                .collect();
            MessageSet { values }
        } else {
            updated
        };
        t += 1;
    }
}
