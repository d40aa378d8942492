//! Exact inference by enumerating every configuration.
//!
//! Positive binary models are enumerated in Gray-code order, so each step
//! flips one variable and updates the log weight through that variable's
//! node and incident edge factors. [`RawModel`] admits zero potentials (true
//! hard constraints) and evaluates each configuration directly.

use crate::error::{Error, Result};
use crate::model::{Graph, Model};
use crate::nonbinary::CategoricalModel;

/// Enumeration guard: at most `2^25` configurations.
pub const MAX_CONFIGS: f64 = 33_554_432.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub log_partition: f64,
    /// `node_marginals[v][x] = Pr(x_v = x)`.
    pub node_marginals: Vec<Vec<f64>>,
    /// `edge_marginals[e][a * q + b] = Pr(x_u = a, x_v = b)` for edge `e = (u, v)`
    /// with `u < v`.
    pub edge_marginals: Vec<Vec<f64>>,
}

/// A pairwise model with nonnegative potentials over `q` symbols.
#[derive(Debug, Clone)]
pub struct RawModel {
    graph: Graph,
    q: usize,
    nodes: Vec<Vec<f64>>,
    edges: Vec<Vec<f64>>,
}

impl RawModel {
    /// `edges[e]` is row-major `q x q` with rows indexed by the smaller endpoint.
    pub fn new(graph: Graph, q: usize, nodes: Vec<Vec<f64>>, edges: Vec<Vec<f64>>) -> Result<Self> {
        if q < 2 {
            return Err(Error::UnsupportedAlphabet(q));
        }
        if nodes.len() != graph.node_count() || edges.len() != graph.edge_count() {
            return Err(Error::InvalidGraph("potential count does not match the graph".into()));
        }
        for (i, p) in nodes.iter().enumerate() {
            check_raw(p, q, &format!("node {i}"))?;
        }
        for (i, p) in edges.iter().enumerate() {
            check_raw(p, q * q, &format!("edge {i}"))?;
        }
        Ok(RawModel { graph, q, nodes, edges })
    }

    /// Binary model; `edges[e]` is oriented by the canonical endpoint order.
    pub fn binary(graph: Graph, nodes: &[[f64; 2]], edges: &[[[f64; 2]; 2]]) -> Result<Self> {
        let nodes = nodes.iter().map(|p| p.to_vec()).collect();
        let edges = edges.iter().map(|t| t.iter().flatten().copied().collect()).collect();
        Self::new(graph, 2, nodes, edges)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }
}

fn check_raw(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::Format(format!("{what}: expected {len} entries, got {}", p.len())));
    }
    if let Some(&x) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::NonFinitePotential { location: what.into(), value: x });
    }
    Ok(())
}

impl From<&Model> for RawModel {
    fn from(m: &Model) -> Self {
        RawModel {
            graph: m.graph().clone(),
            q: 2,
            nodes: m.node_potentials().iter().map(|p| p.to_vec()).collect(),
            edges: m.edge_tables().iter().map(|t| t.row_major().to_vec()).collect(),
        }
    }
}

impl From<&CategoricalModel> for RawModel {
    fn from(m: &CategoricalModel) -> Self {
        let g = m.graph();
        RawModel {
            graph: g.clone(),
            q: m.alphabet_size(),
            nodes: (0..g.node_count()).map(|v| m.node_potential(v).to_vec()).collect(),
            edges: (0..g.edge_count()).map(|e| m.edge_potential(e).to_vec()).collect(),
        }
    }
}

fn guard(q: usize, n: usize) -> Result<()> {
    let configs = (q as f64).powi(n as i32);
    if configs > MAX_CONFIGS {
        return Err(Error::TooLargeForEnumeration { configs, limit: MAX_CONFIGS });
    }
    Ok(())
}

/// Accumulates `exp(w - shift)` weights into marginal sums.
struct Tally {
    q: usize,
    shift: f64,
    z: f64,
    nodes: Vec<Vec<f64>>,
    edges: Vec<Vec<f64>>,
}

impl Tally {
    fn new(graph: &Graph, q: usize, shift: f64) -> Self {
        Tally {
            q,
            shift,
            z: 0.0,
            nodes: vec![vec![0.0; q]; graph.node_count()],
            edges: vec![vec![0.0; q * q]; graph.edge_count()],
        }
    }

    fn add(&mut self, graph: &Graph, x: &[usize], logw: f64) {
        let p = (logw - self.shift).exp();
        if p == 0.0 {
            return;
        }
        self.z += p;
        for (v, &s) in x.iter().enumerate() {
            self.nodes[v][s] += p;
        }
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            self.edges[e][x[u] * self.q + x[v]] += p;
        }
    }

    fn finish(self) -> Result<ExactResult> {
        if !(self.z > 0.0) {
            return Err(Error::InvalidGraph("every configuration has zero weight".into()));
        }
        let z = self.z;
        let norm = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            rows.into_iter().map(|r| r.into_iter().map(|p| p / z).collect()).collect()
        };
        Ok(ExactResult {
            log_partition: self.shift + z.ln(),
            node_marginals: norm(self.nodes),
            edge_marginals: norm(self.edges),
        })
    }
}

/// Visits the binary configurations in reflected Gray-code order, calling
/// `f(x, log weight)` on each.
fn gray_walk(model: &Model, mut f: impl FnMut(&[usize], f64)) {
    let g = model.graph();
    let n = g.node_count();
    let ln_node: Vec<[f64; 2]> = model.node_potentials().iter().map(|p| [p[0].ln(), p[1].ln()]).collect();
    let ln_edge: Vec<[[f64; 2]; 2]> = model
        .edge_tables()
        .iter()
        .map(|t| t.0.map(|row| row.map(f64::ln)))
        .collect();
    let mut x = vec![0usize; n];
    let mut w: f64 = ln_node.iter().map(|p| p[0]).sum::<f64>() + ln_edge.iter().map(|t| t[0][0]).sum::<f64>();
    f(&x, w);
    for i in 1u64..(1u64 << n) {
        let v = i.trailing_zeros() as usize;
        let (old, new) = (x[v], 1 - x[v]);
        w += ln_node[v][new] - ln_node[v][old];
        for nb in g.neighbors(v) {
            let t = &ln_edge[nb.edge];
            let o = x[nb.node];
            let (before, after) = if v < nb.node { (t[old][o], t[new][o]) } else { (t[o][old], t[o][new]) };
            w += after - before;
        }
        x[v] = new;
        f(&x, w);
    }
}

/// `ln Z` of a positive binary model.
pub fn exact_partition(model: &Model) -> Result<f64> {
    Ok(exact_marginals(model)?.log_partition)
}

/// Exact node and edge marginals of a positive binary model.
pub fn exact_marginals(model: &Model) -> Result<ExactResult> {
    let g = model.graph();
    guard(2, g.node_count())?;
    let mut shift = f64::NEG_INFINITY;
    gray_walk(model, |_, w| shift = shift.max(w));
    let mut tally = Tally::new(g, 2, shift);
    gray_walk(model, |x, w| tally.add(g, x, w));
    tally.finish()
}

/// Odometer order over `[q]^n`, evaluating every configuration directly.
fn raw_walk(model: &RawModel, mut f: impl FnMut(&[usize], f64)) {
    let g = &model.graph;
    let q = model.q;
    let n = g.node_count();
    let ln_node: Vec<Vec<f64>> = model.nodes.iter().map(|p| p.iter().map(|x| x.ln()).collect()).collect();
    let ln_edge: Vec<Vec<f64>> = model.edges.iter().map(|p| p.iter().map(|x| x.ln()).collect()).collect();
    let mut x = vec![0usize; n];
    loop {
        let mut w = 0.0;
        for (v, &s) in x.iter().enumerate() {
            w += ln_node[v][s];
        }
        for (e, &(u, v)) in g.edges().iter().enumerate() {
            w += ln_edge[e][x[u] * q + x[v]];
        }
        f(&x, w);
        let mut i = 0;
        loop {
            if i == n {
                return;
            }
            x[i] += 1;
            if x[i] < q {
                break;
            }
            x[i] = 0;
            i += 1;
        }
    }
}

/// Exact marginals of a model that may contain zero potentials.
pub fn exact_raw(model: &RawModel) -> Result<ExactResult> {
    guard(model.q, model.graph.node_count())?;
    let mut shift = f64::NEG_INFINITY;
    raw_walk(model, |_, w| shift = shift.max(w));
    if shift == f64::NEG_INFINITY {
        return Err(Error::InvalidGraph("every configuration has zero weight".into()));
    }
    let mut tally = Tally::new(&model.graph, model.q, shift);
    raw_walk(model, |x, w| tally.add(&model.graph, x, w));
    tally.finish()
}

pub fn exact_categorical(model: &CategoricalModel) -> Result<ExactResult> {
    exact_raw(&RawModel::from(model))
}

/// `psi_{u,v}(0,1)/psi_{u,v}(0,0) * Pr_T(x_u=0 | x_v=0) / Pr_T(x_u=0 | x_v=1)`,
/// where `T` is the edge `{u, v}` together with the part of the tree hanging
/// off `u`; it equals the exact BP message `m_{u->v}` on a tree.
pub fn tree_conditional_check(model: &Model, v: usize, u: usize) -> Result<f64> {
    tree_conditional_check_raw(&RawModel::from(model), v, u)
}

pub fn tree_conditional_check_raw(model: &RawModel, v: usize, u: usize) -> Result<f64> {
    let g = &model.graph;
    if model.q != 2 {
        return Err(Error::UnsupportedAlphabet(model.q));
    }
    if !g.is_acyclic() {
        return Err(Error::NotATree);
    }
    let edge = g.find_edge(u, v).ok_or(Error::UnknownEdge(u, v))?;

    // nodes reachable from u without crossing v
    let mut side = vec![u];
    let mut seen = vec![false; g.node_count()];
    seen[u] = true;
    seen[v] = true;
    let mut i = 0;
    while i < side.len() {
        for nb in g.neighbors(side[i]) {
            if !seen[nb.node] {
                seen[nb.node] = true;
                side.push(nb.node);
            }
        }
        i += 1;
    }
    side.push(v);
    let mut index = vec![usize::MAX; g.node_count()];
    for (i, &w) in side.iter().enumerate() {
        index[w] = i;
    }
    let mut edges = Vec::new();
    let mut tables = Vec::new();
    for (e, &(a, b)) in g.edges().iter().enumerate() {
        if index[a] == usize::MAX || index[b] == usize::MAX {
            continue;
        }
        let (ia, ib) = (index[a], index[b]);
        let t = &model.edges[e];
        // re-orient rows to the smaller local index
        let table = if ia < ib { t.clone() } else { vec![t[0], t[2], t[1], t[3]] };
        edges.push((ia.min(ib), ia.max(ib)));
        tables.push(table);
    }
    let local = RawModel::new(
        Graph::new(side.len(), edges.clone())?,
        2,
        side.iter().map(|&w| model.nodes[w].clone()).collect(),
        tables,
    )?;
    let exact = exact_raw(&local)?;
    let (iu, iv) = (index[u], index[v]);
    let local_edge = edges.iter().position(|&e| e == (iu.min(iv), iu.max(iv))).expect("edge kept");
    let joint = &exact.edge_marginals[local_edge];
    // joint[a * 2 + b] with a at the smaller local index; u sits before v
    debug_assert!(iu < iv);
    let pr_u0_given = |b: usize| joint[b] / (joint[b] + joint[2 + b]);
    let t = &model.edges[edge];
    let (t00, t01) = if u < v { (t[0], t[1]) } else { (t[0], t[2]) };
    Ok(t01 / t00 * pr_u0_given(0) / pr_u0_given(1))
}
