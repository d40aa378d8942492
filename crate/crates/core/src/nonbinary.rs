//! Categorical variables `x_v in {0, .., Q-1}`: round-robin ascent over the
//! two-symbol slices `(p, q)` of the Bethe function.
//!
//! A slice step at node `v` moves mass between `tau_v(p)` and `tau_v(q)`,
//! keeping `c = tau_v(p) + tau_v(q)` fixed. On each edge only the `{p,q}^2`
//! block of the pairwise table changes: with `v` on the column side, write
//!
//! ```text
//! M = block mass      A = u's p-mass in the block      B = v's p-mass in the block
//! a = tau_uv(p,p)     c' = B - a = tau_uv(q,p)         d = M - A - B + a = tau_uv(q,q)
//! ```
//!
//! The edge-stationary `a` is `M` times the binary pairwise solution at
//! `(A/M, B/M)`, and the slice gradient at `v` is
//! `Psi^(v)_pq + ln((c - y)/y) + sum_u ln(d/(c - y) * y/c')` with `y = tau_v(p)`.

use crate::bethe::{accurate_sum, norms, solve_pairwise_log_alpha};
use crate::error::{Error, Result};
use crate::model::Graph;
use crate::rng::SeededRng;
use crate::solver::{project, step_size, SolveTrace, SolverOptions, TraceRecord};

#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalModel {
    graph: Graph,
    q: usize,
    nodes: Vec<Vec<f64>>,
    /// Row-major `q x q`, rows indexed by the smaller endpoint.
    edges: Vec<Vec<f64>>,
}

impl CategoricalModel {
    pub fn new(graph: Graph, q: usize, nodes: Vec<Vec<f64>>, edges: Vec<Vec<f64>>) -> Result<Self> {
        if q < 3 {
            return Err(Error::UnsupportedAlphabet(q));
        }
        Self::with_alphabet(graph, q, nodes, edges)
    }

    pub(crate) fn with_alphabet(graph: Graph, q: usize, nodes: Vec<Vec<f64>>, edges: Vec<Vec<f64>>) -> Result<Self> {
        if nodes.len() != graph.node_count() || edges.len() != graph.edge_count() {
            return Err(Error::InvalidGraph("potential count does not match the graph".into()));
        }
        for (v, p) in nodes.iter().enumerate() {
            check_table(p, q, &format!("node {v}"))?;
        }
        for (e, p) in edges.iter().enumerate() {
            let (a, b) = graph.endpoints(e);
            check_table(p, q * q, &format!("edge ({a},{b})"))?;
        }
        Ok(CategoricalModel { graph, q, nodes, edges })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn alphabet_size(&self) -> usize {
        self.q
    }

    pub fn node_potential(&self, v: usize) -> &[f64] {
        &self.nodes[v]
    }

    pub fn edge_potential(&self, e: usize) -> &[f64] {
        &self.edges[e]
    }

    /// `psi_e(x_w = a, x_other = b)`.
    fn edge_value(&self, e: usize, w: usize, a: usize, b: usize) -> f64 {
        let (lo, _) = self.graph.endpoints(e);
        if w == lo {
            self.edges[e][a * self.q + b]
        } else {
            self.edges[e][b * self.q + a]
        }
    }

    /// `ln psi_v(p)/psi_v(q) + sum_u ln psi_uv(x_u=q, x_v=p) / psi_uv(q,q)`.
    pub fn node_pair_constant(&self, v: usize, p: usize, q: usize) -> f64 {
        let mut acc = (self.nodes[v][p] / self.nodes[v][q]).ln();
        for n in self.graph.neighbors(v) {
            acc += (self.edge_value(n.edge, n.node, q, p) / self.edge_value(n.edge, n.node, q, q)).ln();
        }
        acc
    }

    /// `ln psi(p,p) psi(q,q) / (psi(p,q) psi(q,p))`.
    pub fn pair_constant(&self, e: usize, p: usize, q: usize) -> f64 {
        let t = &self.edges[e];
        let k = self.q;
        (t[p * k + p] * t[q * k + q] / (t[p * k + q] * t[q * k + p])).ln()
    }
}

fn check_table(p: &[f64], len: usize, what: &str) -> Result<()> {
    if p.len() != len {
        return Err(Error::Format(format!("{what}: expected {len} entries, got {}", p.len())));
    }
    for (i, &x) in p.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinitePotential { location: format!("{what}[{i}]"), value: x });
        }
        if x <= 0.0 {
            return Err(Error::ZeroOrNegativePotential { location: format!("{what}[{i}]"), value: x });
        }
    }
    Ok(())
}

/// Every potential entry uniform on `[lo, hi]`.
pub fn random_categorical(graph: Graph, q: usize, lo: f64, hi: f64, rng: &mut SeededRng) -> Result<CategoricalModel> {
    let nodes = (0..graph.node_count()).map(|_| (0..q).map(|_| rng.range(lo, hi)).collect()).collect();
    let edges = (0..graph.edge_count()).map(|_| (0..q * q).map(|_| rng.range(lo, hi)).collect()).collect();
    CategoricalModel::new(graph, q, nodes, edges)
}

/// Node and pairwise pseudo-marginals; edge tables are row-major with rows
/// indexed by the smaller endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TauState {
    q: usize,
    node: Vec<Vec<f64>>,
    edge: Vec<Vec<f64>>,
}

impl TauState {
    pub fn uniform(graph: &Graph, q: usize) -> Self {
        let qf = q as f64;
        TauState {
            q,
            node: vec![vec![1.0 / qf; q]; graph.node_count()],
            edge: vec![vec![1.0 / (qf * qf); q * q]; graph.edge_count()],
        }
    }

    pub fn node(&self, v: usize) -> &[f64] {
        &self.node[v]
    }

    pub fn edge(&self, e: usize) -> &[f64] {
        &self.edge[e]
    }

    /// `tau_e(x_w = a, x_other = b)`.
    fn cell(&self, graph: &Graph, e: usize, w: usize, a: usize, b: usize) -> f64 {
        let (lo, _) = graph.endpoints(e);
        if w == lo {
            self.edge[e][a * self.q + b]
        } else {
            self.edge[e][b * self.q + a]
        }
    }

    /// Largest deviation from normalization and marginalization.
    pub fn consistency_error(&self, graph: &Graph) -> f64 {
        let q = self.q;
        let mut worst: f64 = 0.0;
        for t in &self.node {
            worst = worst.max((t.iter().sum::<f64>() - 1.0).abs());
        }
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            let t = &self.edge[e];
            worst = worst.max((t.iter().sum::<f64>() - 1.0).abs());
            for x in 0..q {
                let row: f64 = (0..q).map(|b| t[x * q + b]).sum();
                let col: f64 = (0..q).map(|a| t[a * q + x]).sum();
                worst = worst.max((row - self.node[u][x]).abs());
                worst = worst.max((col - self.node[v][x]).abs());
            }
        }
        worst
    }

    pub fn is_interior(&self) -> bool {
        self.node.iter().chain(&self.edge).flatten().all(|&x| x > 0.0 && x < 1.0)
    }
}

/// The `(p,q)` block of edge `e` seen from `w`.
struct Block {
    /// `sum_{x not in {p,q}} tau(x_w = p, x)`
    off_p: f64,
    /// `sum_{x not in {p,q}} tau(x_w = q, x)`
    off_q: f64,
    mass: f64,
}

fn block(state: &TauState, graph: &Graph, e: usize, w: usize, p: usize, q: usize) -> Block {
    let (mut off_p, mut off_q) = (0.0, 0.0);
    let mut mass = 0.0;
    for x in 0..state.q {
        if x == p || x == q {
            mass += state.cell(graph, e, w, p, x) + state.cell(graph, e, w, q, x);
        } else {
            off_p += state.cell(graph, e, w, p, x);
            off_q += state.cell(graph, e, w, q, x);
        }
    }
    Block { off_p, off_q, mass }
}

/// Edge-stationary `tau(p,p)` for block mass `m` and p-masses `a_row`, `b_col`.
fn stationary_pp(model: &CategoricalModel, e: usize, p: usize, q: usize, m: f64, a_row: f64, b_col: f64) -> f64 {
    m * solve_pairwise_log_alpha(model.pair_constant(e, p, q), a_row / m, b_col / m)
}

fn slice_term(y: f64, c: f64, d: f64, c_prime: f64) -> f64 {
    (d / (c - y) * y / c_prime).ln()
}

/// Slice gradient at `v` with every block's `tau(p,p)` re-solved for the
/// current node marginals.
pub fn slice_gradient(model: &CategoricalModel, state: &TauState, v: usize, p: usize, q: usize) -> f64 {
    let g = model.graph();
    let y = state.node[v][p];
    let c = y + state.node[v][q];
    let mut acc = model.node_pair_constant(v, p, q) + ((c - y) / y).ln();
    for n in g.neighbors(v) {
        let bv = block(state, g, n.edge, v, p, q);
        let bu = block(state, g, n.edge, n.node, p, q);
        let a_row = state.node[n.node][p] - bu.off_p;
        let b_col = y - bv.off_p;
        let a = stationary_pp(model, n.edge, p, q, bv.mass, a_row, b_col);
        let d = accurate_sum(&[bv.mass, -a_row, -b_col, a]);
        acc += slice_term(y, c, d, b_col - a);
    }
    acc
}

/// Slice gradient at `v` using the stored pairwise tables.
pub fn stored_slice_gradient(model: &CategoricalModel, state: &TauState, v: usize, p: usize, q: usize) -> f64 {
    let g = model.graph();
    let y = state.node[v][p];
    let c = y + state.node[v][q];
    let mut acc = model.node_pair_constant(v, p, q) + ((c - y) / y).ln();
    for n in g.neighbors(v) {
        let d = state.cell(g, n.edge, v, q, q);
        let c_prime = state.cell(g, n.edge, v, p, q);
        acc += slice_term(y, c, d, c_prime);
    }
    acc
}

/// `Psi_pq + ln(tau(p,q) tau(q,p) / (tau(p,p) tau(q,q)))` on the stored table.
pub fn block_residual(model: &CategoricalModel, state: &TauState, e: usize, p: usize, q: usize) -> f64 {
    let t = &state.edge[e];
    let k = state.q;
    model.pair_constant(e, p, q) + (t[p * k + q] * t[q * k + p] / (t[p * k + p] * t[q * k + q])).ln()
}

/// All slice gradients (stored tables) and block residuals over `p < q`.
fn stationarity_terms(model: &CategoricalModel, state: &TauState) -> Vec<f64> {
    let k = model.q;
    let mut out = Vec::new();
    for (p, q) in pairs(k) {
        for v in 0..model.graph.node_count() {
            out.push(stored_slice_gradient(model, state, v, p, q));
        }
        for e in 0..model.graph.edge_count() {
            out.push(block_residual(model, state, e, p, q));
        }
    }
    out
}

/// Lexicographic `(p, q)` with `p < q`.
pub fn pairs(q: usize) -> impl Iterator<Item = (usize, usize)> + Clone {
    (0..q).flat_map(move |p| (p + 1..q).map(move |r| (p, r)))
}

/// One synchronous slice step over all nodes followed by the block back-fill.
pub fn pair_step(
    model: &CategoricalModel,
    state: &TauState,
    p: usize,
    q: usize,
    t: usize,
    opts: &SolverOptions,
) -> Result<TauState> {
    let g = model.graph();
    let k = model.q;
    if p == q || p >= k || q >= k {
        return Err(Error::InvalidOptions(format!("bad symbol pair ({p},{q}) for alphabet {k}")));
    }
    let h = step_size(t, opts.step_offset);
    let shrink = opts.projection_scale / (t as f64).powf(0.25);
    let n = g.node_count();
    let mut y_new = vec![0.0; n];
    for (v, slot) in y_new.iter_mut().enumerate() {
        let y = state.node[v][p];
        let c = y + state.node[v][q];
        let (mut lo, mut max_off_q) = (0.0f64, 0.0f64);
        for nb in g.neighbors(v) {
            let b = block(state, g, nb.edge, v, p, q);
            lo = lo.max(b.off_p);
            max_off_q = max_off_q.max(b.off_q);
        }
        let hi = c - max_off_q;
        let width = hi - lo;
        if !(width > 0.0) {
            return Err(Error::DegenerateSlice { p, q, node: v, width });
        }
        let x = y + h * slice_gradient(model, state, v, p, q);
        // the shrinking clamp, rescaled from (0, 1) to (lo, hi)
        let unit = project((x - lo) / width, t, opts.projection_scale);
        debug_assert!(unit >= shrink - 1e-15 && unit <= 1.0 - shrink + 1e-15);
        *slot = lo + width * unit;
    }

    let mut next = state.clone();
    for v in 0..n {
        next.node[v][p] = y_new[v];
        next.node[v][q] = state.node[v][p] + state.node[v][q] - y_new[v];
    }
    for (e, &(u, v)) in g.edges().iter().enumerate() {
        let bu = block(state, g, e, u, p, q);
        let bv = block(state, g, e, v, p, q);
        let a_row = y_new[u] - bu.off_p;
        let b_col = y_new[v] - bv.off_p;
        let m = bu.mass;
        let a = stationary_pp(model, e, p, q, m, a_row, b_col);
        let t_e = &mut next.edge[e];
        t_e[p * k + p] = a;
        t_e[p * k + q] = a_row - a;
        t_e[q * k + p] = b_col - a;
        t_e[q * k + q] = accurate_sum(&[m, -a_row, -b_col, a]);
    }
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct NonbinaryResult {
    pub state: TauState,
    pub iterations: usize,
    pub converged: bool,
    /// Largest stationarity term at the final state.
    pub measure: f64,
    pub trace: SolveTrace,
}

/// Round-robin ascent from the uniform state, one `(p, q)` slice per
/// iteration with `t` counting every slice step. Stops once every stored
/// slice gradient and block residual is at most `epsilon` in magnitude.
/// Trace marginals are `tau_v(1)` of the tracked nodes.
pub fn solve_nonbinary(model: &CategoricalModel, opts: &SolverOptions) -> Result<NonbinaryResult> {
    opts.validate(model.graph.node_count())?;
    let order: Vec<(usize, usize)> = pairs(model.q).collect();
    let mut state = TauState::uniform(&model.graph, model.q);
    let mut trace = SolveTrace::new(opts.track.clone());
    let mut t = 1;
    loop {
        let terms = stationarity_terms(model, &state);
        let (measure, l2) = norms(&terms);
        trace.push(TraceRecord {
            t,
            grad_inf: measure,
            grad_l2: l2,
            bp_residual: f64::NAN,
            marginals: opts.track.iter().map(|&v| state.node[v][1]).collect(),
        });
        let converged = measure <= opts.epsilon;
        if converged || t == opts.max_iters {
            return Ok(NonbinaryResult { state, iterations: t, converged, measure, trace });
        }
        let (p, q) = order[(t - 1) % order.len()];
        state = pair_step(model, &state, p, q, t, opts)?;
        t += 1;
    }
}
