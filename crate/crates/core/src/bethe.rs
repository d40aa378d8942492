//! The Bethe function `F(y)` on binary pairwise models and its reduction `F*`.
//!
//! Coordinates are `y_v = tau_v(1)` per node and `y_{u,v} = tau_{u,v}(1,1)` per
//! edge. For an edge the four pairwise cells are
//!
//! ```text
//! p00 = 1 - y_u - y_v + y_uv   p01 = y_v - y_uv
//! p10 = y_u - y_uv             p11 = y_uv
//! ```
//!
//! and every formula here needs all four strictly positive. `p00` is formed
//! with a compensated sum; it is the cell that cancels when `y_u + y_v` is
//! close to `1 + y_uv`.
//!
//! `F*(y_V) = F(y_V, y_E(y_V))`, where each `y_{u,v}` solves the edge
//! stationarity condition `Psi^(u,v) + ln(p10 p01 / (p00 p11)) = 0` inside the
//! polytope interval. Because that condition zeroes `dF/dy_{u,v}`, the gradient
//! of `F*` equals the node part of the gradient of `F`.

use crate::bp::MessageSet;
use crate::error::{Error, Result};
use crate::model::Model;

/// Node marginals `y_v = tau_v(1)`, each strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMarginals(Vec<f64>);

impl NodeMarginals {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((v, y)) = values
            .iter()
            .enumerate()
            .find(|(_, y)| !(y.is_finite() && **y > 0.0 && **y < 1.0))
        {
            return Err(Error::MarginalOutOfPolytope(format!("y_{v} = {y}")));
        }
        Ok(NodeMarginals(values))
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for NodeMarginals {
    type Output = f64;
    fn index(&self, v: usize) -> &f64 {
        &self.0[v]
    }
}

/// Pairwise marginals `y_{u,v} = tau_{u,v}(1,1)`, one per edge id.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMarginals(Vec<f64>);

impl EdgeMarginals {
    /// Checks only that entries are finite and inside `(0, 1)`; the polytope
    /// condition needs the node marginals and is checked where they meet.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((e, y)) = values
            .iter()
            .enumerate()
            .find(|(_, y)| !(y.is_finite() && **y > 0.0 && **y < 1.0))
        {
            return Err(Error::MarginalOutOfPolytope(format!("edge {e}: y_uv = {y}")));
        }
        Ok(EdgeMarginals(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Index<usize> for EdgeMarginals {
    type Output = f64;
    fn index(&self, e: usize) -> &f64 {
        &self.0[e]
    }
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

/// Sum with a running error term (twice-working-precision accuracy).
pub(crate) fn accurate_sum(xs: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for &x in xs {
        let (t, e) = two_sum(s, x);
        s = t;
        c += e;
    }
    s + c
}

/// The four cells `[p00, p01, p10, p11]` of the pairwise table, oriented
/// `(x_u, x_v)`.
pub fn pair_cells(y_u: f64, y_v: f64, y_uv: f64) -> [f64; 4] {
    [
        accurate_sum(&[1.0, -y_u, -y_v, y_uv]),
        y_v - y_uv,
        y_u - y_uv,
        y_uv,
    ]
}

fn interior(cells: &[f64; 4]) -> bool {
    cells.iter().all(|c| *c > 0.0 && c.is_finite())
}

fn checked_cells(y_u: f64, y_v: f64, y_uv: f64, edge: usize) -> Result<[f64; 4]> {
    let c = pair_cells(y_u, y_v, y_uv);
    if interior(&c) {
        Ok(c)
    } else {
        Err(Error::MarginalOutOfPolytope(format!(
            "edge {edge}: y_u = {y_u}, y_v = {y_v}, y_uv = {y_uv}"
        )))
    }
}

fn check_dims(model: &Model, y_v: &NodeMarginals, y_e: &EdgeMarginals) -> Result<()> {
    if y_v.len() != model.node_count() || y_e.len() != model.edge_count() {
        return Err(Error::InvalidOptions(format!(
            "marginal vectors of length {}/{} for a model with {} nodes and {} edges",
            y_v.len(),
            y_e.len(),
            model.node_count(),
            model.edge_count()
        )));
    }
    Ok(())
}

/// `log_alpha + ln(p10 p01 / (p11 p00))`: zero exactly on the stationary
/// pairwise marginal.
pub fn pairwise_log_residual(log_alpha: f64, y_u: f64, y_v: f64, y_uv: f64) -> f64 {
    let [p00, p01, p10, p11] = pair_cells(y_u, y_v, y_uv);
    log_alpha + p10.ln() + p01.ln() - p11.ln() - p00.ln()
}

fn bisect_pairwise(log_alpha: f64, y_u: f64, y_v: f64) -> f64 {
    // residual decreases from +inf at the lower end to -inf at the upper end
    let mut lo = (y_u + y_v - 1.0).max(0.0);
    let mut hi = y_u.min(y_v);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return mid;
        }
        let c = pair_cells(y_u, y_v, mid);
        if !interior(&c) {
            if c[3] <= 0.0 || c[0] <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            continue;
        }
        if pairwise_log_residual(log_alpha, y_u, y_v, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Root of `(a-1) y^2 - [(a-1)(y_u+y_v) + 1] y + a y_u y_v = 0`, `a = e^{log_alpha}`,
/// strictly inside `(max(0, y_u + y_v - 1), min(y_u, y_v))`.
///
/// The larger-magnitude root comes from the sign-matched quadratic formula and
/// the other from Vieta's product; `a = 1` is the linear case `y_u y_v`. The
/// selected root is polished by safeguarded Newton steps on the log residual.
pub fn solve_pairwise_log_alpha(log_alpha: f64, y_u: f64, y_v: f64) -> f64 {
    debug_assert!(y_u > 0.0 && y_u < 1.0 && y_v > 0.0 && y_v < 1.0);
    let in_range = |y: f64| y.is_finite() && interior(&pair_cells(y_u, y_v, y));

    let am1 = log_alpha.exp_m1();
    let alpha = log_alpha.exp();
    let mut root = if am1 == 0.0 {
        y_u * y_v
    } else {
        let b = -(am1 * (y_u + y_v) + 1.0);
        let c = alpha * y_u * y_v;
        let disc = (b * b - 4.0 * am1 * c).max(0.0);
        let q = -0.5 * (b + b.signum() * disc.sqrt());
        let candidates = [q / am1, c / q];
        let inside: Vec<f64> = candidates.into_iter().filter(|&y| in_range(y)).collect();
        debug_assert!(inside.len() <= 1 || (inside[0] - inside[1]).abs() < 1e-9);
        match inside.first() {
            Some(&y) => y,
            None => bisect_pairwise(log_alpha, y_u, y_v),
        }
    };
    if !in_range(root) {
        root = bisect_pairwise(log_alpha, y_u, y_v);
    }
    polish(log_alpha, y_u, y_v, root)
}

fn polish(log_alpha: f64, y_u: f64, y_v: f64, mut y: f64) -> f64 {
    let lo = (y_u + y_v - 1.0).max(0.0);
    let hi = y_u.min(y_v);
    let mut r = pairwise_log_residual(log_alpha, y_u, y_v, y);
    for _ in 0..4 {
        if r == 0.0 {
            break;
        }
        let [p00, p01, p10, p11] = pair_cells(y_u, y_v, y);
        let slope = -(1.0 / p10 + 1.0 / p01 + 1.0 / p11 + 1.0 / p00);
        let mut next = y - r / slope;
        if !(next > lo && next < hi) || !interior(&pair_cells(y_u, y_v, next)) {
            next = if r > 0.0 { 0.5 * (y + hi) } else { 0.5 * (y + lo) };
        }
        let rn = pairwise_log_residual(log_alpha, y_u, y_v, next);
        if !(rn.abs() < r.abs()) {
            break;
        }
        y = next;
        r = rn;
    }
    for cand in [y.next_down(), y.next_up()] {
        if interior(&pair_cells(y_u, y_v, cand)) {
            let rc = pairwise_log_residual(log_alpha, y_u, y_v, cand);
            if rc.abs() < r.abs() {
                y = cand;
                r = rc;
            }
        }
    }
    y
}

/// Stationary `y_{u,v}` for edge `{u, v}` given node marginals `y_u`, `y_v`.
pub fn solve_pairwise(model: &Model, u: usize, v: usize, y_u: f64, y_v: f64) -> Result<f64> {
    let e = model.graph().find_edge(u, v).ok_or(Error::UnknownEdge(u, v))?;
    for y in [y_u, y_v] {
        if !(y > 0.0 && y < 1.0) {
            return Err(Error::MarginalOutOfPolytope(format!("node marginal {y}")));
        }
    }
    Ok(solve_pairwise_log_alpha(model.edge_psi(e), y_u, y_v))
}

/// `y_E(y_V)`: the stationary pairwise marginal on every edge.
pub fn edge_marginals_for(model: &Model, y_v: &NodeMarginals) -> EdgeMarginals {
    let g = model.graph();
    EdgeMarginals(
        (0..g.edge_count())
            .map(|e| {
                let (u, v) = g.endpoints(e);
                solve_pairwise_log_alpha(model.edge_psi(e), y_v[u], y_v[v])
            })
            .collect(),
    )
}

fn xlog_ratio(p: f64, psi: f64) -> f64 {
    p * (psi.ln() - p.ln())
}

/// `F(y_V, y_E)`; `-F` is the Bethe free energy. At a stationary point on a
/// tree this equals `ln Z`.
pub fn bethe_free_energy(model: &Model, y_v: &NodeMarginals, y_e: &EdgeMarginals) -> Result<f64> {
    check_dims(model, y_v, y_e)?;
    let g = model.graph();
    let mut terms = Vec::with_capacity(g.node_count() + 4 * g.edge_count());
    for v in 0..g.node_count() {
        let y = y_v[v];
        let [p0, p1] = model.node_potential(v);
        terms.push(xlog_ratio(y, p1) + (1.0 - y) * (p0.ln() - (-y).ln_1p()));
    }
    for e in 0..g.edge_count() {
        let (u, v) = g.endpoints(e);
        let (yu, yv) = (y_v[u], y_v[v]);
        let cells = checked_cells(yu, yv, y_e[e], e)?;
        let t = model.edge_table(e).0;
        let node_u = [(-yu).ln_1p(), yu.ln()];
        let node_v = [(-yv).ln_1p(), yv.ln()];
        for (i, p) in cells.iter().enumerate() {
            let (a, b) = (i >> 1, i & 1);
            terms.push(p * (t[a][b].ln() - p.ln() + node_u[a] + node_v[b]));
        }
    }
    Ok(accurate_sum(&terms))
}

/// `ln( p00/(1 - y_v) * y_v/(y_v - y_uv) )` for the edge term of node `v`.
fn node_edge_log_ratio(y_v: f64, p00: f64, y_uv: f64) -> f64 {
    p00.ln() - (-y_v).ln_1p() + y_v.ln() - (y_v - y_uv).ln()
}

fn node_gradient_unchecked(model: &Model, y_v: &NodeMarginals, y_e: &[f64], v: usize) -> f64 {
    let g = model.graph();
    let y = y_v[v];
    let mut acc = model.node_psi(v) + (-y).ln_1p() - y.ln();
    for n in g.neighbors(v) {
        let y_uv = y_e[n.edge];
        let p00 = pair_cells(y_v[n.node], y, y_uv)[0];
        acc += node_edge_log_ratio(y, p00, y_uv);
    }
    acc
}

fn check_all_edges(model: &Model, y_v: &NodeMarginals, y_e: &EdgeMarginals) -> Result<()> {
    check_dims(model, y_v, y_e)?;
    for (e, &(u, v)) in model.graph().edges().iter().enumerate() {
        checked_cells(y_v[u], y_v[v], y_e[e], e)?;
    }
    Ok(())
}

/// `dF/dy_v`.
pub fn grad_node(model: &Model, y_v: &NodeMarginals, y_e: &EdgeMarginals, v: usize) -> Result<f64> {
    check_dims(model, y_v, y_e)?;
    for n in model.graph().neighbors(v) {
        checked_cells(y_v[n.node], y_v[v], y_e[n.edge], n.edge)?;
    }
    Ok(node_gradient_unchecked(model, y_v, &y_e.0, v))
}

/// `dF/dy_{u,v}` for edge id `e`.
pub fn grad_edge(model: &Model, y_v: &NodeMarginals, y_e: &EdgeMarginals, e: usize) -> Result<f64> {
    check_dims(model, y_v, y_e)?;
    let (u, v) = model.graph().endpoints(e);
    let [p00, p01, p10, p11] = checked_cells(y_v[u], y_v[v], y_e[e], e)?;
    Ok(model.edge_psi(e) + p10.ln() + p01.ln() - p00.ln() - p11.ln())
}

/// Full gradient `(dF/dy_V, dF/dy_E)`.
pub fn gradient(model: &Model, y_v: &NodeMarginals, y_e: &EdgeMarginals) -> Result<(Vec<f64>, Vec<f64>)> {
    check_all_edges(model, y_v, y_e)?;
    let nodes = (0..model.node_count())
        .map(|v| node_gradient_unchecked(model, y_v, &y_e.0, v))
        .collect();
    let edges = (0..model.edge_count())
        .map(|e| {
            let (u, v) = model.graph().endpoints(e);
            let [p00, p01, p10, p11] = pair_cells(y_v[u], y_v[v], y_e[e]);
            model.edge_psi(e) + p10.ln() + p01.ln() - p00.ln() - p11.ln()
        })
        .collect();
    Ok((nodes, edges))
}

/// `F*(y_V)`.
pub fn f_star(model: &Model, y_v: &NodeMarginals) -> Result<f64> {
    check_len(model, y_v)?;
    bethe_free_energy(model, y_v, &edge_marginals_for(model, y_v))
}

/// `grad F*(y_V)`, i.e. `dF/dy_v` evaluated at `(y_V, y_E(y_V))`.
pub fn grad_f_star(model: &Model, y_v: &NodeMarginals) -> Result<Vec<f64>> {
    check_len(model, y_v)?;
    let y_e = edge_marginals_for(model, y_v);
    check_all_edges(model, y_v, &y_e)?;
    Ok((0..model.node_count())
        .map(|v| node_gradient_unchecked(model, y_v, &y_e.0, v))
        .collect())
}

/// One coordinate of `grad F*`, solving only the edges at `v`.
pub fn grad_f_star_at(model: &Model, y_v: &NodeMarginals, v: usize) -> Result<f64> {
    check_len(model, y_v)?;
    let y = y_v[v];
    let mut acc = model.node_psi(v) + (-y).ln_1p() - y.ln();
    for n in model.graph().neighbors(v) {
        let y_uv = solve_pairwise_log_alpha(model.edge_psi(n.edge), y_v[n.node], y);
        let p00 = checked_cells(y_v[n.node], y, y_uv, n.edge)?[0];
        acc += node_edge_log_ratio(y, p00, y_uv);
    }
    Ok(acc)
}

fn check_len(model: &Model, y_v: &NodeMarginals) -> Result<()> {
    if y_v.len() != model.node_count() {
        return Err(Error::InvalidOptions(format!(
            "{} node marginals for {} nodes",
            y_v.len(),
            model.node_count()
        )));
    }
    Ok(())
}

/// Converts a point of the Bethe function into reduced BP messages:
/// `m_{u->v} = psi_{u,v}(0,1)/psi_{u,v}(0,0) * p00/(1 - y_v) * y_v/(y_v - y_uv)`.
///
/// If `||grad F||_inf <= eps` at the point, the messages are a
/// `6 eps`-approximate BP fixed point.
pub fn messages_from_y(model: &Model, y_v: &NodeMarginals, y_e: &EdgeMarginals) -> Result<MessageSet> {
    check_all_edges(model, y_v, y_e)?;
    let g = model.graph();
    let values = g
        .directed_edges()
        .map(|d| {
            let t = model.oriented_table(d.edge, d.from).0;
            let y = y_v[d.to];
            let y_uv = y_e[d.edge];
            let p00 = pair_cells(y_v[d.from], y, y_uv)[0];
            t[0][1] / t[0][0] * (node_edge_log_ratio(y, p00, y_uv)).exp()
        })
        .collect();
    MessageSet::from_values(g, values)
}

/// `(max |x|, sqrt(sum x^2))`.
pub fn norms<'a>(xs: impl IntoIterator<Item = &'a f64>) -> (f64, f64) {
    let (inf, sq) = xs
        .into_iter()
        .fold((0.0f64, 0.0f64), |(m, s), x| (m.max(x.abs()), s + x * x));
    (inf, sq.sqrt())
}
