//! Pairwise binary Markov random fields and the benchmark model families.
//!
//! A [`Model`] couples an undirected [`Graph`] with strictly positive node and
//! edge potential tables. Edge tables are stored in canonical orientation
//! `(lo, hi)` with `lo < hi`; [`Model::oriented_table`] transposes on demand so
//! callers always read `psi_{u,v}(x_u, x_v)` for the orientation they asked for.

use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// One entry of a node's adjacency list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

/// A directed view `from -> to` of undirected edge `edge`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DirectedEdge {
    pub from: usize,
    pub to: usize,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<Neighbor>>,
    max_degree: usize,
}

impl Graph {
    /// Builds a simple undirected graph. Endpoints may be given in either order;
    /// they are stored as `(min, max)`. Edge indices follow input order.
    pub fn new(node_count: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut canonical = Vec::new();
        let mut adjacency = vec![Vec::new(); node_count];
        for (u, v) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u},{v}) references a node outside 0..{node_count}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
            }
            let (lo, hi) = (u.min(v), u.max(v));
            if adjacency[lo].iter().any(|n: &Neighbor| n.node == hi) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({lo},{hi})")));
            }
            let edge = canonical.len();
            canonical.push((lo, hi));
            adjacency[lo].push(Neighbor { node: hi, edge });
            adjacency[hi].push(Neighbor { node: lo, edge });
        }
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Graph {
            node_count,
            edges: canonical,
            adjacency,
            max_degree,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(lo, hi)` endpoints, indexed by edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn endpoints(&self, edge: usize) -> (usize, usize) {
        self.edges[edge]
    }

    pub fn neighbors(&self, v: usize) -> &[Neighbor] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn find_edge(&self, u: usize, v: usize) -> Option<usize> {
        if u >= self.node_count || v >= self.node_count {
            return None;
        }
        self.adjacency[u].iter().find(|n| n.node == v).map(|n| n.edge)
    }

    /// Slot of `from -> other endpoint` in per-direction arrays: `2e` for
    /// `lo -> hi`, `2e + 1` for `hi -> lo`.
    pub fn directed_index(&self, edge: usize, from: usize) -> usize {
        if self.edges[edge].0 == from {
            2 * edge
        } else {
            2 * edge + 1
        }
    }

    pub fn directed_edge(&self, index: usize) -> DirectedEdge {
        let edge = index / 2;
        let (lo, hi) = self.edges[edge];
        if index.is_multiple_of(2) {
            DirectedEdge { from: lo, to: hi, edge }
        } else {
            DirectedEdge { from: hi, to: lo, edge }
        }
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = DirectedEdge> + '_ {
        (0..2 * self.edges.len()).map(|i| self.directed_edge(i))
    }

    /// True when the graph has no cycle (a forest).
    pub fn is_acyclic(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.node_count).collect();
        fn root(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(u, v) in &self.edges {
            let (a, b) = (root(&mut parent, u), root(&mut parent, v));
            if a == b {
                return false;
            }
            parent[a] = b;
        }
        true
    }
}

/// 2x2 edge potential `t[x_a][x_b]` for some orientation `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeTable(pub [[f64; 2]; 2]);

impl EdgeTable {
    pub fn ones() -> Self {
        EdgeTable([[1.0; 2]; 2])
    }

    /// From row-major `[t00, t01, t10, t11]`.
    pub fn from_row_major(v: [f64; 4]) -> Self {
        EdgeTable([[v[0], v[1]], [v[2], v[3]]])
    }

    pub fn row_major(&self) -> [f64; 4] {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }

    pub fn transposed(&self) -> Self {
        let t = self.0;
        EdgeTable([[t[0][0], t[1][0]], [t[0][1], t[1][1]]])
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.0[a][b]
    }

    /// `ln( t00 t11 / (t10 t01) )`, invariant under transposition.
    pub fn log_cross_ratio(&self) -> f64 {
        let t = self.0;
        t[0][0].ln() + t[1][1].ln() - t[1][0].ln() - t[0][1].ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    graph: Graph,
    node_potentials: Vec<[f64; 2]>,
    edge_potentials: Vec<EdgeTable>,
    node_psi: Vec<f64>,
    edge_psi: Vec<f64>,
    psi_bound: f64,
}

fn check_potential(location: impl FnOnce() -> String, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinitePotential {
            location: location(),
            value,
        });
    }
    if value <= 0.0 {
        return Err(Error::ZeroOrNegativePotential {
            location: location(),
            value,
        });
    }
    Ok(())
}

impl Model {
    /// Validates the tables and precomputes the log-ratio constants.
    ///
    /// `edge_potentials[e]` is read in the canonical orientation of edge `e`
    /// (row = smaller node id).
    pub fn new(
        graph: Graph,
        node_potentials: Vec<[f64; 2]>,
        edge_potentials: Vec<EdgeTable>,
    ) -> Result<Self> {
        if node_potentials.len() != graph.node_count() {
            return Err(Error::InvalidGraph(format!(
                "{} node potentials for {} nodes",
                node_potentials.len(),
                graph.node_count()
            )));
        }
        if edge_potentials.len() != graph.edge_count() {
            return Err(Error::InvalidGraph(format!(
                "{} edge potentials for {} edges",
                edge_potentials.len(),
                graph.edge_count()
            )));
        }
        let mut max_abs_log = 0.0f64;
        for (v, p) in node_potentials.iter().enumerate() {
            for (x, &val) in p.iter().enumerate() {
                check_potential(|| format!("psi_{v}({x})"), val)?;
                max_abs_log = max_abs_log.max(val.ln().abs());
            }
        }
        for (e, t) in edge_potentials.iter().enumerate() {
            let (u, v) = graph.endpoints(e);
            for a in 0..2 {
                for b in 0..2 {
                    let val = t.0[a][b];
                    check_potential(|| format!("psi_{{{u},{v}}}({a},{b})"), val)?;
                    max_abs_log = max_abs_log.max(val.ln().abs());
                }
            }
        }

        let edge_psi = edge_potentials.iter().map(EdgeTable::log_cross_ratio).collect();
        let node_psi = (0..graph.node_count())
            .map(|v| {
                let own = node_potentials[v][1].ln() - node_potentials[v][0].ln();
                graph.neighbors(v).iter().fold(own, |acc, n| {
                    // psi_{u,v}(0,1) / psi_{u,v}(0,0) with u = n.node first
                    let t = oriented(&graph, &edge_potentials, n.edge, n.node);
                    acc + t.0[0][1].ln() - t.0[0][0].ln()
                })
            })
            .collect();

        Ok(Model {
            graph,
            node_potentials,
            edge_potentials,
            node_psi,
            edge_psi,
            psi_bound: max_abs_log.exp(),
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn node_potential(&self, v: usize) -> [f64; 2] {
        self.node_potentials[v]
    }

    pub fn node_potentials(&self) -> &[[f64; 2]] {
        &self.node_potentials
    }

    /// Canonically oriented table of edge `e`.
    pub fn edge_table(&self, e: usize) -> EdgeTable {
        self.edge_potentials[e]
    }

    pub fn edge_tables(&self) -> &[EdgeTable] {
        &self.edge_potentials
    }

    /// Table of edge `e` indexed `[x_from][x_other]`.
    pub fn oriented_table(&self, e: usize, from: usize) -> EdgeTable {
        oriented(&self.graph, &self.edge_potentials, e, from)
    }

    /// `psi_{u,v}` indexed `[x_u][x_v]`.
    pub fn table_between(&self, u: usize, v: usize) -> Result<EdgeTable> {
        let e = self.graph.find_edge(u, v).ok_or(Error::UnknownEdge(u, v))?;
        Ok(self.oriented_table(e, u))
    }

    /// `Psi^(v) = ln psi_v(1)/psi_v(0) + sum_u ln psi_{u,v}(0,1)/psi_{u,v}(0,0)`.
    pub fn node_psi(&self, v: usize) -> f64 {
        self.node_psi[v]
    }

    /// `Psi^(u,v) = ln psi(0,0) psi(1,1) / (psi(1,0) psi(0,1))`.
    pub fn edge_psi(&self, e: usize) -> f64 {
        self.edge_psi[e]
    }

    /// Largest `e^{|ln psi|}` over every potential entry; at least 1.
    pub fn psi_bound(&self) -> f64 {
        self.psi_bound
    }
}

fn oriented(graph: &Graph, tables: &[EdgeTable], e: usize, from: usize) -> EdgeTable {
    if graph.endpoints(e).0 == from {
        tables[e]
    } else {
        tables[e].transposed()
    }
}

/// `side x side` grid, node `(i, j)` at index `i * side + j`. With `wrap` the
/// grid is a torus.
pub fn grid_graph(side: usize, wrap: bool) -> Result<Graph> {
    let min = if wrap { 3 } else { 2 };
    if side < min {
        return Err(Error::SideTooSmall { side, min });
    }
    let id = |i: usize, j: usize| i * side + j;
    let mut edges = Vec::with_capacity(2 * side * side);
    for i in 0..side {
        for j in 0..side {
            if j + 1 < side {
                edges.push((id(i, j), id(i, j + 1)));
            } else if wrap {
                edges.push((id(i, j), id(i, 0)));
            }
            if i + 1 < side {
                edges.push((id(i, j), id(i + 1, j)));
            } else if wrap {
                edges.push((id(i, j), id(0, j)));
            }
        }
    }
    Graph::new(side * side, edges)
}

/// Default stand-in for the forbidden `psi(1,1) = 0` of the hard-core model.
pub const DEFAULT_ZERO_REPLACEMENT: f64 = 1e-3;

/// Hard-core model: `psi_v = (1, fugacity)`, edge tables all ones except
/// `psi(1,1) = zero_replacement`.
pub fn hardcore(graph: Graph, fugacity: f64, zero_replacement: f64) -> Result<Model> {
    let nodes = vec![[1.0, fugacity]; graph.node_count()];
    let edges = vec![EdgeTable([[1.0, 1.0], [1.0, zero_replacement]]); graph.edge_count()];
    Model::new(graph, nodes, edges)
}

/// Ising model: diagonal edge entries `edge_weight`, off-diagonal 1;
/// `psi_v = (1, U[1/2, 2])` drawn from [`SeededRng`] with `node_seed`.
pub fn ising(graph: Graph, edge_weight: f64, node_seed: u64) -> Result<Model> {
    let mut rng = SeededRng::new(node_seed);
    let nodes = (0..graph.node_count())
        .map(|_| [1.0, rng.range(0.5, 2.0)])
        .collect();
    let edges = vec![EdgeTable([[edge_weight, 1.0], [1.0, edge_weight]]); graph.edge_count()];
    Model::new(graph, nodes, edges)
}

/// Random recursive tree: node `i > 0` attaches to a uniform earlier node.
pub fn random_tree(nodes: usize, rng: &mut SeededRng) -> Result<Graph> {
    let edges: Vec<_> = (1..nodes).map(|i| (rng.below(i), i)).collect();
    Graph::new(nodes, edges)
}

/// Erdos-Renyi graph `G(n, p)`.
pub fn random_graph(nodes: usize, edge_prob: f64, rng: &mut SeededRng) -> Result<Graph> {
    let mut edges = Vec::new();
    for u in 0..nodes {
        for v in u + 1..nodes {
            if rng.uniform() < edge_prob {
                edges.push((u, v));
            }
        }
    }
    Graph::new(nodes, edges)
}

/// Every potential entry drawn independently as `exp(U(-ln b, ln b))`, so
/// `psi_bound <= b`.
pub fn random_potentials(graph: Graph, bound: f64, rng: &mut SeededRng) -> Result<Model> {
    let r = bound.ln();
    let nodes = (0..graph.node_count())
        .map(|_| [rng.log_uniform(r), rng.log_uniform(r)])
        .collect();
    let edges = (0..graph.edge_count())
        .map(|_| {
            EdgeTable([
                [rng.log_uniform(r), rng.log_uniform(r)],
                [rng.log_uniform(r), rng.log_uniform(r)],
            ])
        })
        .collect();
    Model::new(graph, nodes, edges)
}

/// Random tree with Ising-type couplings: `psi_v = (1, U[1/2, 2])`, each edge
/// has diagonal weight `exp(U(-ln 4, ln 4))` and unit off-diagonal, so
/// `psi_bound <= 4`.
pub fn random_tree_model(nodes: usize, seed: u64) -> Result<Model> {
    let mut rng = SeededRng::new(seed);
    let graph = random_tree(nodes, &mut rng)?;
    let node_pots = (0..nodes).map(|_| [1.0, rng.range(0.5, 2.0)]).collect();
    let edge_pots = (0..graph.edge_count())
        .map(|_| {
            let w = rng.log_uniform(4f64.ln());
            EdgeTable([[w, 1.0], [1.0, w]])
        })
        .collect();
    Model::new(graph, node_pots, edge_pots)
}
