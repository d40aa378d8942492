//! JSON model files.
//!
//! ```json
//! {
//!   "nodes": 2,
//!   "edges": [[0, 1]],
//!   "node_potentials": [[1.0, 2.0], [1.0, 1.0]],
//!   "edge_potentials": [[1.0, 1.0, 1.0, 0.001]]
//! }
//! ```
//!
//! Edge tables are row-major with rows indexed by the first node of the
//! listed pair. Categorical files add `"alphabet_size": Q` and use length-`Q`
//! node lists and `Q*Q` edge lists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{EdgeTable, Graph, Model};
use crate::nonbinary::CategoricalModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphabet_size: Option<usize>,
    pub nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub node_potentials: Vec<Vec<f64>>,
    pub edge_potentials: Vec<Vec<f64>>,
}

/// Either kind of model a file can hold.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Binary(Model),
    Categorical(CategoricalModel),
}

impl AnyModel {
    pub fn graph(&self) -> &Graph {
        match self {
            AnyModel::Binary(m) => m.graph(),
            AnyModel::Categorical(m) => m.graph(),
        }
    }
}

fn transpose(t: &[f64], q: usize) -> Vec<f64> {
    (0..q * q).map(|i| t[(i % q) * q + i / q]).collect()
}

impl ModelFile {
    pub fn from_model(m: &Model) -> Self {
        let g = m.graph();
        ModelFile {
            alphabet_size: None,
            nodes: g.node_count(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            node_potentials: m.node_potentials().iter().map(|p| p.to_vec()).collect(),
            edge_potentials: m.edge_tables().iter().map(|t| t.row_major().to_vec()).collect(),
        }
    }

    pub fn from_categorical(m: &CategoricalModel) -> Self {
        let g = m.graph();
        ModelFile {
            alphabet_size: Some(m.alphabet_size()),
            nodes: g.node_count(),
            edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
            node_potentials: (0..g.node_count()).map(|v| m.node_potential(v).to_vec()).collect(),
            edge_potentials: (0..g.edge_count()).map(|e| m.edge_potential(e).to_vec()).collect(),
        }
    }

    fn canonical_tables(&self, q: usize) -> Result<(Graph, Vec<Vec<f64>>)> {
        if self.node_potentials.len() != self.nodes {
            return Err(Error::Format(format!(
                "{} node potentials for {} nodes",
                self.node_potentials.len(),
                self.nodes
            )));
        }
        if self.edge_potentials.len() != self.edges.len() {
            return Err(Error::Format(format!(
                "{} edge potentials for {} edges",
                self.edge_potentials.len(),
                self.edges.len()
            )));
        }
        for (v, p) in self.node_potentials.iter().enumerate() {
            if p.len() != q {
                return Err(Error::Format(format!("node {v}: expected {q} potentials, got {}", p.len())));
            }
        }
        let graph = Graph::new(self.nodes, self.edges.iter().map(|e| (e[0], e[1])))?;
        let mut tables = Vec::with_capacity(self.edges.len());
        for (e, t) in self.edges.iter().zip(&self.edge_potentials) {
            if t.len() != q * q {
                return Err(Error::Format(format!(
                    "edge ({},{}): expected {} potentials, got {}",
                    e[0],
                    e[1],
                    q * q,
                    t.len()
                )));
            }
            tables.push(if e[0] > e[1] { transpose(t, q) } else { t.clone() });
        }
        Ok((graph, tables))
    }

    pub fn to_model(&self) -> Result<Model> {
        if let Some(q) = self.alphabet_size.filter(|&q| q != 2) {
            return Err(Error::UnsupportedAlphabet(q));
        }
        let (graph, tables) = self.canonical_tables(2)?;
        let nodes = self.node_potentials.iter().map(|p| [p[0], p[1]]).collect();
        let edges = tables
            .iter()
            .map(|t| EdgeTable::from_row_major([t[0], t[1], t[2], t[3]]))
            .collect();
        Model::new(graph, nodes, edges)
    }

    pub fn to_categorical(&self) -> Result<CategoricalModel> {
        let q = self
            .alphabet_size
            .ok_or_else(|| Error::Format("categorical model needs alphabet_size".into()))?;
        if q < 3 {
            return Err(Error::UnsupportedAlphabet(q));
        }
        let (graph, tables) = self.canonical_tables(q)?;
        CategoricalModel::new(graph, q, self.node_potentials.clone(), tables)
    }

    /// Binary when `alphabet_size` is absent or 2, categorical otherwise.
    pub fn to_any(&self) -> Result<AnyModel> {
        match self.alphabet_size {
            None | Some(2) => Ok(AnyModel::Binary(self.to_model()?)),
            Some(_) => Ok(AnyModel::Categorical(self.to_categorical()?)),
        }
    }
}

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_any(text: &str) -> Result<AnyModel> {
    parse_model_file(text)?.to_any()
}

pub fn model_to_json(m: &Model) -> String {
    serde_json::to_string_pretty(&ModelFile::from_model(m)).expect("model file serializes")
}

pub fn categorical_to_json(m: &CategoricalModel) -> String {
    serde_json::to_string_pretty(&ModelFile::from_categorical(m)).expect("model file serializes")
}
