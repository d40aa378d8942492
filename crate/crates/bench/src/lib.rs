//! Shared fixtures for the solver benchmarks.

use bethe_core::bethe::{self, NodeMarginals};
use bethe_core::{model, MessageSet, Model};

/// Hard-core model on the `side x side` torus.
pub fn torus(side: usize, lambda: f64) -> Model {
    model::hardcore(model::grid_graph(side, true).unwrap(), lambda, model::DEFAULT_ZERO_REPLACEMENT).unwrap()
}

/// Ferromagnetic Ising model on the `side x side` torus.
pub fn ising_torus(side: usize, seed: u64) -> Model {
    model::ising(model::grid_graph(side, true).unwrap(), 2.0, seed).unwrap()
}

/// A spread of interior node marginals.
pub fn spread(model: &Model) -> NodeMarginals {
    let n = model.node_count();
    NodeMarginals::new((0..n).map(|v| 0.1 + 0.8 * (v as f64 + 0.5) / n as f64).collect()).unwrap()
}

/// Messages matching [`spread`].
pub fn spread_messages(model: &Model) -> MessageSet {
    let y = spread(model);
    let ye = bethe::edge_marginals_for(model, &y);
    bethe::messages_from_y(model, &y, &ye).unwrap()
}
