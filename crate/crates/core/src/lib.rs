//! Belief propagation and Bethe free energy ascent for pairwise Markov random
//! fields.
//!
//! * [`bp`]: reduced sum-product messages and the fixed-point residual.
//! * [`bethe`]: the Bethe function, its gradients and the message conversion.
//! * [`solver`]: projected gradient ascent on the reduced Bethe function.
//! * [`fptas`]: the same ascent with node marginals kept at `k` bits.
//! * [`nonbinary`]: round-robin slice ascent for categorical variables.
//! * [`oracle`]: exact inference by enumeration.

pub mod bethe;
pub mod bp;
pub mod error;
pub mod fptas;
pub mod io;
pub mod model;
pub mod nonbinary;
pub mod oracle;
pub mod rng;
pub mod solver;

pub use bethe::{EdgeMarginals, NodeMarginals};
pub use bp::{BpOptions, MessageSet};
pub use error::{Error, Result};
pub use io::AnyModel;
pub use model::{EdgeTable, Graph, Model};
pub use nonbinary::{CategoricalModel, TauState};
pub use oracle::ExactResult;
pub use rng::SeededRng;
pub use solver::{SolveResult, SolveTrace, SolverOptions, TraceRecord};
