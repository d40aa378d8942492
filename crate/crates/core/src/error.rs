use thiserror::Error;

use crate::solver::SolveTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(
        "potential {location} = {value} is not strictly positive; replace exact zeros with a tiny \
         positive value (e.g. 1e-3) so the distribution is almost unchanged"
    )]
    ZeroOrNegativePotential { location: String, value: f64 },

    #[error("potential {location} = {value} is not finite")]
    NonFinitePotential { location: String, value: f64 },

    #[error("grid side {side} too small (need >= {min})")]
    SideTooSmall { side: usize, min: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no edge between {0} and {1}")]
    UnknownEdge(usize, usize),

    #[error("non-finite neighbor product while updating message {from}->{to}")]
    NumericOverflow { from: usize, to: usize },

    #[error("marginals outside the pairwise polytope interior at {0}")]
    MarginalOutOfPolytope(String),

    #[error("iteration budget of {iterations} exhausted")]
    BudgetExhausted {
        iterations: usize,
        trace: Box<SolveTrace>,
    },

    #[error("delta {delta} exceeds the safe-region bound {bound}")]
    DeltaTooLarge { delta: f64, bound: f64 },

    #[error("quantized pairwise solve on edge {edge} has log-constraint residual {residual} > {tolerance}")]
    QuantizedPairwiseFailure {
        edge: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("slice ({p},{q}) at node {node} has no room left (feasible width {width})")]
    DegenerateSlice {
        p: usize,
        q: usize,
        node: usize,
        width: f64,
    },

    #[error("{configs} configurations exceed the enumeration limit of {limit}")]
    TooLargeForEnumeration { configs: f64, limit: f64 },

    #[error("graph contains a cycle")]
    NotATree,

    #[error("invalid option: {0}")]
    InvalidOptions(String),

    #[error("unsupported alphabet size {0}")]
    UnsupportedAlphabet(usize),

    #[error("model file: {0}")]
    Format(String),
}

impl Error {
    /// Stable variant name, used for machine-readable reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ZeroOrNegativePotential { .. } => "ZeroOrNegativePotential",
            Error::NonFinitePotential { .. } => "NonFinitePotential",
            Error::SideTooSmall { .. } => "SideTooSmall",
            Error::InvalidGraph(_) => "InvalidGraph",
            Error::UnknownEdge(..) => "UnknownEdge",
            Error::NumericOverflow { .. } => "NumericOverflow",
            Error::MarginalOutOfPolytope(_) => "MarginalOutOfPolytope",
            Error::BudgetExhausted { .. } => "BudgetExhausted",
            Error::DeltaTooLarge { .. } => "DeltaTooLarge",
            Error::QuantizedPairwiseFailure { .. } => "QuantizedPairwiseFailure",
            Error::DegenerateSlice { .. } => "DegenerateSlice",
            Error::TooLargeForEnumeration { .. } => "TooLargeForEnumeration",
            Error::NotATree => "NotATree",
            Error::InvalidOptions(_) => "InvalidOptions",
            Error::UnsupportedAlphabet(_) => "UnsupportedAlphabet",
            Error::Format(_) => "Format",
        }
    }
}
