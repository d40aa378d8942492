use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use bethe_core::io::{self, AnyModel};
use bethe_core::{model, nonbinary, Graph, SeededRng};
use clap::{Args, Parser, Subcommand};

/// A generator spec or option value that could not be used.
#[derive(Debug)]
pub struct BadSpec(pub String);

impl fmt::Display for BadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for BadSpec {}

#[derive(Debug, Clone, Subcommand)]
pub enum Generator {
    /// Hard-core model on a square grid.
    GridHardcore {
        #[arg(long, default_value_t = 10)]
        side: usize,
        /// Close the grid into a torus.
        #[arg(long)]
        wrap: bool,
        /// Fugacity.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Stand-in for the forbidden psi(1,1) = 0.
        #[arg(long, default_value_t = model::DEFAULT_ZERO_REPLACEMENT)]
        zero: f64,
    },
    /// Ising model on a square grid with random fields.
    GridIsing {
        #[arg(long, default_value_t = 10)]
        side: usize,
        #[arg(long)]
        wrap: bool,
        /// Diagonal edge weight; above 1 is ferromagnetic.
        #[arg(long, default_value_t = 2.0)]
        edge_weight: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random tree. With `--alphabet Q >= 3` the model is categorical with
    /// potentials drawn from [1/2, 2].
    TreeRandom {
        #[arg(long, default_value_t = 10)]
        nodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        alphabet: usize,
    },
}

impl Generator {
    pub fn build(&self) -> Result<AnyModel> {
        let m = match *self {
            Generator::GridHardcore { side, wrap, lambda, zero } => {
                AnyModel::Binary(model::hardcore(model::grid_graph(side, wrap)?, lambda, zero)?)
            }
            Generator::GridIsing {
                side,
                wrap,
                edge_weight,
                seed,
            } => AnyModel::Binary(model::ising(model::grid_graph(side, wrap)?, edge_weight, seed)?),
            Generator::TreeRandom { nodes, seed, alphabet } => match alphabet {
                0 | 1 => return Err(BadSpec(format!("alphabet size {alphabet} is below 2")).into()),
                2 => AnyModel::Binary(model::random_tree_model(nodes, seed)?),
                q => {
                    let mut rng = SeededRng::new(seed);
                    let graph: Graph = model::random_tree(nodes, &mut rng)?;
                    AnyModel::Categorical(nonbinary::random_categorical(graph, q, 0.5, 2.0, &mut rng)?)
                }
            },
        };
        Ok(m)
    }
}

#[derive(Parser)]
#[command(name = "gen", no_binary_name = true)]
struct GenSpec {
    #[command(subcommand)]
    generator: Generator,
}

/// Parses `"grid-hardcore --side 10 --wrap --lambda 2"`.
pub fn parse_gen_spec(spec: &str) -> Result<Generator> {
    GenSpec::try_parse_from(spec.split_whitespace())
        .map(|g| g.generator)
        .map_err(|e| BadSpec(format!("generator spec {spec:?}: {}", e.render().to_string().trim())).into())
}

#[derive(Debug, Clone, Args)]
#[group(required = true, multiple = false)]
pub struct SourceArgs {
    /// Model file in the JSON model format.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Generator spec, e.g. "grid-hardcore --side 10 --wrap --lambda 2".
    #[arg(long = "gen")]
    pub generator: Option<String>,
}

impl SourceArgs {
    pub fn load(&self) -> Result<AnyModel> {
        match (&self.model, &self.generator) {
            (Some(path), None) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                Ok(io::read_any(&text)?)
            }
            (None, Some(spec)) => parse_gen_spec(spec)?.build(),
            _ => Err(BadSpec("give exactly one of --model and --gen".into()).into()),
        }
    }
}

pub fn to_json(m: &AnyModel) -> String {
    match m {
        AnyModel::Binary(m) => io::model_to_json(m),
        AnyModel::Categorical(m) => io::categorical_to_json(m),
    }
}
