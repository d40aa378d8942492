use anyhow::Result;
use bethe_core::bp::{self, BpOptions};
use bethe_core::io::AnyModel;
use bethe_core::oracle::{self, ExactResult};
use bethe_core::solver::{self, SolveResult};
use bethe_core::{bethe, fptas, nonbinary, EdgeMarginals, Error, MessageSet, Model, NodeMarginals};
use bethe_core::{SolveTrace, SolverOptions, TraceRecord};
use clap::{Args, ValueEnum};

use crate::source::BadSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Bp,
    AlgA,
    AlgB,
    Nonbinary,
    Exact,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Bp => "bp",
            SolverKind::AlgA => "alg-a",
            SolverKind::AlgB => "alg-b",
            SolverKind::Nonbinary => "nonbinary",
            SolverKind::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bits {
    Fixed(u32),
    Auto,
}

fn parse_bits(s: &str) -> std::result::Result<Bits, String> {
    if s == "auto" {
        return Ok(Bits::Auto);
    }
    s.parse()
        .map(Bits::Fixed)
        .map_err(|_| format!("expected a bit count or \"auto\", got {s:?}"))
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    /// Iteration budget [default: 200 for bp, 5000 otherwise].
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub step_offset: usize,
    /// Initial node marginal; bp starts from the matching message
    /// init / (1 - init).
    #[arg(long, default_value_t = 0.5)]
    pub init: f64,
    #[arg(long, default_value_t = 0.1)]
    pub projection_scale: f64,
    /// Evaluate the fixed-point residual every this many iterations.
    #[arg(long, default_value_t = 1)]
    pub check_every: usize,
    /// Bits per marginal for alg-b, or "auto" to double from 4 until a run
    /// succeeds.
    #[arg(long, value_parser = parse_bits)]
    pub bits: Option<Bits>,
    /// Weight on the previous message in damped bp.
    #[arg(long, default_value_t = 0.0)]
    pub damping: f64,
    /// Nodes whose marginals are written to the trace.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub track: Vec<usize>,
}

impl RunArgs {
    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            epsilon: self.epsilon,
            max_iters: self.max_iters.unwrap_or(SolverOptions::default().max_iters),
            step_offset: self.step_offset,
            init_value: self.init,
            projection_scale: self.projection_scale,
            check_every: self.check_every,
            track: self.track.clone(),
        }
    }

    fn bp_options(&self) -> BpOptions {
        BpOptions {
            epsilon: self.epsilon,
            max_iters: self.max_iters.unwrap_or(BpOptions::default().max_iters),
            damping: self.damping,
            track: self.track.clone(),
        }
    }
}

/// What one solver produced, in a form the report writers share.
pub struct Outcome {
    pub solver: SolverKind,
    pub trace: SolveTrace,
    pub converged: bool,
    pub iterations: usize,
    pub residual: f64,
    /// `marginals[v][x]` estimate of `Pr(x_v = x)`.
    pub marginals: Vec<Vec<f64>>,
    pub extra: Vec<(&'static str, String)>,
}

impl Outcome {
    fn binary(solver: SolverKind, r: SolveResult) -> Self {
        Outcome {
            solver,
            marginals: r.y.values().iter().map(|&p| vec![1.0 - p, p]).collect(),
            trace: r.trace,
            converged: r.converged,
            iterations: r.iterations,
            residual: r.residual,
            extra: Vec::new(),
        }
    }
}

fn binary(model: &AnyModel) -> Result<&Model> {
    match model {
        AnyModel::Binary(m) => Ok(m),
        AnyModel::Categorical(m) => Err(Error::UnsupportedAlphabet(m.alphabet_size()).into()),
    }
}

fn check_track(model: &AnyModel, track: &[usize]) -> Result<()> {
    let n = model.graph().node_count();
    match track.iter().find(|&&v| v >= n) {
        Some(v) => Err(BadSpec(format!("tracked node {v} does not exist ({n} nodes)")).into()),
        None => Ok(()),
    }
}

pub fn exact(model: &AnyModel) -> Result<ExactResult> {
    Ok(match model {
        AnyModel::Binary(m) => oracle::exact_marginals(m)?,
        AnyModel::Categorical(m) => oracle::exact_categorical(m)?,
    })
}

fn exact_outcome(model: &AnyModel, track: &[usize]) -> Result<Outcome> {
    let ex = exact(model)?;
    let (grad_inf, grad_l2) = match model {
        AnyModel::Binary(m) => {
            let yv = NodeMarginals::new(ex.node_marginals.iter().map(|p| p[1]).collect());
            let ye = EdgeMarginals::new(ex.edge_marginals.iter().map(|p| p[3]).collect());
            match (yv, ye) {
                (Ok(yv), Ok(ye)) => {
                    let (gn, ge) = bethe::gradient(m, &yv, &ye)?;
                    bethe::norms(gn.iter().chain(&ge))
                }
                _ => (f64::NAN, f64::NAN),
            }
        }
        AnyModel::Categorical(_) => (f64::NAN, f64::NAN),
    };
    let mut trace = SolveTrace::new(track.to_vec());
    trace.push(TraceRecord {
        t: 0,
        grad_inf,
        grad_l2,
        bp_residual: f64::NAN,
        marginals: track.iter().map(|&v| ex.node_marginals[v][1]).collect(),
    });
    Ok(Outcome {
        solver: SolverKind::Exact,
        trace,
        converged: true,
        iterations: 0,
        residual: f64::NAN,
        marginals: ex.node_marginals,
        extra: vec![("log_partition", format!("{:.16e}", ex.log_partition))],
    })
}

pub fn run(kind: SolverKind, model: &AnyModel, args: &RunArgs) -> Result<Outcome> {
    check_track(model, &args.track)?;
    match kind {
        SolverKind::AlgA => Ok(Outcome::binary(kind, solver::solve(binary(model)?, &args.solver_options())?)),
        SolverKind::AlgB => {
            let m = binary(model)?;
            let opts = args.solver_options();
            let (k, r) = match args.bits {
                Some(Bits::Fixed(k)) => (k, fptas::solve_quantized(m, &opts, k)?),
                Some(Bits::Auto) | None => fptas::solve_quantized_auto(m, &opts, fptas::MIN_BITS)?,
            };
            let mut out = Outcome::binary(kind, r);
            out.extra.push(("bits", k.to_string()));
            Ok(out)
        }
        SolverKind::Bp => {
            let m = binary(model)?;
            if !(args.init > 0.0 && args.init < 1.0) {
                return Err(Error::InvalidOptions(format!("init value {} not in (0, 1)", args.init)).into());
            }
            let init = MessageSet::constant(m.graph(), args.init / (1.0 - args.init));
            Ok(Outcome::binary(kind, bp::run_bp(m, init, &args.bp_options())?))
        }
        SolverKind::Nonbinary => {
            let m = match model {
                AnyModel::Categorical(m) => m,
                AnyModel::Binary(_) => return Err(Error::UnsupportedAlphabet(2).into()),
            };
            let r = nonbinary::solve_nonbinary(m, &args.solver_options())?;
            let n = m.graph().node_count();
            Ok(Outcome {
                solver: kind,
                marginals: (0..n).map(|v| r.state.node(v).to_vec()).collect(),
                trace: r.trace,
                converged: r.converged,
                iterations: r.iterations,
                residual: r.measure,
                extra: Vec::new(),
            })
        }
        SolverKind::Exact => exact_outcome(model, &args.track),
    }
}

/// Largest `|estimate - exact|` over all nodes and symbols.
pub fn max_marginal_delta(est: &[Vec<f64>], exact: &[Vec<f64>]) -> f64 {
    est.iter()
        .zip(exact)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max)
}
