//! `bethe`: generate models, run the solvers and write CSV traces.
//!
//! Exit status is 0 when every solver converged, 2 when an iteration budget
//! ran out and 1 on error, with `error kind=<Kind> msg=<text>` on stderr.

mod report;
mod run;
mod source;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use bethe_core::solver;
use bethe_core::{io::AnyModel, Error};
use clap::{Args, Parser, Subcommand};

use run::{Outcome, RunArgs, SolverKind};
use source::{BadSpec, Generator, SourceArgs};

#[derive(Parser)]
#[command(name = "bethe", version, about = "Bethe free energy ascent and belief propagation on pairwise models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated model as JSON.
    Generate(GenerateArgs),
    /// Run one solver and write its trace.
    Solve(SolveArgs),
    /// Run two solvers on the same model and write a merged trace.
    Compare(CompareArgs),
    /// Exact log partition function and marginals by enumeration.
    Exact(ExactArgs),
    /// Safe-region constants and the boundary sign check.
    Diag(DiagArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[command(subcommand)]
    generator: Generator,
    /// Output file [default: stdout].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// [default: alg-b when --bits is given, alg-a otherwise]
    #[arg(long, value_enum)]
    solver: Option<SolverKind>,
    #[command(flatten)]
    run: RunArgs,
    /// CSV trace file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_enum, default_value = "alg-a")]
    solver: SolverKind,
    #[arg(long, value_enum, default_value = "bp")]
    against: SolverKind,
    #[command(flatten)]
    run: RunArgs,
    /// Merged CSV trace file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// CSV of node marginals.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DiagArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Band width to check [default: the safe-region delta].
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn summary(o: &Outcome, delta: Option<f64>) -> String {
    let mut line = format!(
        "solver={} converged={} iterations={} residual={}",
        o.solver.name(),
        o.converged,
        o.iterations,
        report::num(o.residual)
    );
    for (k, v) in &o.extra {
        line.push_str(&format!(" {k}={v}"));
    }
    if let Some(d) = delta {
        line.push_str(&format!(" max_marginal_delta={}", report::num(d)));
    }
    line
}

fn status(converged: bool) -> ExitCode {
    if converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode> {
    let text = source::to_json(&args.generator.build()?);
    match &args.out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}")?;
            w.flush()?;
        }
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let model = args.source.load()?;
    let kind = args.solver.unwrap_or(if args.run.bits.is_some() {
        SolverKind::AlgB
    } else {
        SolverKind::AlgA
    });
    let out = run::run(kind, &model, &args.run)?;
    if let Some(path) = &args.out {
        report::write_trace(create(path)?, &out.trace)?;
    }
    println!("{}", summary(&out, None));
    Ok(status(out.converged))
}

fn cmd_compare(args: CompareArgs) -> Result<ExitCode> {
    let model = args.source.load()?;
    let a = run::run(args.solver, &model, &args.run)?;
    let b = run::run(args.against, &model, &args.run)?;
    let oracle = match run::exact(&model) {
        Ok(ex) => Some(ex.node_marginals),
        Err(e) if matches!(e.downcast_ref(), Some(Error::TooLargeForEnumeration { .. })) => None,
        Err(e) => return Err(e),
    };
    if let Some(path) = &args.out {
        let (na, nb) = match (a.solver.name(), b.solver.name()) {
            (x, y) if x == y => (format!("{x}1"), format!("{y}2")),
            (x, y) => (x.to_string(), y.to_string()),
        };
        report::write_merged(create(path)?, (&na, &a.trace), (&nb, &b.trace))?;
    }
    for o in [&a, &b] {
        let delta = oracle.as_ref().map(|ex| run::max_marginal_delta(&o.marginals, ex));
        println!("{}", summary(o, delta));
    }
    Ok(status(a.converged && b.converged))
}

fn cmd_exact(args: ExactArgs) -> Result<ExitCode> {
    let model = args.source.load()?;
    let ex = run::exact(&model)?;
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_writer(create(path)?);
        let q = ex.node_marginals.first().map_or(0, Vec::len);
        let mut header = vec!["node".to_string()];
        header.extend((0..q).map(|x| format!("p_{x}")));
        w.write_record(&header)?;
        for (v, p) in ex.node_marginals.iter().enumerate() {
            let mut row = vec![v.to_string()];
            row.extend(p.iter().map(|&x| report::num(x)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    println!(
        "nodes={} log_partition={}",
        model.graph().node_count(),
        report::num(ex.log_partition)
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_diag(args: DiagArgs) -> Result<ExitCode> {
    let model = match args.source.load()? {
        AnyModel::Binary(m) => m,
        AnyModel::Categorical(m) => return Err(Error::UnsupportedAlphabet(m.alphabet_size()).into()),
    };
    let bound = solver::safe_region_delta(&model);
    let delta = args.delta.unwrap_or(bound);
    let report = solver::boundary_sign_check(&model, delta, args.samples, args.seed)?;
    println!(
        "psi_bound={} max_degree={} delta_bound={} delta={} t_star={} samples={} violations={}",
        report::num(model.psi_bound()),
        model.graph().max_degree(),
        report::num(bound),
        report::num(report.delta),
        report::num(report.t_star),
        report.samples,
        report.violations.len()
    );
    for v in &report.violations {
        println!(
            "violation kind={:?} node={} y={} gradient={}",
            v.kind,
            v.node,
            report::num(v.y),
            report::num(v.gradient)
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return e.kind();
        }
        if cause.is::<BadSpec>() {
            return "BadSpec";
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return "Io";
        }
    }
    "Error"
}

fn fail(kind: &str, msg: &str) -> ExitCode {
    eprintln!("error kind={kind} msg={}", msg.replace('\n', " "));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("Usage", e.render().to_string().trim()),
    };
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Exact(a) => cmd_exact(a),
        Command::Diag(a) => cmd_diag(a),
    };
    result.unwrap_or_else(|e| fail(error_kind(&e), &format!("{e:#}")))
}
