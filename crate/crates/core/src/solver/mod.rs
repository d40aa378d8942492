//! Projected gradient ascent on `F*`.
//!
//! Iteration `t` moves every node marginal along `grad F*` with step
//! `1/sqrt(t + step_offset)` and clamps the result to
//! `[s t^{-1/4}, 1 - s t^{-1/4}]`. Every `check_every` iterations the current
//! point is turned into BP messages and the run stops once they form an
//! `epsilon`-approximate fixed point.

mod diagnostics;

pub use diagnostics::{boundary_sign_check, safe_region_delta, t_star, BoundaryReport, Violation, ViolationKind};

use crate::bethe::{self, NodeMarginals};
use crate::bp::{fixed_point_residual, MessageSet};
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub epsilon: f64,
    pub max_iters: usize,
    pub step_offset: usize,
    pub init_value: f64,
    pub projection_scale: f64,
    pub check_every: usize,
    /// Nodes whose marginal is written to the trace.
    pub track: Vec<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            epsilon: 1e-3,
            max_iters: 5000,
            step_offset: 100,
            init_value: 0.5,
            projection_scale: 0.1,
            check_every: 1,
            track: vec![0],
        }
    }
}

impl SolverOptions {
    pub fn validate(&self, node_count: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidOptions(m));
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} not in (0, 1)", self.epsilon));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be positive".into());
        }
        if !(self.init_value > 0.0 && self.init_value < 1.0) {
            return bad(format!("init value {} not in (0, 1)", self.init_value));
        }
        if !(self.projection_scale > 0.0 && self.projection_scale <= 0.5) {
            return bad(format!("projection scale {} not in (0, 0.5]", self.projection_scale));
        }
        if self.check_every == 0 {
            return bad("check_every must be positive".into());
        }
        if let Some(v) = self.track.iter().find(|&&v| v >= node_count) {
            return bad(format!("tracked node {v} does not exist"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub grad_inf: f64,
    pub grad_l2: f64,
    /// NaN on iterations where the residual was not evaluated.
    pub bp_residual: f64,
    pub marginals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolveTrace {
    track: Vec<usize>,
    records: Vec<TraceRecord>,
}

impl SolveTrace {
    pub fn new(track: Vec<usize>) -> Self {
        SolveTrace { track, records: Vec::new() }
    }

    pub fn push(&mut self, record: TraceRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.t < record.t));
        debug_assert_eq!(record.marginals.len(), self.track.len());
        self.records.push(record);
    }

    pub fn tracked_nodes(&self) -> &[usize] {
        &self.track
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub y: NodeMarginals,
    pub messages: MessageSet,
    pub iterations: usize,
    pub converged: bool,
    /// Fixed-point residual of `messages`.
    pub residual: f64,
    pub trace: SolveTrace,
}

/// Turns a budget-exhausted result into [`Error::BudgetExhausted`].
pub fn require_converged(result: SolveResult) -> Result<SolveResult> {
    if result.converged {
        Ok(result)
    } else {
        Err(Error::BudgetExhausted {
            iterations: result.iterations,
            trace: Box::new(result.trace),
        })
    }
}

/// Clamp to `[scale t^{-1/4}, 1 - scale t^{-1/4}]`.
pub fn project(x: f64, t: usize, scale: f64) -> f64 {
    let floor = scale / (t as f64).powf(0.25);
    x.clamp(floor, 1.0 - floor)
}

pub fn step_size(t: usize, offset: usize) -> f64 {
    1.0 / ((t + offset) as f64).sqrt()
}

pub(crate) fn step_from(y: &NodeMarginals, grad: &[f64], t: usize, opts: &SolverOptions) -> NodeMarginals {
    let h = step_size(t, opts.step_offset);
    let next = y
        .values()
        .iter()
        .zip(grad)
        .map(|(y, g)| project(y + h * g, t, opts.projection_scale))
        .collect();
    NodeMarginals::new(next).expect("projection keeps iterates interior")
}

/// `[y + grad F*(y) / sqrt(t + offset)]_*`, all coordinates from the same
/// snapshot.
pub fn ascent_step(model: &Model, y: &NodeMarginals, t: usize, opts: &SolverOptions) -> Result<NodeMarginals> {
    let grad = bethe::grad_f_star(model, y)?;
    Ok(step_from(y, &grad, t, opts))
}

/// Residual and messages of the point `y`, with `y_E` from the pairwise solve.
pub fn check_point(model: &Model, y: &NodeMarginals) -> Result<(MessageSet, f64)> {
    let ye = bethe::edge_marginals_for(model, y);
    let msgs = bethe::messages_from_y(model, y, &ye)?;
    let r = fixed_point_residual(model, &msgs);
    Ok((msgs, r))
}

/// Shared driver: `advance` maps `(y(t), grad F*(y(t)), t)` to `y(t+1)`;
/// `verify` runs before each residual check.
pub(crate) fn iterate(
    model: &Model,
    opts: &SolverOptions,
    init: NodeMarginals,
    mut verify: impl FnMut(&NodeMarginals) -> Result<()>,
    mut advance: impl FnMut(&NodeMarginals, &[f64], usize) -> NodeMarginals,
) -> Result<SolveResult> {
    opts.validate(model.node_count())?;
    let mut trace = SolveTrace::new(opts.track.clone());
    let mut y = init;
    let mut last: Option<(MessageSet, f64)> = None;
    let mut t = 1;
    loop {
        let grad = bethe::grad_f_star(model, &y)?;
        let (grad_inf, grad_l2) = bethe::norms(&grad);
        let checked = t % opts.check_every == 0 || t == opts.max_iters;
        let mut residual = f64::NAN;
        if checked {
            verify(&y)?;
            let (msgs, r) = check_point(model, &y)?;
            residual = r;
            last = Some((msgs, r));
        }
        trace.push(TraceRecord {
            t,
            grad_inf,
            grad_l2,
            bp_residual: residual,
            marginals: opts.track.iter().map(|&v| y[v]).collect(),
        });
        let converged = checked && residual <= opts.epsilon;
        if converged || t == opts.max_iters {
            let (messages, residual) = last.expect("final iteration is always checked");
            return Ok(SolveResult {
                y,
                messages,
                iterations: t,
                converged,
                residual,
                trace,
            });
        }
        y = advance(&y, &grad, t);
        t += 1;
    }
}

/// Runs the ascent from `y_v(1) = init_value`. Running out of iterations is
/// not an error here: the result has `converged == false`; see
/// [`require_converged`].
pub fn solve(model: &Model, opts: &SolverOptions) -> Result<SolveResult> {
    opts.validate(model.node_count())?;
    let init = NodeMarginals::constant(model.node_count(), opts.init_value)?;
    iterate(model, opts, init, |_| Ok(()), |y, g, t| step_from(y, g, t, opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{self, EdgeTable, Graph};
    use crate::oracle;
    use crate::rng::SeededRng;

    fn torus_hardcore(lambda: f64) -> Model {
        model::hardcore(model::grid_graph(10, true).unwrap(), lambda, 1e-3).unwrap()
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project(0.05, 1, 0.1), 0.1);
        for t in [1, 7, 1000] {
            assert_eq!(project(0.5, t, 0.1), 0.5);
        }
        assert!((project(0.97, 16, 0.1) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn ascent_step_examples() {
        let ones = Model::new(
            Graph::new(2, [(0, 1)]).unwrap(),
            vec![[1.0; 2]; 2],
            vec![EdgeTable::ones()],
        )
        .unwrap();
        let half = NodeMarginals::constant(2, 0.5).unwrap();
        let opts = SolverOptions::default();
        assert_eq!(ascent_step(&ones, &half, 1, &opts).unwrap(), half);

        let hc = model::hardcore(Graph::new(2, [(0, 1)]).unwrap(), 1.0, 1e-3).unwrap();
        let opts0 = SolverOptions { step_offset: 0, ..Default::default() };
        let next = ascent_step(&hc, &half, 1, &opts0).unwrap();
        assert!(next[0] < 0.5 && next[1] < 0.5);
    }

    #[test]
    fn ascent_step_stays_in_projection_band() {
        let mut rng = SeededRng::new(3);
        for t in [1, 2, 10, 500] {
            let g = model::random_graph(6, 0.5, &mut rng).unwrap();
            let m = model::random_potentials(g, 50.0, &mut rng).unwrap();
            let y = NodeMarginals::new((0..6).map(|_| rng.open_range(0.0, 1.0)).collect()).unwrap();
            let opts = SolverOptions { step_offset: 0, ..Default::default() };
            let next = ascent_step(&m, &y, t, &opts).unwrap();
            let floor = 0.1 / (t as f64).powf(0.25);
            assert!(next.values().iter().all(|&x| x >= floor && x <= 1.0 - floor));
        }
    }

    #[test]
    fn invalid_options_are_rejected() {
        let m = torus_hardcore(1.0);
        for opts in [
            SolverOptions { epsilon: 0.0, ..Default::default() },
            SolverOptions { epsilon: 1.0, ..Default::default() },
            SolverOptions { init_value: 1.0, ..Default::default() },
            SolverOptions { projection_scale: 0.6, ..Default::default() },
            SolverOptions { max_iters: 0, ..Default::default() },
            SolverOptions { track: vec![100], ..Default::default() },
        ] {
            assert_eq!(solve(&m, &opts).unwrap_err().kind(), "InvalidOptions");
        }
    }

    #[test]
    fn hardcore_torus_converges() {
        for (lambda, budget) in [(1.0, 50), (2.0, 100)] {
            let m = torus_hardcore(lambda);
            let r = solve(&m, &SolverOptions::default()).unwrap();
            assert!(r.converged, "lambda {lambda}: residual {}", r.residual);
            assert!(r.iterations <= budget, "lambda {lambda}: {} iterations", r.iterations);
            assert!(fixed_point_residual(&m, &r.messages) <= 1e-3);
        }
    }

    #[test]
    fn trees_match_oracle() {
        for seed in 0..8 {
            let m = model::random_tree_model(10, seed).unwrap();
            let r = solve(&m, &SolverOptions::default()).unwrap();
            assert!(r.converged);
            let exact = oracle::exact_marginals(&m).unwrap();
            for v in 0..10 {
                assert!((r.y[v] - exact.node_marginals[v][1]).abs() <= 1e-2);
            }
        }
    }

    #[test]
    fn variations_converge_on_trees() {
        for seed in 0..4 {
            let m = model::random_tree_model(10, seed).unwrap();
            for offset in [0, 100] {
                let opts = SolverOptions { init_value: 0.7, step_offset: offset, ..Default::default() };
                assert!(solve(&m, &opts).unwrap().converged);
            }
        }
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let m = torus_hardcore(2.0);
        let opts = SolverOptions { max_iters: 2, epsilon: 1e-12, ..Default::default() };
        let r = solve(&m, &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        match require_converged(r).unwrap_err() {
            Error::BudgetExhausted { iterations, trace } => {
                assert_eq!(iterations, 2);
                assert_eq!(trace.records().len(), 2);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn sparse_checks_still_verify_the_final_point() {
        let m = torus_hardcore(1.0);
        let opts = SolverOptions { check_every: 4, ..Default::default() };
        let r = solve(&m, &opts).unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations % 4, 0);
        assert!(r.trace.records().iter().filter(|rec| rec.t % 4 != 0).all(|rec| rec.bp_residual.is_nan()));
    }

    #[test]
    fn iterates_respect_the_shrinking_band() {
        let m = torus_hardcore(2.0);
        let opts = SolverOptions { epsilon: 1e-9, max_iters: 60, track: (0..100).collect(), ..Default::default() };
        let r = solve(&m, &opts).unwrap();
        for rec in r.trace.records() {
            let floor = 0.1 / (rec.t as f64).powf(0.25);
            let lo = if rec.t == 1 { 0.5 } else { 0.1 / ((rec.t - 1) as f64).powf(0.25) };
            assert!(rec.marginals.iter().all(|&y| y > 0.0 && y < 1.0));
            assert!(rec.marginals.iter().all(|&y| y >= lo.min(floor) && y <= 1.0 - lo.min(floor)));
        }
    }

    #[test]
    fn trace_is_strictly_increasing() {
        let m = torus_hardcore(1.0);
        let r = solve(&m, &SolverOptions::default()).unwrap();
        let ts: Vec<usize> = r.trace.records().iter().map(|rec| rec.t).collect();
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        assert!(r.trace.records().iter().all(|rec| rec.grad_inf >= 0.0 && rec.grad_l2 >= 0.0));
    }
}
