//! Fixed-precision ascent: every node coordinate is kept on the grid
//! `2^-k Z`, rounding each ascent step to the nearest grid point.
//!
//! Pairwise marginals are not quantized. They come from the exact pairwise
//! solve and are checked against the `epsilon / 6` log-constraint tolerance
//! before each residual test.

use crate::bethe::{self, NodeMarginals};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::solver::{self, SolveResult, SolverOptions};

pub const MIN_BITS: u32 = 4;
pub const MAX_BITS: u32 = 60;

/// Nearest multiple of `2^-k` (ties to even), with the endpoints replaced by
/// `2^-k` and `1 - 2^-k`.
pub fn quantize(x: f64, k: u32) -> f64 {
    let scale = (k as f64).exp2();
    let unit = 1.0 / scale;
    let r = (x * scale).round_ties_even() * unit;
    if r <= 0.0 {
        unit
    } else if r >= 1.0 {
        1.0 - unit
    } else {
        r
    }
}

pub fn is_representable(x: f64, k: u32) -> bool {
    let s = x * (k as f64).exp2();
    s.fract() == 0.0
}

/// Node state on the `k`-bit grid.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedState {
    z: NodeMarginals,
    k: u32,
}

impl QuantizedState {
    pub fn new(values: Vec<f64>, k: u32) -> Result<Self> {
        check_bits(k, 1)?;
        if let Some(x) = values.iter().find(|&&x| !is_representable(x, k)) {
            return Err(Error::InvalidOptions(format!("{x} is not a multiple of 2^-{k}")));
        }
        Ok(QuantizedState { z: NodeMarginals::new(values)?, k })
    }

    pub fn uniform(n: usize, value: f64, k: u32) -> Result<Self> {
        Self::new(vec![quantize(value, k); n], k)
    }

    pub fn marginals(&self) -> &NodeMarginals {
        &self.z
    }

    pub fn bits(&self) -> u32 {
        self.k
    }
}

fn check_bits(k: u32, min: u32) -> Result<()> {
    if k < min || k > MAX_BITS {
        return Err(Error::InvalidOptions(format!("bits {k} outside {min}..={MAX_BITS}")));
    }
    Ok(())
}

fn quantize_all(y: NodeMarginals, k: u32) -> NodeMarginals {
    NodeMarginals::new(y.into_values().into_iter().map(|x| quantize(x, k)).collect())
        .expect("quantize stays inside (0, 1)")
}

/// `quantize(ascent_step(z, t), k)` componentwise.
pub fn quantized_step(model: &Model, z: &QuantizedState, t: usize, opts: &SolverOptions) -> Result<QuantizedState> {
    let y = solver::ascent_step(model, &z.z, t, opts)?;
    Ok(QuantizedState { z: quantize_all(y, z.k), k: z.k })
}

/// Largest `|Psi^(u,v) + ln(...)|` over edges at the pairwise marginals of `z`.
pub fn pairwise_constraint_residual(model: &Model, z: &NodeMarginals) -> (usize, f64) {
    let ye = bethe::edge_marginals_for(model, z);
    model
        .graph()
        .edges()
        .iter()
        .enumerate()
        .map(|(e, &(u, v))| (e, bethe::pairwise_log_residual(model.edge_psi(e), z[u], z[v], ye[e]).abs()))
        .fold((0, 0.0), |best, cur| if cur.1 > best.1 { cur } else { best })
}

/// The fixed-precision solve from `z_v(1) = quantize(init_value, k)`.
///
/// Fails with [`Error::QuantizedPairwiseFailure`] if a checked iterate has a
/// pairwise log-constraint residual above `epsilon / 6`. Convergence is
/// declared exactly as in [`solver::solve`].
pub fn solve_quantized(model: &Model, opts: &SolverOptions, k: u32) -> Result<SolveResult> {
    check_bits(k, MIN_BITS)?;
    opts.validate(model.node_count())?;
    let tolerance = opts.epsilon / 6.0;
    let init = QuantizedState::uniform(model.node_count(), opts.init_value, k)?.z;
    solver::iterate(
        model,
        opts,
        init,
        |z| {
            let (edge, residual) = pairwise_constraint_residual(model, z);
            if residual > tolerance {
                return Err(Error::QuantizedPairwiseFailure { edge, residual, tolerance });
            }
            Ok(())
        },
        |z, grad, t| quantize_all(solver::step_from(z, grad, t, opts), k),
    )
}

/// Doubles `k` from `start` (capped at 60) until a run converges. Returns the
/// bits used with the final result, converged or not.
pub fn solve_quantized_auto(model: &Model, opts: &SolverOptions, start: u32) -> Result<(u32, SolveResult)> {
    check_bits(start, MIN_BITS)?;
    let mut k = start;
    loop {
        let outcome = solve_quantized(model, opts, k);
        let done = k == MAX_BITS;
        match outcome {
            Ok(r) if r.converged || done => return Ok((k, r)),
            Err(e) if done => return Err(e),
            Ok(_) | Err(Error::QuantizedPairwiseFailure { .. }) => k = (2 * k).min(MAX_BITS),
            Err(e) => return Err(e),
        }
    }
}
