//! Safe-region quantities for the ascent: the margin `delta`, the iteration
//! `t*` after which iterates stay in `[delta, 1 - delta]^n`, and an empirical
//! check of the gradient sign conditions near the boundary.

use crate::bethe::{self, NodeMarginals};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::rng::SeededRng;

const ENTROPY_BOUND: f64 = 1.0 / 400.0;

/// Largest `delta` with `delta <= 0.5 / (|psi|^(6D+2) + 1)` and
/// `delta ln(1/delta) <= 1/400`.
pub fn safe_region_delta(model: &Model) -> f64 {
    let d = model.graph().max_degree() as f64;
    let first = 0.5 / (model.psi_bound().powf(6.0 * d + 2.0) + 1.0);
    first.min(entropy_delta())
}

/// Largest `delta` in `(0, 1/e)` with `delta ln(1/delta) <= 1/400`.
fn entropy_delta() -> f64 {
    let h = |x: f64| -x * x.ln();
    let (mut lo, mut hi) = (1e-6, (-1.0f64).exp());
    debug_assert!(h(lo) <= ENTROPY_BOUND && h(hi) > ENTROPY_BOUND);
    while hi - lo > 1e-15 * lo {
        let mid = 0.5 * (lo + hi);
        if h(mid) <= ENTROPY_BOUND {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `t* = 1e-4 / delta^4`.
pub fn t_star(delta: f64) -> f64 {
    1e-4 / delta.powi(4)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Positive gradient with `y_v >= 1 - 2 delta`.
    UpperBand,
    /// Negative gradient with `y_v <= 2 delta`.
    LowerBand,
    /// `|grad| / sqrt(t*) > delta / 2`.
    StepTooLarge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub node: usize,
    pub y: f64,
    pub gradient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub delta: f64,
    pub t_star: f64,
    pub samples: usize,
    pub violations: Vec<Violation>,
}

/// Samples `y` in `[delta, 1 - delta]^n` with one random coordinate pushed
/// into a boundary band (`[delta, 2 delta]` or `[1 - 2 delta, 1 - delta]`,
/// alternating) and records every failed sign or step condition at it.
pub fn boundary_sign_check(model: &Model, delta: f64, samples: usize, seed: u64) -> Result<BoundaryReport> {
    let bound = safe_region_delta(model);
    if !(delta > 0.0 && delta <= bound) {
        return Err(Error::DeltaTooLarge { delta, bound });
    }
    if 1.0 - 2.0 * delta >= 1.0 - delta {
        return Err(Error::InvalidOptions(format!(
            "delta {delta:e} is below f64 resolution near 1; the upper band is empty"
        )));
    }
    let ts = t_star(delta).ceil();
    let n = model.node_count();
    let mut rng = SeededRng::new(seed);
    let mut violations = Vec::new();
    for s in 0..samples {
        let mut y: Vec<f64> = (0..n).map(|_| rng.range(delta, 1.0 - delta)).collect();
        let v = rng.below(n);
        let upper = s % 2 == 0;
        y[v] = if upper {
            rng.range(1.0 - 2.0 * delta, 1.0 - delta)
        } else {
            rng.range(delta, 2.0 * delta)
        };
        let g = bethe::grad_f_star_at(model, &NodeMarginals::new(y.clone())?, v)?;
        let mut flag = |kind| violations.push(Violation { kind, node: v, y: y[v], gradient: g });
        if upper && g > 0.0 {
            flag(ViolationKind::UpperBand);
        }
        if !upper && g < 0.0 {
            flag(ViolationKind::LowerBand);
        }
        if g.abs() / ts.sqrt() > delta / 2.0 {
            flag(ViolationKind::StepTooLarge);
        }
    }
    Ok(BoundaryReport { delta, t_star: ts, samples, violations })
}
