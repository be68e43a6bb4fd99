//! Volume-preserving ("floating") Heaviside projection.
//!
//! Each design variable is mapped through
//!
//! ```text
//! p(x) = [tanh(β·th) + tanh(β(x − th))] / [tanh(β·th) + tanh(β(1 − th))]
//! ```
//!
//! floored at `x_min`, where the threshold `th ∈ [0, 1]` is re-chosen at every
//! application so that the field sum is unchanged.

use crate::error::{Error, Result};

/// Bisection stops once the threshold bracket is narrower than this.
pub const THRESHOLD_TOL: f64 = 1e-10;

/// Below this steepness `tanh(β(x − th))` is evaluated through the
/// difference formula, above it through one exponential per element.
const SMALL_BETA: f64 = 1.0;
/// Above this steepness the exponentials would overflow; fall back to `tanh`.
const LARGE_BETA: f64 = 300.0;

/// Per-field precomputation so that one threshold trial costs a handful of
/// flops per element instead of a `tanh`.
enum Evaluator<'a> {
    Small { beta: f64, t: Vec<f64> },
    Moderate { beta: f64, e: Vec<f64> },
    Direct { beta: f64, x: &'a [f64] },
}

impl<'a> Evaluator<'a> {
    fn new(x: &'a [f64], beta: f64) -> Self {
        if beta < SMALL_BETA {
            Evaluator::Small {
                beta,
                t: x.iter().map(|&v| (beta * v).tanh()).collect(),
            }
        } else if beta <= LARGE_BETA {
            Evaluator::Moderate {
                beta,
                e: x.iter().map(|&v| (2.0 * beta * v).exp()).collect(),
            }
        } else {
            Evaluator::Direct { beta, x }
        }
    }

    /// Calls `f(i, p_i)` for every element at threshold `th`.
    #[inline]
    fn for_each(&self, th: f64, x_min: f64, mut f: impl FnMut(usize, f64)) {
        match self {
            Evaluator::Small { beta, t } => {
                let tb = (beta * th).tanh();
                let den = tb + (beta * (1.0 - th)).tanh();
                for (i, &ti) in t.iter().enumerate() {
                    // tanh(a - b) = (tanh a - tanh b) / (1 - tanh a tanh b)
                    let shifted = (ti - tb) / (1.0 - ti * tb);
                    f(i, ((tb + shifted) / den).max(x_min));
                }
            }
            Evaluator::Moderate { beta, e } => {
                let tb = (beta * th).tanh();
                let den = tb + (beta * (1.0 - th)).tanh();
                let c = (-2.0 * beta * th).exp();
                for (i, &ei) in e.iter().enumerate() {
                    // tanh(z) = 1 - 2 / (exp(2z) + 1)
                    let shifted = 1.0 - 2.0 / (ei * c + 1.0);
                    f(i, ((tb + shifted) / den).max(x_min));
                }
            }
            Evaluator::Direct { beta, x } => {
                let tb = (beta * th).tanh();
                let den = tb + (beta * (1.0 - th)).tanh();
                for (i, &xi) in x.iter().enumerate() {
                    f(i, ((tb + (beta * (xi - th)).tanh()) / den).max(x_min));
                }
            }
        }
    }

    fn sum(&self, th: f64, x_min: f64) -> f64 {
        let mut s = 0.0;
        self.for_each(th, x_min, |_, v| s += v);
        s
    }
}

/// Direct evaluation of the projection at a fixed threshold.
pub fn project_value(x: f64, beta: f64, th: f64, x_min: f64) -> f64 {
    let tb = (beta * th).tanh();
    ((tb + (beta * (x - th)).tanh()) / (tb + (beta * (1.0 - th)).tanh())).max(x_min)
}

/// Projects `x` into `out`, returning the volume-preserving threshold.
pub fn floating_projection_into(x: &[f64], beta: f64, x_min: f64, out: &mut [f64]) -> Result<f64> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::param("beta", format!("projection steepness must be positive, got {beta}")));
    }
    debug_assert_eq!(x.len(), out.len());
    let target: f64 = x.iter().sum();
    let eval = Evaluator::new(x, beta);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    // The projected sum decreases with th; both ends must bracket the target.
    if eval.sum(lo, x_min) < target * (1.0 - 1e-12) || eval.sum(hi, x_min) > target * (1.0 + 1e-12) {
        return Err(Error::Bisection { what: "projection threshold" });
    }
    while hi - lo > THRESHOLD_TOL {
        let th = 0.5 * (lo + hi);
        if eval.sum(th, x_min) > target {
            lo = th;
        } else {
            hi = th;
        }
    }
    let th = 0.5 * (lo + hi);
    eval.for_each(th, x_min, |i, v| out[i] = v);
    Ok(th)
}

/// Allocating form of [`floating_projection_into`].
pub fn floating_projection(x: &[f64], beta: f64, x_min: f64) -> Result<(Vec<f64>, f64)> {
    let mut out = vec![0.0; x.len()];
    let th = floating_projection_into(x, beta, x_min, &mut out)?;
    Ok((out, th))
}
