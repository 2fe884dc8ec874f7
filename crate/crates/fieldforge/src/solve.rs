//! Safeguarded Newton iteration for monotone scalar residuals, shared by the
//! gain evaluator and the scaling updates. Works on the log of the tilt
//! parameter, brackets the root before stepping, and falls back to bisection
//! whenever a Newton step leaves the bracket or goes non-finite.

use crate::error::{FieldError, Result};
use crate::scalar::{from_f64, Scalar};

/// Bound on `log beta` handed to the solver; doubles as the reported value
/// when the root lies beyond it.
pub const LOG_BETA_LIMIT: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum RootOutcome<S> {
    /// Root located; residual is the function value at the returned point.
    Converged { x: S, residual: S },
    /// Residual still positive at the lower limit: the root lies below it.
    ClampedLow,
    /// Residual still negative at the upper limit: the root lies above it.
    ClampedHigh,
}

/// Find the root of a nondecreasing function `f` (given with its derivative)
/// starting from `x0`, restricted to `[-LOG_BETA_LIMIT, LOG_BETA_LIMIT]`.
pub(crate) fn monotone_root<S: Scalar>(
    f: impl Fn(S) -> (S, S),
    x0: S,
    tol: S,
    max_iter: usize,
) -> Result<RootOutcome<S>> {
    let limit = from_f64::<S>(LOG_BETA_LIMIT);
    let value = |x: S| f(x).0;

    let x0 = x0.min(limit).max(-limit);
    let v0 = value(x0);
    if v0.abs() <= tol {
        return Ok(RootOutcome::Converged {
            x: x0,
            residual: v0,
        });
    }

    // Expand a bracket [lo, hi] with f(lo) < 0 < f(hi).
    let (mut lo, mut hi);
    if v0 > S::zero() {
        hi = x0;
        let mut step = S::one();
        loop {
            let x = (x0 - step).max(-limit);
            let v = value(x);
            if v <= S::zero() {
                if v == S::zero() || v.abs() <= tol {
                    return Ok(RootOutcome::Converged { x, residual: v });
                }
                lo = x;
                break;
            }
            hi = x;
            if x <= -limit {
                return Ok(RootOutcome::ClampedLow);
            }
            step = step + step;
        }
    } else {
        lo = x0;
        let mut step = S::one();
        loop {
            let x = (x0 + step).min(limit);
            let v = value(x);
            if v >= S::zero() {
                if v == S::zero() || v.abs() <= tol {
                    return Ok(RootOutcome::Converged { x, residual: v });
                }
                hi = x;
                break;
            }
            lo = x;
            if x >= limit {
                return Ok(RootOutcome::ClampedHigh);
            }
            step = step + step;
        }
    }

    let eps = from_f64::<S>(4.0 * f64::EPSILON);
    let half = from_f64::<S>(0.5);
    let mut x = (lo + hi) * half;
    for _ in 0..max_iter {
        let (v, d) = f(x);
        if v.abs() <= tol {
            return Ok(RootOutcome::Converged { x, residual: v });
        }
        if v > S::zero() {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo <= eps * (S::one() + x.abs()) {
            // Bracket collapsed to rounding width; nothing better exists.
            return Ok(RootOutcome::Converged { x, residual: v });
        }
        let newton = x - v / d;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) * half
        };
    }
    Err(FieldError::NonConvergence {
        what: "monotone root solve",
        iterations: max_iter,
        residual: value(x).to_f64().unwrap_or(f64::NAN),
    })
}
