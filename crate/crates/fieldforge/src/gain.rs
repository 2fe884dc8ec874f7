//! Gain evaluation: for each candidate feature, the best single-parameter
//! tilt and the divergence reduction it would buy, holding every other
//! weight fixed. Binary candidates have a closed form; integer-valued
//! candidates go through Newton's method on the occurrence-histogram
//! stationarity equation.

use rayon::prelude::*;

use crate::empirical::EmpiricalDistribution;
use crate::error::{FieldError, Result};
use crate::pattern::FeaturePattern;
use crate::sampler::{estimate_histogram, OccurrenceHistogram, SampleBatch};
use crate::scalar::{from_f64, from_usize, Scalar};
use crate::solve::{monotone_root, RootOutcome, LOG_BETA_LIMIT};

/// How a candidate's tilt was determined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainStatus {
    /// Binary closed form.
    ClosedForm,
    /// Newton solve of the stationarity equation converged.
    NewtonConverged,
    /// The stationarity equation has no solution in range; the tilt is
    /// reported at the solver limit.
    NoSolutionBoundary,
    /// Candidate excluded: zero empirical support, or constant under the
    /// model so no tilt can change anything.
    ExcludedZeroSupport,
}

impl GainStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GainStatus::ClosedForm => "closed-form",
            GainStatus::NewtonConverged => "newton-converged",
            GainStatus::NoSolutionBoundary => "no-solution-boundary",
            GainStatus::ExcludedZeroSupport => "excluded-zero-support",
        }
    }
}

/// Solved tilt for one candidate: `alpha_hat` may be an infinity sentinel
/// when the status says so.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSolve<S: Scalar> {
    pub alpha_hat: S,
    pub gain: S,
    pub status: GainStatus,
}

/// Per-candidate report produced by ranking.
#[derive(Debug, Clone)]
pub struct GainReport<S: Scalar> {
    pub candidate: FeaturePattern,
    pub p_tilde: S,
    pub alpha_hat: S,
    pub gain: S,
    pub status: GainStatus,
}

/// The one-parameter improvement curve
/// `G(alpha) = alpha * p_tilde_g - log sum_k g_k e^(alpha k)`,
/// evaluated with a max-shift so large tilts stay finite.
pub fn gain_curve<S: Scalar>(p_tilde_g: S, hist: &OccurrenceHistogram<S>, alpha: S) -> S {
    let mut shift = S::neg_infinity();
    for (k, &g) in hist.probs().iter().enumerate() {
        if g > S::zero() {
            let v = alpha * from_usize(k);
            if v > shift {
                shift = v;
            }
        }
    }
    let mut sum = S::zero();
    for (k, &g) in hist.probs().iter().enumerate() {
        if g > S::zero() {
            sum = sum + g * (alpha * from_usize::<S>(k) - shift).exp();
        }
    }
    alpha * p_tilde_g - shift - sum.ln()
}

/// Closed-form gain of a binary candidate: the optimal tilt is the empirical
/// versus model log-odds ratio and the gain is the Bernoulli divergence.
pub fn binary_gain<S: Scalar>(p_tilde_g: S, q_g: S) -> Result<GainSolve<S>> {
    if !(q_g > S::zero() && q_g < S::one()) {
        return Err(FieldError::InvalidExpectation(
            q_g.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if !(p_tilde_g >= S::zero() && p_tilde_g <= S::one()) {
        return Err(FieldError::Precondition(format!(
            "binary empirical expectation {p_tilde_g} outside [0, 1]"
        )));
    }
    let one = S::one();
    if p_tilde_g == S::zero() {
        return Ok(GainSolve {
            alpha_hat: S::neg_infinity(),
            gain: -(one - q_g).ln(),
            status: GainStatus::ExcludedZeroSupport,
        });
    }
    if p_tilde_g == one {
        return Ok(GainSolve {
            alpha_hat: S::infinity(),
            gain: -q_g.ln(),
            status: GainStatus::ExcludedZeroSupport,
        });
    }
    let alpha_hat = (p_tilde_g * (one - q_g) / (q_g * (one - p_tilde_g))).ln();
    let gain = p_tilde_g * (p_tilde_g / q_g).ln()
        + (one - p_tilde_g) * ((one - p_tilde_g) / (one - q_g)).ln();
    Ok(GainSolve {
        alpha_hat,
        gain,
        status: GainStatus::ClosedForm,
    })
}

/// Weighted mean and variance of the occurrence count under the tilted
/// histogram `g_k beta^k`, computed in log space.
fn tilted_mean_var<S: Scalar>(hist: &OccurrenceHistogram<S>, x: S) -> (S, S) {
    let mut shift = S::neg_infinity();
    for (k, &g) in hist.probs().iter().enumerate() {
        if g > S::zero() {
            let v = x * from_usize(k);
            if v > shift {
                shift = v;
            }
        }
    }
    let (mut w, mut wk, mut wk2) = (S::zero(), S::zero(), S::zero());
    for (k, &g) in hist.probs().iter().enumerate() {
        if g > S::zero() {
            let kk = from_usize::<S>(k);
            let e = g * (x * kk - shift).exp();
            w = w + e;
            wk = wk + e * kk;
            wk2 = wk2 + e * kk * kk;
        }
    }
    let mean = wk / w;
    (mean, wk2 / w - mean * mean)
}

/// Gain of an integer-valued candidate: solves
/// `p_tilde_g = sum_k k g_k beta^k / sum_k g_k beta^k` for `beta > 0` by
/// safeguarded Newton on `log beta`.
pub fn integer_gain<S: Scalar>(p_tilde_g: S, hist: &OccurrenceHistogram<S>) -> Result<GainSolve<S>> {
    if !(p_tilde_g >= S::zero()) {
        return Err(FieldError::Precondition(format!(
            "empirical expectation {p_tilde_g} must be nonnegative"
        )));
    }
    if p_tilde_g == S::zero() {
        let g0 = hist.prob(0);
        let gain = if g0 > S::zero() {
            -g0.ln()
        } else {
            S::infinity()
        };
        return Ok(GainSolve {
            alpha_hat: S::neg_infinity(),
            gain,
            status: GainStatus::ExcludedZeroSupport,
        });
    }
    if hist.is_constant() {
        // A constant candidate cannot change the normalized distribution.
        return Ok(GainSolve {
            alpha_hat: S::zero(),
            gain: S::zero(),
            status: GainStatus::ExcludedZeroSupport,
        });
    }
    let clamp = from_f64::<S>(LOG_BETA_LIMIT);
    let k_max = from_usize::<S>(hist.k_max());
    if p_tilde_g >= k_max {
        // Model mass cannot reach the empirical count even as beta grows.
        return Ok(GainSolve {
            alpha_hat: clamp,
            gain: gain_curve(p_tilde_g, hist, clamp),
            status: GainStatus::NoSolutionBoundary,
        });
    }
    let k_min = hist
        .probs()
        .iter()
        .position(|&g| g > S::zero())
        .unwrap_or(0);
    if p_tilde_g <= from_usize(k_min) {
        // Mirror boundary: the tilted mean cannot drop to the target.
        return Ok(GainSolve {
            alpha_hat: -clamp,
            gain: gain_curve(p_tilde_g, hist, -clamp),
            status: GainStatus::NoSolutionBoundary,
        });
    }
    let outcome = monotone_root(
        |x| {
            let (mean, var) = tilted_mean_var(hist, x);
            (mean - p_tilde_g, var)
        },
        S::zero(),
        from_f64(1e-10),
        200,
    )?;
    Ok(match outcome {
        RootOutcome::Converged { x, .. } => GainSolve {
            alpha_hat: x,
            gain: gain_curve(p_tilde_g, hist, x),
            status: GainStatus::NewtonConverged,
        },
        RootOutcome::ClampedHigh => GainSolve {
            alpha_hat: clamp,
            gain: gain_curve(p_tilde_g, hist, clamp),
            status: GainStatus::NoSolutionBoundary,
        },
        RootOutcome::ClampedLow => GainSolve {
            alpha_hat: -clamp,
            gain: gain_curve(p_tilde_g, hist, -clamp),
            status: GainStatus::NoSolutionBoundary,
        },
    })
}

/// Evaluate every candidate against the shared batch and the exact empirical
/// expectations, and rank by gain. Candidates with zero empirical support are
/// dropped: no tilt toward them can reduce divergence on observed data. Ties
/// break by pattern text, ascending.
pub fn rank_candidates<S: Scalar>(
    candidates: &[FeaturePattern],
    batch: &SampleBatch,
    p_tilde: &EmpiricalDistribution,
) -> Result<Vec<GainReport<S>>> {
    let mut reports: Vec<GainReport<S>> = candidates
        .par_iter()
        .map(|g| {
            let p_g: S = p_tilde.expectation(g);
            if p_g == S::zero() {
                return Ok(None);
            }
            let hist = estimate_histogram::<S>(batch, g);
            let solve = integer_gain(p_g, &hist)?;
            Ok(Some(GainReport {
                candidate: g.clone(),
                p_tilde: p_g,
                alpha_hat: solve.alpha_hat,
                gain: solve.gain,
                status: solve.status,
            }))
        })
        .collect::<Result<Vec<Option<GainReport<S>>>>>()?
        .into_iter()
        .flatten()
        .collect();
    reports.sort_by(|a, b| {
        b.gain
            .partial_cmp(&a.gain)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.candidate.text().cmp(&b.candidate.text()))
    });
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hist(probs: &[f64]) -> OccurrenceHistogram<f64> {
        OccurrenceHistogram::from_probs(probs.to_vec()).unwrap()
    }

    #[test]
    fn gain_curve_zero_at_origin() {
        let h = hist(&[0.25, 0.5, 0.25]);
        assert_eq!(gain_curve(1.3, &h, 0.0), 0.0);
    }

    #[test]
    fn gain_curve_stationary_at_matched_expectation() {
        let h = hist(&[0.5, 0.5]);
        assert!(gain_curve(0.5, &h, 0.0).abs() < 1e-15);
        let d = 1e-6;
        let up = gain_curve(0.5, &h, d);
        let down = gain_curve(0.5, &h, -d);
        assert!((up - down).abs() / (2.0 * d) < 1e-9, "derivative not zero");
    }

    #[test]
    fn gain_curve_concave_on_grid() {
        let h = hist(&[0.1, 0.3, 0.4, 0.2]);
        let vals: Vec<f64> = (0..21).map(|i| gain_curve(1.2, &h, -2.0 + 0.2 * i as f64)).collect();
        for w in vals.windows(3) {
            assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-10);
        }
    }

    #[test]
    fn binary_identity_case() {
        let s = binary_gain(0.5, 0.5).unwrap();
        assert_eq!(s.alpha_hat, 0.0);
        assert_eq!(s.gain, 0.0);
        assert_eq!(s.status, GainStatus::ClosedForm);
    }

    #[test]
    fn binary_worked_values() {
        let s = binary_gain(0.75, 0.25).unwrap();
        assert!((s.alpha_hat - 9.0f64.ln()).abs() < 1e-12);
        assert!((s.gain - 0.5 * 3.0f64.ln()).abs() < 1e-12);
        assert!((s.gain - 0.549306).abs() < 1e-6);

        let s = binary_gain(0.875, 0.5).unwrap();
        assert!((s.alpha_hat - 7.0f64.ln()).abs() < 1e-12);
        assert!((s.alpha_hat - 1.94591).abs() < 1e-5);
    }

    #[test]
    fn binary_boundary_and_errors() {
        let zero = binary_gain(0.0f64, 0.25).unwrap();
        assert_eq!(zero.status, GainStatus::ExcludedZeroSupport);
        assert!(zero.alpha_hat.is_infinite() && zero.alpha_hat < 0.0);
        let one = binary_gain(1.0f64, 0.25).unwrap();
        assert!(one.alpha_hat.is_infinite() && one.alpha_hat > 0.0);
        assert!(matches!(
            binary_gain(0.5, 0.0),
            Err(FieldError::InvalidExpectation(_))
        ));
        assert!(matches!(
            binary_gain(0.5, 1.0),
            Err(FieldError::InvalidExpectation(_))
        ));
    }

    #[test]
    fn integer_reduces_to_binary() {
        let h = hist(&[0.5, 0.5]);
        let s = integer_gain(0.75, &h).unwrap();
        assert!((s.alpha_hat - 3.0f64.ln()).abs() < 1e-9);
        let b = binary_gain(0.75, 0.5).unwrap();
        assert!((s.gain - b.gain).abs() < 1e-10);
    }

    #[test]
    fn integer_constant_candidate_excluded() {
        let h = hist(&[0.0, 1.0]);
        let s = integer_gain(0.7, &h).unwrap();
        assert_eq!(s.status, GainStatus::ExcludedZeroSupport);
        assert_eq!(s.gain, 0.0);
    }

    #[test]
    fn integer_worked_quadratic() {
        // Stationarity for this histogram reduces to
        // 0.5 b + 0.5 b^2 = 1.5 (0.25 + 0.5 b + 0.25 b^2), i.e. b^2 - 2b - 3 = 0.
        let h = hist(&[0.25, 0.5, 0.25]);
        let s = integer_gain(1.5, &h).unwrap();
        assert_eq!(s.status, GainStatus::NewtonConverged);
        assert!((s.alpha_hat.exp() - 3.0).abs() < 1e-9);
        let (mean, _) = tilted_mean_var(&h, s.alpha_hat);
        assert!((mean - 1.5).abs() <= 1e-10, "stationarity residual");

        // A histogram whose stationarity equation is b^2 - 6b - 3 = 0, with
        // positive root 3 + 2 sqrt(3).
        let h = hist(&[0.125, 0.75, 0.125]);
        let s = integer_gain(1.5, &h).unwrap();
        let target = 3.0 + 2.0 * 3.0f64.sqrt();
        assert!((s.alpha_hat.exp() - target).abs() < 1e-9);
    }

    #[test]
    fn integer_boundary_cases() {
        let h = hist(&[0.6, 0.4]);
        let over = integer_gain(1.0, &h).unwrap();
        assert_eq!(over.status, GainStatus::NoSolutionBoundary);
        assert_eq!(over.alpha_hat, LOG_BETA_LIMIT);
        let above = integer_gain(2.5, &h).unwrap();
        assert_eq!(above.status, GainStatus::NoSolutionBoundary);

        let zero = integer_gain(0.0, &h).unwrap();
        assert_eq!(zero.status, GainStatus::ExcludedZeroSupport);
        assert!(zero.alpha_hat.is_infinite() && zero.alpha_hat < 0.0);
        assert!((zero.gain - -0.6f64.ln()).abs() < 1e-12);

        // All mass at zero but positive empirical expectation.
        let h0 = hist(&[1.0]);
        let s = integer_gain(0.5, &h0).unwrap();
        assert_eq!(s.status, GainStatus::ExcludedZeroSupport);
    }

    #[test]
    fn closed_form_matches_numeric_maximization() {
        // golden-section maximization of the gain curve, polished by
        // bisecting the histogram derivative; fully independent of Eq 3.3
        let h = hist(&[0.7, 0.3]);
        let p = 0.6;
        let numeric = maximize_curve(p, &h);
        let closed = binary_gain(p, 0.3).unwrap();
        assert!((closed.alpha_hat - numeric.0).abs() < 1e-8);
        assert!((closed.gain - numeric.1).abs() < 1e-10);
    }

    fn maximize_curve(p: f64, h: &OccurrenceHistogram<f64>) -> (f64, f64) {
        let (mut lo, mut hi) = (-45.0f64, 45.0);
        let phi = 0.5 * (3.0 - 5.0f64.sqrt());
        let (mut a, mut b) = (lo + phi * (hi - lo), hi - phi * (hi - lo));
        let (mut fa, mut fb) = (gain_curve(p, h, a), gain_curve(p, h, b));
        for _ in 0..200 {
            if hi - lo < 1e-10 {
                break;
            }
            if fa < fb {
                lo = a;
                a = b;
                fa = fb;
                b = hi - phi * (hi - lo);
                fb = gain_curve(p, h, b);
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = lo + phi * (hi - lo);
                fa = gain_curve(p, h, a);
            }
        }
        // derivative-sign bisection polish on a widened bracket
        let (mut lo, mut hi) = (0.5 * (lo + hi) - 1e-4, 0.5 * (lo + hi) + 1e-4);
        let deriv = |x: f64| {
            let (mean, _) = tilted_mean_var(h, x);
            p - mean
        };
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if deriv(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        (x, gain_curve(p, h, x))
    }
}
