//! Improved iterative scaling: full-model re-estimation to the maximum
//! likelihood point. Each iteration solves, per feature, a monotone
//! polynomial in the tilt `beta = e^gamma` whose coefficients are exact
//! expectations (enumerable spaces) or Monte Carlo estimates, then applies
//! all updates simultaneously.

use crate::empirical::EmpiricalDistribution;
use crate::error::{FieldError, Result};
use crate::model::FieldModel;
use crate::oracle::{iis_coefficients_exact, kl_divergence, EnumerableSpace};
use crate::sampler::{estimate_iis_coefficients, sample_batch, split_seed, SampleBatch};
use crate::scalar::{from_f64, from_usize, Scalar};
use crate::solve::{monotone_root, RootOutcome};

/// Coefficient matrix of the per-feature scaling polynomials. Row `m` of
/// column `i` is the (estimated or exact) expectation of `f_i` restricted to
/// configurations with total feature count `m`; row 0 is `-p_tilde[f_i]`.
#[derive(Debug, Clone)]
pub struct IisCoefficients<S: Scalar> {
    rows: Vec<Vec<S>>,
    n_features: usize,
}

impl<S: Scalar> IisCoefficients<S> {
    pub fn new(rows: Vec<Vec<S>>, n_features: usize) -> Self {
        debug_assert!(!rows.is_empty());
        debug_assert!(rows.iter().all(|r| r.len() == n_features));
        Self { rows, n_features }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Largest total feature count with any mass.
    pub fn max_f_sharp(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn row(&self, m: usize) -> &[S] {
        &self.rows[m]
    }

    pub fn column(&self, i: usize) -> Vec<S> {
        self.rows.iter().map(|r| r[i]).collect()
    }

    /// Model expectation of feature `i` implied by the coefficients.
    pub fn feature_expectation(&self, i: usize) -> S {
        self.rows.iter().skip(1).map(|r| r[i]).sum()
    }

    /// Empirical expectations recovered from row 0.
    pub fn targets(&self) -> Vec<S> {
        self.rows[0].iter().map(|&a| -a).collect()
    }
}

/// Solve one feature's update: the unique `beta > 0` with
/// `sum_m a_m beta^m = 0`, returned as `gamma = log beta`. Returns negative
/// infinity when no positive-degree coefficient mass exists (the equation
/// has no solution) or when the root is `beta = 0`.
pub fn newton_update<S: Scalar>(coeffs: &[S]) -> Result<S> {
    if coeffs.is_empty() {
        return Err(FieldError::Precondition("empty coefficient vector".into()));
    }
    let a0 = coeffs[0];
    if a0 > S::zero() {
        return Err(FieldError::Precondition(format!(
            "constant coefficient {a0} must be nonpositive"
        )));
    }
    for (m, &a) in coeffs.iter().enumerate().skip(1) {
        if a < S::zero() {
            return Err(FieldError::Precondition(format!(
                "coefficient a_{m} = {a} must be nonnegative"
            )));
        }
    }
    if coeffs.iter().skip(1).all(|&a| a == S::zero()) || a0 == S::zero() {
        return Ok(S::neg_infinity());
    }
    let poly = |x: S| {
        let mut v = a0;
        let mut d = S::zero();
        for (m, &a) in coeffs.iter().enumerate().skip(1) {
            if a > S::zero() {
                let mm = from_usize::<S>(m);
                let e = a * (mm * x).exp();
                v = v + e;
                d = d + mm * e;
            }
        }
        (v, d)
    };
    match monotone_root(poly, S::zero(), from_f64(1e-12), 200)? {
        RootOutcome::Converged { x, .. } => Ok(x),
        // Roots beyond the limits are clamped; the next iteration's
        // coefficients see the moved weight and correct from there.
        RootOutcome::ClampedHigh => Ok(from_f64(crate::solve::LOG_BETA_LIMIT)),
        RootOutcome::ClampedLow => Ok(S::neg_infinity()),
    }
}

/// One per-iteration record of the training trace.
#[derive(Debug, Clone)]
pub struct IisIterRecord<S: Scalar> {
    pub iteration: usize,
    /// Exact divergence after this iteration (exact mode only).
    pub divergence: Option<S>,
    /// Largest applied weight change this iteration.
    pub gamma_max: S,
    /// Estimated auxiliary lower bound on the likelihood improvement
    /// (Monte Carlo mode only).
    pub aux_gain: Option<S>,
}

/// Trainer state: current model, iteration counter, and the per-iteration
/// trace.
#[derive(Debug, Clone)]
pub struct IisState<S: Scalar> {
    pub model: FieldModel<S>,
    pub iteration: usize,
    pub trace: Vec<IisIterRecord<S>>,
}

impl<S: Scalar> IisState<S> {
    pub fn new(model: FieldModel<S>) -> Self {
        Self {
            model,
            iteration: 0,
            trace: Vec::new(),
        }
    }
}

/// Apply one scaling iteration: solve every feature's polynomial, then update
/// all weights simultaneously (sentinel-clamped where the solution is
/// negative infinity).
pub fn iis_step<S: Scalar>(
    state: &IisState<S>,
    coeffs: &IisCoefficients<S>,
) -> Result<IisState<S>> {
    let n = state.model.feature_count();
    if coeffs.n_features() != n {
        return Err(FieldError::Precondition(format!(
            "coefficient matrix covers {} features, model has {n}",
            coeffs.n_features()
        )));
    }
    let gammas: Vec<S> = (0..n)
        .map(|i| newton_update(&coeffs.column(i)))
        .collect::<Result<_>>()?;
    let old = state.model.weights().to_vec();
    let new_weights: Vec<S> = old.iter().zip(&gammas).map(|(&w, &g)| w + g).collect();
    let model = state.model.with_weights(new_weights);
    let gamma_max = model
        .weights()
        .iter()
        .zip(&old)
        .fold(S::zero(), |acc, (&w, &o)| acc.max((w - o).abs()));
    let mut trace = state.trace.clone();
    trace.push(IisIterRecord {
        iteration: state.iteration + 1,
        divergence: None,
        gamma_max,
        aux_gain: None,
    });
    Ok(IisState {
        model,
        iteration: state.iteration + 1,
        trace,
    })
}

/// Monte Carlo sampling settings for training.
#[derive(Debug, Clone)]
pub struct McSettings {
    pub alphabet: crate::config::Alphabet,
    pub samples: usize,
    pub burn_in: u32,
    pub seed: u64,
}

/// Where the coefficient expectations come from.
pub enum TrainMode<'a> {
    /// Exact enumeration over a small space.
    Exact(&'a EnumerableSpace),
    /// Fresh Gibbs batch per iteration.
    MonteCarlo(McSettings),
}

/// Result of a training run; `converged == false` means the iteration cap
/// was reached and the model is a partial result.
#[derive(Debug, Clone)]
pub struct TrainOutcome<S: Scalar> {
    pub model: FieldModel<S>,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<IisIterRecord<S>>,
}

const TAG_IIS_BATCH: u64 = 0x1150;

/// Train the model's weights toward the maximum-likelihood point.
///
/// Exact mode stops when the constraint residual `max_i |q[f_i] - p[f_i]|`
/// or the relative divergence decrease falls below `tol`, and verifies that
/// the divergence never increases. Monte Carlo mode stops when the largest
/// applied weight change stays below `tol` for three consecutive iterations.
pub fn train<S: Scalar>(
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
    mode: TrainMode<'_>,
    tol: S,
    max_iter: usize,
) -> Result<TrainOutcome<S>> {
    match mode {
        TrainMode::Exact(space) => train_exact(model, p_tilde, space, tol, max_iter),
        TrainMode::MonteCarlo(settings) => train_mc(model, p_tilde, &settings, tol, max_iter),
    }
}

fn train_exact<S: Scalar>(
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
    space: &EnumerableSpace,
    tol: S,
    max_iter: usize,
) -> Result<TrainOutcome<S>> {
    // Also verifies absolute continuity of the start model.
    let mut prev_d = kl_divergence(p_tilde, model, space)?;
    let mut state = IisState::new(model.clone());
    state.trace.push(IisIterRecord {
        iteration: 0,
        divergence: Some(prev_d),
        gamma_max: S::zero(),
        aux_gain: None,
    });
    let mut converged = false;
    for _ in 0..max_iter {
        let coeffs = iis_coefficients_exact(&state.model, p_tilde, space)?;
        let targets = coeffs.targets();
        let residual = (0..coeffs.n_features()).fold(S::zero(), |acc, i| {
            acc.max((coeffs.feature_expectation(i) - targets[i]).abs())
        });
        if residual < tol {
            converged = true;
            break;
        }
        state = iis_step(&state, &coeffs)?;
        let d = kl_divergence(p_tilde, &state.model, space)?;
        if d > prev_d + from_f64(1e-10) {
            return Err(FieldError::InvariantViolation(format!(
                "divergence increased from {prev_d} to {d} at iteration {}",
                state.iteration
            )));
        }
        state.trace.last_mut().unwrap().divergence = Some(d);
        let rel = (prev_d - d) / prev_d.max(from_f64(f64::MIN_POSITIVE));
        prev_d = d;
        if rel < tol {
            converged = true;
            break;
        }
    }
    Ok(TrainOutcome {
        model: state.model,
        converged,
        iterations: state.iteration,
        trace: state.trace,
    })
}

fn train_mc<S: Scalar>(
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
    settings: &McSettings,
    tol: S,
    max_iter: usize,
) -> Result<TrainOutcome<S>> {
    // Finite weights keep every string positive, so absolute continuity only
    // needs the length marginal to cover the support.
    for (config, _) in p_tilde.iter() {
        if model.length_dist().prob(config.len()) <= S::zero() {
            return Err(FieldError::AbsoluteContinuity {
                config: config.to_string(),
            });
        }
    }
    let mut state = IisState::new(model.clone());
    let mut consecutive = 0;
    let mut converged = false;
    for k in 0..max_iter {
        let batch = sample_batch(
            &state.model,
            &settings.alphabet,
            settings.samples,
            settings.burn_in,
            split_seed(settings.seed, TAG_IIS_BATCH, k as u64),
        )?;
        let coeffs = estimate_iis_coefficients(&batch, &state.model, p_tilde)?;
        let before = state.model.clone();
        state = iis_step(&state, &coeffs)?;
        let record = state.trace.last_mut().unwrap();
        record.aux_gain = Some(estimate_aux_gain(&batch, &before, &state.model, p_tilde));
        let gamma_max = record.gamma_max;
        if gamma_max < tol {
            consecutive += 1;
            if consecutive >= 3 {
                converged = true;
                break;
            }
        } else {
            consecutive = 0;
        }
    }
    Ok(TrainOutcome {
        model: state.model,
        converged,
        iterations: state.iteration,
        trace: state.trace,
    })
}

/// Batch estimate of the auxiliary lower bound on the likelihood gain of the
/// applied update (the exact counterpart is [`auxiliary_value`]).
fn estimate_aux_gain<S: Scalar>(
    batch: &SampleBatch,
    before: &FieldModel<S>,
    after: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
) -> S {
    let gamma: Vec<S> = after
        .weights()
        .iter()
        .zip(before.weights())
        .map(|(&a, &b)| a - b)
        .collect();
    let targets = p_tilde.feature_expectations::<S>(before.features());
    let mut acc = S::zero();
    for (g, t) in gamma.iter().zip(&targets) {
        if *t > S::zero() {
            acc = acc + *g * *t;
        }
    }
    let n = from_usize::<S>(batch.len());
    let mut mean_inner_minus_one = S::zero();
    for config in batch.configs() {
        mean_inner_minus_one = mean_inner_minus_one + (inner_bound(before, &gamma, config) - S::one());
    }
    acc - mean_inner_minus_one / n
}

/// The Jensen-split integrand `sum_i (f_i / f_#) e^(gamma_i f_#)`; equals 1
/// whenever the configuration carries no features.
fn inner_bound<S: Scalar>(model: &FieldModel<S>, gamma: &[S], config: &crate::config::Configuration) -> S {
    let fv = model.feature_vector(config);
    let fs: usize = fv.iter().sum();
    if fs == 0 {
        return S::one();
    }
    let fs_s = from_usize::<S>(fs);
    let mut sum = S::zero();
    for (i, &c) in fv.iter().enumerate() {
        if c > 0 {
            sum = sum + from_usize::<S>(c) * (gamma[i] * fs_s).exp();
        }
    }
    sum / fs_s
}

/// Exact auxiliary function `A(gamma, q)`: a lower bound on the likelihood
/// improvement of tilting `q` by `gamma`, tangent at `gamma = 0` (where it is
/// exactly zero). Test-only in spirit; requires an enumerable space.
pub fn auxiliary_value<S: Scalar>(
    gamma: &[S],
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
    space: &EnumerableSpace,
) -> Result<S> {
    if gamma.len() != model.feature_count() {
        return Err(FieldError::Precondition(format!(
            "gamma has {} entries, model has {} features",
            gamma.len(),
            model.feature_count()
        )));
    }
    let targets = p_tilde.feature_expectations::<S>(model.features());
    let mut acc = S::zero();
    for (g, t) in gamma.iter().zip(&targets) {
        if *t > S::zero() {
            acc = acc + *g * *t;
        }
    }
    let expected_excess = crate::oracle::exact_expectation_of(model, space, |config| {
        inner_bound(model, gamma, config) - S::one()
    })?;
    Ok(acc - expected_excess)
}

/// Exact log-likelihood difference `L(gamma o q) - L(q)`; the quantity the
/// auxiliary function bounds from below.
pub fn likelihood_gain<S: Scalar>(
    gamma: &[S],
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
    space: &EnumerableSpace,
) -> Result<S> {
    let tilted = model.with_weights(
        model
            .weights()
            .iter()
            .zip(gamma)
            .map(|(&w, &g)| w + g)
            .collect(),
    );
    let before = kl_divergence(p_tilde, model, space)?;
    let after = kl_divergence(p_tilde, &tilted, space)?;
    Ok(before - after)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Alphabet;
    use crate::model::LengthDistribution;
    use crate::oracle::{expectation, feature_expectations, ml_oracle};
    use crate::pattern::FeaturePattern;

    fn pat(text: &str) -> FeaturePattern {
        FeaturePattern::parse(text).unwrap()
    }

    fn ab_space(max_len: usize) -> EnumerableSpace {
        EnumerableSpace::new(Alphabet::new(*b"ab").unwrap(), max_len).unwrap()
    }

    #[test]
    fn newton_update_examples() {
        assert!((newton_update(&[-1.0f64, 1.0]).unwrap()).abs() < 1e-12);
        let g = newton_update(&[-1.0, 0.5, 0.25]).unwrap();
        let beta = (-1.0 + 5.0f64.sqrt()).ln();
        assert!((g - beta).abs() < 1e-10);
        assert!((g - 0.211987).abs() < 1e-6);
        assert_eq!(newton_update(&[-0.3, 0.0, 0.0]).unwrap(), f64::NEG_INFINITY);
        assert!(newton_update(&[0.5, 1.0]).is_err());
        assert!(newton_update(&[-0.5, -1.0]).is_err());
    }

    #[test]
    fn newton_update_root_is_bracketed() {
        let coeffs = [-0.7f64, 0.1, 0.3, 0.05];
        let gamma = newton_update(&coeffs).unwrap();
        let beta = gamma.exp();
        let poly = |b: f64| -0.7 + 0.1 * b + 0.3 * b * b + 0.05 * b * b * b;
        assert!(poly(beta).abs() <= 1e-10);
        assert!(poly(beta / 2.0) < 0.0);
        assert!(poly(beta * 2.0) > 0.0);
    }

    #[test]
    fn iis_step_two_config_example() {
        let space = ab_space(1);
        let model =
            FieldModel::new(vec![pat("a")], vec![0.0f64], LengthDistribution::point(1)).unwrap();
        let p = EmpiricalDistribution::from_words([("a", 3), ("b", 1)]).unwrap();
        let coeffs = iis_coefficients_exact(&model, &p, &space).unwrap();
        assert_eq!(coeffs.row(0), &[-0.75]);
        assert!((coeffs.row(1)[0] - 0.5).abs() < 1e-12);
        let state = IisState::new(model);
        let next = iis_step(&state, &coeffs).unwrap();
        assert!((next.model.weights()[0] - 1.5f64.ln()).abs() < 1e-10);
        let q1 = expectation(&next.model, &space, &pat("a")).unwrap();
        assert!((q1 - 0.6).abs() < 1e-10);

        // iterating approaches the constraint monotonically
        let mut state = next;
        let mut last = q1;
        for _ in 0..200 {
            let coeffs = iis_coefficients_exact(&state.model, &p, &space).unwrap();
            state = iis_step(&state, &coeffs).unwrap();
            let q = expectation(&state.model, &space, &pat("a")).unwrap();
            assert!(q >= last - 1e-12);
            last = q;
        }
        assert!((last - 0.75).abs() < 1e-8);
    }

    #[test]
    fn train_exact_reaches_constraints() {
        let space = ab_space(2);
        let model = FieldModel::new(
            vec![pat("a"), pat("ab")],
            vec![0.0, 0.0],
            LengthDistribution::new(vec![0.0, 0.4, 0.6]).unwrap(),
        )
        .unwrap();
        let p = EmpiricalDistribution::from_words([
            ("a", 2),
            ("b", 1),
            ("ab", 4),
            ("ba", 1),
            ("aa", 1),
            ("bb", 1),
        ])
        .unwrap();
        let out = train(&model, &p, TrainMode::Exact(&space), 1e-9, 5000).unwrap();
        assert!(out.converged);
        let qf = feature_expectations(&out.model, &space).unwrap();
        let targets = p.feature_expectations::<f64>(out.model.features());
        for (q, t) in qf.iter().zip(&targets) {
            assert!((q - t).abs() < 1e-6, "constraint gap {}", (q - t).abs());
        }
        // agrees with the independent solver
        let q_ml = ml_oracle(out.model.features(), &p, &space, &model).unwrap();
        let d_iis = kl_divergence(&p, &out.model, &space).unwrap();
        let d_ml = kl_divergence(&p, &q_ml, &space).unwrap();
        assert!((d_iis - d_ml).abs() < 1e-5);
    }

    #[test]
    fn train_fixed_point_returns_quickly() {
        let space = ab_space(1);
        let model = FieldModel::new(
            vec![pat("a")],
            vec![3.0f64.ln()],
            LengthDistribution::point(1),
        )
        .unwrap();
        let p = EmpiricalDistribution::from_words([("a", 3), ("b", 1)]).unwrap();
        let out = train(&model, &p, TrainMode::Exact(&space), 1e-9, 100).unwrap();
        assert!(out.converged);
        assert!(out.iterations <= 1);
        assert!((out.model.weights()[0] - 3.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn train_binary_single_feature_matches_target() {
        let space = ab_space(1);
        let model =
            FieldModel::new(vec![pat("a")], vec![0.0f64], LengthDistribution::point(1)).unwrap();
        let p = EmpiricalDistribution::from_words([("a", 7), ("b", 1)]).unwrap();
        let out = train(&model, &p, TrainMode::Exact(&space), 1e-10, 10_000).unwrap();
        let q = expectation(&out.model, &space, &pat("a")).unwrap();
        assert!((q - 0.875).abs() < 1e-9);
    }

    #[test]
    fn train_detects_support_violation() {
        let space = ab_space(2);
        let model = FieldModel::<f64>::uniform(LengthDistribution::point(1));
        let p = EmpiricalDistribution::from_words([("aa", 1)]).unwrap();
        assert!(matches!(
            train(&model, &p, TrainMode::Exact(&space), 1e-9, 10),
            Err(FieldError::AbsoluteContinuity { .. })
        ));
    }

    #[test]
    fn divergence_history_is_monotone() {
        let space = ab_space(3);
        let model = FieldModel::new(
            vec![pat("a"), pat("ab"), pat("b<1>")],
            vec![0.3, -0.5, 0.2],
            LengthDistribution::new(vec![0.1, 0.3, 0.3, 0.3]).unwrap(),
        )
        .unwrap();
        let p = EmpiricalDistribution::from_words([
            ("a", 5),
            ("b", 2),
            ("ab", 3),
            ("aab", 2),
            ("bba", 1),
            ("", 1),
        ])
        .unwrap();
        let out = train(&model, &p, TrainMode::Exact(&space), 1e-9, 2000).unwrap();
        let ds: Vec<f64> = out.trace.iter().filter_map(|r| r.divergence).collect();
        for w in ds.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn auxiliary_zero_at_origin_and_bounds_gain() {
        let space = ab_space(2);
        let model = FieldModel::new(
            vec![pat("a"), pat("ab")],
            vec![0.25, -0.4],
            LengthDistribution::new(vec![0.2, 0.4, 0.4]).unwrap(),
        )
        .unwrap();
        let p = EmpiricalDistribution::from_words([("a", 2), ("ab", 3), ("bb", 1), ("", 2)])
            .unwrap();
        let zero = auxiliary_value(&[0.0, 0.0], &model, &p, &space).unwrap();
        assert_eq!(zero, 0.0);
        for gamma in [[0.5, -0.3], [-1.0, 0.7], [0.05, 0.05], [2.0, 1.0]] {
            let a = auxiliary_value(&gamma, &model, &p, &space).unwrap();
            let l = likelihood_gain(&gamma, &model, &p, &space).unwrap();
            assert!(l >= a - 1e-12, "gain {l} below bound {a}");
        }
    }

    #[test]
    fn iis_gamma_maximizes_auxiliary() {
        let space = ab_space(2);
        let model = FieldModel::new(
            vec![pat("a"), pat("b")],
            vec![0.0, 0.0],
            LengthDistribution::new(vec![0.0, 0.5, 0.5]).unwrap(),
        )
        .unwrap();
        let p = EmpiricalDistribution::from_words([("a", 3), ("ab", 2), ("bb", 1)]).unwrap();
        let coeffs = iis_coefficients_exact(&model, &p, &space).unwrap();
        let state = IisState::new(model.clone());
        let next = iis_step(&state, &coeffs).unwrap();
        let gamma: Vec<f64> = next
            .model
            .weights()
            .iter()
            .zip(model.weights())
            .map(|(a, b)| a - b)
            .collect();
        let best = auxiliary_value(&gamma, &model, &p, &space).unwrap();
        for i in 0..gamma.len() {
            for eps in [-1e-3, 1e-3] {
                let mut probe = gamma.clone();
                probe[i] += eps;
                let a = auxiliary_value(&probe, &model, &p, &space).unwrap();
                assert!(a <= best + 1e-12);
            }
        }
    }
}
