//! Brute-force enumeration of small configuration spaces: exact partition
//! functions, expectations and divergences, plus an independent
//! maximum-likelihood solver. Everything here is the reference oracle that
//! the samplers and the iterative-scaling trainer are tested against, so the
//! enumeration order is fixed and all summation is sequential.

use crate::config::{Alphabet, Configuration};
use crate::empirical::EmpiricalDistribution;
use crate::error::{FieldError, Result};
use crate::iis::IisCoefficients;
use crate::model::{FieldModel, WEIGHT_FLOOR};
use crate::pattern::FeaturePattern;
use crate::sampler::OccurrenceHistogram;
use crate::scalar::{from_f64, Scalar};

/// Hard cap on the number of configurations an [`EnumerableSpace`] may hold.
pub const ENUMERATION_BUDGET: u128 = 10_000_000;

/// An explicitly enumerable configuration space: all strings over `alphabet`
/// of length `0..=max_length`, refused at construction if the total count
/// exceeds [`ENUMERATION_BUDGET`].
#[derive(Debug, Clone)]
pub struct EnumerableSpace {
    alphabet: Alphabet,
    max_length: usize,
    total_configs: u128,
}

impl EnumerableSpace {
    pub fn new(alphabet: Alphabet, max_length: usize) -> Result<Self> {
        let a = alphabet.len() as u128;
        let mut total: u128 = 0;
        for l in 0..=max_length {
            let count = a
                .checked_pow(l as u32)
                .filter(|&c| c <= ENUMERATION_BUDGET)
                .ok_or(FieldError::EnumerationRefused {
                    configs: u128::MAX,
                    budget: ENUMERATION_BUDGET,
                })?;
            total += count;
            if total > ENUMERATION_BUDGET {
                return Err(FieldError::EnumerationRefused {
                    configs: total,
                    budget: ENUMERATION_BUDGET,
                });
            }
        }
        Ok(Self {
            alphabet,
            max_length,
            total_configs: total,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn max_length(&self) -> usize {
        self.max_length
    }

    pub fn total_configs(&self) -> u128 {
        self.total_configs
    }

    /// Visit every configuration of length `l` in lexicographic alphabet
    /// order.
    pub fn for_each_config<F: FnMut(&Configuration)>(&self, l: usize, mut visit: F) -> Result<()> {
        if l > self.max_length {
            return Err(FieldError::Precondition(format!(
                "length {l} exceeds space maximum {}",
                self.max_length
            )));
        }
        let chars = self.alphabet.bytes();
        let mut idx = vec![0usize; l];
        let mut bytes = vec![chars[0]; l];
        loop {
            let config = Configuration::from_bytes_unchecked(bytes.clone());
            visit(&config);
            // odometer increment
            let mut pos = l;
            loop {
                if pos == 0 {
                    return Ok(());
                }
                pos -= 1;
                idx[pos] += 1;
                if idx[pos] < chars.len() {
                    bytes[pos] = chars[idx[pos]];
                    break;
                }
                idx[pos] = 0;
                bytes[pos] = chars[0];
            }
        }
    }

    fn check_model_fits<S: Scalar>(&self, model: &FieldModel<S>) -> Result<()> {
        for l in model.length_dist().support() {
            if l > self.max_length {
                return Err(FieldError::Precondition(format!(
                    "model puts length mass at {l}, beyond the enumerable maximum {}",
                    self.max_length
                )));
            }
        }
        Ok(())
    }
}

/// Log of the per-length partition function `Z_l`, computed with a max-shift
/// so extreme weights cannot overflow.
pub fn log_partition<S: Scalar>(
    model: &FieldModel<S>,
    space: &EnumerableSpace,
    l: usize,
) -> Result<S> {
    let mut max = S::neg_infinity();
    let mut scores = Vec::new();
    space.for_each_config(l, |config| {
        let s = model.log_score(config);
        if s > max {
            max = s;
        }
        scores.push(s);
    })?;
    let sum: S = scores.iter().map(|&s| (s - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Exact partition function `Z_l = sum over strings of length l of
/// exp(lambda . f)`.
pub fn partition<S: Scalar>(
    model: &FieldModel<S>,
    space: &EnumerableSpace,
    l: usize,
) -> Result<S> {
    Ok(log_partition(model, space, l)?.exp())
}

/// Exact expectation of an arbitrary statistic under the normalized model
/// (length mixture included).
pub fn exact_expectation_of<S: Scalar, F: Fn(&Configuration) -> S>(
    model: &FieldModel<S>,
    space: &EnumerableSpace,
    stat: F,
) -> Result<S> {
    space.check_model_fits(model)?;
    let mut acc = S::zero();
    for l in model.length_dist().support() {
        let log_z = log_partition(model, space, l)?;
        let p_l = model.length_dist().prob(l);
        let mut inner = S::zero();
        space.for_each_config(l, |config| {
            let x = stat(config);
            if x != S::zero() {
                inner = inner + x * (model.log_score(config) - log_z).exp();
            }
        })?;
        acc = acc + p_l * inner;
    }
    Ok(acc)
}

/// Exact mean and variance of a statistic under the model.
pub fn exact_moments<S: Scalar, F: Fn(&Configuration) -> S>(
    model: &FieldModel<S>,
    space: &EnumerableSpace,
    stat: F,
) -> Result<(S, S)> {
    let mean = exact_expectation_of(model, space, &stat)?;
    let second = exact_expectation_of(model, space, |c| {
        let x = stat(c);
        x * x
    })?;
    Ok((mean, second - mean * mean))
}

/// Exact expectation `q[g]` of a pattern's occurrence count.
pub fn expectation<S: Scalar>(
    model: &FieldModel<S>,
    space: &EnumerableSpace,
    g: &FeaturePattern,
) -> Result<S> {
    exact_expectation_of(model, space, |config| {
        S::from_usize(g.match_count(config)).unwrap()
    })
}

/// Exact per-feature expectations `q[f_i]` for all model features.
pub fn feature_expectations<S: Scalar>(
    model: &FieldModel<S>,
    space: &EnumerableSpace,
) -> Result<Vec<S>> {
    space.check_model_fits(model)?;
    let n = model.feature_count();
    let mut acc = vec![S::zero(); n];
    for l in model.length_dist().support() {
        let log_z = log_partition(model, space, l)?;
        let p_l = model.length_dist().prob(l);
        space.for_each_config(l, |config| {
            let q = p_l * (model.log_score(config) - log_z).exp();
            for (i, f) in model.features().iter().enumerate() {
                let c = f.match_count(config);
                if c > 0 {
                    acc[i] = acc[i] + q * S::from_usize(c).unwrap();
                }
            }
        })?;
    }
    Ok(acc)
}

/// Exact occurrence histogram of a candidate under the model.
pub fn exact_histogram<S: Scalar>(
    model: &FieldModel<S>,
    space: &EnumerableSpace,
    g: &FeaturePattern,
) -> Result<OccurrenceHistogram<S>> {
    space.check_model_fits(model)?;
    let mut probs: Vec<S> = Vec::new();
    for l in model.length_dist().support() {
        let log_z = log_partition(model, space, l)?;
        let p_l = model.length_dist().prob(l);
        space.for_each_config(l, |config| {
            let k = g.match_count(config);
            if probs.len() <= k {
                probs.resize(k + 1, S::zero());
            }
            probs[k] = probs[k] + p_l * (model.log_score(config) - log_z).exp();
        })?;
    }
    OccurrenceHistogram::from_probs(probs)
}

/// Log model probability of one configuration, given precomputed `ln Z_l`.
fn log_model_prob<S: Scalar>(model: &FieldModel<S>, config: &Configuration, log_z: S) -> Option<S> {
    let p_l = model.length_dist().prob(config.len());
    if p_l <= S::zero() {
        return None;
    }
    Some(p_l.ln() + model.log_score(config) - log_z)
}

/// Exact Kullback-Leibler divergence `D(p_tilde || q)` of the empirical
/// distribution from the model. Errors when the model assigns zero
/// probability to a supported configuration (the divergence would be
/// infinite).
pub fn kl_divergence<S: Scalar>(
    p_tilde: &EmpiricalDistribution,
    model: &FieldModel<S>,
    space: &EnumerableSpace,
) -> Result<S> {
    space.check_model_fits(model)?;
    let mut log_z = std::collections::BTreeMap::new();
    let mut acc = S::zero();
    for (config, _) in p_tilde.iter() {
        let l = config.len();
        if l > space.max_length() {
            return Err(FieldError::AbsoluteContinuity {
                config: config.to_string(),
            });
        }
        let lz = match log_z.get(&l) {
            Some(&z) => z,
            None => {
                let z = log_partition(model, space, l)?;
                log_z.insert(l, z);
                z
            }
        };
        let p = p_tilde.prob::<S>(config);
        let lq = log_model_prob(model, config, lz).ok_or(FieldError::AbsoluteContinuity {
            config: config.to_string(),
        })?;
        acc = acc + p * (p.ln() - lq);
    }
    Ok(acc)
}

/// Exact divergence `D(a || b)` between two models over the same space.
pub fn model_kl<S: Scalar>(
    a: &FieldModel<S>,
    b: &FieldModel<S>,
    space: &EnumerableSpace,
) -> Result<S> {
    space.check_model_fits(a)?;
    space.check_model_fits(b)?;
    let mut acc = S::zero();
    for l in a.length_dist().support() {
        let log_za = log_partition(a, space, l)?;
        let log_zb = log_partition(b, space, l)?;
        let pa_l = a.length_dist().prob(l);
        let mut err = None;
        space.for_each_config(l, |config| {
            if err.is_some() {
                return;
            }
            let la = pa_l.ln() + a.log_score(config) - log_za;
            match log_model_prob(b, config, log_zb) {
                Some(lb) => acc = acc + la.exp() * (la - lb),
                None => err = Some(config.to_string()),
            }
        })?;
        if let Some(config) = err {
            return Err(FieldError::AbsoluteContinuity { config });
        }
    }
    Ok(acc)
}

/// Exact coefficients of the per-feature scaling polynomials: row `m >= 1`
/// holds `q[f_i; f_# = m]` and row 0 holds `-p_tilde[f_i]`.
pub fn iis_coefficients_exact<S: Scalar>(
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
    space: &EnumerableSpace,
) -> Result<IisCoefficients<S>> {
    space.check_model_fits(model)?;
    let n = model.feature_count();
    let mut rows: Vec<Vec<S>> = vec![p_tilde
        .feature_expectations::<S>(model.features())
        .into_iter()
        .map(|e| -e)
        .collect()];
    for l in model.length_dist().support() {
        let log_z = log_partition(model, space, l)?;
        let p_l = model.length_dist().prob(l);
        space.for_each_config(l, |config| {
            let fv = model.feature_vector(config);
            let fs: usize = fv.iter().sum();
            if fs == 0 {
                return;
            }
            if rows.len() <= fs {
                rows.resize_with(fs + 1, || vec![S::zero(); n]);
            }
            let q = p_l * (model.log_score(config) - log_z).exp();
            for (i, &c) in fv.iter().enumerate() {
                if c > 0 {
                    rows[fs][i] = rows[fs][i] + q * S::from_usize(c).unwrap();
                }
            }
        })?;
    }
    Ok(IisCoefficients::new(rows, n))
}

/// Independent maximum-likelihood solver: minimizes `D(p_tilde || q)` over
/// tilts of `q0` by the given features, using projected gradient descent
/// with a backtracking line search on exact gradients. Deliberately a
/// different algorithm from iterative scaling, so agreement between the two
/// is evidence rather than tautology.
pub fn ml_oracle<S: Scalar>(
    features: &[FeaturePattern],
    p_tilde: &EmpiricalDistribution,
    space: &EnumerableSpace,
    q0: &FieldModel<S>,
) -> Result<FieldModel<S>> {
    space.check_model_fits(q0)?;
    let mut working = q0.clone();
    for f in features {
        if working.feature_index(f).is_none() {
            working = working.tilt(f, S::zero())?;
        }
    }
    let opt_idx: Vec<usize> = features
        .iter()
        .map(|f| working.feature_index(f).unwrap())
        .collect();

    // Precomputed match counts make each gradient evaluation a handful of
    // dot products.
    let lengths: Vec<usize> = working.length_dist().support().collect();
    let mut blocks: Vec<Vec<(Vec<u16>, S)>> = Vec::with_capacity(lengths.len());
    for &l in &lengths {
        let mut block = Vec::new();
        space.for_each_config(l, |config| {
            let fv: Vec<u16> = working
                .features()
                .iter()
                .map(|f| f.match_count(config) as u16)
                .collect();
            block.push((fv, S::zero()));
        })?;
        blocks.push(block);
    }
    let p_len: Vec<S> = lengths
        .iter()
        .map(|&l| working.length_dist().prob(l))
        .collect();

    // Empirical side: per support configuration, probability and counts.
    let mut support_rows: Vec<(S, usize, Vec<u16>)> = Vec::new();
    for (config, _) in p_tilde.iter() {
        let l = config.len();
        if working.length_dist().prob(l) <= S::zero() || l > space.max_length() {
            return Err(FieldError::AbsoluteContinuity {
                config: config.to_string(),
            });
        }
        let li = lengths.iter().position(|&x| x == l).unwrap();
        let fv: Vec<u16> = working
            .features()
            .iter()
            .map(|f| f.match_count(config) as u16)
            .collect();
        support_rows.push((p_tilde.prob::<S>(config), li, fv));
    }
    let p_targets: Vec<S> = p_tilde.feature_expectations::<S>(features);

    let floor = from_f64::<S>(WEIGHT_FLOOR);
    let mut lambda: Vec<S> = working.weights().to_vec();
    // Features with zero empirical expectation belong at the sentinel floor;
    // freezing them there keeps the line search away from an exponentially
    // flat direction.
    let frozen: Vec<bool> = opt_idx
        .iter()
        .enumerate()
        .map(|(k, &idx)| {
            if p_targets[k] == S::zero() {
                lambda[idx] = floor;
                true
            } else {
                false
            }
        })
        .collect();

    let dot = |fv: &[u16], lam: &[S]| -> S {
        let mut s = S::zero();
        for (&c, &w) in fv.iter().zip(lam) {
            if c > 0 {
                s = s + w * S::from_u16(c).unwrap();
            }
        }
        s
    };

    // Divergence up to the (constant) empirical entropy, and exact gradient
    // q[f] - p_tilde[f] restricted to the optimized coordinates.
    let eval = |lam: &[S]| -> (S, Vec<S>) {
        let mut log_z = vec![S::zero(); lengths.len()];
        let mut q_f = vec![S::zero(); opt_idx.len()];
        for (li, block) in blocks.iter().enumerate() {
            let mut max = S::neg_infinity();
            let scores: Vec<S> = block
                .iter()
                .map(|(fv, _)| {
                    let s = dot(fv, lam);
                    if s > max {
                        max = s;
                    }
                    s
                })
                .collect();
            let mut z = S::zero();
            for &s in &scores {
                z = z + (s - max).exp();
            }
            log_z[li] = max + z.ln();
            for ((fv, _), &s) in block.iter().zip(&scores) {
                let q = p_len[li] * (s - log_z[li]).exp();
                for (k, &idx) in opt_idx.iter().enumerate() {
                    let c = fv[idx];
                    if c > 0 {
                        q_f[k] = q_f[k] + q * S::from_u16(c).unwrap();
                    }
                }
            }
        }
        let mut obj = S::zero();
        for (p, li, fv) in &support_rows {
            obj = obj - *p * (p_len[*li].ln() + dot(fv, lam) - log_z[*li]);
        }
        let grad: Vec<S> = q_f
            .iter()
            .zip(&p_targets)
            .map(|(&q, &t)| q - t)
            .collect();
        (obj, grad)
    };

    let gtol = from_f64::<S>(1e-9);
    let armijo = from_f64::<S>(1e-4);
    let mut eta = S::one();
    let max_iter = 500_000;
    let (mut obj, mut grad) = eval(&lambda);
    for _ in 0..max_iter {
        let mut sup = S::zero();
        for (k, &g) in grad.iter().enumerate() {
            if frozen[k] {
                continue;
            }
            let projected = if lambda[opt_idx[k]] <= floor && g > S::zero() {
                S::zero()
            } else {
                g
            };
            sup = sup.max(projected.abs());
        }
        if sup <= gtol {
            return Ok(working.with_weights(lambda));
        }
        // backtracking line search with step growth on acceptance
        loop {
            let mut trial = lambda.clone();
            let mut decrease = S::zero();
            for (k, &idx) in opt_idx.iter().enumerate() {
                if frozen[k] {
                    continue;
                }
                let next = (lambda[idx] - eta * grad[k]).max(floor);
                decrease = decrease + grad[k] * (lambda[idx] - next);
                trial[idx] = next;
            }
            let (trial_obj, trial_grad) = eval(&trial);
            if trial_obj <= obj - armijo * decrease {
                lambda = trial;
                obj = trial_obj;
                grad = trial_grad;
                eta = (eta + eta).min(from_f64(1e6));
                break;
            }
            eta = eta * from_f64(0.5);
            if eta < from_f64(1e-18) {
                return Err(FieldError::NonConvergence {
                    what: "ml_oracle line search",
                    iterations: max_iter,
                    residual: sup.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
    }
    let sup = grad
        .iter()
        .fold(S::zero(), |acc, &g| acc.max(g.abs()))
        .to_f64()
        .unwrap_or(f64::NAN);
    Err(FieldError::NonConvergence {
        what: "ml_oracle",
        iterations: max_iter,
        residual: sup,
    })
}
