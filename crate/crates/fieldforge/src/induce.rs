//! The field induction loop: maintain the candidate set, pick the max-gain
//! feature, tilt the model by its best single-parameter weight, retrain all
//! weights, repeat.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::config::Alphabet;
use crate::empirical::EmpiricalDistribution;
use crate::error::{FieldError, Result};
use crate::gain::rank_candidates;
use crate::iis::{train, McSettings, TrainMode};
use crate::model::FieldModel;
use crate::oracle::{kl_divergence, EnumerableSpace};
use crate::pattern::FeaturePattern;
use crate::sampler::{sample_batch, split_seed};
use crate::scalar::Scalar;
use crate::spelling::{atomic_features, SpellingScorer};

const TAG_GAIN_BATCH: u64 = 0x6a14;
const TAG_IIS_SEED: u64 = 0x1155;
const TAG_DIVERGENCE: u64 = 0xd1fe;

/// Settings for one induction run. All randomness derives from `seed`.
#[derive(Debug, Clone)]
pub struct InductionConfig<S: Scalar> {
    pub alphabet: Alphabet,
    pub max_features: usize,
    pub samples: usize,
    pub burn_in: u32,
    pub seed: u64,
    /// Candidates whose top gain falls below this threshold end the run.
    pub gain_threshold: S,
    pub iis_tol: S,
    pub iis_max_iter: usize,
    /// When set, weight re-estimation and the logged divergence use exact
    /// enumeration over this space instead of Monte Carlo estimates.
    pub exact: Option<EnumerableSpace>,
}

impl<S: Scalar> InductionConfig<S> {
    pub fn new(alphabet: Alphabet) -> Self {
        Self {
            alphabet,
            max_features: 10,
            samples: crate::sampler::DEFAULT_SAMPLES,
            burn_in: crate::sampler::DEFAULT_BURN_IN,
            seed: 0,
            gain_threshold: crate::scalar::from_f64(1e-4),
            iis_tol: crate::scalar::from_f64(1e-3),
            iis_max_iter: 500,
            exact: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.max_features < 1 {
            return Err(FieldError::Precondition(
                "max_features must be at least 1".into(),
            ));
        }
        if self.samples < 1 {
            return Err(FieldError::Precondition(
                "samples must be at least 1".into(),
            ));
        }
        if !(self.gain_threshold >= S::zero()) {
            return Err(FieldError::Precondition(
                "gain threshold must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// One row of the induction log.
#[derive(Debug, Clone)]
pub struct InductionRecord<S: Scalar> {
    pub iteration: usize,
    pub feature: FeaturePattern,
    pub alpha_hat: S,
    pub gain: S,
    /// Divergence after retraining: exact in exact mode, an importance
    /// estimate otherwise.
    pub divergence: S,
    pub candidate_count: usize,
    pub iis_converged: bool,
    pub wall_ms: u128,
}

/// Per-iteration records of a run.
#[derive(Debug, Clone)]
pub struct InductionLog<S: Scalar> {
    pub records: Vec<InductionRecord<S>>,
}

impl<S: Scalar> Default for InductionLog<S> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
        }
    }
}

/// The candidate set for the current active features: all atoms when the
/// field is empty, otherwise atoms plus one-atom extensions of active
/// features on either side. Deduplicated, invariant-violating combinations
/// dropped, already-active patterns excluded; returned in text order.
pub fn candidate_set(
    active: &[FeaturePattern],
    atoms: &[FeaturePattern],
) -> Vec<FeaturePattern> {
    let mut out: BTreeMap<String, FeaturePattern> = BTreeMap::new();
    let mut push = |p: FeaturePattern| {
        if !active.contains(&p) {
            out.entry(p.text()).or_insert(p);
        }
    };
    for a in atoms {
        push(a.clone());
    }
    if !active.is_empty() {
        for a in atoms {
            for s in active {
                if let Ok(p) = FeaturePattern::concat(a, s) {
                    push(p);
                }
                if let Ok(p) = FeaturePattern::concat(s, a) {
                    push(p);
                }
            }
        }
    }
    out.into_values().collect()
}

/// Outcome of one induction step.
pub enum StepOutcome<S: Scalar> {
    Selected(Box<(FieldModel<S>, InductionRecord<S>)>),
    /// No candidate clears the gain threshold.
    Complete,
}

/// One induction iteration: sample a batch from the current model, rank all
/// candidates on it, tilt by the winner, retrain, and report.
pub fn induction_step<S: Scalar>(
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
    config: &InductionConfig<S>,
    iteration: usize,
) -> Result<StepOutcome<S>> {
    config.validate()?;
    let started = Instant::now();
    let batch = sample_batch(
        model,
        &config.alphabet,
        config.samples,
        config.burn_in,
        split_seed(config.seed, TAG_GAIN_BATCH, iteration as u64),
    )?;
    let atoms = atomic_features(&config.alphabet);
    let candidates = candidate_set(model.features(), &atoms);
    let reports = rank_candidates::<S>(&candidates, &batch, p_tilde)?;
    let best = match reports.first() {
        Some(r) if r.gain > S::zero() && r.gain >= config.gain_threshold => r,
        _ => return Ok(StepOutcome::Complete),
    };

    // The tilted model is the recommended warm start for re-estimation.
    let tilted = model.tilt(&best.candidate, best.alpha_hat)?;
    let mode = match &config.exact {
        Some(space) => TrainMode::Exact(space),
        None => TrainMode::MonteCarlo(McSettings {
            alphabet: config.alphabet.clone(),
            samples: config.samples,
            burn_in: config.burn_in,
            seed: split_seed(config.seed, TAG_IIS_SEED, iteration as u64),
        }),
    };
    let trained = train(&tilted, p_tilde, mode, config.iis_tol, config.iis_max_iter)?;

    let divergence = match &config.exact {
        Some(space) => kl_divergence(p_tilde, &trained.model, space)?,
        None => estimate_divergence(
            &trained.model,
            p_tilde,
            &config.alphabet,
            config.samples,
            split_seed(config.seed, TAG_DIVERGENCE, iteration as u64),
        )?,
    };
    let record = InductionRecord {
        iteration,
        feature: best.candidate.clone(),
        alpha_hat: best.alpha_hat,
        gain: best.gain,
        divergence,
        candidate_count: reports.len(),
        iis_converged: trained.converged,
        wall_ms: started.elapsed().as_millis(),
    };
    Ok(StepOutcome::Selected(Box::new((trained.model, record))))
}

/// Divergence of the model from the empirical distribution, with per-length
/// normalizers enumerated exactly when affordable and importance-estimated
/// otherwise. Logged for monitoring; not used by any stopping rule in Monte
/// Carlo mode.
pub fn estimate_divergence<S: Scalar>(
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
    alphabet: &Alphabet,
    samples: usize,
    seed: u64,
) -> Result<S> {
    let mut scorer = SpellingScorer::new(model, alphabet, samples, seed);
    let mut acc = S::zero();
    for (config, _) in p_tilde.iter() {
        let p: S = p_tilde.prob(config);
        let score = scorer.score(config.as_str())?;
        acc = acc + p * (p.ln() - score.log_prob);
    }
    Ok(acc)
}

/// Run the induction algorithm from the zero-feature (uniform) field until
/// `max_features` features are active or no candidate clears the threshold.
pub fn run<S: Scalar>(
    p_tilde: &EmpiricalDistribution,
    config: &InductionConfig<S>,
) -> Result<(FieldModel<S>, InductionLog<S>)> {
    config.validate()?;
    let mut model = FieldModel::uniform(p_tilde.length_marginal());
    let mut log = InductionLog::default();
    for iteration in 0..config.max_features {
        match induction_step(&model, p_tilde, config, iteration)? {
            StepOutcome::Selected(boxed) => {
                let (next, record) = *boxed;
                model = next;
                log.records.push(record);
            }
            StepOutcome::Complete => break,
        }
    }
    Ok((model, log))
}
