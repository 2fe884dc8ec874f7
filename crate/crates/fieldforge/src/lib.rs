//! Incremental induction of random-field models from training data.
//!
//! The library builds exponential-form distributions over ASCII spellings
//! viewed as rings with a distinguished length vertex. Features are
//! occurrence counts of symbol patterns, selected greedily by their gain
//! (the divergence reduction the best single-parameter tilt would buy) and
//! re-weighted by improved iterative scaling. Expectations come from exact
//! enumeration on small spaces and single-site Gibbs sampling elsewhere; an
//! independent convex solver and brute-force oracles back every estimator in
//! the test suites.
//!
//! All numeric code is generic over the [`Scalar`] floating type; the
//! `f64` aliases at the crate root are what the CLI and most callers use.

pub mod config;
pub mod empirical;
pub mod error;
pub mod gain;
pub mod induce;
pub mod iis;
pub mod model;
pub mod modelfile;
pub mod oracle;
pub mod pattern;
pub mod sampler;
mod scalar;
mod solve;
pub mod spelling;
pub mod symbol;

pub use config::{Alphabet, Configuration};
pub use empirical::EmpiricalDistribution;
pub use error::{FieldError, Result};
pub use gain::{binary_gain, gain_curve, integer_gain, rank_candidates, GainReport, GainStatus};
pub use iis::{
    auxiliary_value, iis_step, newton_update, train, IisCoefficients, IisState, McSettings,
    TrainMode, TrainOutcome,
};
pub use induce::{candidate_set, induction_step, run, InductionConfig, InductionLog};
pub use model::{FieldModel, LengthDistribution, WEIGHT_FLOOR};
pub use modelfile::{load_model, load_model_from, save_model, save_model_to};
pub use oracle::{
    exact_histogram, expectation, feature_expectations, kl_divergence, ml_oracle, model_kl,
    partition, EnumerableSpace, ENUMERATION_BUDGET,
};
pub use pattern::FeaturePattern;
pub use sampler::{
    annealed_samples, conditional_distribution, estimate_histogram, estimate_iis_coefficients,
    geometric_schedule, sample_batch, split_seed, OccurrenceHistogram, SampleBatch,
    DEFAULT_BURN_IN, DEFAULT_SAMPLES,
};
pub use scalar::Scalar;
pub use spelling::{
    atomic_features, ingest, Corpus, IngestOptions, Ingested, ScoreStatus, SpellingScorer,
};
pub use symbol::{CharClass, ExtendedSymbol};

/// Double-precision model, the concrete type the CLI works with.
pub type Model = FieldModel<f64>;
/// Double-precision length distribution.
pub type Lengths = LengthDistribution<f64>;
/// Double-precision occurrence histogram.
pub type Histogram = OccurrenceHistogram<f64>;
/// Double-precision induction settings.
pub type Induction = InductionConfig<f64>;
