//! Empirical distributions: normalized configuration counts from training
//! data.

use std::collections::BTreeMap;

use crate::config::Configuration;
use crate::error::{FieldError, Result};
use crate::model::LengthDistribution;
use crate::pattern::FeaturePattern;
use crate::scalar::{from_usize, Scalar};

/// Normalized counts `p(w) = c(w) / N` over the configurations observed in a
/// corpus. Counts and the total are retained so probabilities are always the
/// exact ratio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmpiricalDistribution {
    counts: BTreeMap<Configuration, u64>,
    total: u64,
}

impl EmpiricalDistribution {
    pub fn from_counts(counts: impl IntoIterator<Item = (Configuration, u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (config, count) in counts {
            if count == 0 {
                return Err(FieldError::InvalidModel(format!(
                    "configuration `{config}` has count 0"
                )));
            }
            *map.entry(config).or_insert(0) += count;
        }
        if map.is_empty() {
            return Err(FieldError::EmptyInput("empirical distribution".into()));
        }
        let total = map.values().sum();
        Ok(Self { counts: map, total })
    }

    /// Convenience constructor from `(word, count)` pairs.
    pub fn from_words<'a>(words: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self> {
        Self::from_counts(
            words
                .into_iter()
                .map(|(w, c)| Configuration::new(w).map(|cfg| (cfg, c)))
                .collect::<Result<Vec<_>>>()?,
        )
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct configurations in the support.
    pub fn support_size(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, config: &Configuration) -> u64 {
        self.counts.get(config).copied().unwrap_or(0)
    }

    pub fn prob<S: Scalar>(&self, config: &Configuration) -> S {
        S::from_u64(self.count(config)).unwrap() / S::from_u64(self.total).unwrap()
    }

    /// Deterministic (sorted) iteration over the support.
    pub fn iter(&self) -> impl Iterator<Item = (&Configuration, u64)> + '_ {
        self.counts.iter().map(|(c, &n)| (c, n))
    }

    pub fn max_length(&self) -> usize {
        self.counts.keys().map(Configuration::len).max().unwrap_or(0)
    }

    /// Exact expectation of a pattern's occurrence count: a finite sum over
    /// the support, never sampled.
    pub fn expectation<S: Scalar>(&self, pattern: &FeaturePattern) -> S {
        let mut acc = S::zero();
        for (config, count) in self.iter() {
            let m = pattern.match_count(config);
            if m > 0 {
                acc = acc + from_usize::<S>(m) * S::from_u64(count).unwrap();
            }
        }
        acc / S::from_u64(self.total).unwrap()
    }

    pub fn feature_expectations<S: Scalar>(&self, patterns: &[FeaturePattern]) -> Vec<S> {
        patterns.iter().map(|p| self.expectation(p)).collect()
    }

    /// Length marginal of the empirical distribution.
    pub fn length_marginal<S: Scalar>(&self) -> LengthDistribution<S> {
        let mut mass = vec![0u64; self.max_length() + 1];
        for (config, count) in self.iter() {
            mass[config.len()] += count;
        }
        let total = S::from_u64(self.total).unwrap();
        let probs = mass
            .into_iter()
            .map(|m| S::from_u64(m).unwrap() / total)
            .collect();
        LengthDistribution::new(probs).expect("marginal of a valid distribution")
    }
}
