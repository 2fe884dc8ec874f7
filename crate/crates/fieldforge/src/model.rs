//! Weighted exponential models over configuration rings.

use crate::config::Configuration;
use crate::error::{FieldError, Result};
use crate::pattern::FeaturePattern;
use crate::scalar::{from_f64, from_usize, Scalar};

/// Sentinel weight standing in for negative infinity: `exp(-50)` is
/// numerically zero at every count while keeping all arithmetic finite.
pub const WEIGHT_FLOOR: f64 = -50.0;

/// Probability vector over string lengths `0..=max_length()`.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthDistribution<S: Scalar> {
    probs: Vec<S>,
}

impl<S: Scalar> LengthDistribution<S> {
    pub fn new(probs: Vec<S>) -> Result<Self> {
        if probs.is_empty() {
            return Err(FieldError::EmptyInput("length distribution".into()));
        }
        let mut sum = S::zero();
        for (l, &p) in probs.iter().enumerate() {
            if !(p >= S::zero()) || !p.is_finite() {
                return Err(FieldError::InvalidModel(format!(
                    "length probability p_{l} = {p} is invalid"
                )));
            }
            sum = sum + p;
        }
        if (sum - S::one()).abs() > from_f64(1e-12) {
            return Err(FieldError::InvalidModel(format!(
                "length distribution sums to {sum}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    /// Point mass on a single length.
    pub fn point(len: usize) -> Self {
        let mut probs = vec![S::zero(); len + 1];
        probs[len] = S::one();
        Self { probs }
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn max_length(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, len: usize) -> S {
        self.probs.get(len).copied().unwrap_or_else(S::zero)
    }

    /// Lengths with positive probability, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > S::zero())
            .map(|(l, _)| l)
    }
}

/// A random-field model: feature patterns, one tied weight per pattern, and
/// the (given) length distribution. For a string of length `l` the model
/// assigns `p(w) = p_l(l) * exp(lambda . f(w)) / Z_l` with `Z_l` the
/// per-length normalizer.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldModel<S: Scalar> {
    features: Vec<FeaturePattern>,
    weights: Vec<S>,
    length_dist: LengthDistribution<S>,
}

impl<S: Scalar> FieldModel<S> {
    pub fn new(
        features: Vec<FeaturePattern>,
        weights: Vec<S>,
        length_dist: LengthDistribution<S>,
    ) -> Result<Self> {
        if features.len() != weights.len() {
            return Err(FieldError::InvalidModel(format!(
                "{} features but {} weights",
                features.len(),
                weights.len()
            )));
        }
        for (i, f) in features.iter().enumerate() {
            if features[..i].contains(f) {
                return Err(FieldError::InvalidModel(format!(
                    "duplicate feature `{}`",
                    f.text()
                )));
            }
        }
        for (f, &w) in features.iter().zip(&weights) {
            if !w.is_finite() {
                return Err(FieldError::InvalidModel(format!(
                    "weight for `{}` is {w}",
                    f.text()
                )));
            }
        }
        Ok(Self {
            features,
            weights,
            length_dist,
        })
    }

    /// The zero-feature model: uniform over strings of each length.
    pub fn uniform(length_dist: LengthDistribution<S>) -> Self {
        Self {
            features: Vec::new(),
            weights: Vec::new(),
            length_dist,
        }
    }

    pub fn features(&self) -> &[FeaturePattern] {
        &self.features
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn length_dist(&self) -> &LengthDistribution<S> {
        &self.length_dist
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn feature_index(&self, pattern: &FeaturePattern) -> Option<usize> {
        self.features.iter().position(|f| f == pattern)
    }

    /// Per-feature occurrence counts on `config`.
    pub fn feature_vector(&self, config: &Configuration) -> Vec<usize> {
        self.features
            .iter()
            .map(|f| f.match_count(config))
            .collect()
    }

    /// Total feature count: the sum of all occurrence counts.
    pub fn f_sharp(&self, config: &Configuration) -> usize {
        self.features.iter().map(|f| f.match_count(config)).sum()
    }

    /// Unnormalized log score `lambda . f(config)`.
    pub fn log_score(&self, config: &Configuration) -> S {
        let mut score = S::zero();
        for (f, &w) in self.features.iter().zip(&self.weights) {
            let c = f.match_count(config);
            if c > 0 {
                score = score + w * from_usize(c);
            }
        }
        score
    }

    /// Tilt by `(g, alpha)`: adds `alpha` to the weight of `g` if it is
    /// already active, otherwise appends it as a new feature.
    pub fn tilt(&self, g: &FeaturePattern, alpha: S) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(FieldError::Precondition(format!(
                "tilt weight must be finite, got {alpha}"
            )));
        }
        let mut out = self.clone();
        match out.feature_index(g) {
            Some(i) => out.weights[i] = out.weights[i] + alpha,
            None => {
                out.features.push(g.clone());
                out.weights.push(alpha);
            }
        }
        Ok(out)
    }

    /// Replace all weights at once (used by the trainers; applies the
    /// negative-infinity sentinel clamp).
    pub(crate) fn with_weights(&self, weights: Vec<S>) -> Self {
        debug_assert_eq!(weights.len(), self.features.len());
        let floor = from_f64::<S>(WEIGHT_FLOOR);
        let weights = weights
            .into_iter()
            .map(|w| if w < floor || w.is_nan() { floor } else { w })
            .collect();
        Self {
            features: self.features.clone(),
            weights,
            length_dist: self.length_dist.clone(),
        }
    }

    /// Stable fingerprint of features, weights and length distribution, used
    /// to tie sample batches to the model that generated them.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv1a::new();
        h.write(b"fieldforge-model");
        for p in self.length_dist.probs() {
            h.write(&p.to_f64().unwrap_or(f64::NAN).to_le_bytes());
        }
        for (f, w) in self.features.iter().zip(&self.weights) {
            h.write(f.text().as_bytes());
            h.write(&[0]);
            h.write(&w.to_f64().unwrap_or(f64::NAN).to_le_bytes());
        }
        h.finish()
    }
}

/// FNV-1a, kept local so fingerprints are stable across platforms and
/// standard-library versions.
struct Fnv1a(u64);

impl Fnv1a {
    fn new() -> Self {
        Fnv1a(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(text: &str) -> FeaturePattern {
        FeaturePattern::parse(text).unwrap()
    }

    fn cfg(text: &str) -> Configuration {
        Configuration::new(text).unwrap()
    }

    fn model(feats: &[(&str, f64)]) -> FieldModel<f64> {
        FieldModel::new(
            feats.iter().map(|(t, _)| pat(t)).collect(),
            feats.iter().map(|&(_, w)| w).collect(),
            LengthDistribution::point(3),
        )
        .unwrap()
    }

    #[test]
    fn feature_vector_counts() {
        let m = model(&[("[a-z]", 0.0), ("e", 0.0)]);
        assert_eq!(m.feature_vector(&cfg("the")), vec![3, 1]);
        assert_eq!(m.f_sharp(&cfg("the")), 4);
        let empty = FieldModel::<f64>::uniform(LengthDistribution::point(0));
        assert!(empty.feature_vector(&cfg("x")).is_empty());
        assert_eq!(empty.f_sharp(&cfg("x")), 0);
    }

    #[test]
    fn f_sharp_counts_tied_occurrences() {
        let m = model(&[("[a-z]", 0.0)]);
        assert_eq!(m.f_sharp(&cfg("The")), 2);
    }

    #[test]
    fn log_score_is_weighted_count_sum() {
        let lam = 3.47f64.ln();
        let m = model(&[("e", lam)]);
        assert!((m.log_score(&cfg("eee")) - 3.0 * lam).abs() < 1e-12);
        let zero = model(&[("e", 0.0), ("[a-z]", 0.0)]);
        assert_eq!(zero.log_score(&cfg("eee")), 0.0);
    }

    #[test]
    fn hamiltonianism_score_adds_three_features() {
        let m = FieldModel::new(
            vec![pat("<7+>[A-Z]"), pat("ian"), pat("ism<*>")],
            vec![0.25f64, 0.5, 1.0],
            LengthDistribution::point(14),
        )
        .unwrap();
        let w = cfg("Hamiltonianism");
        assert_eq!(m.feature_vector(&w), vec![1, 1, 1]);
        assert!((m.log_score(&w) - 1.75).abs() < 1e-12);
    }

    #[test]
    fn tilt_merges_and_appends() {
        let m = model(&[("e", 0.5)]);
        let merged = m.tilt(&pat("e"), 0.25).unwrap();
        assert_eq!(merged.weights(), &[0.75]);
        let appended = m.tilt(&pat("t"), 1.0).unwrap();
        assert_eq!(appended.feature_count(), 2);
        assert!(m.tilt(&pat("e"), f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn rejects_duplicates_and_bad_weights() {
        let dup = FieldModel::new(
            vec![pat("e"), pat("e")],
            vec![0.0, 0.0],
            LengthDistribution::point(1),
        );
        assert!(dup.is_err());
        let inf = FieldModel::new(
            vec![pat("e")],
            vec![f64::INFINITY],
            LengthDistribution::point(1),
        );
        assert!(inf.is_err());
    }

    #[test]
    fn length_dist_validation() {
        assert!(LengthDistribution::new(vec![0.5, 0.25]).is_err());
        assert!(LengthDistribution::new(vec![0.5f64, 0.5]).is_ok());
        assert!(LengthDistribution::<f64>::new(vec![]).is_err());
        let p = LengthDistribution::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(p.support().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn fingerprint_tracks_weights() {
        let a = model(&[("e", 0.5)]);
        let b = model(&[("e", 0.5000001)]);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }
}
