//! Single-site Gibbs sampling from a field model, and the Monte Carlo
//! statistics (occurrence histograms, scaling-polynomial coefficients) that
//! gain evaluation and iterative scaling consume.
//!
//! Chains are independent: every sample draws its length once, initializes
//! uniformly, and runs a fixed number of full left-to-right sweeps. Each
//! chain's generator is derived from the master seed by a stable splitting
//! scheme, so batches are reproducible across platforms and identical whether
//! chains run sequentially or in parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{Alphabet, Configuration};
use crate::empirical::EmpiricalDistribution;
use crate::error::{FieldError, Result};
use crate::iis::IisCoefficients;
use crate::model::FieldModel;
use crate::pattern::FeaturePattern;
use crate::scalar::{from_f64, from_usize, Scalar};

/// Default number of spellings per batch.
pub const DEFAULT_SAMPLES: usize = 10_000;
/// Default burn-in, in full sweeps per chain.
pub const DEFAULT_BURN_IN: u32 = 20;

/// splitmix64; used to derive per-purpose sub-seeds from one master seed.
pub fn split_seed(master: u64, tag: u64, index: u64) -> u64 {
    let mut x = master;
    for add in [tag, index, 0x9e37_79b9_7f4a_7c15] {
        x = x.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(add);
        x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        x ^= x >> 31;
    }
    x
}

fn chain_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master.to_le_bytes());
    seed[8..16].copy_from_slice(&index.to_le_bytes());
    seed[16..24].copy_from_slice(&0x6669_656c_6466_6f72u64.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// An immutable batch of configurations sampled from one model, shared
/// read-only by every estimator.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    configs: Vec<Configuration>,
    seed: u64,
    burn_in: u32,
    model_fingerprint: u64,
    annealed: bool,
}

impl SampleBatch {
    pub fn configs(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn burn_in(&self) -> u32 {
        self.burn_in
    }

    pub fn model_fingerprint(&self) -> u64 {
        self.model_fingerprint
    }

    pub fn is_annealed(&self) -> bool {
        self.annealed
    }
}

/// Probability of each occurrence count `k = 0..=k_max` of a candidate under
/// the current model; `k_max` is the largest count with positive mass.
#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceHistogram<S: Scalar> {
    probs: Vec<S>,
}

impl<S: Scalar> OccurrenceHistogram<S> {
    pub fn from_probs(mut probs: Vec<S>) -> Result<Self> {
        while probs.len() > 1 && *probs.last().unwrap() == S::zero() {
            probs.pop();
        }
        if probs.is_empty() {
            return Err(FieldError::EmptyInput("occurrence histogram".into()));
        }
        let mut sum = S::zero();
        for (k, &p) in probs.iter().enumerate() {
            if !(p >= S::zero()) {
                return Err(FieldError::InvalidModel(format!(
                    "histogram mass g_{k} = {p} is negative"
                )));
            }
            sum = sum + p;
        }
        if (sum - S::one()).abs() > from_f64(1e-12) {
            return Err(FieldError::InvalidModel(format!(
                "histogram sums to {sum}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn from_counts(counts: &[usize], total: usize) -> Result<Self> {
        if total == 0 {
            return Err(FieldError::EmptyInput("occurrence histogram".into()));
        }
        let n = from_usize::<S>(total);
        Self::from_probs(counts.iter().map(|&c| from_usize::<S>(c) / n).collect())
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn prob(&self, k: usize) -> S {
        self.probs.get(k).copied().unwrap_or_else(S::zero)
    }

    /// Largest occurrence count with positive probability.
    pub fn k_max(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> S {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, &p)| from_usize::<S>(k) * p)
            .sum()
    }

    /// True when all mass sits on a single count (a constant candidate).
    pub fn is_constant(&self) -> bool {
        self.probs.iter().filter(|&&p| p > S::zero()).count() <= 1
    }
}

/// Accumulates, for one site update, the total weight each alphabet character
/// would contribute. A window of a pattern that covers the site contributes
/// its weight to exactly the characters matched by the pattern symbol aligned
/// with the site, provided all other window positions already match.
fn site_scores<S: Scalar>(
    model: &FieldModel<S>,
    alphabet: &Alphabet,
    chars: &[u8],
    site: usize,
    scores: &mut [S],
) {
    let len = chars.len();
    let ring = len + 1;
    for s in scores.iter_mut() {
        *s = S::zero();
    }
    for (pattern, &weight) in model.features().iter().zip(model.weights()) {
        let syms = pattern.symbols();
        let p = syms.len();
        if p > ring {
            continue;
        }
        for (j, sym) in syms.iter().enumerate() {
            if sym.is_length_kind() {
                continue;
            }
            let start = (site + ring - j) % ring;
            let mut rest_ok = true;
            for (r, other) in syms.iter().enumerate() {
                if r == j {
                    continue;
                }
                let v = (start + r) % ring;
                let matched = if v < len {
                    other.matches_char(chars[v])
                } else {
                    other.matches_length_vertex(len)
                };
                if !matched {
                    rest_ok = false;
                    break;
                }
            }
            if !rest_ok {
                continue;
            }
            for (idx, &b) in alphabet.bytes().iter().enumerate() {
                if sym.matches_char(b) {
                    scores[idx] = scores[idx] + weight;
                }
            }
        }
    }
}

fn normalize_scores<S: Scalar>(scores: &[S], inv_temp: S, probs: &mut [S]) {
    let mut max = S::neg_infinity();
    for &s in scores {
        let v = s * inv_temp;
        if v > max {
            max = v;
        }
    }
    let mut total = S::zero();
    for (p, &s) in probs.iter_mut().zip(scores) {
        let e = (s * inv_temp - max).exp();
        *p = e;
        total = total + e;
    }
    for p in probs.iter_mut() {
        *p = *p / total;
    }
}

/// Exact conditional distribution of the character at `site` given the rest
/// of the ring. `site` must index a character vertex; the length vertex is
/// never resampled.
pub fn conditional_distribution<S: Scalar>(
    model: &FieldModel<S>,
    alphabet: &Alphabet,
    config: &Configuration,
    site: usize,
) -> Result<Vec<S>> {
    if site >= config.len() {
        return Err(FieldError::InvalidSite {
            site,
            len: config.len(),
        });
    }
    let mut scores = vec![S::zero(); alphabet.len()];
    let mut probs = vec![S::zero(); alphabet.len()];
    site_scores(model, alphabet, config.bytes(), site, &mut scores);
    normalize_scores(&scores, S::one(), &mut probs);
    Ok(probs)
}

fn pick_index<S: Scalar>(probs: &[S], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p.to_f64().unwrap_or(0.0);
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

fn draw_length<S: Scalar>(model: &FieldModel<S>, u: f64) -> usize {
    let probs = model.length_dist().probs();
    let mut acc = 0.0;
    for (l, &p) in probs.iter().enumerate() {
        acc += p.to_f64().unwrap_or(0.0);
        if u < acc {
            return l;
        }
    }
    probs.len() - 1
}

fn run_chain<S: Scalar>(
    model: &FieldModel<S>,
    alphabet: &Alphabet,
    inv_temps: &[S],
    rng: &mut ChaCha8Rng,
) -> Configuration {
    let len = draw_length(model, rng.gen::<f64>());
    let abc = alphabet.bytes();
    let mut chars: Vec<u8> = (0..len).map(|_| abc[rng.gen_range(0..abc.len())]).collect();
    if len > 0 {
        let mut scores = vec![S::zero(); abc.len()];
        let mut probs = vec![S::zero(); abc.len()];
        for &inv_temp in inv_temps {
            for site in 0..len {
                site_scores(model, alphabet, &chars, site, &mut scores);
                normalize_scores(&scores, inv_temp, &mut probs);
                chars[site] = abc[pick_index(&probs, rng.gen::<f64>())];
            }
        }
    }
    Configuration::from_bytes_unchecked(chars)
}

fn batch_with_temps<S: Scalar>(
    model: &FieldModel<S>,
    alphabet: &Alphabet,
    n: usize,
    inv_temps: &[S],
    seed: u64,
    annealed: bool,
) -> Result<SampleBatch> {
    if n == 0 {
        return Err(FieldError::Precondition(
            "sample batch needs at least one configuration".into(),
        ));
    }
    let configs: Vec<Configuration> = (0..n as u64)
        .into_par_iter()
        .map(|chain| {
            let mut rng = chain_rng(seed, chain);
            run_chain(model, alphabet, inv_temps, &mut rng)
        })
        .collect();
    Ok(SampleBatch {
        configs,
        seed,
        burn_in: inv_temps.len() as u32,
        model_fingerprint: model.fingerprint(),
        annealed,
    })
}

/// Sample `n` configurations from the model: per chain, draw a length from
/// the length distribution, initialize uniformly, and run `burn_in` full
/// sweeps of single-site updates in fixed left-to-right order.
pub fn sample_batch<S: Scalar>(
    model: &FieldModel<S>,
    alphabet: &Alphabet,
    n: usize,
    burn_in: u32,
    seed: u64,
) -> Result<SampleBatch> {
    let inv_temps = vec![S::one(); burn_in as usize];
    batch_with_temps(model, alphabet, n, &inv_temps, seed, false)
}

/// Gibbs sweeps with the weights scaled by the reciprocal of a per-sweep
/// temperature. Display-only: annealed batches are rejected by the
/// coefficient estimators.
pub fn annealed_samples<S: Scalar>(
    model: &FieldModel<S>,
    alphabet: &Alphabet,
    n: usize,
    temperatures: &[S],
    seed: u64,
) -> Result<SampleBatch> {
    for &t in temperatures {
        if !(t > S::zero()) || !t.is_finite() {
            return Err(FieldError::Precondition(format!(
                "annealing temperatures must be positive and finite, got {t}"
            )));
        }
    }
    let inv_temps: Vec<S> = temperatures.iter().map(|&t| S::one() / t).collect();
    let annealed = temperatures.iter().any(|&t| t != S::one());
    batch_with_temps(model, alphabet, n, &inv_temps, seed, annealed)
}

/// Geometric temperature ladder from `start` down to `end` over `sweeps`
/// steps; the default display schedule.
pub fn geometric_schedule<S: Scalar>(start: S, end: S, sweeps: u32) -> Vec<S> {
    if sweeps == 0 {
        return Vec::new();
    }
    if sweeps == 1 {
        return vec![end];
    }
    let ratio = (end / start).powf(S::one() / from_usize::<S>(sweeps as usize - 1));
    (0..sweeps).map(|k| start * ratio.powi(k as i32)).collect()
}

/// Monte Carlo occurrence histogram of a candidate over the shared batch.
pub fn estimate_histogram<S: Scalar>(
    batch: &SampleBatch,
    g: &FeaturePattern,
) -> OccurrenceHistogram<S> {
    let mut counts: Vec<usize> = Vec::new();
    for config in batch.configs() {
        let k = g.match_count(config);
        if counts.len() <= k {
            counts.resize(k + 1, 0);
        }
        counts[k] += 1;
    }
    OccurrenceHistogram::from_counts(&counts, batch.len()).expect("batch is nonempty")
}

/// Monte Carlo estimate of the scaling-polynomial coefficients: row `m >= 1`
/// holds the sample average of `f_i * [f_# = m]`, row 0 holds
/// `-p_tilde[f_i]`. The batch must come from exactly this model.
pub fn estimate_iis_coefficients<S: Scalar>(
    batch: &SampleBatch,
    model: &FieldModel<S>,
    p_tilde: &EmpiricalDistribution,
) -> Result<IisCoefficients<S>> {
    if batch.is_annealed() {
        return Err(FieldError::Precondition(
            "coefficient estimation requires an unannealed batch".into(),
        ));
    }
    if batch.model_fingerprint() != model.fingerprint() {
        return Err(FieldError::Precondition(
            "batch was not drawn from this model".into(),
        ));
    }
    let n_feat = model.feature_count();
    let mut rows: Vec<Vec<S>> = vec![p_tilde
        .feature_expectations::<S>(model.features())
        .into_iter()
        .map(|e| -e)
        .collect()];
    for config in batch.configs() {
        let fv = model.feature_vector(config);
        let fs: usize = fv.iter().sum();
        if fs == 0 {
            continue;
        }
        if rows.len() <= fs {
            rows.resize_with(fs + 1, || vec![S::zero(); n_feat]);
        }
        for (i, &c) in fv.iter().enumerate() {
            if c > 0 {
                rows[fs][i] = rows[fs][i] + from_usize(c);
            }
        }
    }
    let n = from_usize::<S>(batch.len());
    for row in rows.iter_mut().skip(1) {
        for v in row.iter_mut() {
            *v = *v / n;
        }
    }
    Ok(IisCoefficients::new(rows, n_feat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LengthDistribution;

    fn pat(text: &str) -> FeaturePattern {
        FeaturePattern::parse(text).unwrap()
    }

    fn ab() -> Alphabet {
        Alphabet::new(*b"ab").unwrap()
    }

    #[test]
    fn conditional_uniform_without_features() {
        let m = FieldModel::<f64>::uniform(LengthDistribution::point(2));
        let cfg = Configuration::new("ab").unwrap();
        let probs = conditional_distribution(&m, &ab(), &cfg, 0).unwrap();
        assert!((probs[0] - 0.5).abs() < 1e-12);
        assert!((probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn conditional_two_way_renormalization() {
        let m = FieldModel::new(
            vec![pat("a")],
            vec![2.0f64.ln()],
            LengthDistribution::point(2),
        )
        .unwrap();
        let cfg = Configuration::new("bb").unwrap();
        for site in 0..2 {
            let probs = conditional_distribution(&m, &ab(), &cfg, site).unwrap();
            assert!((probs[0] - 2.0 / 3.0).abs() < 1e-12);
            assert!((probs[1] - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conditional_pair_feature_elevates_score() {
        let lam = 0.7;
        let m = FieldModel::new(vec![pat("ab")], vec![lam as f64], LengthDistribution::point(2)).unwrap();
        let cfg = Configuration::new("_b").unwrap();
        let alphabet = Alphabet::new(*b"_ab").unwrap();
        let probs = conditional_distribution(&m, &alphabet, &cfg, 0).unwrap();
        let idx_a = alphabet.bytes().iter().position(|&b| b == b'a').unwrap();
        let idx_u = alphabet.bytes().iter().position(|&b| b == b'_').unwrap();
        assert!(((probs[idx_a] / probs[idx_u]).ln() - lam).abs() < 1e-12);
    }

    #[test]
    fn conditional_rejects_length_vertex() {
        let m = FieldModel::<f64>::uniform(LengthDistribution::point(2));
        let cfg = Configuration::new("ab").unwrap();
        assert!(matches!(
            conditional_distribution(&m, &ab(), &cfg, 2),
            Err(FieldError::InvalidSite { .. })
        ));
    }

    #[test]
    fn conditional_sums_to_one() {
        let m = FieldModel::new(
            vec![pat("ab"), pat("[a-z]"), pat("b<2>")],
            vec![0.3, -0.2, 1.1],
            LengthDistribution::point(2),
        )
        .unwrap();
        let cfg = Configuration::new("ba").unwrap();
        let probs = conditional_distribution(&m, &ab(), &cfg, 1).unwrap();
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batches_are_deterministic() {
        let m = FieldModel::new(
            vec![pat("a")],
            vec![0.4],
            LengthDistribution::new(vec![0.2, 0.5, 0.3]).unwrap(),
        )
        .unwrap();
        let b1 = sample_batch(&m, &ab(), 200, 5, 42).unwrap();
        let b2 = sample_batch(&m, &ab(), 200, 5, 42).unwrap();
        assert_eq!(b1.configs(), b2.configs());
        let b3 = sample_batch(&m, &ab(), 200, 5, 43).unwrap();
        assert_ne!(b1.configs(), b3.configs());
    }

    #[test]
    fn constant_schedule_equals_plain_batch() {
        let m = FieldModel::new(
            vec![pat("a")],
            vec![0.4],
            LengthDistribution::new(vec![0.2, 0.5, 0.3]).unwrap(),
        )
        .unwrap();
        let plain = sample_batch(&m, &ab(), 100, 6, 9).unwrap();
        let temps = vec![1.0f64; 6];
        let annealed = annealed_samples(&m, &ab(), 100, &temps, 9).unwrap();
        assert_eq!(plain.configs(), annealed.configs());
        assert!(!annealed.is_annealed());
    }

    #[test]
    fn annealed_schedule_validated() {
        let m = FieldModel::<f64>::uniform(LengthDistribution::point(1));
        assert!(annealed_samples(&m, &ab(), 10, &[1.0, 0.0], 1).is_err());
        let sched = geometric_schedule(2.0f64, 0.8, 5);
        assert_eq!(sched.len(), 5);
        assert!((sched[0] - 2.0).abs() < 1e-12);
        assert!((sched[4] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn histogram_counts_by_occurrence() {
        let m = FieldModel::<f64>::uniform(LengthDistribution::point(1));
        let mut batch = sample_batch(&m, &ab(), 2, 0, 0).unwrap();
        batch.configs = vec![
            Configuration::new("ab").unwrap(),
            Configuration::new("a").unwrap(),
        ];
        let h: OccurrenceHistogram<f64> = estimate_histogram(&batch, &pat("[a-z]"));
        assert_eq!(h.prob(1), 0.5);
        assert_eq!(h.prob(2), 0.5);
        assert_eq!(h.k_max(), 2);
        let none: OccurrenceHistogram<f64> = estimate_histogram(&batch, &pat("z"));
        assert_eq!(none.prob(0), 1.0);
        assert_eq!(none.k_max(), 0);
    }

    #[test]
    fn coefficients_single_config() {
        let m = FieldModel::new(vec![pat("a")], vec![0.0], LengthDistribution::point(1)).unwrap();
        let mut batch = sample_batch(&m, &ab(), 1, 0, 0).unwrap();
        batch.configs = vec![Configuration::new("a").unwrap()];
        let p = EmpiricalDistribution::from_words([("a", 3), ("b", 1)]).unwrap();
        let coeffs = estimate_iis_coefficients::<f64>(&batch, &m, &p).unwrap();
        assert_eq!(coeffs.row(0), &[-0.75]);
        assert_eq!(coeffs.row(1), &[1.0]);
    }

    #[test]
    fn coefficients_reject_foreign_batch() {
        let m1 = FieldModel::new(vec![pat("a")], vec![0.0], LengthDistribution::point(1)).unwrap();
        let m2 = FieldModel::new(vec![pat("a")], vec![0.1], LengthDistribution::point(1)).unwrap();
        let p = EmpiricalDistribution::from_words([("a", 1)]).unwrap();
        let batch = sample_batch(&m1, &ab(), 10, 2, 7).unwrap();
        assert!(estimate_iis_coefficients::<f64>(&batch, &m2, &p).is_err());
        let hot = annealed_samples(&m1, &ab(), 10, &[2.0], 7).unwrap();
        assert!(estimate_iis_coefficients::<f64>(&hot, &m1, &p).is_err());
    }

    #[test]
    fn seed_split_is_stable() {
        assert_ne!(split_seed(1, 2, 3), split_seed(1, 2, 4));
        assert_ne!(split_seed(1, 2, 3), split_seed(1, 3, 3));
        assert_eq!(split_seed(7, 7, 7), split_seed(7, 7, 7));
    }
}
