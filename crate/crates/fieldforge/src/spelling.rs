//! The word-spelling application: corpus ingestion into an empirical
//! spelling distribution, atomic features for the ASCII ring, and spelling
//! log-probabilities.
//!
//! Corpus format: UTF-8 text, one record per line, `word<TAB>count` or bare
//! `word` (count 1). Lines starting with `#` are comments; blank lines are
//! skipped. Words must be printable ASCII (0x21..=0x7e).

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::config::{Alphabet, Configuration};
use crate::empirical::EmpiricalDistribution;
use crate::error::{FieldError, Result};
use crate::model::{FieldModel, LengthDistribution};
use crate::oracle::{log_partition, EnumerableSpace, ENUMERATION_BUDGET};
use crate::pattern::FeaturePattern;
use crate::sampler::split_seed;
use crate::scalar::{from_usize, Scalar};
use crate::symbol::{CharClass, ExtendedSymbol};

/// Word-to-count table, the raw form of a unigram corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    entries: BTreeMap<String, u64>,
    total: u64,
}

/// Ingestion options.
#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Words longer than this are rejected with a warning rather than an
    /// error.
    pub max_word_len: usize,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { max_word_len: 32 }
    }
}

/// Result of corpus ingestion, warnings included.
#[derive(Debug)]
pub struct Ingested<S: Scalar> {
    pub empirical: EmpiricalDistribution,
    pub lengths: LengthDistribution<S>,
    pub corpus: Corpus,
    pub warnings: Vec<String>,
}

impl Corpus {
    pub fn from_entries<'a>(entries: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (word, count) in entries {
            Configuration::new(word)?;
            if count == 0 {
                return Err(FieldError::InvalidModel(format!(
                    "word `{word}` has count 0"
                )));
            }
            *map.entry(word.to_string()).or_insert(0) += count;
        }
        if map.is_empty() {
            return Err(FieldError::EmptyInput("corpus".into()));
        }
        let total = map.values().sum();
        Ok(Self {
            entries: map,
            total,
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> + '_ {
        self.entries.iter().map(|(w, &c)| (w.as_str(), c))
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_empirical(&self) -> EmpiricalDistribution {
        EmpiricalDistribution::from_counts(
            self.entries
                .iter()
                .map(|(w, &c)| (Configuration::new(w).expect("validated at ingest"), c)),
        )
        .expect("corpus is nonempty")
    }

    /// Serialize in the same line format `ingest` reads; re-ingesting the
    /// output reproduces the distribution exactly.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (word, count) in self.iter() {
            writeln!(out, "{word}\t{count}")?;
        }
        Ok(())
    }
}

/// Parse a corpus from a reader, producing the empirical spelling
/// distribution and its length marginal.
pub fn ingest<S: Scalar, R: BufRead>(reader: R, options: &IngestOptions) -> Result<Ingested<S>> {
    let mut entries: Vec<(String, u64)> = Vec::new();
    let mut warnings = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| FieldError::Io {
            path: format!("corpus line {line_no}"),
            source: e,
        })?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (word, count) = match trimmed.split_once('\t') {
            Some((w, c)) => {
                let count: i64 = c.trim().parse().map_err(|_| FieldError::Corpus {
                    line: line_no,
                    reason: format!("count `{c}` is not an integer"),
                })?;
                if count <= 0 {
                    return Err(FieldError::Corpus {
                        line: line_no,
                        reason: format!("count {count} must be positive"),
                    });
                }
                (w, count as u64)
            }
            None => (trimmed, 1),
        };
        if word.is_empty() {
            return Err(FieldError::Corpus {
                line: line_no,
                reason: "empty word".into(),
            });
        }
        if let Err(e) = Configuration::new(word) {
            return Err(FieldError::Corpus {
                line: line_no,
                reason: e.to_string(),
            });
        }
        if word.len() > options.max_word_len {
            warnings.push(format!(
                "line {line_no}: word of length {} exceeds cap {}, skipped",
                word.len(),
                options.max_word_len
            ));
            continue;
        }
        entries.push((word.to_string(), count));
    }
    let corpus = Corpus::from_entries(entries.iter().map(|(w, c)| (w.as_str(), *c)))?;
    let empirical = corpus.to_empirical();
    let lengths = empirical.length_marginal();
    Ok(Ingested {
        empirical,
        lengths,
        corpus,
        warnings,
    })
}

/// All atomic features for an alphabet: one literal per character, the four
/// macro classes, the explicit length labels 1..=6, the 7-or-longer label,
/// and the any-length boundary label. The default 94-character alphabet
/// yields 106 atoms.
pub fn atomic_features(alphabet: &Alphabet) -> Vec<FeaturePattern> {
    let mut atoms: Vec<FeaturePattern> = alphabet
        .bytes()
        .iter()
        .map(|&b| FeaturePattern::new(vec![ExtendedSymbol::Literal(b)]).expect("literal atom"))
        .collect();
    for class in [
        CharClass::Lower,
        CharClass::Upper,
        CharClass::Digit,
        CharClass::Punct,
    ] {
        atoms.push(FeaturePattern::new(vec![ExtendedSymbol::Class(class)]).expect("class atom"));
    }
    for l in 1..=6 {
        atoms.push(FeaturePattern::new(vec![ExtendedSymbol::Length(l)]).expect("length atom"));
    }
    atoms.push(FeaturePattern::new(vec![ExtendedSymbol::LengthSevenPlus]).expect("7+ atom"));
    atoms.push(FeaturePattern::new(vec![ExtendedSymbol::Boundary]).expect("boundary atom"));
    atoms
}

/// How a spelling's log-probability was normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreStatus {
    /// Partition function enumerated exactly.
    Exact,
    /// Partition function estimated by uniform importance sampling.
    Approximate,
    /// Word length outside the length distribution's support.
    OutOfSupport,
}

impl ScoreStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreStatus::Exact => "exact",
            ScoreStatus::Approximate => "approx",
            ScoreStatus::OutOfSupport => "out-of-support",
        }
    }
}

/// A scored spelling.
#[derive(Debug, Clone, Copy)]
pub struct SpellingScore<S: Scalar> {
    pub log_prob: S,
    pub status: ScoreStatus,
}

/// Scores spellings under a model: `log p_l(|w|) + lambda . f(w) - log Z_l`.
/// Per-length normalizers are enumerated exactly when the alphabet and
/// length fit the enumeration budget and otherwise estimated by uniform
/// importance sampling with `samples` draws; normalizers are cached.
pub struct SpellingScorer<'a, S: Scalar> {
    model: &'a FieldModel<S>,
    alphabet: &'a Alphabet,
    samples: usize,
    seed: u64,
    cache: BTreeMap<usize, (S, ScoreStatus)>,
}

impl<'a, S: Scalar> SpellingScorer<'a, S> {
    pub fn new(model: &'a FieldModel<S>, alphabet: &'a Alphabet, samples: usize, seed: u64) -> Self {
        Self {
            model,
            alphabet,
            samples,
            seed,
            cache: BTreeMap::new(),
        }
    }

    fn log_z(&mut self, len: usize) -> Result<(S, ScoreStatus)> {
        if let Some(&hit) = self.cache.get(&len) {
            return Ok(hit);
        }
        let a = self.alphabet.len() as u128;
        let exact_cost = a.checked_pow(len as u32);
        let value = match exact_cost {
            Some(cost) if cost <= ENUMERATION_BUDGET => {
                let space = EnumerableSpace::new(self.alphabet.clone(), len)?;
                (log_partition(self.model, &space, len)?, ScoreStatus::Exact)
            }
            _ => (self.estimate_log_z(len), ScoreStatus::Approximate),
        };
        self.cache.insert(len, value);
        Ok(value)
    }

    /// Uniform importance estimate:
    /// `Z_l = A^l * E_uniform[exp(lambda . f)]`.
    fn estimate_log_z(&self, len: usize) -> S {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(split_seed(
            self.seed,
            0x5a5a,
            len as u64,
        ));
        let abc = self.alphabet.bytes();
        let mut max = S::neg_infinity();
        let mut scores = Vec::with_capacity(self.samples);
        for _ in 0..self.samples {
            let bytes: Vec<u8> = (0..len).map(|_| abc[rng.gen_range(0..abc.len())]).collect();
            let config = Configuration::from_bytes_unchecked(bytes);
            let s = self.model.log_score(&config);
            if s > max {
                max = s;
            }
            scores.push(s);
        }
        let mean: S = scores.iter().map(|&s| (s - max).exp()).sum::<S>()
            / from_usize(self.samples);
        from_usize::<S>(len) * from_usize::<S>(self.alphabet.len()).ln() + max + mean.ln()
    }

    pub fn score(&mut self, word: &str) -> Result<SpellingScore<S>> {
        let config = Configuration::new(word)?;
        let p_len = self.model.length_dist().prob(config.len());
        if p_len <= S::zero() {
            return Ok(SpellingScore {
                log_prob: S::neg_infinity(),
                status: ScoreStatus::OutOfSupport,
            });
        }
        let (log_z, status) = self.log_z(config.len())?;
        Ok(SpellingScore {
            log_prob: p_len.ln() + self.model.log_score(&config) - log_z,
            status,
        })
    }
}
