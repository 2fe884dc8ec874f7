//! Plain-text model persistence.
//!
//! Format, line by line: a `fieldforge-model v1` header, one
//! `LEN <l> <prob>` record per length from 0 upward, then one
//! `FEAT <pattern> <lambda>` record per feature in feature-index order.
//! Floats are written with 17 significant digits so weights round-trip
//! bit-identically; pattern text never contains whitespace because
//! configurations exclude the space character.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{FieldError, Result};
use crate::model::{FieldModel, LengthDistribution};
use crate::pattern::FeaturePattern;
use crate::scalar::Scalar;

const HEADER: &str = "fieldforge-model v1";

pub fn save_model_to<S: Scalar, W: Write>(mut out: W, model: &FieldModel<S>) -> std::io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for (l, &p) in model.length_dist().probs().iter().enumerate() {
        writeln!(out, "LEN {l} {p:.16e}")?;
    }
    for (f, &w) in model.features().iter().zip(model.weights()) {
        writeln!(out, "FEAT {} {w:.16e}", f.text())?;
    }
    Ok(())
}

pub fn save_model<S: Scalar>(path: &Path, model: &FieldModel<S>) -> Result<()> {
    let io_err = |source| FieldError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    save_model_to(&mut out, model).map_err(io_err)?;
    out.flush().map_err(io_err)
}

pub fn load_model_from<S: Scalar, R: BufRead>(reader: R) -> Result<FieldModel<S>> {
    let mut lines = reader.lines().enumerate();
    let parse_err = |line: usize, reason: String| FieldError::ModelFile { line, reason };
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty file".into()))?;
    let first = first.map_err(|e| parse_err(1, e.to_string()))?;
    if first != HEADER {
        if let Some(version) = first.strip_prefix("fieldforge-model ") {
            return Err(FieldError::ModelVersion(version.to_string()));
        }
        return Err(parse_err(1, format!("expected `{HEADER}`, found `{first}`")));
    }

    let mut probs: Vec<S> = Vec::new();
    let mut features: Vec<FeaturePattern> = Vec::new();
    let mut weights: Vec<S> = Vec::new();
    let mut seen_feat = false;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line.map_err(|e| parse_err(line_no, e.to_string()))?;
        let mut parts = line.splitn(3, ' ');
        let tag = parts.next().unwrap_or("");
        let parse_float = |s: Option<&str>| -> Result<S> {
            let text = s.ok_or_else(|| parse_err(line_no, "missing value".into()))?;
            let v: f64 = text
                .parse()
                .map_err(|_| parse_err(line_no, format!("bad float `{text}`")))?;
            S::from_f64(v).ok_or_else(|| parse_err(line_no, format!("unrepresentable `{text}`")))
        };
        match tag {
            "LEN" => {
                if seen_feat {
                    return Err(parse_err(line_no, "LEN record after FEAT records".into()));
                }
                let l: usize = parts
                    .next()
                    .ok_or_else(|| parse_err(line_no, "missing length".into()))?
                    .parse()
                    .map_err(|_| parse_err(line_no, "bad length index".into()))?;
                if l != probs.len() {
                    return Err(parse_err(
                        line_no,
                        format!("expected length {}, found {l}", probs.len()),
                    ));
                }
                probs.push(parse_float(parts.next())?);
            }
            "FEAT" => {
                seen_feat = true;
                let text = parts
                    .next()
                    .ok_or_else(|| parse_err(line_no, "missing pattern".into()))?;
                let pattern = FeaturePattern::parse(text).map_err(|e| {
                    parse_err(line_no, e.to_string())
                })?;
                features.push(pattern);
                weights.push(parse_float(parts.next())?);
            }
            other => {
                return Err(parse_err(line_no, format!("unknown record `{other}`")));
            }
        }
    }
    let lengths = LengthDistribution::new(probs)?;
    FieldModel::new(features, weights, lengths)
}

pub fn load_model<S: Scalar>(path: &Path) -> Result<FieldModel<S>> {
    let file = File::open(path).map_err(|source| FieldError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_model_from(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn sample_model() -> FieldModel<f64> {
        FieldModel::new(
            vec![
                FeaturePattern::parse("[a-z]").unwrap(),
                FeaturePattern::parse("ism<*>").unwrap(),
                FeaturePattern::parse("\\[x").unwrap(),
            ],
            vec![6.99f64.ln(), -0.25, 50.0],
            LengthDistribution::new(vec![0.125, 0.5, 0.375]).unwrap(),
        )
        .unwrap()
    }

    fn to_bytes(model: &FieldModel<f64>) -> Vec<u8> {
        let mut out = Vec::new();
        save_model_to(&mut out, model).unwrap();
        out
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let model = sample_model();
        let bytes = to_bytes(&model);
        let loaded: FieldModel<f64> = load_model_from(Cursor::new(&bytes)).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(to_bytes(&loaded), bytes);
    }

    #[test]
    fn weights_round_trip_bit_identically() {
        let model = sample_model();
        let text = String::from_utf8(to_bytes(&model)).unwrap();
        assert!(text.contains("FEAT [a-z] 1.9444387829120488e0"), "{text}");
        let loaded: FieldModel<f64> = load_model_from(Cursor::new(text.as_bytes())).unwrap();
        for (a, b) in loaded.weights().iter().zip(model.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn zero_feature_model_serializes_lengths_only() {
        let model = FieldModel::<f64>::uniform(LengthDistribution::point(1));
        let text = String::from_utf8(to_bytes(&model)).unwrap();
        assert_eq!(text, "fieldforge-model v1\nLEN 0 0.0000000000000000e0\nLEN 1 1.0000000000000000e0\n");
    }

    #[test]
    fn rejects_malformed_files() {
        let truncated = "fieldforge-model v1\nLEN 0 0.5\nLEN 1";
        assert!(matches!(
            load_model_from::<f64, _>(Cursor::new(truncated)),
            Err(FieldError::ModelFile { line: 3, .. })
        ));
        let bad_version = "fieldforge-model v9\n";
        assert!(matches!(
            load_model_from::<f64, _>(Cursor::new(bad_version)),
            Err(FieldError::ModelVersion(_))
        ));
        let two_boundaries = "fieldforge-model v1\nLEN 0 1.0\nFEAT <*>a<*> 0.5\n";
        assert!(matches!(
            load_model_from::<f64, _>(Cursor::new(two_boundaries)),
            Err(FieldError::ModelFile { line: 3, .. })
        ));
        let not_a_model = "something else\n";
        assert!(load_model_from::<f64, _>(Cursor::new(not_a_model)).is_err());
        let bad_sum = "fieldforge-model v1\nLEN 0 0.5\n";
        assert!(load_model_from::<f64, _>(Cursor::new(bad_sum)).is_err());
    }
}
