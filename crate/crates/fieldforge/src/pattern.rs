//! Feature patterns: sequences of extended symbols whose occurrence count on
//! a configuration ring is the feature value.
//!
//! Text syntax (used in model files and on the command line): literal
//! characters stand for themselves, the macros are `[a-z]`, `[A-Z]`, `[0-9]`
//! and `[punct]`, the length tokens are `<1>`..`<6>`, `<7+>` and `<*>`, and a
//! backslash escapes a literal `[`, `<` or `\`.

use std::fmt;

use crate::config::Configuration;
use crate::error::{FieldError, Result};
use crate::symbol::{is_printable, CharClass, ExtendedSymbol};

/// An ordered, non-empty sequence of extended symbols. At most one
/// length-vertex symbol may appear, and only at the first or last position:
/// the ring has a single distinguished vertex, so no occurrence could match a
/// pattern with two of them, and an interior one could never line up with a
/// contiguous window.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeaturePattern {
    symbols: Vec<ExtendedSymbol>,
}

impl FeaturePattern {
    pub fn new(symbols: Vec<ExtendedSymbol>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(FieldError::Pattern {
                text: String::new(),
                reason: "pattern must contain at least one symbol".into(),
            });
        }
        let length_positions: Vec<usize> = symbols
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_length_kind())
            .map(|(i, _)| i)
            .collect();
        if length_positions.len() > 1 {
            return Err(FieldError::Pattern {
                text: render(&symbols),
                reason: "at most one length or boundary symbol is allowed".into(),
            });
        }
        if let Some(&pos) = length_positions.first() {
            if pos != 0 && pos != symbols.len() - 1 {
                return Err(FieldError::Pattern {
                    text: render(&symbols),
                    reason: "length or boundary symbol must be first or last".into(),
                });
            }
        }
        Ok(Self { symbols })
    }

    /// Parse the pattern text syntax.
    pub fn parse(text: &str) -> Result<Self> {
        let err = |reason: &str| FieldError::Pattern {
            text: text.to_string(),
            reason: reason.to_string(),
        };
        let bytes = text.as_bytes();
        let mut symbols = Vec::new();
        let mut i = 0;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => {
                    let b = *bytes.get(i + 1).ok_or_else(|| err("dangling backslash"))?;
                    if !matches!(b, b'[' | b'<' | b'\\') {
                        return Err(err("backslash may only escape `[`, `<` or `\\`"));
                    }
                    symbols.push(ExtendedSymbol::Literal(b));
                    i += 2;
                }
                b'[' => {
                    let end = bytes[i..]
                        .iter()
                        .position(|&b| b == b']')
                        .ok_or_else(|| err("unterminated `[` macro"))?;
                    let token = &text[i..i + end + 1];
                    let class = match token {
                        "[a-z]" => CharClass::Lower,
                        "[A-Z]" => CharClass::Upper,
                        "[0-9]" => CharClass::Digit,
                        "[punct]" => CharClass::Punct,
                        other => {
                            return Err(err(&format!("unknown macro class `{other}`")));
                        }
                    };
                    symbols.push(ExtendedSymbol::Class(class));
                    i += end + 1;
                }
                b'<' => {
                    let end = bytes[i..]
                        .iter()
                        .position(|&b| b == b'>')
                        .ok_or_else(|| err("unterminated `<` token"))?;
                    let token = &text[i + 1..i + end];
                    let sym = match token {
                        "*" => ExtendedSymbol::Boundary,
                        "7+" => ExtendedSymbol::LengthSevenPlus,
                        d if d.len() == 1 && ("1"..="6").contains(&d) => {
                            ExtendedSymbol::Length(d.as_bytes()[0] - b'0')
                        }
                        other => {
                            return Err(err(&format!("unknown length token `<{other}>`")));
                        }
                    };
                    symbols.push(sym);
                    i += end + 1;
                }
                b if is_printable(b) => {
                    symbols.push(ExtendedSymbol::Literal(b));
                    i += 1;
                }
                _ => return Err(err("pattern characters must be printable ASCII")),
            }
        }
        Self::new(symbols)
    }

    pub fn symbols(&self) -> &[ExtendedSymbol] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Canonical text form; the deterministic tie-break key used everywhere.
    pub fn text(&self) -> String {
        render(&self.symbols)
    }

    /// Number of ring positions at which the pattern matches consecutive
    /// vertices of the configuration. Character symbols never match the
    /// length vertex, so a window may cross it only where the pattern carries
    /// a length or boundary symbol. Patterns longer than the ring match
    /// nowhere.
    pub fn match_count(&self, config: &Configuration) -> usize {
        let ring = config.ring_size();
        let p = self.symbols.len();
        if p > ring {
            return 0;
        }
        let len = config.len();
        let chars = config.bytes();
        let mut count = 0;
        for start in 0..ring {
            let mut ok = true;
            for (j, sym) in self.symbols.iter().enumerate() {
                let v = (start + j) % ring;
                let matched = if v < len {
                    sym.matches_char(chars[v])
                } else {
                    sym.matches_length_vertex(len)
                };
                if !matched {
                    ok = false;
                    break;
                }
            }
            if ok {
                count += 1;
            }
        }
        count
    }

    /// Concatenation used by candidate construction; the result still has to
    /// pass the pattern invariants.
    pub fn concat(prefix: &FeaturePattern, suffix: &FeaturePattern) -> Result<Self> {
        let mut symbols = prefix.symbols.clone();
        symbols.extend_from_slice(&suffix.symbols);
        Self::new(symbols)
    }
}

impl fmt::Display for FeaturePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.symbols {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

fn render(symbols: &[ExtendedSymbol]) -> String {
    use std::fmt::Write;
    let mut out = String::new();
    for s in symbols {
        let _ = write!(out, "{s}");
    }
    out
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

    #[test]
    fn parse_round_trip() {
        for text in ["[a-z]", "ism<*>", "<7+>[A-Z]", "e", "\\[x\\<\\\\", "[punct]<3>"] {
            let p = pat(text);
            assert_eq!(p.text(), text);
            assert_eq!(FeaturePattern::parse(&p.text()).unwrap(), p);
        }
    }

    #[test]
    fn parse_rejects_bad_patterns() {
        assert!(FeaturePattern::parse("").is_err());
        assert!(FeaturePattern::parse("<*>a<*>").is_err());
        assert!(FeaturePattern::parse("a<*>b").is_err());
        assert!(FeaturePattern::parse("[a-q]").is_err());
        assert!(FeaturePattern::parse("<9>").is_err());
        assert!(FeaturePattern::parse("a\\b").is_err());
        assert!(FeaturePattern::parse("x<").is_err());
    }

    #[test]
    fn lowercase_class_counts_positions() {
        assert_eq!(pat("[a-z]").match_count(&cfg("The")), 2);
    }

    #[test]
    fn literal_counts_every_position() {
        assert_eq!(pat("e").match_count(&cfg("eee")), 3);
    }

    #[test]
    fn suffix_feature_matches_once() {
        assert_eq!(pat("ism<*>").match_count(&cfg("Hamiltonianism")), 1);
        assert_eq!(pat("ism<*>").match_count(&cfg("ismx")), 0);
        assert_eq!(pat("<*>ism").match_count(&cfg("ismx")), 1);
    }

    #[test]
    fn length_token_matches_exact_length() {
        assert_eq!(pat("[a-z]<1>").match_count(&cfg("a")), 1);
        assert_eq!(pat("[a-z]<1>").match_count(&cfg("ab")), 0);
        assert_eq!(pat("<7+>").match_count(&cfg("Hamilton")), 1);
        assert_eq!(pat("<7+>").match_count(&cfg("the")), 0);
    }

    #[test]
    fn pattern_longer_than_ring_matches_nowhere() {
        assert_eq!(pat("aaa").match_count(&cfg("a")), 0);
        assert_eq!(pat("a<1>").match_count(&cfg("a")), 1);
        assert_eq!(pat("aa").match_count(&cfg("a")), 0);
    }

    #[test]
    fn boundary_matches_lone_length_vertex() {
        assert_eq!(pat("<*>").match_count(&cfg("")), 1);
        assert_eq!(pat("a").match_count(&cfg("")), 0);
        assert_eq!(pat("<*>").match_count(&cfg("ab")), 1);
    }
}
