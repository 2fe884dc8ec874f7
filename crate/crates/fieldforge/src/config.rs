//! Configurations (ASCII strings viewed as rings with a distinguished length
//! vertex) and alphabets.

use std::fmt;

use crate::error::{FieldError, Result};
use crate::symbol::{is_printable, PRINTABLE_MAX, PRINTABLE_MIN};

/// A configuration is a printable-ASCII string of length `l`. Its ring has
/// `l + 1` vertices: indices `0..l` carry the characters and index `l` is the
/// distinguished length vertex, which is fixed and never resampled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    chars: Vec<u8>,
}

impl Configuration {
    pub fn new(text: &str) -> Result<Self> {
        for (i, &b) in text.as_bytes().iter().enumerate() {
            if !is_printable(b) {
                return Err(FieldError::InvalidModel(format!(
                    "configuration byte {i} (0x{b:02x}) is not printable ASCII"
                )));
            }
        }
        Ok(Self {
            chars: text.as_bytes().to_vec(),
        })
    }

    pub(crate) fn from_bytes_unchecked(chars: Vec<u8>) -> Self {
        Self { chars }
    }

    /// String length `l` (number of character vertices).
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }

    /// Number of ring vertices, `l + 1`.
    pub fn ring_size(&self) -> usize {
        self.chars.len() + 1
    }

    pub fn bytes(&self) -> &[u8] {
        &self.chars
    }

    pub fn as_str(&self) -> &str {
        // chars are validated printable ASCII
        std::str::from_utf8(&self.chars).expect("configuration is ASCII")
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An ordered, duplicate-free set of printable ASCII characters. Used as the
/// label set for character vertices by the sampler, the exact oracle and the
/// atomic feature construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    chars: Vec<u8>,
}

impl Alphabet {
    pub fn new(chars: impl IntoIterator<Item = u8>) -> Result<Self> {
        let mut chars: Vec<u8> = chars.into_iter().collect();
        chars.sort_unstable();
        chars.dedup();
        if chars.is_empty() {
            return Err(FieldError::EmptyInput("alphabet".into()));
        }
        for &b in &chars {
            if !is_printable(b) {
                return Err(FieldError::InvalidModel(format!(
                    "alphabet byte 0x{b:02x} is not printable ASCII"
                )));
            }
        }
        Ok(Self { chars })
    }

    /// The full printable ASCII alphabet (94 characters, 0x21..=0x7e).
    pub fn ascii_printable() -> Self {
        Self {
            chars: (PRINTABLE_MIN..=PRINTABLE_MAX).collect(),
        }
    }

    pub fn from_str_chars(text: &str) -> Result<Self> {
        Self::new(text.bytes())
    }

    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bytes(&self) -> &[u8] {
        &self.chars
    }

    pub fn contains(&self, byte: u8) -> bool {
        self.chars.binary_search(&byte).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_printable() {
        assert!(Configuration::new("a b").is_err());
        assert!(Configuration::new("caf\u{e9}").is_err());
        assert!(Configuration::new("").unwrap().is_empty());
        assert_eq!(Configuration::new("The").unwrap().ring_size(), 4);
    }

    #[test]
    fn alphabet_sorted_dedup() {
        let a = Alphabet::new(*b"baab").unwrap();
        assert_eq!(a.bytes(), b"ab");
        assert_eq!(Alphabet::ascii_printable().len(), 94);
        assert!(Alphabet::new(*b" ").is_err());
    }
}
