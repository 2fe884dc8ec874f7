//! Extended alphabet: literal ASCII characters, macro character classes, and
//! the tokens that match the distinguished length vertex of a ring.

use std::fmt;

/// Lowest printable ASCII byte accepted in configurations (`!`).
pub const PRINTABLE_MIN: u8 = 0x21;
/// Highest printable ASCII byte accepted in configurations (`~`).
pub const PRINTABLE_MAX: u8 = 0x7e;

/// True for the character range configurations are built from.
#[inline]
pub fn is_printable(byte: u8) -> bool {
    (PRINTABLE_MIN..=PRINTABLE_MAX).contains(&byte)
}

/// Macro character classes usable as single pattern symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CharClass {
    /// `[a-z]`
    Lower,
    /// `[A-Z]`
    Upper,
    /// `[0-9]`
    Digit,
    /// `[punct]`: printable ASCII that is not a letter or digit.
    Punct,
}

impl CharClass {
    pub fn contains(self, byte: u8) -> bool {
        match self {
            CharClass::Lower => byte.is_ascii_lowercase(),
            CharClass::Upper => byte.is_ascii_uppercase(),
            CharClass::Digit => byte.is_ascii_digit(),
            CharClass::Punct => is_printable(byte) && !byte.is_ascii_alphanumeric(),
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            CharClass::Lower => "[a-z]",
            CharClass::Upper => "[A-Z]",
            CharClass::Digit => "[0-9]",
            CharClass::Punct => "[punct]",
        }
    }
}

/// One symbol of a feature pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExtendedSymbol {
    /// A single printable ASCII character.
    Literal(u8),
    /// One of the four macro classes.
    Class(CharClass),
    /// `<l>` for l in 1..=6: matches the length vertex of a ring whose
    /// string has exactly that length.
    Length(u8),
    /// `<7+>`: matches the length vertex when the string has length >= 7.
    LengthSevenPlus,
    /// `<*>`: matches the length vertex of any ring.
    Boundary,
}

impl ExtendedSymbol {
    /// Symbols that can only sit on the distinguished length vertex.
    pub fn is_length_kind(self) -> bool {
        matches!(
            self,
            ExtendedSymbol::Length(_) | ExtendedSymbol::LengthSevenPlus | ExtendedSymbol::Boundary
        )
    }

    /// Whether this symbol matches a character vertex carrying `byte`.
    #[inline]
    pub fn matches_char(self, byte: u8) -> bool {
        match self {
            ExtendedSymbol::Literal(b) => b == byte,
            ExtendedSymbol::Class(c) => c.contains(byte),
            _ => false,
        }
    }

    /// Whether this symbol matches the length vertex of a string of length `len`.
    #[inline]
    pub fn matches_length_vertex(self, len: usize) -> bool {
        match self {
            ExtendedSymbol::Length(l) => len == l as usize,
            ExtendedSymbol::LengthSevenPlus => len >= 7,
            ExtendedSymbol::Boundary => true,
            _ => false,
        }
    }
}

impl fmt::Display for ExtendedSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ExtendedSymbol::Literal(b) => {
                if matches!(b, b'[' | b'<' | b'\\') {
                    write!(f, "\\{}", b as char)
                } else {
                    write!(f, "{}", b as char)
                }
            }
            ExtendedSymbol::Class(c) => f.write_str(c.token()),
            ExtendedSymbol::Length(l) => write!(f, "<{l}>"),
            ExtendedSymbol::LengthSevenPlus => f.write_str("<7+>"),
            ExtendedSymbol::Boundary => f.write_str("<*>"),
        }
    }
}
