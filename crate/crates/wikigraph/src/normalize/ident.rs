//! Bibliographic identifier cleaning and the publication identity key.
//!
//! Identifiers arrive embedded in citation templates with resolver
//! prefixes, stray punctuation and mixed hyphenation. Per scheme:
//!
//! - DOI: resolver prefixes (`doi:`, `https://doi.org/`, `dx.doi.org/`…)
//!   are stripped, trailing `.` `,` `;` `)` trimmed, and the remainder
//!   lower-cased (DOIs are case-insensitive by definition). The result
//!   must match `10.<registrant>/<suffix>`.
//! - ISBN: hyphens, spaces and an `ISBN`/`ISBN-10`/`ISBN-13` prefix are
//!   removed; ISBN-10s are converted to ISBN-13 (978 prefix, recomputed
//!   check digit); the check digit is validated. Canonical form is the
//!   13-digit string.
//! - Everything else in the configured vocabulary is trimmed and kept
//!   as-is (values may be case-sensitive, so no folding).
//!
//! A publication is identified by the full set of its identifiers: the
//! key is the sorted, deduplicated `scheme:value` list joined by a unit
//! separator (U+001F, which cannot appear in the values). Two references
//! merge only when their *entire* identifier sets coincide — a chapter
//! (DOI + book ISBN) and its host book (ISBN only) stay distinct.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Joins `scheme:value` entries inside a key; control characters are
/// rejected in values, so the separator is unambiguous.
pub const KEY_SEPARATOR: char = '\u{1F}';

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdentifierError {
    #[error("invalid DOI `{raw}`: {detail}")]
    InvalidDoi { raw: String, detail: String },
    #[error("invalid ISBN `{raw}`: {detail}")]
    InvalidIsbn { raw: String, detail: String },
    #[error("unknown identifier scheme `{0}`")]
    UnknownScheme(String),
    #[error("empty value for scheme `{0}`")]
    EmptyValue(String),
    #[error("control character in value for scheme `{0}`")]
    ControlCharacter(String),
    #[error("a publication needs at least one identifier")]
    EmptyIdentifierSet,
}

/// A cleaned `(scheme, value)` pair; scheme is lower-case and from the
/// vocabulary, value is non-empty and control-free.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IdentifierPair {
    pub scheme: String,
    pub value: String,
}

impl fmt::Display for IdentifierPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.scheme, self.value)
    }
}

/// The identifier schemes recognized in citations. Order is the column
/// order of the publication table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentifierVocabulary {
    schemes: Vec<String>,
}

pub const DEFAULT_SCHEMES: [&str; 20] = [
    "doi", "isbn", "pmid", "pmc", "arxiv", "bibcode", "issn", "oclc", "jstor", "mr", "zbl",
    "ssrn", "hdl", "lccn", "olid", "osti", "rfc", "s2cid", "citeseerx", "asin",
];

impl Default for IdentifierVocabulary {
    fn default() -> Self {
        IdentifierVocabulary {
            schemes: DEFAULT_SCHEMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl IdentifierVocabulary {
    pub fn new<S: AsRef<str>>(schemes: &[S]) -> Self {
        IdentifierVocabulary {
            schemes: schemes
                .iter()
                .map(|s| s.as_ref().to_ascii_lowercase())
                .collect(),
        }
    }

    pub fn schemes(&self) -> &[String] {
        &self.schemes
    }

    pub fn contains(&self, scheme: &str) -> bool {
        self.schemes.iter().any(|s| s == scheme)
    }
}

/// Normalize one raw identifier under its scheme.
pub fn normalize_identifier(
    scheme: &str,
    raw: &str,
    vocabulary: &IdentifierVocabulary,
) -> Result<IdentifierPair, IdentifierError> {
    let scheme = scheme.to_ascii_lowercase();
    if !vocabulary.contains(&scheme) {
        return Err(IdentifierError::UnknownScheme(scheme));
    }
    let value = match scheme.as_str() {
        "doi" => normalize_doi(raw)?,
        "isbn" => normalize_isbn(raw)?,
        _ => {
            let v = raw.trim();
            if v.is_empty() {
                return Err(IdentifierError::EmptyValue(scheme));
            }
            if v.chars().any(char::is_control) {
                return Err(IdentifierError::ControlCharacter(scheme));
            }
            v.to_string()
        }
    };
    Ok(IdentifierPair { scheme, value })
}

const DOI_PREFIXES: [&str; 9] = [
    "doi:",
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "https://www.doi.org/",
    "http://www.doi.org/",
    "doi.org/",
    "dx.doi.org/",
];

pub fn normalize_doi(raw: &str) -> Result<String, IdentifierError> {
    let fail = |detail: &str| IdentifierError::InvalidDoi {
        raw: raw.to_string(),
        detail: detail.to_string(),
    };
    let mut s = raw.trim();
    // Strip resolver prefixes repeatedly: `doi:https://doi.org/10.x/y`
    // occurs in the wild.
    loop {
        let before = s;
        for p in DOI_PREFIXES {
            if let Some(head) = s.get(..p.len()) {
                if head.eq_ignore_ascii_case(p) {
                    s = s[p.len()..].trim_start();
                }
            }
        }
        if s == before {
            break;
        }
    }
    let s = s.trim_end_matches(['.', ',', ';', ')']);
    if s.is_empty() {
        return Err(fail("empty after cleaning"));
    }
    let s = s.to_lowercase();
    let rest = s
        .strip_prefix("10.")
        .ok_or_else(|| fail("must start with `10.`"))?;
    let slash = rest.find('/').ok_or_else(|| fail("missing `/`"))?;
    let (registrant, suffix) = (&rest[..slash], &rest[slash + 1..]);
    if registrant.is_empty()
        || !registrant
            .split('.')
            .all(|part| !part.is_empty() && part.bytes().all(|b| b.is_ascii_digit()))
    {
        return Err(fail("registrant must be digits (dot-separated)"));
    }
    if suffix.is_empty() {
        return Err(fail("empty suffix"));
    }
    if s.chars().any(|c| c.is_whitespace() || c.is_control()) {
        return Err(fail("contains whitespace"));
    }
    Ok(s)
}

pub fn normalize_isbn(raw: &str) -> Result<String, IdentifierError> {
    let fail = |detail: String| IdentifierError::InvalidIsbn {
        raw: raw.to_string(),
        detail,
    };
    let mut s = raw.trim();
    for p in ["isbn-13", "isbn-10", "isbn13", "isbn10", "isbn"] {
        if let Some(head) = s.get(..p.len()) {
            if head.eq_ignore_ascii_case(p) {
                s = s[p.len()..].trim_start_matches([':', ' ']);
                break;
            }
        }
    }
    let digits: String = s
        .chars()
        .filter(|c| !matches!(c, '-' | ' ' | '\u{2010}'..='\u{2015}'))
        .map(|c| c.to_ascii_uppercase())
        .collect();
    match digits.len() {
        10 => {
            let values = isbn10_values(&digits)
                .ok_or_else(|| fail("ISBN-10 may only contain digits and a final X".into()))?;
            let sum: u32 = values
                .iter()
                .enumerate()
                .map(|(i, &d)| (10 - i as u32) * d)
                .sum();
            if sum % 11 != 0 {
                return Err(fail("ISBN-10 check digit mismatch".into()));
            }
            let mut thirteen = String::from("978");
            thirteen.push_str(&digits[..9]);
            let check = isbn13_check_digit(thirteen.as_bytes());
            thirteen.push((b'0' + check) as char);
            Ok(thirteen)
        }
        13 => {
            if !digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(fail("ISBN-13 may only contain digits".into()));
            }
            let check = isbn13_check_digit(&digits.as_bytes()[..12]);
            if digits.as_bytes()[12] - b'0' != check {
                return Err(fail("ISBN-13 check digit mismatch".into()));
            }
            Ok(digits)
        }
        n => Err(fail(format!("{n} significant characters, expected 10 or 13"))),
    }
}

/// Digit values of an ISBN-10, with X (=10) allowed in the last position.
fn isbn10_values(s: &str) -> Option<[u32; 10]> {
    let bytes = s.as_bytes();
    let mut values = [0u32; 10];
    for i in 0..10 {
        values[i] = match bytes[i] {
            b @ b'0'..=b'9' => (b - b'0') as u32,
            b'X' if i == 9 => 10,
            _ => return None,
        };
    }
    Some(values)
}

/// Check digit over the first 12 digits: weights alternate 1,3.
fn isbn13_check_digit(digits: &[u8]) -> u8 {
    let sum: u32 = digits
        .iter()
        .enumerate()
        .map(|(i, &b)| (b - b'0') as u32 * if i % 2 == 0 { 1 } else { 3 })
        .sum();
    ((10 - (sum % 10)) % 10) as u8
}

/// Order-invariant identity of a publication: its full identifier set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IdentifierSetKey(String);

impl IdentifierSetKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Reconstruct from a stored key string (inverse of `as_str`).
    pub fn from_key_string(s: &str) -> Self {
        IdentifierSetKey(s.to_string())
    }

    pub fn pairs(&self) -> impl Iterator<Item = IdentifierPair> + '_ {
        self.0.split(KEY_SEPARATOR).map(|entry| {
            let colon = entry.find(':').unwrap_or(entry.len());
            IdentifierPair {
                scheme: entry[..colon].to_string(),
                value: entry.get(colon + 1..).unwrap_or("").to_string(),
            }
        })
    }
}

impl fmt::Display for IdentifierSetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Build the identity key for a set of cleaned pairs: sort, dedupe, join.
pub fn pub_identity_key(pairs: &[IdentifierPair]) -> Result<IdentifierSetKey, IdentifierError> {
    if pairs.is_empty() {
        return Err(IdentifierError::EmptyIdentifierSet);
    }
    let sorted: BTreeSet<&IdentifierPair> = pairs.iter().collect();
    let mut key = String::new();
    for (i, pair) in sorted.iter().enumerate() {
        if i > 0 {
            key.push(KEY_SEPARATOR);
        }
        key.push_str(&pair.scheme);
        key.push(':');
        key.push_str(&pair.value);
    }
    Ok(IdentifierSetKey(key))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doi_goldens() {
        let cases = [
            ("10.1000/xyz123", "10.1000/xyz123"),
            ("10.1000/XYZ123", "10.1000/xyz123"),
            ("doi:10.1000/abc", "10.1000/abc"),
            ("DOI:10.1000/abc", "10.1000/abc"),
            ("https://doi.org/10.1162/qss_a_00167", "10.1162/qss_a_00167"),
            ("http://dx.doi.org/10.10/a", "10.10/a"),
            ("doi.org/10.5/b", "10.5/b"),
            ("doi:https://doi.org/10.7/c", "10.7/c"),
            ("  10.1234/trailing.  ", "10.1234/trailing"),
            ("10.1234/trail;)", "10.1234/trail"),
            ("10.1234/pare),", "10.1234/pare"),
            ("10.1.1.100/suffix", "10.1.1.100/suffix"),
            ("10.1000/a/b(c)d", "10.1000/a/b(c)d"),
        ];
        for (raw, want) in cases {
            assert_eq!(normalize_doi(raw).unwrap(), want, "raw {raw:?}");
        }
    }

    #[test]
    fn doi_rejects() {
        for raw in [
            "",
            "   ",
            "11.1000/x",
            "10./x",
            "10.abc/x",
            "10.1000",
            "10.1000/",
            "10.10 00/x",
            "doi:",
            "10.1000/with space",
        ] {
            assert!(normalize_doi(raw).is_err(), "should reject {raw:?}");
        }
    }

    #[test]
    fn isbn_goldens() {
        let cases = [
            ("978-0-306-40615-7", "9780306406157"),
            ("9780306406157", "9780306406157"),
            ("0-306-40615-2", "9780306406157"), // ISBN-10 of the same book
            ("0306406152", "9780306406157"),
            ("ISBN 0-306-40615-2", "9780306406157"),
            ("isbn: 978 0 306 40615 7", "9780306406157"),
            ("ISBN-13: 978-0-306-40615-7", "9780306406157"),
            ("0-8044-2957-X", "9780804429573"), // X check digit
            ("080442957x", "9780804429573"),
            ("978‐0‐306‐40615‐7", "9780306406157"), // U+2010 hyphens
        ];
        for (raw, want) in cases {
            assert_eq!(normalize_isbn(raw).unwrap(), want, "raw {raw:?}");
        }
    }

    #[test]
    fn isbn_rejects() {
        for raw in [
            "",
            "978-0-306-40615-8",  // bad ISBN-13 check digit
            "0-306-40615-3",      // bad ISBN-10 check digit
            "12345",              // wrong length
            "97803064061570",     // 14 digits
            "030640615X",         // X where the checksum says 2
            "9780306X06157",      // X inside an ISBN-13
            "0-306-4061X-2",      // X not in final position
            "not-an-isbn",
        ] {
            assert!(normalize_isbn(raw).is_err(), "should reject {raw:?}");
        }
    }

    #[test]
    fn vocabulary_gates_schemes() {
        let vocab = IdentifierVocabulary::default();
        assert_eq!(vocab.schemes().len(), 20);
        let pair = normalize_identifier("PMID", " 12345 ", &vocab).unwrap();
        assert_eq!((pair.scheme.as_str(), pair.value.as_str()), ("pmid", "12345"));
        assert!(matches!(
            normalize_identifier("wikidata", "Q1", &vocab),
            Err(IdentifierError::UnknownScheme(_))
        ));
        assert!(matches!(
            normalize_identifier("pmid", "  ", &vocab),
            Err(IdentifierError::EmptyValue(_))
        ));
        assert!(matches!(
            normalize_identifier("pmid", "12\u{1F}34", &vocab),
            Err(IdentifierError::ControlCharacter(_))
        ));
    }

    #[test]
    fn generic_schemes_preserve_case() {
        let vocab = IdentifierVocabulary::default();
        let pair = normalize_identifier("bibcode", "2020ApJ...890..148C", &vocab).unwrap();
        assert_eq!(pair.value, "2020ApJ...890..148C");
        let pair = normalize_identifier("arxiv", "2104.05461v2", &vocab).unwrap();
        assert_eq!(pair.value, "2104.05461v2");
    }

    #[test]
    fn key_is_order_invariant_and_deduplicated() {
        let vocab = IdentifierVocabulary::default();
        let a = normalize_identifier("doi", "10.1000/chapter", &vocab).unwrap();
        let b = normalize_identifier("isbn", "978-0-306-40615-7", &vocab).unwrap();
        let k1 = pub_identity_key(&[a.clone(), b.clone()]).unwrap();
        let k2 = pub_identity_key(&[b.clone(), a.clone(), a.clone()]).unwrap();
        assert_eq!(k1, k2);
        assert_eq!(
            k1.as_str(),
            format!("doi:10.1000/chapter{}isbn:9780306406157", KEY_SEPARATOR)
        );
    }

    #[test]
    fn key_round_trips_through_pairs() {
        let vocab = IdentifierVocabulary::default();
        let pairs = vec![
            normalize_identifier("isbn", "978-0-306-40615-7", &vocab).unwrap(),
            normalize_identifier("doi", "10.1/x", &vocab).unwrap(),
            normalize_identifier("pmid", "99", &vocab).unwrap(),
        ];
        let key = pub_identity_key(&pairs).unwrap();
        let back: Vec<IdentifierPair> =
            IdentifierSetKey::from_key_string(key.as_str()).pairs().collect();
        let mut want = pairs.clone();
        want.sort();
        assert_eq!(back, want);
    }

    #[test]
    fn chapter_and_book_do_not_merge() {
        let vocab = IdentifierVocabulary::default();
        let isbn = normalize_identifier("isbn", "9780306406157", &vocab).unwrap();
        let doi = normalize_identifier("doi", "10.1000/chap.3", &vocab).unwrap();
        let chapter = pub_identity_key(&[doi, isbn.clone()]).unwrap();
        let book = pub_identity_key(&[isbn]).unwrap();
        assert_ne!(chapter, book);
    }

    #[test]
    fn empty_set_is_an_error() {
        assert!(matches!(
            pub_identity_key(&[]),
            Err(IdentifierError::EmptyIdentifierSet)
        ));
    }

    #[test]
    fn doi_value_with_colon_still_splits_on_first_colon() {
        let vocab = IdentifierVocabulary::default();
        let pair = normalize_identifier("doi", "10.1000/a:b:c", &vocab).unwrap();
        let key = pub_identity_key(&[pair.clone()]).unwrap();
        let back: Vec<_> = key.pairs().collect();
        assert_eq!(back, vec![pair]);
    }
}
