//! Canonicalization of the two external-resource vocabularies: URLs and
//! bibliographic identifiers. Both normalizers are total functions over
//! arbitrary input — they return typed errors, never panic.

pub mod ident;
pub mod url;

pub use ident::{
    normalize_doi, normalize_identifier, normalize_isbn, pub_identity_key, IdentifierError,
    IdentifierPair, IdentifierSetKey, IdentifierVocabulary, DEFAULT_SCHEMES, KEY_SEPARATOR,
};
pub use url::{
    domain_of, normalize_url, CanonicalUrl, DomainRule, RuleFileError, UrlError, UrlErrorReason,
    UrlRules,
};
