//! Title normalization and namespace-qualified title keys.
//!
//! Link targets and pageview rows spell titles with spaces or
//! underscores interchangeably and with arbitrary case on the first
//! letter; page rows store the canonical form (underscores, first
//! letter capitalized). [`normalize_title`] maps any spelling to the
//! canonical one so joins on title agree.

use std::collections::BTreeMap;

/// Canonical database form of a title: spaces become underscores and
/// the first character is uppercased.
///
/// Only single-character uppercase mappings are applied; characters
/// whose uppercase expands to multiple code points (e.g. `ß`) are left
/// alone, matching how page titles are stored.
pub fn normalize_title(raw: &str) -> String {
    let underscored = raw.replace(' ', "_");
    let mut chars = underscored.chars();
    match chars.next() {
        None => String::new(),
        Some(first) => {
            let mut up = first.to_uppercase();
            let mapped = match (up.next(), up.next()) {
                (Some(c), None) => c,
                _ => first,
            };
            let mut out = String::with_capacity(underscored.len());
            out.push(mapped);
            out.push_str(chars.as_str());
            out
        }
    }
}

/// Namespace number to canonical prefix, used to build the qualified
/// title keys that pageview rows carry (`Talk:Foo`, `Category:Bar`).
#[derive(Debug, Clone)]
pub struct NamespaceNames {
    names: BTreeMap<i32, String>,
}

impl Default for NamespaceNames {
    fn default() -> Self {
        let pairs: [(i32, &str); 16] = [
            (0, ""),
            (1, "Talk"),
            (2, "User"),
            (3, "User talk"),
            (4, "Wikipedia"),
            (5, "Wikipedia talk"),
            (6, "File"),
            (7, "File talk"),
            (8, "MediaWiki"),
            (9, "MediaWiki talk"),
            (10, "Template"),
            (11, "Template talk"),
            (12, "Help"),
            (13, "Help talk"),
            (14, "Category"),
            (15, "Category talk"),
        ];
        let names = pairs
            .iter()
            .map(|(ns, name)| (*ns, name.to_string()))
            .collect();
        NamespaceNames { names }
    }
}

impl NamespaceNames {
    pub fn from_map(names: BTreeMap<i32, String>) -> Self {
        let mut merged = NamespaceNames::default().names;
        merged.extend(names);
        NamespaceNames { names: merged }
    }

    pub fn prefix(&self, ns: i32) -> Option<&str> {
        self.names.get(&ns).map(|s| s.as_str())
    }

    /// Qualified key for a page as pageview files spell it:
    /// `Prefix:Title` with underscores, or the bare title for the main
    /// namespace. Unknown namespaces fall back to a numeric prefix so
    /// the key stays unique (such rows simply never match view rows).
    pub fn title_key(&self, ns: i32, canonical_title: &str) -> String {
        match self.prefix(ns) {
            Some("") => canonical_title.to_string(),
            Some(name) => format!("{}:{}", name.replace(' ', "_"), canonical_title),
            None => format!("NS{ns}:{canonical_title}"),
        }
    }
}
