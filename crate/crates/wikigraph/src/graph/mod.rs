//! Construction and verification of the nine-file relational graph.
//!
//! Entity tables: `page.tsv`, `category.tsv`, `page_property.tsv`,
//! `pub.tsv`, `url.tsv`. Edge tables: `page_category.tsv`,
//! `page_link.tsv`, `page_pub.tsv`, `page_url.tsv`.
//!
//! All files follow the [`crate::tsv`] conventions and are written in a
//! deterministic order (entity tables by id, edge tables by source id
//! then target id), so identical inputs produce byte-identical trees.
//!
//! Builders stream through [`crate::extsort`] and reconcile every drop:
//! for each edge family, `rows_in = edges_out + dropped + deduplicated`
//! holds exactly over the reported counters.

pub mod categories;
pub mod integrity;
pub mod links;
pub mod pages;
pub mod records;
pub mod resources;
pub mod title;

use std::collections::BTreeMap;
use std::fmt;
use std::io;

use thiserror::Error;

pub use records::PageRecord;

pub const PAGE_FILE: &str = "page.tsv";
pub const CATEGORY_FILE: &str = "category.tsv";
pub const PAGE_PROPERTY_FILE: &str = "page_property.tsv";
pub const PUB_FILE: &str = "pub.tsv";
pub const URL_FILE: &str = "url.tsv";
pub const PAGE_CATEGORY_FILE: &str = "page_category.tsv";
pub const PAGE_LINK_FILE: &str = "page_link.tsv";
pub const PAGE_PUB_FILE: &str = "page_pub.tsv";
pub const PAGE_URL_FILE: &str = "page_url.tsv";

/// The nine graph files, in documentation order.
pub const GRAPH_FILES: [&str; 9] = [
    PAGE_FILE,
    CATEGORY_FILE,
    PAGE_PROPERTY_FILE,
    PUB_FILE,
    URL_FILE,
    PAGE_CATEGORY_FILE,
    PAGE_LINK_FILE,
    PAGE_PUB_FILE,
    PAGE_URL_FILE,
];

pub const PAGE_HEADER: [&str; 12] = [
    "page_id",
    "namespace",
    "title",
    "is_redirect",
    "is_new",
    "restrictions",
    "touched",
    "length",
    "created",
    "edits",
    "editors",
    "views",
];

pub const CATEGORY_HEADER: [&str; 6] =
    ["category_id", "title", "pages", "subcats", "files", "hidden"];

pub const PAGE_PROPERTY_HEADER: [&str; 3] = ["page_id", "name", "value"];

/// `pub.tsv` starts with these two columns, followed by one column per
/// configured identifier scheme.
pub const PUB_HEADER_PREFIX: [&str; 2] = ["pub_id", "key"];

pub const URL_HEADER: [&str; 3] = ["url_id", "url", "domain"];

pub const PAGE_CATEGORY_HEADER: [&str; 3] = ["page_id", "category_id", "link_type"];

pub const PAGE_LINK_HEADER: [&str; 2] = ["from_page_id", "to_page_id"];

pub const PAGE_PUB_HEADER: [&str; 2] = ["page_id", "pub_id"];

pub const PAGE_URL_HEADER: [&str; 3] = ["page_id", "url_id", "in_reference"];

#[derive(Debug, Error)]
pub enum GraphError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Sql(#[from] crate::sql::SqlError),
    #[error(transparent)]
    Row(#[from] crate::tables::RowError),
    #[error(transparent)]
    Xml(#[from] crate::revisions::XmlError),
    #[error(transparent)]
    Tsv(#[from] crate::tsv::TsvError),
    #[error(transparent)]
    Citations(#[from] crate::citations::CitationError),
    #[error(transparent)]
    PageViews(#[from] crate::pageviews::PageViewError),
    #[error("duplicate page_id {0} in page table")]
    DuplicatePageId(u64),
    #[error("duplicate category_id {0} in category table")]
    DuplicateCategoryId(u64),
    #[error("{file}: {detail}")]
    BadGraphFile { file: String, detail: String },
}

/// Named counters for the run report. Everything a builder drops,
/// deduplicates or flags lands here; the report renders `key=value`
/// lines sorted by key, so output is deterministic.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Counters(BTreeMap<String, u64>);

impl Counters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: &str, n: u64) {
        *self.0.entry(key.to_string()).or_insert(0) += n;
    }

    pub fn bump(&mut self, key: &str) {
        self.add(key, 1);
    }

    pub fn set(&mut self, key: &str, n: u64) {
        self.0.insert(key.to_string(), n);
    }

    pub fn get(&self, key: &str) -> u64 {
        self.0.get(key).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn merge(&mut self, other: &Counters) {
        for (k, v) in other.iter() {
            self.add(k, v);
        }
    }
}

impl fmt::Display for Counters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.iter() {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Shared knobs for the external-memory passes.
#[derive(Debug, Clone)]
pub struct BuildLimits {
    /// Budget per concurrent sort buffer, in bytes.
    pub sort_budget_bytes: usize,
    /// Directory for spill files; must exist.
    pub tmp_dir: std::path::PathBuf,
}

impl BuildLimits {
    pub fn new(sort_budget_bytes: usize, tmp_dir: &std::path::Path) -> Self {
        BuildLimits {
            sort_budget_bytes,
            tmp_dir: tmp_dir.to_path_buf(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counters_render_sorted_key_value_lines() {
        let mut c = Counters::new();
        c.add("zebra", 2);
        c.add("alpha", 1);
        c.bump("zebra");
        c.set("mid", 7);
        assert_eq!(c.to_string(), "alpha=1\nmid=7\nzebra=3\n");
        assert_eq!(c.get("zebra"), 3);
        assert_eq!(c.get("missing"), 0);
    }

    #[test]
    fn counters_merge_adds() {
        let mut a = Counters::new();
        a.add("x", 1);
        let mut b = Counters::new();
        b.add("x", 2);
        b.add("y", 5);
        a.merge(&b);
        assert_eq!((a.get("x"), a.get("y")), (3, 5));
    }
}
