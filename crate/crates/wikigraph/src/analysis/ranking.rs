//! Top-N article rankings with a title exclusion list.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::graph::title::normalize_title;

use super::AnalysisError;

#[derive(Debug, Clone, PartialEq)]
pub struct RankEntry {
    pub rank: usize,
    pub page_id: u64,
    pub title: String,
    pub value: f64,
}

/// One title per line; blank lines and `#` comments ignored. Titles
/// are canonicalized the same way link targets are — spaces become
/// underscores and only the first letter is case-folded — so
/// "main Page" matches "Main_Page".
pub fn load_exclusions(path: &Path) -> Result<HashSet<String>, AnalysisError> {
    let mut set = HashSet::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        set.insert(normalize_title(line));
    }
    Ok(set)
}

/// Highest `n` rows by value, ties broken by ascending page id so
/// the ranking is reproducible. Excluded titles are removed before
/// ranks are assigned.
pub fn rank_top_n(
    rows: &[(u64, String, f64)],
    n: usize,
    exclusions: &HashSet<String>,
) -> Vec<RankEntry> {
    let mut kept: Vec<&(u64, String, f64)> = rows
        .iter()
        .filter(|(_, title, _)| !exclusions.contains(&normalize_title(title)))
        .collect();
    kept.sort_by(|a, b| b.2.total_cmp(&a.2).then_with(|| a.0.cmp(&b.0)));
    kept.truncate(n);
    kept.into_iter()
        .enumerate()
        .map(|(i, (page_id, title, value))| RankEntry {
            rank: i + 1,
            page_id: *page_id,
            title: title.clone(),
            value: *value,
        })
        .collect()
}
