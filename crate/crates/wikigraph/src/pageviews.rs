//! Line-oriented reader for per-page view-count files.
//!
//! Published pageview datasets vary in layout (space- or tab-delimited,
//! with or without a page-id column, date in a column or in the file
//! name), so the reader takes a column map instead of assuming one. Rows
//! are filtered to one wiki code, a closed date window and an optional
//! agent include-set; malformed lines are counted and skipped, and only
//! become fatal when their share exceeds a tolerance (default 1%).

use std::collections::{HashMap, HashSet};
use std::io::{self, BufRead};
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PageViewError {
    #[error("I/O error while reading pageviews: {0}")]
    Io(#[from] io::Error),
    #[error(
        "too many malformed pageview lines: {malformed} of {total} \
         ({percent:.2}%) exceeds the {tolerance_percent}% tolerance"
    )]
    TooManyMalformed {
        malformed: u64,
        total: u64,
        percent: f64,
        tolerance_percent: f64,
    },
    #[error("cannot derive a date from file name `{0}`: no YYYYMMDD run found")]
    NoDateInFilename(String),
}

/// Where the per-row date comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DateSource {
    /// A column holding a date in the given chrono format (e.g. `%Y%m%d`).
    Column { index: usize, format: String },
    /// All rows of the file share one date (daily files).
    Fixed(NaiveDate),
}

/// Positions of the fields we read. Extra trailing columns are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct PageViewColumnMap {
    pub delimiter: char,
    pub wiki: usize,
    pub title: usize,
    /// Some datasets carry the page id; rows with `null`/`0` fall back to
    /// title matching.
    pub page_id: Option<usize>,
    pub agent: Option<usize>,
    pub count: usize,
    pub date: DateSource,
}

impl Default for PageViewColumnMap {
    /// Layout of the "complete" daily files:
    /// `wiki title page_id agent daily_total hourly…`, date in the name.
    fn default() -> Self {
        PageViewColumnMap {
            delimiter: '\t',
            wiki: 0,
            title: 1,
            page_id: Some(2),
            agent: Some(3),
            count: 4,
            date: DateSource::Fixed(NaiveDate::MIN),
        }
    }
}

/// Row filter: one wiki, a closed date window, an agent include-set
/// (empty set means include all).
#[derive(Debug, Clone)]
pub struct PageViewFilter {
    pub wiki_code: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub agents: HashSet<String>,
    pub malformed_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageViewRecord {
    pub page_id: Option<u64>,
    pub title: String,
    pub date: NaiveDate,
    pub views: u64,
}

#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct PageViewStats {
    pub lines: u64,
    pub malformed: u64,
    /// Lines dropped by the wiki/date/agent filter (well-formed).
    pub filtered: u64,
    pub kept: u64,
}

/// Derive the file's fixed date from an 8-digit run in its name,
/// e.g. `pageviews-20210401-user.bz2` → 2021-04-01.
pub fn date_from_filename(path: &Path) -> Result<NaiveDate, PageViewError> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let bytes = name.as_bytes();
    let mut run_start = None;
    let mut run_len = 0;
    for (i, b) in bytes.iter().enumerate() {
        if b.is_ascii_digit() {
            if run_len == 0 {
                run_start = Some(i);
            }
            run_len += 1;
        } else {
            if run_len == 8 {
                break;
            }
            run_len = 0;
            run_start = None;
        }
    }
    if run_len == 8 {
        let s = &name[run_start.unwrap()..run_start.unwrap() + 8];
        if let Ok(d) = NaiveDate::parse_from_str(s, "%Y%m%d") {
            return Ok(d);
        }
    }
    Err(PageViewError::NoDateInFilename(name))
}

/// Iterator over the kept records of one file. Malformed lines are counted
/// and skipped; after the last line the tolerance is enforced, surfacing
/// one final error if exceeded.
pub struct PageViewParser<R: BufRead> {
    input: R,
    map: PageViewColumnMap,
    filter: PageViewFilter,
    stats: PageViewStats,
    line: String,
    done: bool,
}

pub fn parse_pageviews<R: BufRead>(
    input: R,
    map: PageViewColumnMap,
    filter: PageViewFilter,
) -> PageViewParser<R> {
    PageViewParser {
        input,
        map,
        filter,
        stats: PageViewStats::default(),
        line: String::new(),
        done: false,
    }
}

impl<R: BufRead> PageViewParser<R> {
    pub fn stats(&self) -> PageViewStats {
        self.stats
    }

    fn parse_line(&mut self) -> Option<PageViewRecord> {
        let line = self.line.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            return None; // blank lines are tolerated silently
        }
        self.stats.lines += 1;
        let fields: Vec<&str> = line.split(self.map.delimiter).collect();
        let needed = self.required_width();
        if fields.len() < needed {
            self.stats.malformed += 1;
            return None;
        }
        let views = match fields[self.map.count].parse::<u64>() {
            Ok(v) => v,
            Err(_) => {
                self.stats.malformed += 1;
                return None;
            }
        };
        let date = match &self.map.date {
            DateSource::Fixed(d) => *d,
            DateSource::Column { index, format } => {
                match NaiveDate::parse_from_str(fields[*index], format) {
                    Ok(d) => d,
                    Err(_) => {
                        self.stats.malformed += 1;
                        return None;
                    }
                }
            }
        };
        let page_id = match self.map.page_id {
            None => None,
            Some(i) => match fields[i] {
                "" | "null" | "0" => None,
                s => match s.parse::<u64>() {
                    Ok(id) => Some(id),
                    Err(_) => {
                        self.stats.malformed += 1;
                        return None;
                    }
                },
            },
        };
        // Filters apply only to well-formed rows.
        if fields[self.map.wiki] != self.filter.wiki_code
            || date < self.filter.start
            || date > self.filter.end
        {
            self.stats.filtered += 1;
            return None;
        }
        if let Some(i) = self.map.agent {
            if !self.filter.agents.is_empty() && !self.filter.agents.contains(fields[i]) {
                self.stats.filtered += 1;
                return None;
            }
        }
        self.stats.kept += 1;
        Some(PageViewRecord {
            page_id,
            title: fields[self.map.title].to_string(),
            date,
            views,
        })
    }

    fn required_width(&self) -> usize {
        let mut w = self.map.wiki.max(self.map.title).max(self.map.count);
        if let Some(i) = self.map.page_id {
            w = w.max(i);
        }
        if let Some(i) = self.map.agent {
            w = w.max(i);
        }
        if let DateSource::Column { index, .. } = self.map.date {
            w = w.max(index);
        }
        w + 1
    }

    fn tolerance_error(&self) -> Option<PageViewError> {
        let total = self.stats.lines;
        if total == 0 || self.stats.malformed == 0 {
            return None;
        }
        let ratio = self.stats.malformed as f64 / total as f64;
        if ratio > self.filter.malformed_tolerance {
            Some(PageViewError::TooManyMalformed {
                malformed: self.stats.malformed,
                total,
                percent: ratio * 100.0,
                tolerance_percent: self.filter.malformed_tolerance * 100.0,
            })
        } else {
            None
        }
    }
}

impl<R: BufRead> Iterator for PageViewParser<R> {
    type Item = Result<PageViewRecord, PageViewError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.line.clear();
            match self.input.read_line(&mut self.line) {
                Err(e) => {
                    self.done = true;
                    return Some(Err(e.into()));
                }
                Ok(0) => {
                    self.done = true;
                    return self.tolerance_error().map(Err);
                }
                Ok(_) => {
                    if let Some(rec) = self.parse_line() {
                        return Some(Ok(rec));
                    }
                }
            }
        }
    }
}

/// View counts accumulated per page, split by how the page was identified.
/// A page's total is the sum of its id-keyed and title-keyed buckets;
/// pages that never appear total zero.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct ViewTotals {
    pub by_id: HashMap<u64, u64>,
    pub by_title: HashMap<String, u64>,
}

impl ViewTotals {
    pub fn add(&mut self, rec: &PageViewRecord) {
        match rec.page_id {
            Some(id) => *self.by_id.entry(id).or_insert(0) += rec.views,
            None => *self.by_title.entry(rec.title.clone()).or_insert(0) += rec.views,
        }
    }

    pub fn merge(&mut self, other: ViewTotals) {
        for (id, v) in other.by_id {
            *self.by_id.entry(id).or_insert(0) += v;
        }
        for (t, v) in other.by_title {
            *self.by_title.entry(t).or_insert(0) += v;
        }
    }

    /// Total views for a page identified by id and by its prefixed title
    /// key (e.g. `Talk:Main_Page`).
    pub fn total_for(&self, page_id: u64, title_key: &str) -> u64 {
        self.by_id.get(&page_id).copied().unwrap_or(0)
            + self.by_title.get(title_key).copied().unwrap_or(0)
    }
}
