//! Reader for the extracted-citations dataset: one row per reference found
//! in a page, with identifier and URL columns bound by a configurable
//! column map.
//!
//! The dataset is a delimited text file with a header row. The map names
//! the columns holding the source page id/title, optional resource type,
//! URLs (optionally multi-valued within one cell) and one column per
//! identifier scheme. All other columns ride along untouched in
//! `fields`. A row with neither identifiers nor URLs is still yielded —
//! it is a reference and counts as one even if nothing canonical can be
//! extracted from it.

use std::collections::BTreeMap;
use std::io::{self, BufRead};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CitationError {
    #[error("I/O error while reading citations: {0}")]
    Io(#[from] io::Error),
    #[error("citations file is empty (missing header row)")]
    MissingHeader,
    #[error("citations header lacks column `{0}`")]
    MissingColumn(String),
    #[error(
        "too many malformed citation rows: {malformed} of {total} \
         ({percent:.2}%) exceeds the {tolerance_percent}% tolerance"
    )]
    TooManyMalformed {
        malformed: u64,
        total: u64,
        percent: f64,
        tolerance_percent: f64,
    },
}

/// Column names (resolved against the header) for the fields we consume.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationColumnMap {
    pub delimiter: char,
    pub page_id: String,
    pub page_title: String,
    pub resource_type: Option<String>,
    /// Columns holding URLs; each cell may hold several separated by
    /// `url_separator`.
    pub urls: Vec<String>,
    pub url_separator: Option<char>,
    /// `(scheme, column)` pairs; scheme names are lower-cased on read.
    pub identifiers: Vec<(String, String)>,
    pub malformed_tolerance: f64,
}

impl Default for CitationColumnMap {
    fn default() -> Self {
        CitationColumnMap {
            delimiter: '\t',
            page_id: "page_id".into(),
            page_title: "page_title".into(),
            resource_type: Some("type_of_citation".into()),
            urls: vec!["URL".into()],
            url_separator: None,
            identifiers: [
                ("doi", "ID_list.DOI"),
                ("isbn", "ID_list.ISBN"),
                ("pmid", "ID_list.PMID"),
                ("pmc", "ID_list.PMC"),
                ("arxiv", "ID_list.ARXIV"),
                ("bibcode", "ID_list.BIBCODE"),
                ("issn", "ID_list.ISSN"),
                ("oclc", "ID_list.OCLC"),
                ("jstor", "ID_list.JSTOR"),
                ("mr", "ID_list.MR"),
                ("zbl", "ID_list.ZBL"),
                ("ssrn", "ID_list.SSRN"),
                ("hdl", "ID_list.HDL"),
                ("lccn", "ID_list.LCCN"),
                ("olid", "ID_list.OLID"),
                ("osti", "ID_list.OSTI"),
                ("rfc", "ID_list.RFC"),
                ("s2cid", "ID_list.S2CID"),
                ("citeseerx", "ID_list.CITESEERX"),
                ("asin", "ID_list.ASIN"),
            ]
            .iter()
            .map(|&(s, c)| (s.to_string(), c.to_string()))
            .collect(),
            malformed_tolerance: 0.01,
        }
    }
}

/// One reference as found in a page, before any normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationRecord {
    pub source_page_id: u64,
    pub source_page_title: String,
    pub resource_type: String,
    /// `(scheme, raw value)`; scheme is lower-case, value untouched.
    pub identifiers: Vec<(String, String)>,
    pub urls: Vec<String>,
    /// Unmapped columns, passed through by header name.
    pub fields: BTreeMap<String, String>,
}

#[derive(Debug, Default, Clone, Copy, PartialEq)]
pub struct CitationStats {
    pub rows: u64,
    pub malformed: u64,
    pub kept: u64,
}

struct ResolvedMap {
    page_id: usize,
    page_title: usize,
    resource_type: Option<usize>,
    urls: Vec<usize>,
    identifiers: Vec<(String, usize)>,
    /// (header name, index) of every column not claimed above.
    passthrough: Vec<(String, usize)>,
    width: usize,
}

pub struct CitationParser<R: BufRead> {
    input: R,
    delimiter: char,
    url_separator: Option<char>,
    tolerance: f64,
    map: ResolvedMap,
    stats: CitationStats,
    line: String,
    done: bool,
}

pub fn parse_citations<R: BufRead>(
    mut input: R,
    map: &CitationColumnMap,
) -> Result<CitationParser<R>, CitationError> {
    let mut header = String::new();
    if input.read_line(&mut header)? == 0 {
        return Err(CitationError::MissingHeader);
    }
    let names: Vec<&str> = header
        .trim_end_matches(['\n', '\r'])
        .split(map.delimiter)
        .collect();
    let find = |name: &str| -> Result<usize, CitationError> {
        names
            .iter()
            .position(|n| *n == name)
            .ok_or_else(|| CitationError::MissingColumn(name.to_string()))
    };
    let page_id = find(&map.page_id)?;
    let page_title = find(&map.page_title)?;
    let resource_type = map.resource_type.as_deref().map(find).transpose()?;
    let urls = map
        .urls
        .iter()
        .map(|n| find(n))
        .collect::<Result<Vec<_>, _>>()?;
    let identifiers = map
        .identifiers
        .iter()
        .map(|(scheme, col)| Ok((scheme.to_ascii_lowercase(), find(col)?)))
        .collect::<Result<Vec<_>, CitationError>>()?;
    let mut claimed = vec![false; names.len()];
    claimed[page_id] = true;
    claimed[page_title] = true;
    if let Some(i) = resource_type {
        claimed[i] = true;
    }
    for &i in &urls {
        claimed[i] = true;
    }
    for (_, i) in &identifiers {
        claimed[*i] = true;
    }
    let passthrough = names
        .iter()
        .enumerate()
        .filter(|(i, _)| !claimed[*i])
        .map(|(i, n)| (n.to_string(), i))
        .collect();
    Ok(CitationParser {
        input,
        delimiter: map.delimiter,
        url_separator: map.url_separator,
        tolerance: map.malformed_tolerance,
        map: ResolvedMap {
            page_id,
            page_title,
            resource_type,
            urls,
            identifiers,
            passthrough,
            width: names.len(),
        },
        stats: CitationStats::default(),
        line: String::new(),
        done: false,
    })
}

impl<R: BufRead> CitationParser<R> {
    pub fn stats(&self) -> CitationStats {
        self.stats
    }

    fn parse_line(&mut self) -> Option<CitationRecord> {
        let line = self.line.trim_end_matches(['\n', '\r']);
        if line.is_empty() {
            return None;
        }
        self.stats.rows += 1;
        let fields: Vec<&str> = line.split(self.delimiter).collect();
        if fields.len() != self.map.width {
            self.stats.malformed += 1;
            return None;
        }
        let source_page_id = match fields[self.map.page_id].parse::<u64>() {
            Ok(id) if id > 0 => id,
            _ => {
                self.stats.malformed += 1;
                return None;
            }
        };
        let mut identifiers = Vec::new();
        for (scheme, idx) in &self.map.identifiers {
            let v = fields[*idx].trim();
            if !v.is_empty() {
                identifiers.push((scheme.clone(), v.to_string()));
            }
        }
        let mut urls = Vec::new();
        for &idx in &self.map.urls {
            let cell = fields[idx];
            if cell.is_empty() {
                continue;
            }
            match self.url_separator {
                Some(sep) => urls.extend(
                    cell.split(sep)
                        .map(str::trim)
                        .filter(|u| !u.is_empty())
                        .map(String::from),
                ),
                None => urls.push(cell.to_string()),
            }
        }
        self.stats.kept += 1;
        Some(CitationRecord {
            source_page_id,
            source_page_title: fields[self.map.page_title].to_string(),
            resource_type: self
                .map
                .resource_type
                .map(|i| fields[i].to_string())
                .unwrap_or_default(),
            identifiers,
            urls,
            fields: self
                .map
                .passthrough
                .iter()
                .map(|(name, i)| (name.clone(), fields[*i].to_string()))
                .collect(),
        })
    }

    fn tolerance_error(&self) -> Option<CitationError> {
        let total = self.stats.rows;
        if total == 0 || self.stats.malformed == 0 {
            return None;
        }
        let ratio = self.stats.malformed as f64 / total as f64;
        if ratio > self.tolerance {
            Some(CitationError::TooManyMalformed {
                malformed: self.stats.malformed,
                total,
                percent: ratio * 100.0,
                tolerance_percent: self.tolerance * 100.0,
            })
        } else {
            None
        }
    }
}

impl<R: BufRead> Iterator for CitationParser<R> {
    type Item = Result<CitationRecord, CitationError>;

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
