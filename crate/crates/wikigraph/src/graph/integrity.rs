//! Referential-integrity and format verification of a built graph
//! directory.
//!
//! Violations are counted and sampled, never fatal: a verify pass
//! over a damaged tree reports each broken row instead of stopping at
//! the first. Only a missing file or unreadable I/O is a hard error.
//!
//! Memory note: the page/category/pub/url id sets are held in RAM for
//! the foreign-key checks; everything else streams. Uniqueness of
//! edge rows and of url/pub keys falls out of strict-ascending-order
//! checks, which also pin the files' determinism guarantee.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::graph::records::parse_time;
use crate::graph::{
    GraphError, CATEGORY_FILE, CATEGORY_HEADER, GRAPH_FILES, PAGE_CATEGORY_FILE,
    PAGE_CATEGORY_HEADER, PAGE_FILE, PAGE_HEADER, PAGE_LINK_FILE, PAGE_LINK_HEADER,
    PAGE_PROPERTY_FILE, PAGE_PROPERTY_HEADER, PAGE_PUB_FILE, PAGE_PUB_HEADER, PAGE_URL_FILE,
    PAGE_URL_HEADER, PUB_FILE, PUB_HEADER_PREFIX, URL_FILE, URL_HEADER,
};
use crate::tsv::{TsvError, TsvReader};

const MAX_SAMPLES: usize = 20;

#[derive(Debug)]
pub struct TableCheck {
    pub file: &'static str,
    pub rows: u64,
    pub violations: u64,
    /// First few violations, as `line N: reason`.
    pub samples: Vec<String>,
}

#[derive(Debug)]
pub struct IntegrityReport {
    pub tables: Vec<TableCheck>,
}

impl IntegrityReport {
    pub fn total_violations(&self) -> u64 {
        self.tables.iter().map(|t| t.violations).sum()
    }

    pub fn is_clean(&self) -> bool {
        self.total_violations() == 0
    }

    pub fn total_rows(&self) -> u64 {
        self.tables.iter().map(|t| t.rows).sum()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            let _ = writeln!(out, "{}: {} rows, {} violations", t.file, t.rows, t.violations);
            for s in &t.samples {
                let _ = writeln!(out, "  {s}");
            }
            if t.violations as usize > t.samples.len() {
                let _ = writeln!(
                    out,
                    "  ... and {} more",
                    t.violations as usize - t.samples.len()
                );
            }
        }
        let _ = writeln!(out, "total violations: {}", self.total_violations());
        out
    }
}

struct Checker {
    file: &'static str,
    rows: u64,
    violations: u64,
    samples: Vec<String>,
    line: u64,
}

impl Checker {
    fn new(file: &'static str) -> Self {
        Checker {
            file,
            rows: 0,
            violations: 0,
            samples: Vec::new(),
            line: 1, // header
        }
    }

    fn flag(&mut self, msg: String) {
        self.violations += 1;
        if self.samples.len() < MAX_SAMPLES {
            self.samples.push(format!("line {}: {}", self.line, msg));
        }
    }

    fn finish(self) -> TableCheck {
        TableCheck {
            file: self.file,
            rows: self.rows,
            violations: self.violations,
            samples: self.samples,
        }
    }
}

/// Read rows of `file`, feeding each to `check`. Field-count errors are
/// violations, not aborts.
fn scan_table(
    dir: &Path,
    file: &'static str,
    header: &[&str],
    mut check: impl FnMut(&mut Checker, &[String]),
) -> Result<TableCheck, GraphError> {
    let path = dir.join(file);
    if !path.exists() {
        return Err(GraphError::BadGraphFile {
            file: file.to_string(),
            detail: "missing file".to_string(),
        });
    }
    let mut checker = Checker::new(file);
    let mut reader = TsvReader::open(&path)?;
    match reader.expect_header(header) {
        Ok(()) => {}
        Err(TsvError::HeaderMismatch { found, .. }) => {
            checker.flag(format!("bad header {found:?}"));
            return Ok(checker.finish());
        }
        Err(other) => return Err(other.into()),
    }
    loop {
        checker.line += 1;
        match reader.next_row() {
            Ok(None) => break,
            Ok(Some(fields)) => {
                checker.rows += 1;
                check(&mut checker, &fields);
            }
            Err(TsvError::FieldCount { expected, found, .. }) => {
                checker.rows += 1;
                checker.flag(format!("expected {expected} fields, found {found}"));
            }
            Err(other) => return Err(other.into()),
        }
    }
    Ok(checker.finish())
}

fn check_id(c: &mut Checker, field: &str, name: &str) -> Option<u64> {
    match field.parse::<u64>() {
        Ok(v) if v > 0 => Some(v),
        _ => {
            c.flag(format!("bad {name} `{field}`"));
            None
        }
    }
}

fn check_u64(c: &mut Checker, field: &str, name: &str) -> Option<u64> {
    match field.parse::<u64>() {
        Ok(v) => Some(v),
        Err(_) => {
            c.flag(format!("bad {name} `{field}`"));
            None
        }
    }
}

fn check_flag(c: &mut Checker, field: &str, name: &str) {
    if field != "0" && field != "1" {
        c.flag(format!("bad {name} `{field}` (want 0 or 1)"));
    }
}

fn check_time(c: &mut Checker, field: &str, name: &str) {
    if !field.is_empty() && parse_time(field).is_none() {
        c.flag(format!("bad {name} timestamp `{field}`"));
    }
}

/// Verify all nine files of a graph directory.
pub fn verify_graph(dir: &Path) -> Result<IntegrityReport, GraphError> {
    for file in GRAPH_FILES {
        if !dir.join(file).exists() {
            return Err(GraphError::BadGraphFile {
                file: file.to_string(),
                detail: "missing file".to_string(),
            });
        }
    }

    let mut tables = Vec::new();

    // Entity tables first: their id sets back the edge checks.
    let mut page_ids: HashSet<u64> = HashSet::new();
    {
        let mut last_id = 0u64;
        let check = scan_table(dir, PAGE_FILE, &PAGE_HEADER, |c, f| {
            if let Some(id) = check_id(c, &f[0], "page_id") {
                if id <= last_id {
                    c.flag(format!("page_id {id} not ascending"));
                } else {
                    page_ids.insert(id);
                }
                last_id = id;
            }
            if f[1].parse::<i32>().is_err() {
                c.flag(format!("bad namespace `{}`", f[1]));
            }
            check_flag(c, &f[3], "is_redirect");
            check_flag(c, &f[4], "is_new");
            check_time(c, &f[6], "touched");
            check_u64(c, &f[7], "length");
            check_time(c, &f[8], "created");
            let edits = check_u64(c, &f[9], "edits");
            let editors = check_u64(c, &f[10], "editors");
            check_u64(c, &f[11], "views");
            if let (Some(ed), Some(er)) = (edits, editors) {
                if er > ed {
                    c.flag(format!("editors {er} exceeds edits {ed}"));
                }
                if (ed > 0) != (er > 0) {
                    c.flag(format!("edits {ed} and editors {er} disagree on history"));
                }
                if ed > 0 && f[8].is_empty() {
                    c.flag("page has edits but no created timestamp".to_string());
                }
            }
        })?;
        tables.push(check);
    }

    let mut category_ids: HashSet<u64> = HashSet::new();
    {
        let mut last_id = 0u64;
        let check = scan_table(dir, CATEGORY_FILE, &CATEGORY_HEADER, |c, f| {
            if let Some(id) = check_id(c, &f[0], "category_id") {
                if id <= last_id {
                    c.flag(format!("category_id {id} not ascending"));
                } else {
                    category_ids.insert(id);
                }
                last_id = id;
            }
            check_u64(c, &f[2], "pages");
            check_u64(c, &f[3], "subcats");
            check_u64(c, &f[4], "files");
            check_flag(c, &f[5], "hidden");
        })?;
        tables.push(check);
    }

    let mut pub_ids: HashSet<u64> = HashSet::new();
    {
        // Header is prefix + schemes; verify the prefix, accept any schemes.
        let path = dir.join(PUB_FILE);
        let mut checker = Checker::new(PUB_FILE);
        let mut reader = TsvReader::open(&path)?;
        let header = reader.header().to_vec();
        if header.len() < PUB_HEADER_PREFIX.len()
            || header[0] != PUB_HEADER_PREFIX[0]
            || header[1] != PUB_HEADER_PREFIX[1]
        {
            checker.flag(format!("bad header {header:?}"));
            tables.push(checker.finish());
        } else {
            let mut last_id = 0u64;
            let mut last_key = String::new();
            loop {
                checker.line += 1;
                match reader.next_row() {
                    Ok(None) => break,
                    Ok(Some(f)) => {
                        checker.rows += 1;
                        if let Some(id) = check_id(&mut checker, &f[0], "pub_id") {
                            if id != last_id + 1 {
                                checker.flag(format!(
                                    "pub_id {id} breaks dense ascending order"
                                ));
                            } else {
                                pub_ids.insert(id);
                            }
                            last_id = id;
                        }
                        if f[1].is_empty() {
                            checker.flag("empty key".to_string());
                        } else if f[1] <= last_key && checker.rows > 1 {
                            checker.flag(format!("key `{}` not ascending", f[1]));
                        }
                        last_key = f[1].clone();
                        if f[2..].iter().all(|v| v.is_empty()) {
                            checker.flag("no scheme column filled".to_string());
                        }
                    }
                    Err(TsvError::FieldCount { expected, found, .. }) => {
                        checker.rows += 1;
                        checker.flag(format!("expected {expected} fields, found {found}"));
                    }
                    Err(other) => return Err(other.into()),
                }
            }
            tables.push(checker.finish());
        }
    }

    let mut url_ids: HashSet<u64> = HashSet::new();
    {
        let mut last_id = 0u64;
        let mut last_url = String::new();
        let check = scan_table(dir, URL_FILE, &URL_HEADER, |c, f| {
            if let Some(id) = check_id(c, &f[0], "url_id") {
                if id != last_id + 1 {
                    c.flag(format!("url_id {id} breaks dense ascending order"));
                } else {
                    url_ids.insert(id);
                }
                last_id = id;
            }
            if f[1].is_empty() {
                c.flag("empty url".to_string());
            } else if c.rows > 1 && f[1] <= last_url {
                c.flag(format!("url `{}` not ascending", f[1]));
            }
            last_url = f[1].clone();
            if f[2].is_empty() {
                c.flag("empty domain".to_string());
            }
        })?;
        tables.push(check);
    }

    // Edge and attribute tables.
    {
        let mut last: Option<(u64, String)> = None;
        let check = scan_table(dir, PAGE_PROPERTY_FILE, &PAGE_PROPERTY_HEADER, |c, f| {
            if let Some(page) = check_id(c, &f[0], "page_id") {
                if !page_ids.contains(&page) {
                    c.flag(format!("page_id {page} not in page table"));
                }
                let key = (page, f[1].clone());
                if let Some(prev) = &last {
                    if *prev >= key {
                        c.flag(format!("(page_id, name) not ascending at {page}/{}", f[1]));
                    }
                }
                last = Some(key);
            }
        })?;
        tables.push(check);
    }

    {
        let mut last: Option<(u64, u64, String)> = None;
        let check = scan_table(dir, PAGE_CATEGORY_FILE, &PAGE_CATEGORY_HEADER, |c, f| {
            let page = check_id(c, &f[0], "page_id");
            let cat = check_id(c, &f[1], "category_id");
            if !matches!(f[2].as_str(), "page" | "subcat" | "file") {
                c.flag(format!("bad link_type `{}`", f[2]));
            }
            if let (Some(p), Some(k)) = (page, cat) {
                if !page_ids.contains(&p) {
                    c.flag(format!("page_id {p} not in page table"));
                }
                if !category_ids.contains(&k) {
                    c.flag(format!("category_id {k} not in category table"));
                }
                let key = (p, k, f[2].clone());
                if let Some(prev) = &last {
                    if *prev >= key {
                        c.flag(format!("rows not ascending at {p}/{k}"));
                    }
                }
                last = Some(key);
            }
        })?;
        tables.push(check);
    }

    {
        let mut last: Option<(u64, u64)> = None;
        let check = scan_table(dir, PAGE_LINK_FILE, &PAGE_LINK_HEADER, |c, f| {
            let from = check_id(c, &f[0], "from_page_id");
            let to = check_id(c, &f[1], "to_page_id");
            if let (Some(a), Some(b)) = (from, to) {
                if !page_ids.contains(&a) {
                    c.flag(format!("from_page_id {a} not in page table"));
                }
                if !page_ids.contains(&b) {
                    c.flag(format!("to_page_id {b} not in page table"));
                }
                if let Some(prev) = last {
                    if prev >= (a, b) {
                        c.flag(format!("rows not ascending at {a}/{b}"));
                    }
                }
                last = Some((a, b));
            }
        })?;
        tables.push(check);
    }

    {
        let mut last: Option<(u64, u64)> = None;
        let check = scan_table(dir, PAGE_PUB_FILE, &PAGE_PUB_HEADER, |c, f| {
            let page = check_id(c, &f[0], "page_id");
            let pb = check_id(c, &f[1], "pub_id");
            if let (Some(p), Some(b)) = (page, pb) {
                if !page_ids.contains(&p) {
                    c.flag(format!("page_id {p} not in page table"));
                }
                if !pub_ids.contains(&b) {
                    c.flag(format!("pub_id {b} not in pub table"));
                }
                if let Some(prev) = last {
                    if prev >= (p, b) {
                        c.flag(format!("rows not ascending at {p}/{b}"));
                    }
                }
                last = Some((p, b));
            }
        })?;
        tables.push(check);
    }

    {
        let mut last: Option<(u64, u64)> = None;
        let check = scan_table(dir, PAGE_URL_FILE, &PAGE_URL_HEADER, |c, f| {
            let page = check_id(c, &f[0], "page_id");
            let url = check_id(c, &f[1], "url_id");
            check_flag(c, &f[2], "in_reference");
            if let (Some(p), Some(u)) = (page, url) {
                if !page_ids.contains(&p) {
                    c.flag(format!("page_id {p} not in page table"));
                }
                if !url_ids.contains(&u) {
                    c.flag(format!("url_id {u} not in url table"));
                }
                if let Some(prev) = last {
                    if prev >= (p, u) {
                        c.flag(format!("rows not ascending at {p}/{u}"));
                    }
                }
                last = Some((p, u));
            }
        })?;
        tables.push(check);
    }

    Ok(IntegrityReport { tables })
}
