//! Per-article activity metrics computed from a built graph directory.
//!
//! Scope: articles are main-namespace, non-redirect pages. The link
//! metrics count only edges whose two endpoints are both in scope, so
//! the handshake identity Σ links = Σ linked holds exactly.
//!
//! Memory: one record per article plus one entry per talk page is held
//! in RAM; edge tables stream.

use std::collections::HashMap;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime};

use crate::graph::records::PageTableReader;
use crate::graph::{
    Counters, GraphError, PAGE_LINK_FILE, PAGE_LINK_HEADER, PAGE_PUB_FILE, PAGE_PUB_HEADER,
    PAGE_URL_FILE, PAGE_URL_HEADER,
};
use crate::tsv::{TsvReader, TsvWriter};

pub const METRICS_FILE: &str = "metrics.tsv";

/// Metric column order of `metrics.tsv` (after `page_id`).
pub const METRIC_NAMES: [&str; 12] = [
    "editors",
    "edits",
    "linked",
    "links",
    "age",
    "length",
    "talkers",
    "talks",
    "views",
    "references",
    "pub_referenced",
    "urls",
];

pub const METRICS_HEADER: [&str; 13] = [
    "page_id",
    "editors",
    "edits",
    "linked",
    "links",
    "age",
    "length",
    "talkers",
    "talks",
    "views",
    "references",
    "pub_referenced",
    "urls",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ArticleMetrics {
    pub page_id: u64,
    pub editors: u64,
    pub edits: u64,
    pub linked: u64,
    pub links: u64,
    /// Years since first revision, two decimals.
    pub age: f64,
    pub length: u64,
    pub talkers: u64,
    pub talks: u64,
    pub views: u64,
    pub references: u64,
    pub pub_referenced: u64,
    pub urls: u64,
}

impl ArticleMetrics {
    /// Metric value by name, as a float (for statistics).
    pub fn value(&self, metric: &str) -> Option<f64> {
        Some(match metric {
            "editors" => self.editors as f64,
            "edits" => self.edits as f64,
            "linked" => self.linked as f64,
            "links" => self.links as f64,
            "age" => self.age,
            "length" => self.length as f64,
            "talkers" => self.talkers as f64,
            "talks" => self.talks as f64,
            "views" => self.views as f64,
            "references" => self.references as f64,
            "pub_referenced" => self.pub_referenced as f64,
            "urls" => self.urls as f64,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct MetricsOptions {
    /// Reference date for the age metric (usually the dump date).
    pub as_of: NaiveDate,
    /// Fold `<title>/Archive…` talk pages into their base talk page.
    /// Editor counts are then summed, an upper bound on the union.
    pub fold_talk_archives: bool,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Age in years between the first revision and `as_of`: day count over
/// 365.25, rounded to two decimals. A creation after `as_of` counts
/// as zero.
pub fn compute_age(created: NaiveDateTime, as_of: NaiveDate) -> f64 {
    let days = (as_of - created.date()).num_days();
    if days < 0 {
        return 0.0;
    }
    round2(days as f64 / 365.25)
}

/// `references` maps page id -> number of reference entries in the
/// citations dataset (one per citation record).
pub fn compute_article_metrics(
    dir: &Path,
    references: &HashMap<u64, u64>,
    opts: &MetricsOptions,
    counters: &mut Counters,
) -> Result<Vec<ArticleMetrics>, GraphError> {
    let mut articles: Vec<ArticleMetrics> = Vec::new();
    let mut index: HashMap<u64, usize> = HashMap::new();
    let mut titles: Vec<String> = Vec::new();
    let mut talk: HashMap<String, (u64, u64)> = HashMap::new(); // title -> (edits, editors)

    let mut reader = PageTableReader::open(dir)?;
    while let Some(rec) = reader.next_record()? {
        match rec.namespace {
            0 if !rec.is_redirect => {
                let age = match rec.created {
                    Some(t) => {
                        if t.date() > opts.as_of {
                            counters.bump("metrics.created_after_as_of");
                        }
                        compute_age(t, opts.as_of)
                    }
                    None => {
                        counters.bump("metrics.articles_without_created");
                        0.0
                    }
                };
                index.insert(rec.page_id, articles.len());
                titles.push(rec.title);
                articles.push(ArticleMetrics {
                    page_id: rec.page_id,
                    editors: rec.editors,
                    edits: rec.edits,
                    linked: 0,
                    links: 0,
                    age,
                    length: rec.length,
                    talkers: 0,
                    talks: 0,
                    views: rec.views,
                    references: references.get(&rec.page_id).copied().unwrap_or(0),
                    pub_referenced: 0,
                    urls: 0,
                });
            }
            1 => {
                let mut title = rec.title;
                if opts.fold_talk_archives {
                    if let Some(pos) = title.find("/Archive") {
                        title.truncate(pos);
                        counters.bump("metrics.talk_archives_folded");
                    }
                }
                let entry = talk.entry(title).or_insert((0, 0));
                entry.0 += rec.edits;
                entry.1 += rec.editors;
            }
            _ => {}
        }
    }

    for (i, title) in titles.iter().enumerate() {
        if let Some(&(talks, talkers)) = talk.get(title) {
            articles[i].talks = talks;
            articles[i].talkers = talkers;
        }
    }

    // Link degrees over the in-scope subgraph.
    {
        let mut r = TsvReader::open_expecting(&dir.join(PAGE_LINK_FILE), &PAGE_LINK_HEADER)?;
        while let Some(row) = r.next_row()? {
            let parse = |s: &str| {
                s.parse::<u64>().map_err(|_| GraphError::BadGraphFile {
                    file: PAGE_LINK_FILE.to_string(),
                    detail: format!("bad page id `{s}`"),
                })
            };
            let from = parse(&row[0])?;
            let to = parse(&row[1])?;
            match (index.get(&from), index.get(&to)) {
                (Some(&f), Some(&t)) => {
                    articles[f].links += 1;
                    articles[t].linked += 1;
                }
                _ => counters.bump("metrics.links_outside_scope"),
            }
        }
    }

    {
        let mut r = TsvReader::open_expecting(&dir.join(PAGE_PUB_FILE), &PAGE_PUB_HEADER)?;
        while let Some(row) = r.next_row()? {
            if let Ok(page) = row[0].parse::<u64>() {
                if let Some(&i) = index.get(&page) {
                    articles[i].pub_referenced += 1;
                }
            }
        }
    }

    {
        let mut r = TsvReader::open_expecting(&dir.join(PAGE_URL_FILE), &PAGE_URL_HEADER)?;
        while let Some(row) = r.next_row()? {
            if let Ok(page) = row[0].parse::<u64>() {
                if let Some(&i) = index.get(&page) {
                    articles[i].urls += 1;
                }
            }
        }
    }

    let sum_links: u64 = articles.iter().map(|a| a.links).sum();
    let sum_linked: u64 = articles.iter().map(|a| a.linked).sum();
    debug_assert_eq!(sum_links, sum_linked, "handshake identity");
    counters.set("metrics.articles", articles.len() as u64);
    counters.set("metrics.sum_links", sum_links);
    counters.set("metrics.sum_linked", sum_linked);
    Ok(articles)
}

/// Write `metrics.tsv`; rows ascend by page id.
pub fn write_metrics(path: &Path, rows: &[ArticleMetrics]) -> Result<(), GraphError> {
    let mut w = TsvWriter::create(path, &METRICS_HEADER)?;
    for m in rows {
        w.write_row(&[
            m.page_id.to_string(),
            m.editors.to_string(),
            m.edits.to_string(),
            m.linked.to_string(),
            m.links.to_string(),
            format!("{:.2}", m.age),
            m.length.to_string(),
            m.talkers.to_string(),
            m.talks.to_string(),
            m.views.to_string(),
            m.references.to_string(),
            m.pub_referenced.to_string(),
            m.urls.to_string(),
        ])?;
    }
    w.finish()?;
    Ok(())
}

pub fn read_metrics(path: &Path) -> Result<Vec<ArticleMetrics>, GraphError> {
    let bad = |detail: String| GraphError::BadGraphFile {
        file: METRICS_FILE.to_string(),
        detail,
    };
    let mut r = TsvReader::open_expecting(path, &METRICS_HEADER)?;
    let mut out = Vec::new();
    while let Some(row) = r.next_row()? {
        let int = |i: usize| -> Result<u64, GraphError> {
            row[i]
                .parse::<u64>()
                .map_err(|_| bad(format!("bad integer `{}`", row[i])))
        };
        out.push(ArticleMetrics {
            page_id: int(0)?,
            editors: int(1)?,
            edits: int(2)?,
            linked: int(3)?,
            links: int(4)?,
            age: row[5]
                .parse::<f64>()
                .map_err(|_| bad(format!("bad age `{}`", row[5])))?,
            length: int(6)?,
            talkers: int(7)?,
            talks: int(8)?,
            views: int(9)?,
            references: int(10)?,
            pub_referenced: int(11)?,
            urls: int(12)?,
        });
    }
    Ok(out)
}
