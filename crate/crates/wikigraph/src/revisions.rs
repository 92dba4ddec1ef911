//! Streaming reader for stub-meta-history XML shards and mergeable
//! per-page revision tallies.
//!
//! A shard is a `<mediawiki>` document holding `<page>` elements; each page
//! carries its id, namespace, title and a list of `<revision>` elements
//! with a timestamp and a contributor. We never hold more than one
//! revision in memory. Unknown elements are ignored so schema additions in
//! newer dumps do not break parsing; a *missing* page id or revision
//! timestamp is a structural error reported with the element path.
//!
//! Tallies are mergeable: aggregating the union of two shards equals
//! merging the two shard aggregates, so shards can be processed in
//! parallel and combined.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;

use chrono::{DateTime, NaiveDateTime, Utc};
use quick_xml::events::Event;
use quick_xml::Reader;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum XmlError {
    #[error("XML syntax error: {0}")]
    Syntax(#[from] quick_xml::Error),
    #[error("XML structure error at {path}: {detail}")]
    Structure { path: String, detail: String },
}

/// Who made an edit, as identified in the dump.
///
/// Registered editors are keyed by user id (falling back to the username in
/// ancient rows that lack one), anonymous editors by IP string. Revisions
/// whose contributor was suppressed share a single `Deleted` identity, so
/// within one page they count as one distinct editor.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContributorIdentity {
    Registered(String),
    Anonymous(String),
    Deleted,
}

/// One revision from the dump, in document order.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionEvent {
    pub page_id: u64,
    pub namespace: i32,
    /// Title as written in the XML: spaces, namespace prefix included.
    pub title: String,
    pub timestamp: DateTime<Utc>,
    pub contributor: ContributorIdentity,
}

/// Per-page aggregate over all revisions seen.
#[derive(Debug, Clone, PartialEq)]
pub struct RevisionAggregate {
    pub edits: u64,
    pub editors: u64,
    pub created: DateTime<Utc>,
}

pub struct RevisionXmlParser<R: BufRead> {
    reader: Reader<R>,
    buf: Vec<u8>,
    /// Element name stack, for error paths and field routing.
    stack: Vec<String>,
    page_index: u64,
    page: PageCtx,
    rev: RevCtx,
    done: bool,
}

#[derive(Default)]
struct PageCtx {
    id: Option<u64>,
    namespace: Option<i32>,
    title: Option<String>,
    revisions: u64,
}

#[derive(Default)]
struct RevCtx {
    timestamp: Option<DateTime<Utc>>,
    deleted_contributor: bool,
    username: Option<String>,
    user_id: Option<String>,
    ip: Option<String>,
}

pub fn parse_revision_xml<R: BufRead>(input: R) -> RevisionXmlParser<R> {
    let mut reader = Reader::from_reader(input);
    // Dump files are machine-written; trimming is safe and simplifies text.
    reader.trim_text(true);
    reader.check_end_names(false);
    RevisionXmlParser {
        reader,
        buf: Vec::new(),
        stack: Vec::new(),
        page_index: 0,
        page: PageCtx::default(),
        rev: RevCtx::default(),
        done: false,
    }
}

impl<R: BufRead> Iterator for RevisionXmlParser<R> {
    type Item = Result<RevisionEvent, XmlError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.advance() {
            Ok(ev) => ev.map(Ok),
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

impl<R: BufRead> RevisionXmlParser<R> {
    fn advance(&mut self) -> Result<Option<RevisionEvent>, XmlError> {
        loop {
            self.buf.clear();
            match self.reader.read_event_into(&mut self.buf)? {
                Event::Start(e) => {
                    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                    let deleted = name == "contributor" && has_deleted_attr(&e)?;
                    self.on_start(&name)?;
                    if deleted {
                        self.rev.deleted_contributor = true;
                    }
                    self.stack.push(name);
                }
                Event::Empty(e) => {
                    // Only <contributor deleted="deleted"/> matters here.
                    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
                    let deleted = name == "contributor" && has_deleted_attr(&e)?;
                    if deleted && self.in_element("revision") {
                        self.rev.deleted_contributor = true;
                    }
                }
                Event::Text(t) => {
                    let text = t.unescape()?.into_owned();
                    self.on_text(text)?;
                }
                Event::End(_) => {
                    let name = self.stack.pop().unwrap_or_default();
                    if name == "revision" {
                        return self.finish_revision().map(Some);
                    }
                    if name == "page" {
                        self.page = PageCtx::default();
                    }
                }
                Event::Eof => {
                    self.done = true;
                    return Ok(None);
                }
                _ => {} // declarations, comments, CDATA: ignore
            }
        }
    }

    fn on_start(&mut self, name: &str) -> Result<(), XmlError> {
        match name {
            "page" => {
                self.page = PageCtx::default();
                self.page_index += 1;
            }
            "revision" => {
                if self.page.id.is_none() {
                    // The dump always writes <id> before the first
                    // <revision>; its absence means a broken document.
                    return Err(self.structure_error("missing <id> before <revision>"));
                }
                self.rev = RevCtx::default();
                self.page.revisions += 1;
            }
            "contributor" => self.rev = RevCtx {
                timestamp: self.rev.timestamp,
                ..RevCtx::default()
            },
            _ => {}
        }
        Ok(())
    }

    fn on_text(&mut self, text: String) -> Result<(), XmlError> {
        let Some(current) = self.stack.last().map(|s| s.as_str()) else {
            return Ok(());
        };
        let in_contributor = self.in_element("contributor");
        let in_revision = self.in_element("revision");
        match current {
            "id" if in_contributor => self.rev.user_id = Some(text),
            "id" if in_revision => {} // revision id: unused
            "id" if self.in_element("page") && self.page.id.is_none() => {
                let id = text.parse::<u64>().map_err(|_| {
                    self.structure_error(&format!("bad page id `{text}`"))
                })?;
                self.page.id = Some(id);
            }
            "ns" if self.in_element("page") && !in_revision => {
                let ns = text.parse::<i32>().map_err(|_| {
                    self.structure_error(&format!("bad namespace `{text}`"))
                })?;
                self.page.namespace = Some(ns);
            }
            "title" if self.in_element("page") && !in_revision => {
                self.page.title = Some(text);
            }
            "timestamp" if in_revision && !in_contributor => {
                self.rev.timestamp = Some(parse_dump_timestamp(&text).ok_or_else(|| {
                    self.structure_error(&format!("bad timestamp `{text}`"))
                })?);
            }
            "username" if in_contributor => self.rev.username = Some(text),
            "ip" if in_contributor => self.rev.ip = Some(text),
            _ => {}
        }
        Ok(())
    }

    fn finish_revision(&mut self) -> Result<RevisionEvent, XmlError> {
        let page_id = self
            .page
            .id
            .ok_or_else(|| self.structure_error("missing page <id>"))?;
        let timestamp = self
            .rev
            .timestamp
            .ok_or_else(|| self.structure_error("missing <timestamp>"))?;
        let contributor = if self.rev.deleted_contributor {
            ContributorIdentity::Deleted
        } else if let Some(ip) = self.rev.ip.take() {
            ContributorIdentity::Anonymous(ip)
        } else if let Some(id) = self.rev.user_id.take() {
            ContributorIdentity::Registered(id)
        } else if let Some(name) = self.rev.username.take() {
            ContributorIdentity::Registered(name)
        } else {
            // No identity at all: treat like a suppressed contributor.
            ContributorIdentity::Deleted
        };
        Ok(RevisionEvent {
            page_id,
            namespace: self.page.namespace.unwrap_or(0),
            title: self.page.title.clone().unwrap_or_default(),
            timestamp,
            contributor,
        })
    }

    fn in_element(&self, name: &str) -> bool {
        self.stack.iter().any(|s| s == name)
    }

    fn structure_error(&self, detail: &str) -> XmlError {
        let mut path = String::new();
        for s in &self.stack {
            path.push('/');
            path.push_str(s);
        }
        if path.is_empty() {
            path.push('/');
        }
        let page = match (&self.page.title, self.page.id) {
            (Some(t), Some(id)) => format!(" (page #{} id {} `{t}`)", self.page_index, id),
            (Some(t), None) => format!(" (page #{} `{t}`)", self.page_index),
            _ => format!(" (page #{})", self.page_index),
        };
        XmlError::Structure {
            path: format!("{path}{page} revision {}", self.page.revisions),
            detail: detail.to_string(),
        }
    }
}

fn has_deleted_attr(e: &quick_xml::events::BytesStart) -> Result<bool, XmlError> {
    for attr in e.attributes() {
        let attr = attr.map_err(|e| XmlError::Syntax(quick_xml::Error::InvalidAttr(e)))?;
        if attr.key.as_ref() == b"deleted" {
            return Ok(true);
        }
    }
    Ok(false)
}

/// `2001-01-21T02:12:21Z` — the only format the dumps use.
fn parse_dump_timestamp(s: &str) -> Option<DateTime<Utc>> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%SZ")
        .ok()
        .map(|dt| dt.and_utc())
}

/// Running tally of revision activity, mergeable across shards.
#[derive(Debug, Default)]
pub struct RevisionTally {
    pages: HashMap<u64, PageTally>,
    pub events: u64,
}

#[derive(Debug)]
struct PageTally {
    edits: u64,
    editors: HashSet<ContributorIdentity>,
    created: DateTime<Utc>,
}

impl RevisionTally {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, ev: &RevisionEvent) {
        self.events += 1;
        match self.pages.get_mut(&ev.page_id) {
            Some(t) => {
                t.edits += 1;
                t.editors.insert(ev.contributor.clone());
                if ev.timestamp < t.created {
                    t.created = ev.timestamp;
                }
            }
            None => {
                let mut editors = HashSet::new();
                editors.insert(ev.contributor.clone());
                self.pages.insert(
                    ev.page_id,
                    PageTally {
                        edits: 1,
                        editors,
                        created: ev.timestamp,
                    },
                );
            }
        }
    }

    /// Combine two tallies. Distinct-editor sets union, edit counts add,
    /// creation takes the earlier timestamp.
    pub fn merge(mut self, other: RevisionTally) -> RevisionTally {
        self.events += other.events;
        for (page_id, theirs) in other.pages {
            match self.pages.get_mut(&page_id) {
                Some(ours) => {
                    ours.edits += theirs.edits;
                    ours.editors.extend(theirs.editors);
                    if theirs.created < ours.created {
                        ours.created = theirs.created;
                    }
                }
                None => {
                    self.pages.insert(page_id, theirs);
                }
            }
        }
        self
    }

    pub fn finish(self) -> BTreeMap<u64, RevisionAggregate> {
        self.pages
            .into_iter()
            .map(|(id, t)| {
                (
                    id,
                    RevisionAggregate {
                        edits: t.edits,
                        editors: t.editors.len() as u64,
                        created: t.created,
                    },
                )
            })
            .collect()
    }
}

/// Aggregate a stream of events in one pass.
pub fn aggregate_revisions<I: IntoIterator<Item = RevisionEvent>>(
    events: I,
) -> BTreeMap<u64, RevisionAggregate> {
    let mut tally = RevisionTally::new();
    for ev in events {
        tally.add(&ev);
    }
    tally.finish()
}
