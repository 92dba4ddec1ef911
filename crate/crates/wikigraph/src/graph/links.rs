//! Builds `page_link.tsv` by resolving title-addressed link rows to
//! page ids through sort-merge joins against the page table.
//!
//! Every input row is accounted for: `rows_in` equals rows written
//! plus per-reason drop counters plus deduplicated rows, and the
//! builder `debug_assert`s that identity.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::extsort::{ExtRecord, ExternalSorter};
use crate::graph::records::{LinkEdgeRec, LinkTargetRec, PageTableReader, TitleRec};
use crate::graph::title::normalize_title;
use crate::graph::{BuildLimits, Counters, GraphError, PAGE_LINK_HEADER};
use crate::tables::PageLinkRow;
use crate::tsv::TsvWriter;

static SPOOL_SEQ: AtomicU64 = AtomicU64::new(0);

#[derive(Debug, Clone)]
pub struct LinkOptions {
    /// Namespaces eligible as link targets; rows aimed elsewhere are
    /// dropped (counted) before resolution.
    pub scope_namespaces: Vec<i32>,
    /// Chase links that land on a redirect one hop to the redirect's
    /// own (smallest) target; double redirects are dropped.
    pub resolve_redirects: bool,
}

impl Default for LinkOptions {
    fn default() -> Self {
        LinkOptions {
            scope_namespaces: vec![0],
            resolve_redirects: false,
        }
    }
}

/// Ascending-id lookup of the page table's (id, is_redirect) column
/// pair; one merge pass, O(1) memory.
struct PageFlagCursor {
    reader: PageTableReader,
    current: Option<(u64, bool)>,
}

impl PageFlagCursor {
    fn open(dir: &Path) -> Result<Self, GraphError> {
        let mut reader = PageTableReader::open(dir)?;
        let current = reader.next_record()?.map(|r| (r.page_id, r.is_redirect));
        Ok(PageFlagCursor { reader, current })
    }

    /// `Some(is_redirect)` when the id exists. Queries must not decrease.
    fn lookup(&mut self, id: u64) -> Result<Option<bool>, GraphError> {
        while let Some((cur, flag)) = self.current {
            if cur >= id {
                return Ok((cur == id).then_some(flag));
            }
            self.current = self.reader.next_record()?.map(|r| (r.page_id, r.is_redirect));
        }
        Ok(None)
    }
}

pub fn build_page_links(
    pagelinks: impl IntoIterator<Item = Result<PageLinkRow, GraphError>>,
    graph_dir: &Path,
    out_path: &Path,
    opts: &LinkOptions,
    limits: &BuildLimits,
    counters: &mut Counters,
) -> Result<(), GraphError> {
    // Resolution run: (ns, title) -> (id, is_redirect) for target
    // namespaces, derived from the page table so the stage only
    // depends on prior outputs.
    let mut title_sorter =
        ExternalSorter::<TitleRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    {
        let mut reader = PageTableReader::open(graph_dir)?;
        while let Some(rec) = reader.next_record()? {
            if opts.scope_namespaces.contains(&rec.namespace) {
                title_sorter.push(TitleRec {
                    namespace: rec.namespace,
                    title: rec.title,
                    id: rec.page_id,
                    is_redirect: rec.is_redirect,
                })?;
            }
        }
    }

    let mut target_sorter =
        ExternalSorter::<LinkTargetRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    let mut rows_in = 0u64;
    for row in pagelinks {
        let row = row?;
        rows_in += 1;
        if !opts.scope_namespaces.contains(&row.to_namespace) {
            counters.bump("page_link.dropped_out_of_scope_namespace");
            continue;
        }
        target_sorter.push(LinkTargetRec {
            namespace: row.to_namespace,
            title: normalize_title(&row.to_title),
            from: row.from_page_id,
        })?;
    }

    // Merge join on (ns, title). Both streams ascend; the title run is
    // unique per key (duplicates would mean a corrupt page table and
    // are counted, first id wins).
    let mut candidates =
        ExternalSorter::<LinkEdgeRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    {
        let mut titles = title_sorter.finish()?;
        let mut current: Option<TitleRec> = None;
        let mut next_title = |cur: &mut Option<TitleRec>,
                              counters: &mut Counters|
         -> Result<(), GraphError> {
            loop {
                let nxt = match titles.next() {
                    None => None,
                    Some(r) => Some(r?),
                };
                match (&cur, &nxt) {
                    (Some(a), Some(b)) if a.namespace == b.namespace && a.title == b.title => {
                        counters.bump("page_link.duplicate_title_keys");
                        continue;
                    }
                    _ => {
                        *cur = nxt;
                        return Ok(());
                    }
                }
            }
        };
        next_title(&mut current, counters)?;
        for target in target_sorter.finish()? {
            let target = target?;
            loop {
                match &current {
                    Some(t)
                        if (t.namespace, t.title.as_str())
                            < (target.namespace, target.title.as_str()) =>
                    {
                        next_title(&mut current, counters)?;
                    }
                    _ => break,
                }
            }
            match &current {
                Some(t) if t.namespace == target.namespace && t.title == target.title => {
                    if t.is_redirect && !opts.resolve_redirects {
                        counters.bump("page_link.dropped_redirect_target");
                    } else {
                        candidates.push(LinkEdgeRec {
                            from: target.from,
                            to: t.id,
                            to_redirect: t.is_redirect,
                        })?;
                    }
                }
                _ => counters.bump("page_link.dropped_missing_title"),
            }
        }
    }

    if opts.resolve_redirects {
        write_resolved(candidates, graph_dir, out_path, limits, counters)?;
    } else {
        write_direct(candidates, graph_dir, out_path, counters)?;
    }

    counters.set("page_link.rows_in", rows_in);
    debug_assert_eq!(
        rows_in,
        counters.get("page_link.rows")
            + counters.get("page_link.dropped_out_of_scope_namespace")
            + counters.get("page_link.dropped_missing_title")
            + counters.get("page_link.dropped_redirect_target")
            + counters.get("page_link.dropped_unknown_source")
            + counters.get("page_link.dropped_redirect_chase_failed")
            + counters.get("page_link.deduplicated"),
        "link conservation"
    );
    Ok(())
}

/// No redirect chasing: validate sources, dedup, write.
fn write_direct(
    candidates: ExternalSorter<LinkEdgeRec>,
    graph_dir: &Path,
    out_path: &Path,
    counters: &mut Counters,
) -> Result<(), GraphError> {
    let mut cursor = PageFlagCursor::open(graph_dir)?;
    let mut writer = TsvWriter::create(out_path, &PAGE_LINK_HEADER)?;
    let mut last: Option<(u64, u64)> = None;
    for rec in candidates.finish()? {
        let rec = rec?;
        if last == Some((rec.from, rec.to)) {
            counters.bump("page_link.deduplicated");
            continue;
        }
        last = Some((rec.from, rec.to));
        if cursor.lookup(rec.from)?.is_none() {
            counters.bump("page_link.dropped_unknown_source");
            continue;
        }
        if rec.from == rec.to {
            counters.bump("page_link.self_links");
        }
        writer.write_row(&[rec.from.to_string(), rec.to.to_string()])?;
    }
    counters.set("page_link.rows", writer.finish()?);
    Ok(())
}

/// Redirect chasing: spool candidate edges once to learn each redirect
/// page's own target, then rewrite, re-sort and write.
fn write_resolved(
    candidates: ExternalSorter<LinkEdgeRec>,
    graph_dir: &Path,
    out_path: &Path,
    limits: &BuildLimits,
    counters: &mut Counters,
) -> Result<(), GraphError> {
    let spool_path: PathBuf = limits.tmp_dir.join(format!(
        "link_spool_{}_{}",
        std::process::id(),
        SPOOL_SEQ.fetch_add(1, Ordering::Relaxed)
    ));

    // Pass 1: drop unknown sources; map redirect page -> smallest
    // target (with that target's redirect flag, for the one-hop rule).
    let mut redirect_map: HashMap<u64, (u64, bool)> = HashMap::new();
    {
        let mut cursor = PageFlagCursor::open(graph_dir)?;
        let mut spool = BufWriter::new(File::create(&spool_path)?);
        for rec in candidates.finish()? {
            let rec = rec?;
            match cursor.lookup(rec.from)? {
                None => {
                    counters.bump("page_link.dropped_unknown_source");
                    continue;
                }
                Some(from_redirect) => {
                    if from_redirect {
                        redirect_map.entry(rec.from).or_insert((rec.to, rec.to_redirect));
                    }
                    rec.write_to(&mut spool)?;
                }
            }
        }
        spool.flush()?;
    }

    // Pass 2: rewrite redirect targets, re-sort, dedup, write.
    let mut final_sorter =
        ExternalSorter::<LinkEdgeRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    {
        let mut spool = BufReader::new(File::open(&spool_path)?);
        while let Some(mut rec) = LinkEdgeRec::read_from(&mut spool)? {
            if rec.to_redirect {
                match redirect_map.get(&rec.to) {
                    Some(&(hop, false)) => {
                        rec.to = hop;
                        counters.bump("page_link.resolved_redirects");
                    }
                    _ => {
                        // Double redirect, or a redirect with no
                        // resolvable target of its own.
                        counters.bump("page_link.dropped_redirect_chase_failed");
                        continue;
                    }
                }
            }
            final_sorter.push(LinkEdgeRec {
                from: rec.from,
                to: rec.to,
                to_redirect: false,
            })?;
        }
    }
    let _ = std::fs::remove_file(&spool_path);

    let mut writer = TsvWriter::create(out_path, &PAGE_LINK_HEADER)?;
    let mut last: Option<(u64, u64)> = None;
    for rec in final_sorter.finish()? {
        let rec = rec?;
        if last == Some((rec.from, rec.to)) {
            counters.bump("page_link.deduplicated");
            continue;
        }
        last = Some((rec.from, rec.to));
        if rec.from == rec.to {
            counters.bump("page_link.self_links");
        }
        writer.write_row(&[rec.from.to_string(), rec.to.to_string()])?;
    }
    counters.set("page_link.rows", writer.finish()?);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::pages::build_page_table;
    use crate::graph::title::NamespaceNames;
    use crate::pageviews::ViewTotals;
    use crate::tables::RawPageRow;
    use crate::tsv::TsvReader;
    use std::collections::BTreeMap;

    fn page(id: u64, ns: i32, title: &str, redirect: bool) -> Result<RawPageRow, GraphError> {
        Ok(RawPageRow {
            page_id: id,
            namespace: ns,
            title: title.to_string(),
            restrictions: String::new(),
            is_redirect: redirect,
            is_new: false,
            touched: None,
            length_bytes: 10,
        })
    }

    fn link(from: u64, ns: i32, title: &str) -> Result<PageLinkRow, GraphError> {
        Ok(PageLinkRow {
            from_page_id: from,
            to_namespace: ns,
            to_title: title.to_string(),
        })
    }

    fn build_pages(dir: &Path, limits: &BuildLimits) {
        build_page_table(
            vec![
                page(1, 0, "Soil", false),
                page(2, 0, "Clay", false),
                page(3, 0, "Dirt", true),     // redirect -> Soil
                page(4, 0, "Mud", true),      // redirect -> Dirt (double)
                page(5, 0, "Loam", false),
                page(6, 1, "Soil", false),    // talk page, out of scope
            ],
            &BTreeMap::new(),
            &ViewTotals::default(),
            &NamespaceNames::default(),
            &dir.join("page.tsv"),
            limits,
            &mut Counters::new(),
        )
        .unwrap();
    }

    fn edges_of(path: &Path) -> Vec<(u64, u64)> {
        let mut r = TsvReader::open_expecting(path, &PAGE_LINK_HEADER).unwrap();
        let mut out = Vec::new();
        while let Some(row) = r.next_row().unwrap() {
            out.push((row[0].parse().unwrap(), row[1].parse().unwrap()));
        }
        out
    }

    fn raw_links() -> Vec<Result<PageLinkRow, GraphError>> {
        vec![
            link(1, 0, "Clay"),
            link(1, 0, "clay"),      // same target after normalization
            link(1, 0, "Dirt"),      // redirect target
            link(1, 0, "Mud"),       // double redirect target
            link(1, 0, "Nothing"),   // missing title
            link(1, 1, "Soil"),      // out-of-scope namespace
            link(2, 0, "Soil"),
            link(2, 0, "Clay"),      // self link
            link(3, 0, "Soil"),      // redirect page's own pointer
            link(4, 0, "Dirt"),      // double redirect's pointer
            link(99, 0, "Soil"),     // unknown source page
            link(5, 0, "Loam"),      // self link
        ]
    }

    #[test]
    fn direct_mode_drops_redirect_targets() {
        let dir = tempfile::tempdir().unwrap();
        let limits = BuildLimits::new(1 << 20, dir.path());
        build_pages(dir.path(), &limits);
        let out = dir.path().join("page_link.tsv");
        let mut counters = Counters::new();
        build_page_links(
            raw_links(),
            dir.path(),
            &out,
            &LinkOptions::default(),
            &limits,
            &mut counters,
        )
        .unwrap();

        // Kept: 1->Clay(2), 2->Soil(1), 2->Clay(2 self), 3->Soil(1), 5->Loam(5 self).
        assert_eq!(edges_of(&out), vec![(1, 2), (2, 1), (2, 2), (3, 1), (5, 5)]);
        assert_eq!(counters.get("page_link.rows"), 5);
        assert_eq!(counters.get("page_link.rows_in"), 12);
        assert_eq!(counters.get("page_link.deduplicated"), 1);
        assert_eq!(counters.get("page_link.dropped_redirect_target"), 3);
        assert_eq!(counters.get("page_link.dropped_missing_title"), 1);
        assert_eq!(counters.get("page_link.dropped_out_of_scope_namespace"), 1);
        assert_eq!(counters.get("page_link.dropped_unknown_source"), 1);
        assert_eq!(counters.get("page_link.self_links"), 2);
    }

    #[test]
    fn resolve_mode_chases_one_hop() {
        let dir = tempfile::tempdir().unwrap();
        let limits = BuildLimits::new(1 << 20, dir.path());
        build_pages(dir.path(), &limits);
        let out = dir.path().join("page_link.tsv");
        let mut counters = Counters::new();
        build_page_links(
            raw_links(),
            dir.path(),
            &out,
            &LinkOptions {
                scope_namespaces: vec![0],
                resolve_redirects: true,
            },
            &limits,
            &mut counters,
        )
        .unwrap();

        // 1->Dirt resolves to 1->Soil... but Soil is page 1: self link.
        // 1->Mud is a double redirect: dropped.
        // 3->Soil kept (redirect page's own out-edge, target not a redirect).
        // 4->Dirt: Dirt is a redirect; its map entry is (1, false): 4->1.
        assert_eq!(
            edges_of(&out),
            vec![(1, 1), (1, 2), (2, 1), (2, 2), (3, 1), (4, 1), (5, 5)]
        );
        assert_eq!(counters.get("page_link.resolved_redirects"), 2);
        assert_eq!(counters.get("page_link.dropped_redirect_chase_failed"), 1);
        assert_eq!(counters.get("page_link.self_links"), 3);
        assert_eq!(counters.get("page_link.deduplicated"), 1);
    }

    #[test]
    fn empty_input_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let limits = BuildLimits::new(1 << 20, dir.path());
        build_pages(dir.path(), &limits);
        let out = dir.path().join("page_link.tsv");
        let mut counters = Counters::new();
        build_page_links(
            Vec::new(),
            dir.path(),
            &out,
            &LinkOptions::default(),
            &limits,
            &mut counters,
        )
        .unwrap();
        assert!(edges_of(&out).is_empty());
        assert_eq!(counters.get("page_link.rows"), 0);
    }
}
