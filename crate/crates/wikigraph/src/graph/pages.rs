//! Builds `page.tsv`: page rows from the SQL dump enriched with
//! revision-history aggregates and pageview totals.

use std::collections::BTreeMap;
use std::path::Path;

use crate::extsort::ExternalSorter;
use crate::graph::records::{format_time, PageSortRec};
use crate::graph::title::NamespaceNames;
use crate::graph::{BuildLimits, Counters, GraphError, PAGE_HEADER};
use crate::pageviews::ViewTotals;
use crate::revisions::RevisionAggregate;
use crate::tables::RawPageRow;
use crate::tsv::TsvWriter;

/// Stream page rows into `out_path`, sorted by id.
///
/// `revisions` and `views` are the merged aggregates for the whole
/// run; both are keyed maps held in memory (their size is bounded by
/// page count, not revision or view-row count). A page with no
/// history rows gets zero edits/editors and an empty `created`; view
/// totals match by page id and by qualified title, summed.
pub fn build_page_table(
    pages: impl IntoIterator<Item = Result<RawPageRow, GraphError>>,
    revisions: &BTreeMap<u64, RevisionAggregate>,
    views: &ViewTotals,
    ns_names: &NamespaceNames,
    out_path: &Path,
    limits: &BuildLimits,
    counters: &mut Counters,
) -> Result<(), GraphError> {
    let mut sorter = ExternalSorter::<PageSortRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    for row in pages {
        let row = row?;
        sorter.push(PageSortRec {
            id: row.page_id,
            namespace: row.namespace,
            title: row.title,
            is_redirect: row.is_redirect,
            is_new: row.is_new,
            restrictions: row.restrictions,
            touched: row.touched.map(format_time).unwrap_or_default(),
            length: row.length_bytes,
        })?;
    }

    let mut writer = TsvWriter::create(out_path, &PAGE_HEADER)?;
    let mut last_id = 0u64;
    for rec in sorter.finish()? {
        let rec = rec?;
        if rec.id == last_id {
            return Err(GraphError::DuplicatePageId(rec.id));
        }
        last_id = rec.id;

        let (edits, editors, created) = match revisions.get(&rec.id) {
            Some(agg) => (
                agg.edits,
                agg.editors,
                format_time(agg.created.naive_utc()),
            ),
            None => {
                counters.bump("page.without_history");
                (0, 0, String::new())
            }
        };
        let title_key = ns_names.title_key(rec.namespace, &rec.title);
        let view_total = views.total_for(rec.id, &title_key);

        if rec.is_redirect {
            counters.bump("page.redirects");
        }
        writer.write_row(&[
            rec.id.to_string(),
            rec.namespace.to_string(),
            rec.title,
            if rec.is_redirect { "1" } else { "0" }.to_string(),
            if rec.is_new { "1" } else { "0" }.to_string(),
            rec.restrictions,
            rec.touched,
            rec.length.to_string(),
            created,
            edits.to_string(),
            editors.to_string(),
            view_total.to_string(),
        ])?;
    }
    counters.set("page.rows", writer.finish()?);
    Ok(())
}
