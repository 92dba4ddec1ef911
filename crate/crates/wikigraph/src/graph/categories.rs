//! Builds `category.tsv`, `page_category.tsv` and `page_property.tsv`.
//!
//! Memory note: two maps are held in RAM — category title → id (for
//! resolving membership links) and the ns-14 page title → id map (for
//! the hidden flag). Both are bounded by category count, not by link
//! count; links themselves stream through external sorts.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::extsort::ExternalSorter;
use crate::graph::records::{CategoryEdgeRec, CategorySortRec, PageIdProbe, PropertyRec};
use crate::graph::{
    BuildLimits, Counters, GraphError, CATEGORY_HEADER, PAGE_CATEGORY_HEADER,
    PAGE_PROPERTY_HEADER,
};
use crate::tables::{CategoryLinkRow, PagePropRow, RawCategoryRow};
use crate::tsv::TsvWriter;

/// Property name that marks a category page as hidden.
const HIDDEN_PROP: &str = "hiddencat";

pub struct CategoryOutputs<'a> {
    pub category: &'a Path,
    pub page_category: &'a Path,
    pub page_property: &'a Path,
}

/// `graph_dir` must already contain `page.tsv`; source pages of every
/// edge are validated against it so foreign keys hold by construction.
pub fn build_category_tables(
    categories: impl IntoIterator<Item = Result<RawCategoryRow, GraphError>>,
    categorylinks: impl IntoIterator<Item = Result<CategoryLinkRow, GraphError>>,
    props: impl IntoIterator<Item = Result<PagePropRow, GraphError>>,
    graph_dir: &Path,
    outputs: &CategoryOutputs,
    limits: &BuildLimits,
    counters: &mut Counters,
) -> Result<(), GraphError> {
    // ns-14 page titles resolve category rows to their page, which is
    // where the hidden marker lives.
    let mut ns14_pages: HashMap<String, u64> = HashMap::new();
    {
        let mut reader = crate::graph::records::PageTableReader::open(graph_dir)?;
        while let Some(rec) = reader.next_record()? {
            if rec.namespace == 14 {
                ns14_pages.insert(rec.title, rec.page_id);
            }
        }
    }

    // Properties: spool through a sorter; remember hidden-category pages.
    let mut prop_sorter =
        ExternalSorter::<PropertyRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    let mut hidden_pages: HashSet<u64> = HashSet::new();
    let mut prop_rows_in = 0u64;
    for row in props {
        let row = row?;
        prop_rows_in += 1;
        if row.name == HIDDEN_PROP {
            hidden_pages.insert(row.page_id);
        }
        prop_sorter.push(PropertyRec {
            page: row.page_id,
            name: row.name,
            value: row.value,
        })?;
    }

    // Category table, sorted by id; keep title -> id for link resolution.
    let mut cat_sorter =
        ExternalSorter::<CategorySortRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    for row in categories {
        let row = row?;
        cat_sorter.push(CategorySortRec {
            id: row.cat_id,
            title: row.title,
            pages: row.pages,
            subcats: row.subcats,
            files: row.files,
        })?;
    }
    let mut cat_ids: HashMap<String, u64> = HashMap::new();
    {
        let mut writer = TsvWriter::create(outputs.category, &CATEGORY_HEADER)?;
        let mut last_id = 0u64;
        for rec in cat_sorter.finish()? {
            let rec = rec?;
            if rec.id == last_id {
                return Err(GraphError::DuplicateCategoryId(rec.id));
            }
            last_id = rec.id;
            let hidden = match ns14_pages.get(&rec.title) {
                Some(page_id) => hidden_pages.contains(page_id),
                None => {
                    counters.bump("category.without_page");
                    false
                }
            };
            writer.write_row(&[
                rec.id.to_string(),
                rec.title.clone(),
                rec.pages.to_string(),
                rec.subcats.to_string(),
                rec.files.to_string(),
                if hidden { "1" } else { "0" }.to_string(),
            ])?;
            if hidden {
                counters.bump("category.hidden");
            }
            cat_ids.insert(rec.title, rec.id);
        }
        counters.set("category.rows", writer.finish()?);
    }

    // Membership edges: resolve titles, sort, dedup, validate sources.
    let mut edge_sorter =
        ExternalSorter::<CategoryEdgeRec>::new(limits.sort_budget_bytes, &limits.tmp_dir)?;
    let mut edge_rows_in = 0u64;
    for row in categorylinks {
        let row = row?;
        edge_rows_in += 1;
        let link_type = match row.link_type.as_str() {
            "page" => 0,
            "subcat" => 1,
            "file" => 2,
            _ => {
                counters.bump("page_category.dropped_bad_type");
                continue;
            }
        };
        match cat_ids.get(&row.to_title) {
            Some(&cat) => edge_sorter.push(CategoryEdgeRec {
                page: row.from_page_id,
                category: cat,
                link_type,
            })?,
            None => counters.bump("page_category.dropped_unknown_category"),
        }
    }
    {
        let mut writer = TsvWriter::create(outputs.page_category, &PAGE_CATEGORY_HEADER)?;
        let mut probe = PageIdProbe::open(graph_dir)?;
        let mut last: Option<CategoryEdgeRec> = None;
        for rec in edge_sorter.finish()? {
            let rec = rec?;
            if last == Some(rec) {
                counters.bump("page_category.deduplicated");
                continue;
            }
            last = Some(rec);
            if !probe.contains(rec.page)? {
                counters.bump("page_category.dropped_unknown_page");
                continue;
            }
            writer.write_row(&[
                rec.page.to_string(),
                rec.category.to_string(),
                rec.type_name().to_string(),
            ])?;
        }
        let rows = writer.finish()?;
        counters.set("page_category.rows", rows);
        counters.set("page_category.rows_in", edge_rows_in);
        debug_assert_eq!(
            edge_rows_in,
            rows + counters.get("page_category.dropped_bad_type")
                + counters.get("page_category.dropped_unknown_category")
                + counters.get("page_category.dropped_unknown_page")
                + counters.get("page_category.deduplicated"),
            "category edge conservation"
        );
    }

    // Properties: one row per (page, name); under duplicates the
    // lexicographically smallest value wins, which is deterministic
    // no matter how input statements were ordered.
    {
        let mut writer = TsvWriter::create(outputs.page_property, &PAGE_PROPERTY_HEADER)?;
        let mut probe = PageIdProbe::open(graph_dir)?;
        let mut last_key: Option<(u64, String)> = None;
        for rec in prop_sorter.finish()? {
            let rec = rec?;
            let key = (rec.page, rec.name.clone());
            if last_key.as_ref() == Some(&key) {
                counters.bump("page_property.dropped_duplicates");
                continue;
            }
            last_key = Some(key);
            if !probe.contains(rec.page)? {
                counters.bump("page_property.dropped_unknown_page");
                continue;
            }
            writer.write_row(&[rec.page.to_string(), rec.name, rec.value])?;
        }
        let rows = writer.finish()?;
        counters.set("page_property.rows", rows);
        counters.set("page_property.rows_in", prop_rows_in);
        debug_assert_eq!(
            prop_rows_in,
            rows + counters.get("page_property.dropped_duplicates")
                + counters.get("page_property.dropped_unknown_page"),
            "property conservation"
        );
    }
    Ok(())
}
