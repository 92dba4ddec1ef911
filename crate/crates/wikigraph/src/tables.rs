//! Column layouts for the six MediaWiki SQL tables we ingest (as dumped
//! mid-2021) and typed extraction from parsed rows.
//!
//! Extractors are strict: a value of the wrong kind or an out-of-range id
//! is a fatal error, because it means the file does not match the declared
//! schema (e.g. files from a different dump generation were mixed).

use chrono::NaiveDateTime;
use thiserror::Error;

use crate::sql::{ColumnKind, SqlValue, TableSchema};

#[derive(Debug, Error)]
pub enum RowError {
    #[error("table `{table}`, column `{column}`: expected {expected}, found {found}")]
    Kind {
        table: &'static str,
        column: &'static str,
        expected: &'static str,
        found: String,
    },
    #[error("table `{table}`, column `{column}`: value {value} out of range")]
    Range {
        table: &'static str,
        column: &'static str,
        value: i64,
    },
    #[error("table `{table}`, column `{column}`: bad timestamp `{value}`")]
    Timestamp {
        table: &'static str,
        column: &'static str,
        value: String,
    },
}

use ColumnKind::{Float, Integer, Text};

pub fn page_schema() -> TableSchema {
    TableSchema::new(
        "page",
        &[
            ("page_id", Integer),
            ("page_namespace", Integer),
            ("page_title", Text),
            ("page_restrictions", Text),
            ("page_is_redirect", Integer),
            ("page_is_new", Integer),
            ("page_random", Float),
            ("page_touched", Text),
            ("page_links_updated", Text),
            ("page_latest", Integer),
            ("page_len", Integer),
            ("page_content_model", Text),
            ("page_lang", Text),
        ],
    )
}

pub fn category_schema() -> TableSchema {
    TableSchema::new(
        "category",
        &[
            ("cat_id", Integer),
            ("cat_title", Text),
            ("cat_pages", Integer),
            ("cat_subcats", Integer),
            ("cat_files", Integer),
        ],
    )
}

pub fn categorylinks_schema() -> TableSchema {
    TableSchema::new(
        "categorylinks",
        &[
            ("cl_from", Integer),
            ("cl_to", Text),
            ("cl_sortkey", Text),
            ("cl_timestamp", Text),
            ("cl_sortkey_prefix", Text),
            ("cl_collation", Text),
            ("cl_type", Text),
        ],
    )
}

pub fn externallinks_schema() -> TableSchema {
    TableSchema::new(
        "externallinks",
        &[
            ("el_id", Integer),
            ("el_from", Integer),
            ("el_to", Text),
            ("el_index", Text),
            ("el_index_60", Text),
        ],
    )
}

pub fn pagelinks_schema() -> TableSchema {
    TableSchema::new(
        "pagelinks",
        &[
            ("pl_from", Integer),
            ("pl_namespace", Integer),
            ("pl_title", Text),
            ("pl_from_namespace", Integer),
        ],
    )
}

pub fn page_props_schema() -> TableSchema {
    TableSchema::new(
        "page_props",
        &[
            ("pp_page", Integer),
            ("pp_propname", Text),
            ("pp_value", Text),
            ("pp_sortkey", Float),
        ],
    )
}

/// Look up a built-in schema by table name.
pub fn schema_for(table: &str) -> Option<TableSchema> {
    Some(match table {
        "page" => page_schema(),
        "category" => category_schema(),
        "categorylinks" => categorylinks_schema(),
        "externallinks" => externallinks_schema(),
        "pagelinks" => pagelinks_schema(),
        "page_props" => page_props_schema(),
        _ => return None,
    })
}

/// One row of the `page` table, with dump-side fields only (metrics like
/// views and edit counts are joined in later).
#[derive(Debug, Clone, PartialEq)]
pub struct RawPageRow {
    pub page_id: u64,
    pub namespace: i32,
    /// Canonical DB form: underscores, no namespace prefix.
    pub title: String,
    pub restrictions: String,
    pub is_redirect: bool,
    pub is_new: bool,
    pub touched: Option<NaiveDateTime>,
    pub length_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawCategoryRow {
    pub cat_id: u64,
    pub title: String,
    pub pages: u64,
    pub subcats: u64,
    pub files: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryLinkRow {
    pub from_page_id: u64,
    /// Target category title (DB form, no namespace prefix).
    pub to_title: String,
    /// `page`, `subcat` or `file` in the dumps.
    pub link_type: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PagePropRow {
    pub page_id: u64,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageLinkRow {
    pub from_page_id: u64,
    pub to_namespace: i32,
    pub to_title: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternalLinkRow {
    pub from_page_id: u64,
    pub raw_url: String,
}

pub fn extract_page(row: &[SqlValue]) -> Result<RawPageRow, RowError> {
    const T: &'static str = "page";
    Ok(RawPageRow {
        page_id: id_value(T, "page_id", &row[0])?,
        namespace: int_value(T, "page_namespace", &row[1])? as i32,
        title: text_value(T, "page_title", &row[2])?,
        restrictions: opt_text_value(T, "page_restrictions", &row[3])?,
        is_redirect: int_value(T, "page_is_redirect", &row[4])? != 0,
        is_new: int_value(T, "page_is_new", &row[5])? != 0,
        touched: timestamp_value(T, "page_touched", &row[7])?,
        length_bytes: uint_value(T, "page_len", &row[10])?,
    })
}

pub fn extract_category(row: &[SqlValue]) -> Result<RawCategoryRow, RowError> {
    const T: &'static str = "category";
    Ok(RawCategoryRow {
        cat_id: id_value(T, "cat_id", &row[0])?,
        title: text_value(T, "cat_title", &row[1])?,
        pages: uint_value(T, "cat_pages", &row[2])?,
        subcats: uint_value(T, "cat_subcats", &row[3])?,
        files: uint_value(T, "cat_files", &row[4])?,
    })
}

pub fn extract_categorylink(row: &[SqlValue]) -> Result<CategoryLinkRow, RowError> {
    const T: &'static str = "categorylinks";
    Ok(CategoryLinkRow {
        from_page_id: id_value(T, "cl_from", &row[0])?,
        to_title: text_value(T, "cl_to", &row[1])?,
        link_type: text_value(T, "cl_type", &row[6])?,
    })
}

pub fn extract_page_prop(row: &[SqlValue]) -> Result<PagePropRow, RowError> {
    const T: &'static str = "page_props";
    Ok(PagePropRow {
        page_id: id_value(T, "pp_page", &row[0])?,
        name: text_value(T, "pp_propname", &row[1])?,
        value: opt_text_value(T, "pp_value", &row[2])?,
    })
}

pub fn extract_pagelink(row: &[SqlValue]) -> Result<PageLinkRow, RowError> {
    const T: &'static str = "pagelinks";
    Ok(PageLinkRow {
        from_page_id: id_value(T, "pl_from", &row[0])?,
        to_namespace: int_value(T, "pl_namespace", &row[1])? as i32,
        to_title: text_value(T, "pl_title", &row[2])?,
    })
}

pub fn extract_externallink(row: &[SqlValue]) -> Result<ExternalLinkRow, RowError> {
    const T: &'static str = "externallinks";
    Ok(ExternalLinkRow {
        from_page_id: id_value(T, "el_from", &row[1])?,
        raw_url: text_value(T, "el_to", &row[2])?,
    })
}

fn int_value(table: &'static str, column: &'static str, v: &SqlValue) -> Result<i64, RowError> {
    v.as_int().ok_or_else(|| RowError::Kind {
        table,
        column,
        expected: "integer",
        found: format!("{v:?}"),
    })
}

fn uint_value(table: &'static str, column: &'static str, v: &SqlValue) -> Result<u64, RowError> {
    let i = int_value(table, column, v)?;
    u64::try_from(i).map_err(|_| RowError::Range {
        table,
        column,
        value: i,
    })
}

fn id_value(table: &'static str, column: &'static str, v: &SqlValue) -> Result<u64, RowError> {
    let i = int_value(table, column, v)?;
    if i <= 0 {
        return Err(RowError::Range {
            table,
            column,
            value: i,
        });
    }
    Ok(i as u64)
}

fn text_value(table: &'static str, column: &'static str, v: &SqlValue) -> Result<String, RowError> {
    match v {
        SqlValue::Text(s) => Ok(s.clone()),
        other => Err(RowError::Kind {
            table,
            column,
            expected: "text",
            found: format!("{other:?}"),
        }),
    }
}

/// Text column that may be NULL in the dump; NULL maps to "".
fn opt_text_value(
    table: &'static str,
    column: &'static str,
    v: &SqlValue,
) -> Result<String, RowError> {
    match v {
        SqlValue::Null => Ok(String::new()),
        _ => text_value(table, column, v),
    }
}

/// `page_touched`-style 14-digit timestamps; NULL and empty map to None.
fn timestamp_value(
    table: &'static str,
    column: &'static str,
    v: &SqlValue,
) -> Result<Option<NaiveDateTime>, RowError> {
    let s = match v {
        SqlValue::Null => return Ok(None),
        SqlValue::Text(s) if s.is_empty() => return Ok(None),
        SqlValue::Text(s) => s,
        other => {
            return Err(RowError::Kind {
                table,
                column,
                expected: "timestamp text",
                found: format!("{other:?}"),
            })
        }
    };
    NaiveDateTime::parse_from_str(s, "%Y%m%d%H%M%S")
        .map(Some)
        .map_err(|_| RowError::Timestamp {
            table,
            column,
            value: s.clone(),
        })
}
