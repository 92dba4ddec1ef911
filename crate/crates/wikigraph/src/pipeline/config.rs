//! Run configuration: one TOML file, overridable from the command
//! line with `--set section.key=value`.
//!
//! Relative input/output paths are resolved against the directory of
//! the config file, so a config can sit next to its dumps and be
//! invoked from anywhere. Dates are quoted `"YYYY-MM-DD"` strings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::citations::CitationColumnMap;
use crate::graph::title::NamespaceNames;
use crate::normalize::{IdentifierVocabulary, DEFAULT_SCHEMES};
use crate::pageviews::{date_from_filename, DateSource, PageViewColumnMap, PageViewFilter};

use super::PipelineError;

fn de_date<'de, D: serde::Deserializer<'de>>(d: D) -> Result<NaiveDate, D::Error> {
    let s = String::deserialize(d)?;
    NaiveDate::parse_from_str(&s, "%Y-%m-%d")
        .map_err(|e| serde::de::Error::custom(format!("bad date {s:?}: {e}")))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub page_sql: PathBuf,
    pub category_sql: PathBuf,
    pub categorylinks_sql: PathBuf,
    pub externallinks_sql: PathBuf,
    pub pagelinks_sql: PathBuf,
    pub page_props_sql: PathBuf,
    pub revisions_xml: Vec<PathBuf>,
    pub pageviews: Vec<PathBuf>,
    pub citations: PathBuf,
    #[serde(default)]
    pub assessments: Option<PathBuf>,
    #[serde(default)]
    pub exclusions: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    #[serde(deserialize_with = "de_date")]
    pub views_start: NaiveDate,
    #[serde(deserialize_with = "de_date")]
    pub views_end: NaiveDate,
    /// Reference date for the age metric.
    #[serde(deserialize_with = "de_date")]
    pub as_of: NaiveDate,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scope {
    /// Namespaces eligible as link targets.
    pub namespaces: Vec<i32>,
}

impl Default for Scope {
    fn default() -> Self {
        Scope { namespaces: vec![0] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Identifiers {
    pub schemes: Vec<String>,
}

impl Default for Identifiers {
    fn default() -> Self {
        Identifiers {
            schemes: DEFAULT_SCHEMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Rules {
    /// Domain rule file for URL canonicalization; omitted means the
    /// built-in rules only.
    pub domain_rules: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub memory_ceiling_bytes: u64,
    /// Highest tolerated fraction of malformed rows in line-oriented
    /// inputs (pageviews, citations).
    pub malformed_tolerance: f64,
    /// Worker threads; 0 means one per core.
    pub threads: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            memory_ceiling_bytes: 2 * 1024 * 1024 * 1024,
            malformed_tolerance: 0.01,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Flags {
    /// Chase links that land on redirects one hop.
    pub resolve_redirects: bool,
    /// Fold `Talk:X/Archive…` pages into `Talk:X` for the talk metrics.
    pub include_talk_archives: bool,
    /// Pageview agent types to keep; empty keeps all.
    pub agent_types: Vec<String>,
}

impl Default for Flags {
    fn default() -> Self {
        Flags {
            resolve_redirects: true,
            include_talk_archives: true,
            agent_types: vec!["user".to_string()],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PageViewFormat {
    pub delimiter: String,
    pub wiki_column: usize,
    pub title_column: usize,
    pub page_id_column: Option<usize>,
    pub agent_column: Option<usize>,
    pub count_column: usize,
    /// Set both to read the date from a column; otherwise it comes
    /// from the 8-digit run in the file name.
    pub date_column: Option<usize>,
    pub date_format: Option<String>,
}

impl Default for PageViewFormat {
    fn default() -> Self {
        let map = PageViewColumnMap::default();
        PageViewFormat {
            delimiter: map.delimiter.to_string(),
            wiki_column: map.wiki,
            title_column: map.title,
            page_id_column: map.page_id,
            agent_column: map.agent,
            count_column: map.count,
            date_column: None,
            date_format: None,
        }
    }
}

impl PageViewFormat {
    /// Column map for one concrete file (per-file because daily files
    /// carry their date in the name).
    pub fn column_map(&self, path: &Path) -> Result<PageViewColumnMap, PipelineError> {
        let delimiter = single_char("pageviews.delimiter", &self.delimiter)?;
        let date = match (&self.date_column, &self.date_format) {
            (Some(index), Some(format)) => DateSource::Column {
                index: *index,
                format: format.clone(),
            },
            (None, None) => DateSource::Fixed(
                date_from_filename(path).map_err(crate::graph::GraphError::from)?,
            ),
            _ => {
                return Err(PipelineError::Config {
                    path: String::new(),
                    detail: "pageviews.date_column and date_format must be set together"
                        .to_string(),
                })
            }
        };
        Ok(PageViewColumnMap {
            delimiter,
            wiki: self.wiki_column,
            title: self.title_column,
            page_id: self.page_id_column,
            agent: self.agent_column,
            count: self.count_column,
            date,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CitationFormat {
    pub delimiter: String,
    pub page_id_column: String,
    pub page_title_column: String,
    pub resource_type_column: Option<String>,
    pub url_columns: Vec<String>,
    pub url_separator: Option<String>,
    /// scheme -> column; empty means the stock `ID_list.*` layout
    /// restricted to the configured schemes.
    pub identifier_columns: BTreeMap<String, String>,
}

impl Default for CitationFormat {
    fn default() -> Self {
        let map = CitationColumnMap::default();
        CitationFormat {
            delimiter: map.delimiter.to_string(),
            page_id_column: map.page_id,
            page_title_column: map.page_title,
            resource_type_column: map.resource_type,
            url_columns: map.urls,
            url_separator: None,
            identifier_columns: BTreeMap::new(),
        }
    }
}

impl CitationFormat {
    pub fn column_map(
        &self,
        schemes: &[String],
        tolerance: f64,
    ) -> Result<CitationColumnMap, PipelineError> {
        let identifiers: Vec<(String, String)> = if self.identifier_columns.is_empty() {
            CitationColumnMap::default()
                .identifiers
                .into_iter()
                .filter(|(scheme, _)| schemes.contains(scheme))
                .collect()
        } else {
            self.identifier_columns
                .iter()
                .map(|(s, c)| (s.clone(), c.clone()))
                .collect()
        };
        Ok(CitationColumnMap {
            delimiter: single_char("citations.delimiter", &self.delimiter)?,
            page_id: self.page_id_column.clone(),
            page_title: self.page_title_column.clone(),
            resource_type: self.resource_type_column.clone(),
            urls: self.url_columns.clone(),
            url_separator: match &self.url_separator {
                Some(s) => Some(single_char("citations.url_separator", s)?),
                None => None,
            },
            identifiers,
            malformed_tolerance: tolerance,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Analysis {
    pub top_n: usize,
    pub top_metrics: Vec<String>,
    /// Empty means every metric.
    pub correlation_metrics: Vec<String>,
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis {
            top_n: 20,
            top_metrics: vec![
                "views".to_string(),
                "talks".to_string(),
                "pub_referenced".to_string(),
            ],
            correlation_metrics: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Wiki column value to keep from pageview files, e.g. `en.wikipedia`.
    pub wiki_code: String,
    pub inputs: Inputs,
    pub window: Window,
    pub output: Output,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub identifiers: Identifiers,
    #[serde(default)]
    pub rules: Rules,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default)]
    pub flags: Flags,
    #[serde(default)]
    pub pageviews: PageViewFormat,
    #[serde(default)]
    pub citations: CitationFormat,
    /// Extra/overriding namespace prefixes, keyed by namespace number.
    #[serde(default)]
    pub namespace_names: BTreeMap<String, String>,
    #[serde(default)]
    pub analysis: Analysis,
}

fn single_char(what: &str, s: &str) -> Result<char, PipelineError> {
    let unescaped = match s {
        "\\t" => "\t",
        other => other,
    };
    let mut chars = unescaped.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(PipelineError::Config {
            path: String::new(),
            detail: format!("{what} must be a single character, got {s:?}"),
        }),
    }
}

/// `key=value` split for `--set`.
pub fn parse_override(raw: &str) -> Result<(String, String), PipelineError> {
    match raw.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.to_string())),
        _ => Err(PipelineError::BadOverride(raw.to_string())),
    }
}

/// Literal inference for override values: bool, integer, float, then
/// string; a comma turns the value into an array of inferred scalars.
fn infer_value(raw: &str) -> toml::Value {
    fn scalar(s: &str) -> toml::Value {
        let t = s.trim();
        if t.eq_ignore_ascii_case("true") {
            return toml::Value::Boolean(true);
        }
        if t.eq_ignore_ascii_case("false") {
            return toml::Value::Boolean(false);
        }
        if let Ok(i) = t.parse::<i64>() {
            return toml::Value::Integer(i);
        }
        if let Ok(f) = t.parse::<f64>() {
            return toml::Value::Float(f);
        }
        toml::Value::String(t.to_string())
    }
    if raw.contains(',') {
        toml::Value::Array(raw.split(',').map(scalar).collect())
    } else {
        scalar(raw)
    }
}

fn apply_override(root: &mut toml::Value, key: &str, value: &str) -> Result<(), PipelineError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| PipelineError::BadOverride(key.to_string()))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    let table = node
        .as_table_mut()
        .ok_or_else(|| PipelineError::BadOverride(key.to_string()))?;
    table.insert(parts[parts.len() - 1].to_string(), infer_value(value));
    Ok(())
}

impl Config {
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Config, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut value: toml::Value =
            text.parse().map_err(|e: toml::de::Error| PipelineError::Config {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?;
        for (k, v) in overrides {
            apply_override(&mut value, k, v)?;
        }
        let mut config: Config = value.try_into().map_err(|e| PipelineError::Config {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.validate().map_err(|detail| PipelineError::Config {
            path: path.display().to_string(),
            detail,
        })?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        fn fix(base: &Path, p: &mut PathBuf) {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
        let i = &mut self.inputs;
        fix(base, &mut i.page_sql);
        fix(base, &mut i.category_sql);
        fix(base, &mut i.categorylinks_sql);
        fix(base, &mut i.externallinks_sql);
        fix(base, &mut i.pagelinks_sql);
        fix(base, &mut i.page_props_sql);
        for p in &mut i.revisions_xml {
            fix(base, p);
        }
        for p in &mut i.pageviews {
            fix(base, p);
        }
        fix(base, &mut i.citations);
        if let Some(p) = &mut i.assessments {
            fix(base, p);
        }
        if let Some(p) = &mut i.exclusions {
            fix(base, p);
        }
        fix(base, &mut self.output.dir);
        if let Some(p) = &mut self.rules.domain_rules {
            fix(base, p);
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.wiki_code.is_empty() {
            return Err("wiki_code must not be empty".to_string());
        }
        if !(0.0..=1.0).contains(&self.limits.malformed_tolerance) {
            return Err(format!(
                "limits.malformed_tolerance must be in [0, 1], got {}",
                self.limits.malformed_tolerance
            ));
        }
        if self.limits.memory_ceiling_bytes < 1024 * 1024 {
            return Err("limits.memory_ceiling_bytes must be at least 1 MiB".to_string());
        }
        if self.window.views_start > self.window.views_end {
            return Err(format!(
                "window.views_start {} is after views_end {}",
                self.window.views_start, self.window.views_end
            ));
        }
        if self.inputs.revisions_xml.is_empty() {
            return Err("inputs.revisions_xml must list at least one file".to_string());
        }
        if self.inputs.pageviews.is_empty() {
            return Err("inputs.pageviews must list at least one file".to_string());
        }
        if self.identifiers.schemes.is_empty() {
            return Err("identifiers.schemes must not be empty".to_string());
        }
        if self.analysis.top_n == 0 {
            return Err("analysis.top_n must be positive".to_string());
        }
        for (k, _) in &self.namespace_names {
            if k.parse::<i32>().is_err() {
                return Err(format!("namespace_names key {k:?} is not a namespace number"));
            }
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> IdentifierVocabulary {
        IdentifierVocabulary::new(&self.identifiers.schemes)
    }

    pub fn namespace_names(&self) -> NamespaceNames {
        if self.namespace_names.is_empty() {
            return NamespaceNames::default();
        }
        let map: BTreeMap<i32, String> = self
            .namespace_names
            .iter()
            .map(|(k, v)| (k.parse::<i32>().expect("validated"), v.clone()))
            .collect();
        NamespaceNames::from_map(map)
    }

    pub fn pageview_filter(&self) -> PageViewFilter {
        PageViewFilter {
            wiki_code: self.wiki_code.clone(),
            start: self.window.views_start,
            end: self.window.views_end,
            agents: self.flags.agent_types.iter().cloned().collect(),
            malformed_tolerance: self.limits.malformed_tolerance,
        }
    }

    /// In-memory budget for one external sort, a quarter of the
    /// process ceiling (sorter, probe and writer buffers share it).
    pub fn sort_budget(&self) -> usize {
        ((self.limits.memory_ceiling_bytes / 4).max(1024 * 1024)) as usize
    }
}
