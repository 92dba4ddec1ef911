//! Stage orchestration: `build` runs the eight checkpointed stages,
//! the other commands read what `build` produced.
//!
//! Stage graph (each stage lists what it consumes):
//!
//! ```text
//! revisions   history XML shards        -> .staging/rev_agg.tsv
//! views       pageview files            -> .staging/views_agg.tsv
//! pages       page SQL + both above     -> page.tsv
//! categories  category/links/props SQL  -> category.tsv, page_category.tsv, page_property.tsv
//! links       pagelinks SQL + pages     -> page_link.tsv
//! urls        externallinks + citations -> url.tsv, page_url.tsv, url_rejects.tsv
//! pubs        citations + pages         -> pub.tsv, page_pub.tsv
//! verify      all nine tables           -> integrity_report.txt
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use rayon::prelude::*;

use crate::analysis::{
    class_means, class_membership, load_exclusions, metric_columns, rank_top_n,
    read_assessments, report as analysis_report, spearman_matrix, AnalysisError, SummaryStats,
};
use crate::citations::{parse_citations, CitationRecord};
use crate::compress::open_input;
use crate::graph::categories::{build_category_tables, CategoryOutputs};
use crate::graph::integrity::{verify_graph, IntegrityReport};
use crate::graph::links::{build_page_links, LinkOptions};
use crate::graph::pages::build_page_table;
use crate::graph::records::{format_time, parse_time, PageTableReader};
use crate::graph::resources::{build_pub_tables, build_url_tables, PubOutputs, UrlInput, UrlOutputs};
use crate::graph::{
    BuildLimits, Counters, GraphError, CATEGORY_FILE, GRAPH_FILES, PAGE_CATEGORY_FILE, PAGE_FILE,
    PAGE_LINK_FILE, PAGE_PROPERTY_FILE, PAGE_PUB_FILE, PAGE_URL_FILE, PUB_FILE, URL_FILE,
};
use crate::metrics::{
    compute_article_metrics, read_metrics, write_metrics, ArticleMetrics, MetricsOptions,
    METRICS_FILE, METRIC_NAMES,
};
use crate::pageviews::{parse_pageviews, PageViewStats, ViewTotals};
use crate::revisions::{parse_revision_xml, RevisionAggregate, RevisionTally};
use crate::sql::parse_sql_dump;
use crate::tables::{
    categorylinks_schema, category_schema, extract_category, extract_categorylink,
    extract_externallink, extract_page, extract_page_prop, extract_pagelink, externallinks_schema,
    page_props_schema, page_schema, pagelinks_schema, RawCategoryRow, RawPageRow,
};
use crate::tsv::{TsvReader, TsvWriter};

use super::checkpoint::{file_digest, fingerprint, Checkpoints, FORMAT_VERSION};
use super::config::Config;
use super::PipelineError;

pub const REV_AGG_FILE: &str = "rev_agg.tsv";
pub const VIEWS_AGG_FILE: &str = "views_agg.tsv";
pub const URL_REJECTS_FILE: &str = "url_rejects.tsv";
pub const INTEGRITY_REPORT_FILE: &str = "integrity_report.txt";
pub const RUN_REPORT_FILE: &str = "run_report.txt";
pub const ANALYSIS_REPORT_FILE: &str = "report.txt";
pub const CLASS_MEANS_FILE: &str = "class_means.tsv";
pub const SUMMARY_STATS_FILE: &str = "summary_stats.tsv";
pub const CORRELATIONS_FILE: &str = "correlations.tsv";

const REV_AGG_HEADER: [&str; 4] = ["page_id", "edits", "editors", "created"];
const VIEWS_AGG_HEADER: [&str; 3] = ["kind", "key", "views"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageStatus {
    pub name: &'static str,
    pub ran: bool,
}

#[derive(Debug)]
pub struct BuildOutcome {
    pub counters: Counters,
    pub stages: Vec<StageStatus>,
}

impl BuildOutcome {
    /// True when every stage was skipped: inputs and parameters are
    /// unchanged since the last successful run.
    pub fn all_current(&self) -> bool {
        self.stages.iter().all(|s| !s.ran)
    }
}

struct Build<'a> {
    config: &'a Config,
    out: PathBuf,
    staging: PathBuf,
    cp: Checkpoints,
    force: bool,
    counters: Counters,
    stages: Vec<StageStatus>,
}

fn digest_input(stage: &'static str, path: &Path) -> Result<String, PipelineError> {
    if !path.is_file() {
        return Err(PipelineError::MissingInput { stage, path: path.to_path_buf() });
    }
    Ok(file_digest(path)?)
}

fn rename(from: &Path, to: &Path) -> Result<(), PipelineError> {
    fs::rename(from, to)?;
    Ok(())
}

pub(crate) fn write_rev_agg(
    path: &Path,
    aggregates: &BTreeMap<u64, RevisionAggregate>,
) -> Result<(), PipelineError> {
    let mut w = TsvWriter::create(path, &REV_AGG_HEADER)?;
    for (id, agg) in aggregates {
        w.write_row(&[
            id.to_string(),
            agg.edits.to_string(),
            agg.editors.to_string(),
            format_time(agg.created.naive_utc()),
        ])?;
    }
    w.finish()?;
    Ok(())
}

pub(crate) fn load_rev_agg(
    path: &Path,
) -> Result<BTreeMap<u64, RevisionAggregate>, PipelineError> {
    let bad = |detail: String| GraphError::BadGraphFile {
        file: path.display().to_string(),
        detail,
    };
    let mut reader = TsvReader::open_expecting(path, &REV_AGG_HEADER)?;
    let mut map = BTreeMap::new();
    while let Some(row) = reader.next_row()? {
        let id: u64 = row[0].parse().map_err(|_| bad(format!("bad page_id {:?}", row[0])))?;
        let edits: u64 = row[1].parse().map_err(|_| bad(format!("bad edits {:?}", row[1])))?;
        let editors: u64 =
            row[2].parse().map_err(|_| bad(format!("bad editors {:?}", row[2])))?;
        let created = parse_time(&row[3])
            .ok_or_else(|| bad(format!("bad created timestamp {:?}", row[3])))?;
        map.insert(
            id,
            RevisionAggregate {
                edits,
                editors,
                created: DateTime::from_naive_utc_and_offset(created, Utc),
            },
        );
    }
    Ok(map)
}

pub(crate) fn write_views_agg(path: &Path, totals: &ViewTotals) -> Result<(), PipelineError> {
    let mut w = TsvWriter::create(path, &VIEWS_AGG_HEADER)?;
    let mut ids: Vec<(&u64, &u64)> = totals.by_id.iter().collect();
    ids.sort();
    for (id, views) in ids {
        w.write_row(&["id".to_string(), id.to_string(), views.to_string()])?;
    }
    let mut titles: Vec<(&String, &u64)> = totals.by_title.iter().collect();
    titles.sort();
    for (title, views) in titles {
        w.write_row(&["title".to_string(), title.clone(), views.to_string()])?;
    }
    w.finish()?;
    Ok(())
}

pub(crate) fn load_views_agg(path: &Path) -> Result<ViewTotals, PipelineError> {
    let bad = |detail: String| GraphError::BadGraphFile {
        file: path.display().to_string(),
        detail,
    };
    let mut reader = TsvReader::open_expecting(path, &VIEWS_AGG_HEADER)?;
    let mut totals = ViewTotals::default();
    while let Some(row) = reader.next_row()? {
        let views: u64 = row[2].parse().map_err(|_| bad(format!("bad views {:?}", row[2])))?;
        match row[0].as_str() {
            "id" => {
                let id: u64 =
                    row[1].parse().map_err(|_| bad(format!("bad page_id {:?}", row[1])))?;
                totals.by_id.insert(id, views);
            }
            "title" => {
                totals.by_title.insert(row[1].clone(), views);
            }
            other => return Err(bad(format!("bad kind {other:?}")).into()),
        }
    }
    Ok(totals)
}

impl<'a> Build<'a> {
    fn limits(&self) -> BuildLimits {
        BuildLimits::new(self.config.sort_budget(), &self.staging.join("tmp"))
    }

    /// Runs `body` unless the recorded fingerprint matches and all
    /// outputs exist. The fingerprint is cleared first so a crash
    /// mid-stage can never masquerade as current.
    fn run_stage<F>(
        &mut self,
        name: &'static str,
        fp: String,
        outputs: &[PathBuf],
        body: F,
    ) -> Result<String, PipelineError>
    where
        F: FnOnce(&Build<'a>, &mut Counters) -> Result<(), PipelineError>,
    {
        let current = !self.force
            && self.cp.is_current(name, &fp)
            && outputs.iter().all(|p| p.is_file());
        if current {
            let saved = self.cp.load_counters(name)?;
            self.counters.merge(&saved);
            self.stages.push(StageStatus { name, ran: false });
            return Ok(fp);
        }
        self.cp.invalidate(name)?;
        let mut stage_counters = Counters::new();
        body(self, &mut stage_counters)
            .map_err(|e| PipelineError::Stage { stage: name, source: Box::new(e) })?;
        self.cp.save_counters(name, &stage_counters)?;
        self.cp.record(name, &fp)?;
        self.counters.merge(&stage_counters);
        self.stages.push(StageStatus { name, ran: true });
        Ok(fp)
    }

    fn stage_revisions(&mut self) -> Result<String, PipelineError> {
        const NAME: &str = "revisions";
        let mut parts = vec![FORMAT_VERSION.to_string(), NAME.to_string()];
        for p in &self.config.inputs.revisions_xml {
            parts.push(digest_input(NAME, p)?);
        }
        let fp = fingerprint(&parts);
        let out_path = self.staging.join(REV_AGG_FILE);
        let outputs = [out_path.clone()];
        self.run_stage(NAME, fp, &outputs, |b, c| {
            let results: Result<Vec<(RevisionTally, u64)>, GraphError> = b
                .config
                .inputs
                .revisions_xml
                .par_iter()
                .map(|path| {
                    let input = open_input(path)?;
                    let mut tally = RevisionTally::new();
                    let mut events = 0u64;
                    for ev in parse_revision_xml(input) {
                        tally.add(&ev?);
                        events += 1;
                    }
                    Ok((tally, events))
                })
                .collect();
            let mut merged = RevisionTally::new();
            let mut events = 0u64;
            for (tally, n) in results? {
                merged = merged.merge(tally);
                events += n;
            }
            let aggregates = merged.finish();
            write_rev_agg(&out_path, &aggregates)?;
            c.set("revisions.shards", b.config.inputs.revisions_xml.len() as u64);
            c.set("revisions.events", events);
            c.set("revisions.pages", aggregates.len() as u64);
            Ok(())
        })
    }

    fn stage_views(&mut self) -> Result<String, PipelineError> {
        const NAME: &str = "views";
        let cfg = self.config;
        let mut parts = vec![FORMAT_VERSION.to_string(), NAME.to_string()];
        for p in &cfg.inputs.pageviews {
            parts.push(digest_input(NAME, p)?);
        }
        parts.push(cfg.wiki_code.clone());
        parts.push(cfg.window.views_start.to_string());
        parts.push(cfg.window.views_end.to_string());
        parts.push(cfg.flags.agent_types.join(","));
        parts.push(cfg.limits.malformed_tolerance.to_string());
        parts.push(format!("{:?}", cfg.pageviews));
        let fp = fingerprint(&parts);
        let out_path = self.staging.join(VIEWS_AGG_FILE);
        let outputs = [out_path.clone()];
        self.run_stage(NAME, fp, &outputs, |b, c| {
            let filter = b.config.pageview_filter();
            let results: Result<Vec<(ViewTotals, PageViewStats)>, PipelineError> = b
                .config
                .inputs
                .pageviews
                .par_iter()
                .map(|path| {
                    let map = b.config.pageviews.column_map(path)?;
                    let input = open_input(path).map_err(GraphError::from)?;
                    let mut parser = parse_pageviews(input, map, filter.clone());
                    let mut totals = ViewTotals::default();
                    for rec in parser.by_ref() {
                        totals.add(&rec.map_err(GraphError::from)?);
                    }
                    Ok((totals, parser.stats()))
                })
                .collect();
            let mut totals = ViewTotals::default();
            let mut stats = PageViewStats::default();
            for (t, s) in results? {
                totals.merge(t);
                stats.lines += s.lines;
                stats.malformed += s.malformed;
                stats.filtered += s.filtered;
                stats.kept += s.kept;
            }
            write_views_agg(&out_path, &totals)?;
            c.set("views.files", b.config.inputs.pageviews.len() as u64);
            c.set("views.lines", stats.lines);
            c.set("views.malformed", stats.malformed);
            c.set("views.filtered", stats.filtered);
            c.set("views.kept", stats.kept);
            Ok(())
        })
    }

    fn stage_pages(&mut self, fp_rev: &str, fp_views: &str) -> Result<String, PipelineError> {
        const NAME: &str = "pages";
        let fp = fingerprint(&[
            FORMAT_VERSION.to_string(),
            NAME.to_string(),
            digest_input(NAME, &self.config.inputs.page_sql)?,
            fp_rev.to_string(),
            fp_views.to_string(),
            format!("{:?}", self.config.namespace_names),
        ]);
        let staged = self.staging.join(PAGE_FILE);
        let final_path = self.out.join(PAGE_FILE);
        let outputs = [final_path.clone()];
        self.run_stage(NAME, fp, &outputs, |b, c| {
            let revisions = load_rev_agg(&b.staging.join(REV_AGG_FILE))?;
            let views = load_views_agg(&b.staging.join(VIEWS_AGG_FILE))?;
            let ns_names = b.config.namespace_names();
            let schema = page_schema();
            let input = open_input(&b.config.inputs.page_sql).map_err(GraphError::from)?;
            let rows = parse_sql_dump(input, &schema)
                .map(|r| -> Result<RawPageRow, GraphError> { Ok(extract_page(&r?)?) });
            build_page_table(rows, &revisions, &views, &ns_names, &staged, &b.limits(), c)?;
            rename(&staged, &final_path)
        })
    }

    fn stage_categories(&mut self, fp_pages: &str) -> Result<String, PipelineError> {
        const NAME: &str = "categories";
        let fp = fingerprint(&[
            FORMAT_VERSION.to_string(),
            NAME.to_string(),
            digest_input(NAME, &self.config.inputs.category_sql)?,
            digest_input(NAME, &self.config.inputs.categorylinks_sql)?,
            digest_input(NAME, &self.config.inputs.page_props_sql)?,
            fp_pages.to_string(),
        ]);
        let staged: Vec<PathBuf> = [CATEGORY_FILE, PAGE_CATEGORY_FILE, PAGE_PROPERTY_FILE]
            .iter()
            .map(|f| self.staging.join(f))
            .collect();
        let finals: Vec<PathBuf> = [CATEGORY_FILE, PAGE_CATEGORY_FILE, PAGE_PROPERTY_FILE]
            .iter()
            .map(|f| self.out.join(f))
            .collect();
        let outputs = finals.clone();
        self.run_stage(NAME, fp, &outputs, |b, c| {
            let cat_schema = category_schema();
            let cats = parse_sql_dump(
                open_input(&b.config.inputs.category_sql).map_err(GraphError::from)?,
                &cat_schema,
            )
            .map(|r| -> Result<RawCategoryRow, GraphError> { Ok(extract_category(&r?)?) });
            let cl_schema = categorylinks_schema();
            let links = parse_sql_dump(
                open_input(&b.config.inputs.categorylinks_sql).map_err(GraphError::from)?,
                &cl_schema,
            )
            .map(|r| Ok(extract_categorylink(&r?)?));
            let pp_schema = page_props_schema();
            let props = parse_sql_dump(
                open_input(&b.config.inputs.page_props_sql).map_err(GraphError::from)?,
                &pp_schema,
            )
            .map(|r| Ok(extract_page_prop(&r?)?));
            build_category_tables(
                cats,
                links,
                props,
                &b.out,
                &CategoryOutputs {
                    category: &staged[0],
                    page_category: &staged[1],
                    page_property: &staged[2],
                },
                &b.limits(),
                c,
            )?;
            for (from, to) in staged.iter().zip(&finals) {
                rename(from, to)?;
            }
            Ok(())
        })
    }

    fn stage_links(&mut self, fp_pages: &str) -> Result<String, PipelineError> {
        const NAME: &str = "links";
        let fp = fingerprint(&[
            FORMAT_VERSION.to_string(),
            NAME.to_string(),
            digest_input(NAME, &self.config.inputs.pagelinks_sql)?,
            fp_pages.to_string(),
            format!("{:?}", self.config.scope.namespaces),
            self.config.flags.resolve_redirects.to_string(),
        ]);
        let staged = self.staging.join(PAGE_LINK_FILE);
        let final_path = self.out.join(PAGE_LINK_FILE);
        let outputs = [final_path.clone()];
        self.run_stage(NAME, fp, &outputs, |b, c| {
            let schema = pagelinks_schema();
            let rows = parse_sql_dump(
                open_input(&b.config.inputs.pagelinks_sql).map_err(GraphError::from)?,
                &schema,
            )
            .map(|r| Ok(extract_pagelink(&r?)?));
            let opts = LinkOptions {
                scope_namespaces: b.config.scope.namespaces.clone(),
                resolve_redirects: b.config.flags.resolve_redirects,
            };
            build_page_links(rows, &b.out, &staged, &opts, &b.limits(), c)?;
            rename(&staged, &final_path)
        })
    }

    fn stage_urls(&mut self, fp_pages: &str) -> Result<String, PipelineError> {
        const NAME: &str = "urls";
        let rules_digest = match &self.config.rules.domain_rules {
            Some(p) => digest_input(NAME, p)?,
            None => "builtin".to_string(),
        };
        let fp = fingerprint(&[
            FORMAT_VERSION.to_string(),
            NAME.to_string(),
            digest_input(NAME, &self.config.inputs.externallinks_sql)?,
            digest_input(NAME, &self.config.inputs.citations)?,
            rules_digest,
            fp_pages.to_string(),
            format!("{:?}", self.config.citations),
            self.config.limits.malformed_tolerance.to_string(),
        ]);
        let staged: Vec<PathBuf> = [URL_FILE, PAGE_URL_FILE, URL_REJECTS_FILE]
            .iter()
            .map(|f| self.staging.join(f))
            .collect();
        let finals: Vec<PathBuf> = [URL_FILE, PAGE_URL_FILE, URL_REJECTS_FILE]
            .iter()
            .map(|f| self.out.join(f))
            .collect();
        let outputs = finals.clone();
        self.run_stage(NAME, fp, &outputs, |b, c| {
            let rules = match &b.config.rules.domain_rules {
                Some(p) => crate::normalize::UrlRules::load(p)?,
                None => crate::normalize::UrlRules::default(),
            };
            let el_schema = externallinks_schema();
            let ext = parse_sql_dump(
                open_input(&b.config.inputs.externallinks_sql).map_err(GraphError::from)?,
                &el_schema,
            )
            .map(|r| -> Result<UrlInput, GraphError> {
                let row = extract_externallink(&r?)?;
                Ok(UrlInput {
                    page_id: row.from_page_id,
                    raw_url: row.raw_url,
                    in_reference: false,
                })
            });
            let map = b
                .config
                .citations
                .column_map(&b.config.identifiers.schemes, b.config.limits.malformed_tolerance)?;
            let parser =
                parse_citations(open_input(&b.config.inputs.citations).map_err(GraphError::from)?, &map)
                    .map_err(GraphError::from)?;
            let cit = parser.flat_map(|r| -> Vec<Result<UrlInput, GraphError>> {
                match r {
                    Ok(rec) => {
                        let page_id = rec.source_page_id;
                        rec.urls
                            .into_iter()
                            .map(|raw_url| {
                                Ok(UrlInput { page_id, raw_url, in_reference: true })
                            })
                            .collect()
                    }
                    Err(e) => vec![Err(GraphError::from(e))],
                }
            });
            build_url_tables(
                ext.chain(cit),
                &rules,
                &b.out,
                &UrlOutputs { url: &staged[0], page_url: &staged[1], rejects: &staged[2] },
                &b.limits(),
                c,
            )?;
            for (from, to) in staged.iter().zip(&finals) {
                rename(from, to)?;
            }
            Ok(())
        })
    }

    fn stage_pubs(&mut self, fp_pages: &str) -> Result<String, PipelineError> {
        const NAME: &str = "pubs";
        let fp = fingerprint(&[
            FORMAT_VERSION.to_string(),
            NAME.to_string(),
            digest_input(NAME, &self.config.inputs.citations)?,
            fp_pages.to_string(),
            self.config.identifiers.schemes.join(","),
            format!("{:?}", self.config.citations),
            self.config.limits.malformed_tolerance.to_string(),
        ]);
        let staged: Vec<PathBuf> =
            [PUB_FILE, PAGE_PUB_FILE].iter().map(|f| self.staging.join(f)).collect();
        let finals: Vec<PathBuf> =
            [PUB_FILE, PAGE_PUB_FILE].iter().map(|f| self.out.join(f)).collect();
        let outputs = finals.clone();
        self.run_stage(NAME, fp, &outputs, |b, c| {
            let vocab = b.config.vocabulary();
            let map = b
                .config
                .citations
                .column_map(&b.config.identifiers.schemes, b.config.limits.malformed_tolerance)?;
            let parser =
                parse_citations(open_input(&b.config.inputs.citations).map_err(GraphError::from)?, &map)
                    .map_err(GraphError::from)?;
            let records =
                parser.map(|r| -> Result<CitationRecord, GraphError> { Ok(r?) });
            build_pub_tables(
                records,
                &vocab,
                &b.out,
                &PubOutputs { publication: &staged[0], page_pub: &staged[1] },
                &b.limits(),
                c,
            )?;
            for (from, to) in staged.iter().zip(&finals) {
                rename(from, to)?;
            }
            Ok(())
        })
    }

    fn stage_verify(&mut self, upstream: &[String]) -> Result<String, PipelineError> {
        const NAME: &str = "verify";
        let mut parts = vec![FORMAT_VERSION.to_string(), NAME.to_string()];
        parts.extend(upstream.iter().cloned());
        let fp = fingerprint(&parts);
        let report_path = self.out.join(INTEGRITY_REPORT_FILE);
        let outputs = [report_path.clone()];
        self.run_stage(NAME, fp, &outputs, |b, c| {
            let report = verify_graph(&b.out)?;
            fs::write(&report_path, report.render())?;
            c.set("verify.rows", report.total_rows());
            c.set("verify.violations", report.total_violations());
            if !report.is_clean() {
                return Err(PipelineError::IntegrityViolations(report.total_violations()));
            }
            Ok(())
        })
    }

    fn write_run_report(&mut self) -> Result<(), PipelineError> {
        for s in &self.stages {
            let key = format!("stage.{}", s.name);
            self.counters.set(&key, u64::from(s.ran));
        }
        fs::write(self.out.join(RUN_REPORT_FILE), self.counters.to_string())?;
        Ok(())
    }
}

/// Runs every stale stage in dependency order. With `force`, reruns
/// everything regardless of checkpoints.
pub fn cmd_build(config: &Config, force: bool) -> Result<BuildOutcome, PipelineError> {
    let out = config.output.dir.clone();
    let staging = out.join(".staging");
    fs::create_dir_all(staging.join("tmp"))?;
    let cp = Checkpoints::open(&out)?;
    let mut b = Build {
        config,
        out,
        staging,
        cp,
        force,
        counters: Counters::new(),
        stages: Vec::new(),
    };

    let fp_rev = b.stage_revisions()?;
    let fp_views = b.stage_views()?;
    let fp_pages = b.stage_pages(&fp_rev, &fp_views)?;
    let fp_cats = b.stage_categories(&fp_pages)?;
    let fp_links = b.stage_links(&fp_pages)?;
    let fp_urls = b.stage_urls(&fp_pages)?;
    let fp_pubs = b.stage_pubs(&fp_pages)?;
    b.stage_verify(&[fp_cats, fp_links, fp_urls, fp_pubs])?;

    b.write_run_report()?;
    Ok(BuildOutcome { counters: b.counters, stages: b.stages })
}

/// Reference count per page: one per citation record, whatever the
/// record's identifiers turn out to be.
fn load_reference_counts(config: &Config) -> Result<HashMap<u64, u64>, PipelineError> {
    let path = &config.inputs.citations;
    if !path.is_file() {
        return Err(PipelineError::MissingInput { stage: "metrics", path: path.clone() });
    }
    let map = config
        .citations
        .column_map(&config.identifiers.schemes, config.limits.malformed_tolerance)?;
    let parser = parse_citations(open_input(path).map_err(GraphError::from)?, &map)
        .map_err(GraphError::from)?;
    let mut counts = HashMap::new();
    for rec in parser {
        let rec = rec.map_err(GraphError::from)?;
        *counts.entry(rec.source_page_id).or_insert(0u64) += 1;
    }
    Ok(counts)
}

fn require_graph(out: &Path) -> Result<(), PipelineError> {
    for f in GRAPH_FILES {
        if !out.join(f).is_file() {
            return Err(PipelineError::MissingGraph(out.to_path_buf()));
        }
    }
    Ok(())
}

/// Computes `metrics.tsv` from a verified graph directory.
pub fn cmd_metrics(config: &Config) -> Result<Counters, PipelineError> {
    let out = &config.output.dir;
    require_graph(out)?;
    let report = verify_graph(out)?;
    if !report.is_clean() {
        return Err(PipelineError::IntegrityViolations(report.total_violations()));
    }
    let references = load_reference_counts(config)?;
    let opts = MetricsOptions {
        as_of: config.window.as_of,
        fold_talk_archives: config.flags.include_talk_archives,
    };
    let mut counters = Counters::new();
    let rows = compute_article_metrics(out, &references, &opts, &mut counters)?;
    write_metrics(&out.join(METRICS_FILE), &rows)?;
    Ok(counters)
}

/// Checks all nine tables; never mutates anything.
pub fn cmd_verify(config: &Config) -> Result<IntegrityReport, PipelineError> {
    let out = &config.output.dir;
    require_graph(out)?;
    Ok(verify_graph(out)?)
}

fn metric_value(m: &ArticleMetrics, name: &str) -> f64 {
    m.value(name).expect("name validated against METRIC_NAMES")
}

/// Produces the per-class means, summaries, correlation matrix and
/// rankings, plus `report.txt`.
pub fn cmd_analyze(config: &Config) -> Result<Counters, PipelineError> {
    let out = &config.output.dir;
    let metrics_path = out.join(METRICS_FILE);
    if !metrics_path.is_file() {
        return Err(PipelineError::MissingMetrics(metrics_path));
    }
    if !out.join(PAGE_FILE).is_file() {
        return Err(PipelineError::MissingGraph(out.clone()));
    }
    let metrics = read_metrics(&metrics_path)?;
    let mut counters = Counters::new();
    counters.set("analysis.articles", metrics.len() as u64);

    let mut titles: HashMap<u64, String> = HashMap::new();
    let mut reader = PageTableReader::open(out)?;
    while let Some(rec) = reader.next_record()? {
        if rec.namespace == 0 && !rec.is_redirect {
            titles.insert(rec.page_id, rec.title);
        }
    }

    let membership = match &config.inputs.assessments {
        Some(path) => {
            if !path.is_file() {
                return Err(PipelineError::MissingInput { stage: "analyze", path: path.clone() });
            }
            let (rows, stats) = read_assessments(path)?;
            counters.set("analysis.assessment_rows", stats.rows);
            counters.set("analysis.assessments_kept", stats.kept);
            counters.set("analysis.assessments_unknown_class", stats.skipped_unknown_class);
            counters.set("analysis.assessments_bad_rows", stats.skipped_bad_row);
            class_membership(&rows)
        }
        None => HashMap::new(),
    };
    let exclusions = match &config.inputs.exclusions {
        Some(path) => {
            if !path.is_file() {
                return Err(PipelineError::MissingInput { stage: "analyze", path: path.clone() });
            }
            let set = load_exclusions(path)?;
            counters.set("analysis.excluded_titles", set.len() as u64);
            set
        }
        None => HashSet::new(),
    };

    let class_cols = class_means(&metrics, &membership);
    counters.set("analysis.class_columns", class_cols.len() as u64);
    analysis_report::write_class_means(&out.join(CLASS_MEANS_FILE), &class_cols)?;

    let summaries: Vec<SummaryStats> = METRIC_NAMES
        .iter()
        .filter_map(|name| {
            let col: Vec<f64> = metrics.iter().map(|m| metric_value(m, name)).collect();
            crate::analysis::describe(name, &col)
        })
        .collect();
    analysis_report::write_summary_stats(&out.join(SUMMARY_STATS_FILE), &summaries)?;

    let corr_names: Vec<String> = if config.analysis.correlation_metrics.is_empty() {
        METRIC_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        config.analysis.correlation_metrics.clone()
    };
    let columns = metric_columns(&metrics, &corr_names)?;
    let matrix = spearman_matrix(&columns);
    analysis_report::write_correlations(&out.join(CORRELATIONS_FILE), &matrix)?;

    let mut rankings = Vec::new();
    for metric in &config.analysis.top_metrics {
        if !METRIC_NAMES.contains(&metric.as_str()) {
            return Err(AnalysisError::UnknownMetric(metric.clone()).into());
        }
        let rows: Vec<(u64, String, f64)> = metrics
            .iter()
            .map(|m| {
                (
                    m.page_id,
                    titles.get(&m.page_id).cloned().unwrap_or_default(),
                    metric_value(m, metric),
                )
            })
            .collect();
        let top = rank_top_n(&rows, config.analysis.top_n, &exclusions);
        analysis_report::write_top(&out.join(format!("top_{metric}.tsv")), &top)?;
        rankings.push((metric.clone(), top));
    }

    let text = analysis_report::render_report(&class_cols, &summaries, &matrix, &rankings);
    fs::write(out.join(ANALYSIS_REPORT_FILE), text)?;
    Ok(counters)
}

/// Concatenates the build counters and the analysis report.
pub fn cmd_report(config: &Config) -> Result<String, PipelineError> {
    let out = &config.output.dir;
    let run = out.join(RUN_REPORT_FILE);
    let analysis = out.join(ANALYSIS_REPORT_FILE);
    if !run.is_file() && !analysis.is_file() {
        return Err(PipelineError::NoReports(out.clone()));
    }
    let mut text = String::new();
    if run.is_file() {
        text.push_str("RUN COUNTERS\n============\n");
        text.push_str(&fs::read_to_string(&run)?);
    }
    if analysis.is_file() {
        if !text.is_empty() {
            text.push('\n');
        }
        text.push_str(&fs::read_to_string(&analysis)?);
    }
    Ok(text)
}
