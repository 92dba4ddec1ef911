//! Build a relational graph of a Wikipedia edition from its offline dump
//! artifacts, then derive per-article activity metrics and analyses from it.
//!
//! The crate is organized as a set of streaming parsers and normalizers
//! feeding an external-memory graph builder:
//!
//! - [`sql`] / [`tables`]: statement-level parser for MediaWiki SQL dump
//!   files and typed row extraction for the six tables we consume.
//! - [`revisions`]: streaming reader for stub-meta-history XML shards and
//!   mergeable per-page revision tallies.
//! - [`pageviews`] / [`citations`]: line-oriented readers for pageview count
//!   files and the extracted-citations dataset, both with configurable
//!   column maps.
//! - [`normalize`]: URL canonicalization (including archive unwrapping and
//!   per-domain rewrite rules) and bibliographic identifier cleaning.
//! - [`extsort`]: memory-budgeted external sorting, the workhorse behind
//!   every large join in the graph build.
//! - [`graph`]: builders for the nine tab-separated output tables plus
//!   referential-integrity verification.
//! - [`metrics`]: the twelve per-article metrics derived from a built graph.
//! - [`analysis`]: quality-class aggregation, distribution summaries, rank
//!   correlation, and top-N rankings over a metrics table.
//! - [`pipeline`]: configuration, stage orchestration with content-hash
//!   checkpoints, and the run report.
//!
//! Runnable entry points for each capability live in `examples/`; the
//! `wikigraph` binary wires the pipeline into `build` / `metrics` /
//! `analyze` / `report` / `verify` subcommands.

pub mod analysis;
pub mod citations;
pub mod compress;
pub mod extsort;
pub mod graph;
pub mod metrics;
pub mod normalize;
pub mod pageviews;
pub mod pipeline;
pub mod revisions;
pub mod sql;
pub mod tables;
pub mod tsv;
