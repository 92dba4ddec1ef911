//! Table files and the plain-text report.

use std::fmt::Write as _;
use std::path::Path;

use crate::tsv::TsvWriter;

use super::{AnalysisError, ClassColumn, CorrelationMatrix, RankEntry, SummaryStats};
use crate::metrics::METRIC_NAMES;

fn f2(v: f64) -> String {
    format!("{v:.2}")
}

/// `class_means.tsv`: one row per metric (plus an `articles` count
/// row), one column per group.
pub fn write_class_means(path: &Path, cols: &[ClassColumn]) -> Result<(), AnalysisError> {
    let mut header = vec!["metric"];
    header.extend(cols.iter().map(|c| c.label.as_str()));
    let mut w = TsvWriter::create(path, &header)?;

    let mut counts = vec!["articles".to_string()];
    counts.extend(cols.iter().map(|c| c.n.to_string()));
    w.write_row(&counts)?;

    for (i, name) in METRIC_NAMES.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(cols.iter().map(|c| f2(c.means[i])));
        w.write_row(&row)?;
    }
    w.finish()?;
    Ok(())
}

/// `summary_stats.tsv`: one row per metric.
pub fn write_summary_stats(path: &Path, stats: &[SummaryStats]) -> Result<(), AnalysisError> {
    let mut w = TsvWriter::create(
        path,
        &["metric", "n", "mean", "q1", "median", "q3", "whisker_low", "whisker_high"],
    )?;
    for s in stats {
        w.write_row(&[
            s.metric.clone(),
            s.n.to_string(),
            f2(s.mean),
            f2(s.q1),
            f2(s.median),
            f2(s.q3),
            f2(s.whisker_low),
            f2(s.whisker_high),
        ])?;
    }
    w.finish()?;
    Ok(())
}

/// `correlations.tsv`: square matrix, `NA` where a column was
/// constant.
pub fn write_correlations(path: &Path, m: &CorrelationMatrix) -> Result<(), AnalysisError> {
    let mut header = vec!["metric"];
    header.extend(m.names.iter().map(String::as_str));
    let mut w = TsvWriter::create(path, &header)?;
    for (name, row) in m.names.iter().zip(&m.cells) {
        let mut fields = vec![name.clone()];
        fields.extend(row.iter().map(|c| match c {
            Some(v) => format!("{v:.4}"),
            None => "NA".to_string(),
        }));
        w.write_row(&fields)?;
    }
    w.finish()?;
    Ok(())
}

/// `top_<metric>.tsv`: ranked articles, highest first.
pub fn write_top(path: &Path, entries: &[RankEntry]) -> Result<(), AnalysisError> {
    let mut w = TsvWriter::create(path, &["rank", "page_id", "title", "value"])?;
    for e in entries {
        w.write_row(&[e.rank.to_string(), e.page_id.to_string(), e.title.clone(), f2(e.value)])?;
    }
    w.finish()?;
    Ok(())
}

fn pad_left(s: &str, width: usize) -> String {
    format!("{s:>width$}")
}

fn pad_right(s: &str, width: usize) -> String {
    format!("{s:<width$}")
}

fn section(out: &mut String, title: &str) {
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str(title);
    out.push('\n');
    out.push_str(&"=".repeat(title.len()));
    out.push('\n');
}

fn render_grid(out: &mut String, rows: &[Vec<String>]) {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..columns)
        .map(|i| rows.iter().filter_map(|r| r.get(i)).map(String::len).max().unwrap_or(0))
        .collect();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            // First column is labels, the rest numbers.
            if i == 0 {
                line.push_str(&pad_right(cell, widths[i]));
            } else {
                line.push_str(&pad_left(cell, widths[i]));
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
}

/// The human-readable counterpart of the table files.
pub fn render_report(
    class_cols: &[ClassColumn],
    summaries: &[SummaryStats],
    correlations: &CorrelationMatrix,
    rankings: &[(String, Vec<RankEntry>)],
) -> String {
    let mut out = String::new();

    section(&mut out, "MEAN METRICS BY QUALITY CLASS");
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut head = vec!["metric".to_string()];
    head.extend(class_cols.iter().map(|c| c.label.clone()));
    grid.push(head);
    let mut counts = vec!["articles".to_string()];
    counts.extend(class_cols.iter().map(|c| c.n.to_string()));
    grid.push(counts);
    for (i, name) in METRIC_NAMES.iter().enumerate() {
        let mut row = vec![name.to_string()];
        row.extend(class_cols.iter().map(|c| f2(c.means[i])));
        grid.push(row);
    }
    render_grid(&mut out, &grid);

    section(&mut out, "SUMMARY STATISTICS");
    let mut grid = vec![vec![
        "metric".to_string(),
        "n".to_string(),
        "mean".to_string(),
        "q1".to_string(),
        "median".to_string(),
        "q3".to_string(),
        "whisker_low".to_string(),
        "whisker_high".to_string(),
    ]];
    for s in summaries {
        grid.push(vec![
            s.metric.clone(),
            s.n.to_string(),
            f2(s.mean),
            f2(s.q1),
            f2(s.median),
            f2(s.q3),
            f2(s.whisker_low),
            f2(s.whisker_high),
        ]);
    }
    render_grid(&mut out, &grid);

    section(&mut out, "SPEARMAN RANK CORRELATIONS");
    let mut grid = vec![{
        let mut h = vec![String::new()];
        h.extend(correlations.names.iter().cloned());
        h
    }];
    for (name, row) in correlations.names.iter().zip(&correlations.cells) {
        let mut r = vec![name.clone()];
        r.extend(row.iter().map(|c| match c {
            Some(v) => f2(*v),
            None => "NA".to_string(),
        }));
        grid.push(r);
    }
    render_grid(&mut out, &grid);

    for (metric, entries) in rankings {
        section(&mut out, &format!("TOP {} BY {}", entries.len(), metric.to_uppercase()));
        for e in entries {
            let _ = writeln!(out, "{:>3}. {} ({}) {}", e.rank, e.title, e.page_id, f2(e.value));
        }
    }
    out
}
