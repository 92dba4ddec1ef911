//! Descriptive statistics over the metrics table: per-class means,
//! five-number summaries, rank correlations, top-N rankings.

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::metrics::{ArticleMetrics, METRIC_NAMES};
use crate::tsv::TsvError;

pub mod quality;
pub mod ranking;
pub mod report;
pub mod stats;

pub use quality::{
    class_membership, read_assessments, AssessmentStats, QualityAssessment, QualityClass,
};
pub use ranking::{load_exclusions, rank_top_n, RankEntry};
pub use stats::{
    describe, midranks, quantile_sorted, spearman, spearman_matrix, CorrelationMatrix,
    StatsError, SummaryStats,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tsv(#[from] TsvError),
    #[error("unknown metric: {0}")]
    UnknownMetric(String),
}

/// Mean of each metric over one group of articles. `means` follows
/// [`METRIC_NAMES`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassColumn {
    pub label: String,
    pub n: u64,
    pub means: Vec<f64>,
}

fn mean_column(label: &str, group: &[&ArticleMetrics]) -> ClassColumn {
    let n = group.len() as u64;
    let means = METRIC_NAMES
        .iter()
        .map(|name| {
            let sum: f64 = group
                .iter()
                .map(|m| m.value(name).expect("METRIC_NAMES entry"))
                .sum();
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect();
    ClassColumn { label: label.to_string(), n, means }
}

/// One column for all articles, then one per quality class that has
/// at least one member, in grade order. An article assessed with
/// several grades counts in each of them.
pub fn class_means(
    metrics: &[ArticleMetrics],
    membership: &HashMap<u64, BTreeSet<QualityClass>>,
) -> Vec<ClassColumn> {
    let all: Vec<&ArticleMetrics> = metrics.iter().collect();
    let mut out = vec![mean_column("All", &all)];
    for class in QualityClass::ALL {
        let group: Vec<&ArticleMetrics> = metrics
            .iter()
            .filter(|m| membership.get(&m.page_id).is_some_and(|s| s.contains(&class)))
            .collect();
        if !group.is_empty() {
            out.push(mean_column(class.label(), &group));
        }
    }
    out
}

/// Extracts named metric columns for correlation, failing on a name
/// outside the metric set.
pub fn metric_columns(
    metrics: &[ArticleMetrics],
    names: &[String],
) -> Result<Vec<(String, Vec<f64>)>, AnalysisError> {
    names
        .iter()
        .map(|name| {
            if !METRIC_NAMES.contains(&name.as_str()) {
                return Err(AnalysisError::UnknownMetric(name.clone()));
            }
            let col = metrics
                .iter()
                .map(|m| m.value(name).expect("checked against METRIC_NAMES"))
                .collect();
            Ok((name.clone(), col))
        })
        .collect()
}
