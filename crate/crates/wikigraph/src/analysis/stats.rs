//! Rank statistics: linear-interpolation quantiles, mid-rank
//! transforms, Spearman correlation.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StatsError {
    #[error("length mismatch: {x} vs {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least two observations, got {0}")]
    TooShort(usize),
    #[error("constant vector has no rank order")]
    DegenerateVector,
}

/// Quantile of an ascending-sorted, non-empty slice by linear
/// interpolation of order statistics: `h = (n-1)q`, interpolate
/// between `floor(h)` and the next value (the default of most
/// statistics environments).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty slice");
    debug_assert!((0.0..=1.0).contains(&q));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Ranks 1..=n with ties sharing their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 average to (i + j + 2) / 2.
        let rank = (i + j + 2) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Spearman rank correlation: Pearson over mid-ranks, so ties are
/// handled exactly.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort(x.len()));
    }
    pearson(&midranks(x), &midranks(y)).ok_or(StatsError::DegenerateVector)
}

/// Five-number summary plus whiskers at the furthest values within
/// 1.5 IQR of the quartiles.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub metric: String,
    pub n: u64,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
}

pub fn describe(metric: &str, values: &[f64]) -> Option<SummaryStats> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let whisker_low = *sorted
        .iter()
        .find(|v| **v >= lo_fence)
        .expect("q1 is within its own fence");
    let whisker_high = *sorted
        .iter()
        .rev()
        .find(|v| **v <= hi_fence)
        .expect("q3 is within its own fence");
    Some(SummaryStats {
        metric: metric.to_string(),
        n: sorted.len() as u64,
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        q1,
        median,
        q3,
        whisker_low,
        whisker_high,
    })
}

/// Pairwise Spearman matrix; a `None` cell marks a constant column.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

pub fn spearman_matrix(columns: &[(String, Vec<f64>)]) -> CorrelationMatrix {
    let names: Vec<String> = columns.iter().map(|(n, _)| n.clone()).collect();
    let k = columns.len();
    let ranks: Vec<Vec<f64>> = columns.par_iter().map(|(_, v)| midranks(v)).collect();
    let degenerate: Vec<bool> = columns
        .iter()
        .map(|(_, v)| v.is_empty() || v.iter().all(|x| *x == v[0]))
        .collect();

    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i..k).map(move |j| (i, j)))
        .collect();
    let computed: Vec<((usize, usize), Option<f64>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let cell = if degenerate[i] || degenerate[j] || ranks[i].len() < 2 {
                None
            } else if i == j {
                Some(1.0)
            } else {
                pearson(&ranks[i], &ranks[j])
            };
            ((i, j), cell)
        })
        .collect();

    let mut cells = vec![vec![None; k]; k];
    for ((i, j), cell) in computed {
        cells[i][j] = cell;
        cells[j][i] = cell; // symmetric by construction
    }
    CorrelationMatrix { names, cells }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [15.0, 20.0, 35.0, 40.0, 50.0];
        // h = 4 * 0.4 = 1.6 -> 20 + 0.6 * 15 = 29.
        assert_eq!(quantile_sorted(&v, 0.4), 29.0);
        assert_eq!(quantile_sorted(&v, 0.0), 15.0);
        assert_eq!(quantile_sorted(&v, 1.0), 50.0);
        assert_eq!(quantile_sorted(&v, 0.5), 35.0);
        let four = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&four, 0.25), 1.75);
        assert_eq!(quantile_sorted(&four, 0.5), 2.5);
        assert_eq!(quantile_sorted(&[7.0], 0.5), 7.0);
    }

    #[test]
    fn midranks_average_ties() {
        assert_eq!(midranks(&[10.0, 20.0, 20.0, 30.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(midranks(&[5.0, 5.0, 5.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(midranks(&[3.0, 1.0, 2.0]), vec![3.0, 1.0, 2.0]);
        assert_eq!(midranks(&[]), Vec::<f64>::new());
    }

    #[test]
    fn spearman_textbook_case() {
        // No ties: agrees with the 1 - 6 Σd²/(n(n²-1)) formula.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 5.0];
        let rho = spearman(&x, &y).unwrap();
        assert!((rho - 0.8).abs() < 1e-12, "rho = {rho}");
    }

    #[test]
    fn spearman_is_monotone_invariant() {
        let x = [0.5, 1.0, 3.0, 9.0, 27.0];
        let y: Vec<f64> = x.iter().map(|v| f64::exp(*v)).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        let rev: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((spearman(&x, &rev).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_error_cases() {
        assert_eq!(
            spearman(&[1.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch { x: 1, y: 2 })
        );
        assert_eq!(spearman(&[1.0], &[2.0]), Err(StatsError::TooShort(1)));
        assert_eq!(
            spearman(&[3.0, 3.0, 3.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::DegenerateVector)
        );
    }

    #[test]
    fn describe_computes_whiskers_within_fences() {
        let mut v: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        v.push(100.0); // far outlier
        let s = describe("views", &v).unwrap();
        assert_eq!(s.n, 10);
        // q1 = 3.25, q3 = 7.75 (h = 9 * .75 = 6.75 -> 7 + .75).
        assert!((s.q1 - 3.25).abs() < 1e-12);
        assert!((s.q3 - 7.75).abs() < 1e-12);
        // hi fence = 7.75 + 1.5 * 4.5 = 14.5: whisker stops at 9.
        assert_eq!(s.whisker_high, 9.0);
        assert_eq!(s.whisker_low, 1.0);
        assert!((s.mean - 14.5).abs() < 1e-12);
        assert!(describe("x", &[]).is_none());
    }

    #[test]
    fn matrix_is_symmetric_with_unit_diagonal() {
        let cols = vec![
            ("a".to_string(), vec![1.0, 2.0, 3.0, 4.0]),
            ("b".to_string(), vec![4.0, 3.0, 2.0, 1.0]),
            ("flat".to_string(), vec![7.0, 7.0, 7.0, 7.0]),
        ];
        let m = spearman_matrix(&cols);
        assert_eq!(m.names, vec!["a", "b", "flat"]);
        assert_eq!(m.cells[0][0], Some(1.0));
        assert_eq!(m.cells[1][1], Some(1.0));
        assert_eq!(m.cells[0][1], m.cells[1][0]);
        assert!((m.cells[0][1].unwrap() + 1.0).abs() < 1e-12);
        // Constant column: whole row/column NA, including the diagonal.
        assert_eq!(m.cells[2][2], None);
        assert_eq!(m.cells[0][2], None);
        assert_eq!(m.cells[2][1], None);
    }
}
