//! Adjusted Rand indices for partitions with a noise label.
//!
//! Besides the plain ARI over all labels (noise treated as one more group),
//! two noise-aware scores are provided: `ari_c` compares only the points the
//! estimate puts in clusters, `ari_n` compares the cluster/noise split.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Partition;

/// Counts `n_kr` of points in estimated cluster `k` and true cluster `r`.
///
/// Rows `0..K` are the estimated clusters and row `K` the estimated noise;
/// columns `0..R` are the true clusters and column `R` the true noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Number of estimated clusters `K`.
    pub fn est_clusters(&self) -> usize {
        self.counts.len() - 1
    }

    /// Number of true clusters `R`.
    pub fn true_clusters(&self) -> usize {
        self.counts[0].len() - 1
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        let mut sums = vec![0; self.counts[0].len()];
        for row in &self.counts {
            for (s, &c) in sums.iter_mut().zip(row) {
                *s += c;
            }
        }
        sums
    }

    pub fn total(&self) -> u64 {
        self.row_sums().iter().sum()
    }
}

/// Tallies `est` against `truth`.
pub fn contingency(truth: &Partition, est: &Partition) -> Result<ContingencyTable> {
    if truth.len() != est.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), actual: est.len() });
    }
    let (k, r) = (est.num_clusters(), truth.num_clusters());
    let mut counts = vec![vec![0u64; r + 1]; k + 1];
    for (&t, &e) in truth.labels().iter().zip(est.labels()) {
        // Label 0 goes to the last row/column.
        let row = if e == 0 { k } else { e - 1 };
        let col = if t == 0 { r } else { t - 1 };
        counts[row][col] += 1;
    }
    Ok(ContingencyTable { counts })
}

fn h(k: u64) -> f64 {
    let k = k as f64;
    k * (k - 1.0) / 2.0
}

/// ARI of an arbitrary table of counts (rows and columns are the two
/// partitions).
///
/// When the denominator vanishes (both sides all singletons, or both a single
/// group) the result is 1 if the two sides group pairs identically, else 0.
pub fn ari_counts(counts: &[Vec<u64>]) -> f64 {
    let ncols = counts.first().map_or(0, Vec::len);
    let mut col_sums = vec![0u64; ncols];
    let mut index = 0.0;
    let mut h_rows = 0.0;
    for row in counts {
        let mut row_sum = 0;
        for (j, &c) in row.iter().enumerate() {
            index += h(c);
            col_sums[j] += c;
            row_sum += c;
        }
        h_rows += h(row_sum);
    }
    let total: u64 = col_sums.iter().sum();
    let h_cols: f64 = col_sums.iter().map(|&c| h(c)).sum();
    let h_total = h(total);
    if h_total == 0.0 {
        return 1.0;
    }
    let expected = h_rows * h_cols / h_total;
    let denom = 0.5 * (h_rows + h_cols) - expected;
    if denom == 0.0 {
        return if index == h_rows && index == h_cols { 1.0 } else { 0.0 };
    }
    (index - expected) / denom
}

/// ARI over the full table, noise rows/columns included as ordinary groups.
pub fn ari(table: &ContingencyTable) -> f64 {
    ari_counts(&table.counts)
}

/// ARI over the estimated-cluster rows only, with margins and total
/// recomputed from those rows. `None` when the estimate has no clusters.
pub fn ari_c(truth: &Partition, est: &Partition) -> Result<Option<f64>> {
    let table = contingency(truth, est)?;
    let k = table.est_clusters();
    if k == 0 {
        return Ok(None);
    }
    Ok(Some(ari_counts(&table.counts[..k])))
}

/// ARI of the collapsed cluster/noise table
/// `[[n_cc, n_cn = 0], [n_nc, n_nn]]`.
pub fn ari_n(truth: &Partition, est: &Partition) -> Result<f64> {
    let table = contingency(truth, est)?;
    Ok(ari_counts(&collapse(&table)))
}

/// The 2x2 cluster/noise table used by [`ari_n`]; points the estimate puts
/// in clusters but the truth calls noise are left out.
pub fn collapse(table: &ContingencyTable) -> Vec<Vec<u64>> {
    let (k, r) = (table.est_clusters(), table.true_clusters());
    let c = &table.counts;
    let cc: u64 = c[..k].iter().map(|row| row[..r].iter().sum::<u64>()).sum();
    let nc: u64 = c[k][..r].iter().sum();
    let nn = c[k][r];
    vec![vec![cc, 0], vec![nc, nn]]
}

/// All scores for one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub ari: f64,
    /// `None` when the estimate has no clusters.
    pub ari_c: Option<f64>,
    pub ari_n: f64,
    pub estimated_k: usize,
    pub true_k: usize,
    pub table: ContingencyTable,
}

pub fn evaluate(truth: &Partition, est: &Partition) -> Result<EvalReport> {
    let table = contingency(truth, est)?;
    Ok(EvalReport {
        ari: ari(&table),
        ari_c: ari_c(truth, est)?,
        ari_n: ari_n(truth, est)?,
        estimated_k: est.num_clusters(),
        true_k: truth.num_clusters(),
        table,
    })
}
