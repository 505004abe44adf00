//! Data matrix, partitions and the diagonal Gaussian models shared by every
//! stage of the pipeline.

use std::collections::HashSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::RunningMoments;

/// Relative size of the variance floor with respect to the squared data range.
pub const VARIANCE_FLOOR_SCALE: f64 = 1e-12;

/// Observed n x p matrix of finite reals, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    n: usize,
    p: usize,
    values: Vec<f64>,
    row_ids: Vec<String>,
    var_floor: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from row-major values; rows are identified by their index.
    pub fn new(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        let ids = (0..n).map(|i| i.to_string()).collect();
        Self::with_row_ids(values, n, p, ids)
    }

    pub fn with_row_ids(values: Vec<f64>, n: usize, p: usize, row_ids: Vec<String>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::DegenerateInput(format!("matrix must be non-empty, got {n}x{p}")));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, actual: values.len() });
        }
        if row_ids.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: row_ids.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos / p,
                pos % p
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        for id in &row_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidData(format!("duplicate row id {id:?}")));
            }
        }

        let mut lo = vec![f64::INFINITY; p];
        let mut hi = vec![f64::NEG_INFINITY; p];
        for row in values.chunks_exact(p) {
            for m in 0..p {
                lo[m] = lo[m].min(row[m]);
                hi[m] = hi[m].max(row[m]);
            }
        }
        let var_floor = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| {
                let range = h - l;
                // A globally constant dimension still needs a positive floor.
                if range > 0.0 {
                    VARIANCE_FLOOR_SCALE * range * range
                } else {
                    VARIANCE_FLOOR_SCALE
                }
            })
            .collect();

        Ok(Self { n, p, values, row_ids, var_floor })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::InvalidData(format!(
                    "row {i} has {} columns, expected {p}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(values, n, p)
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Per-dimension variance floor, `1e-12 * range^2` of the full matrix.
    pub fn variance_floor(&self) -> &[f64] {
        &self.var_floor
    }

    /// Copies the given rows into a new matrix, keeping their ids and the
    /// parent's variance floor.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.p);
        let mut row_ids = Vec::with_capacity(indices.len());
        for &i in indices {
            values.extend_from_slice(self.row(i));
            row_ids.push(self.row_ids[i].clone());
        }
        Self {
            n: indices.len(),
            p: self.p,
            values,
            row_ids,
            var_floor: self.var_floor.clone(),
        }
    }
}

/// Per-point cluster labels; 0 marks noise, clusters are labeled 1..=K with
/// every label occupied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    k: usize,
}

impl Partition {
    /// Validates contiguity: every label in 1..=max must be used.
    pub fn new(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().copied().max().unwrap_or(0);
        let mut used = vec![false; k + 1];
        for &l in &labels {
            used[l] = true;
        }
        if let Some(missing) = (1..=k).find(|&c| !used[c]) {
            return Err(Error::InvalidData(format!(
                "cluster labels must be contiguous; label {missing} is unused (max {k})"
            )));
        }
        Ok(Self { labels, k })
    }

    /// Maps arbitrary cluster ids to 1..=K in order of first appearance; id 0
    /// stays noise.
    pub fn compact(raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|&l| {
                if l == 0 {
                    0
                } else {
                    let next = map.len() + 1;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        Self { labels, k: map.len() }
    }

    pub fn all_noise(n: usize) -> Self {
        Self { labels: vec![0; n], k: 0 }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of non-noise clusters.
    pub fn num_clusters(&self) -> usize {
        self.k
    }

    /// Sizes indexed by label; entry 0 is the noise count.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k + 1];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Member indices of label `k` (0 gives the noise set).
    pub fn members(&self, k: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter_map(|(i, &l)| (l == k).then_some(i))
            .collect()
    }

    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 0).count()
    }
}

/// Log-density of a Gaussian with diagonal covariance.
pub trait DiagDensity {
    fn mean(&self) -> &[f64];
    fn var(&self) -> &[f64];
    /// `-1/2 * sum_m log(2 pi var_m)`.
    fn log_norm(&self) -> f64;

    #[inline]
    fn log_density(&self, y: &[f64]) -> f64 {
        debug_assert_eq!(y.len(), self.mean().len());
        let quad: f64 = y
            .iter()
            .zip(self.mean())
            .zip(self.var())
            .map(|((&yi, &mu), &v)| {
                let d = yi - mu;
                d * d / v
            })
            .sum();
        self.log_norm() - 0.5 * quad
    }
}

fn log_norm_of(var: &[f64]) -> f64 {
    -0.5 * var.iter().map(|&v| (2.0 * PI * v).ln()).sum::<f64>()
}

fn check_variances(var: &[f64]) -> Result<()> {
    match var.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
        Some(m) => Err(Error::InvalidData(format!(
            "variance in dimension {m} must be positive and finite, got {}",
            var[m]
        ))),
        None => Ok(()),
    }
}

/// A mixture component: mean, diagonal variance, member count and weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    var: Vec<f64>,
    size: usize,
    weight: f64,
    log_norm: f64,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, var: Vec<f64>, size: usize) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), actual: var.len() });
        }
        check_variances(&var)?;
        let log_norm = log_norm_of(&var);
        Ok(Self { mean, var, size, weight: 1.0, log_norm })
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub(crate) fn set_weight(&mut self, weight: f64) {
        self.weight = weight;
    }
}

impl DiagDensity for DiagGaussian {
    fn mean(&self) -> &[f64] {
        &self.mean
    }
    fn var(&self) -> &[f64] {
        &self.var
    }
    fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

/// Single Gaussian fit to the whole dataset, the reference model for noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundModel {
    mean: Vec<f64>,
    var: Vec<f64>,
    log_norm: f64,
}

impl BackgroundModel {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.len() != var.len() {
            return Err(Error::DimensionMismatch { expected: mean.len(), actual: var.len() });
        }
        check_variances(&var)?;
        let log_norm = log_norm_of(&var);
        Ok(Self { mean, var, log_norm })
    }
}

impl DiagDensity for BackgroundModel {
    fn mean(&self) -> &[f64] {
        &self.mean
    }
    fn var(&self) -> &[f64] {
        &self.var
    }
    fn log_norm(&self) -> f64 {
        self.log_norm
    }
}

/// `log N_p(y; mean, diag(var))`, checking dimensions. Mixture weights are not
/// included.
pub fn log_density_diag<D: DiagDensity + ?Sized>(y: &[f64], model: &D) -> Result<f64> {
    if y.len() != model.mean().len() {
        return Err(Error::DimensionMismatch { expected: model.mean().len(), actual: y.len() });
    }
    Ok(model.log_density(y))
}

fn apply_floor(var: &mut [f64], floor: &[f64]) {
    for (v, &f) in var.iter_mut().zip(floor) {
        if *v < f {
            *v = f;
        }
    }
}

/// Overall mean and unbiased per-dimension variance of every row.
pub fn fit_background(y: &DataMatrix) -> Result<BackgroundModel> {
    if y.nrows() < 2 {
        return Err(Error::DegenerateInput(format!(
            "background model needs at least 2 rows, got {}",
            y.nrows()
        )));
    }
    let mut acc = RunningMoments::new(y.ncols());
    y.rows().for_each(|r| acc.push(r));
    let mut var = acc.sample_variance().expect("n >= 2");
    apply_floor(&mut var, y.variance_floor());
    BackgroundModel::new(acc.mean().to_vec(), var)
}

/// Number of values discarded at each end of a dimension for trim fraction `alpha`.
pub fn trim_count(alpha: f64, n: usize) -> usize {
    if alpha <= 0.0 {
        return 0;
    }
    let g = (alpha * n as f64 / 2.0 + 1e-9).floor() as usize;
    // Skip trimming entirely when fewer than two values would survive.
    if n < 2 * g + 2 {
        0
    } else {
        g
    }
}

/// Mean and unbiased variance of an ascending column after dropping
/// `trim_count(alpha, len)` values at each end. Requires `sorted.len() >= 2`.
pub fn trimmed_mean_var(sorted: &[f64], alpha: f64) -> (f64, f64) {
    let g = trim_count(alpha, sorted.len());
    let kept = &sorted[g..sorted.len() - g];
    let m = kept.len() as f64;
    let mean = kept.iter().sum::<f64>() / m;
    let ss: f64 = kept.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (mean, ss / (m - 1.0))
}

/// Untrimmed moments of `members`, accumulated in member order.
pub fn member_moments(y: &DataMatrix, members: &[usize]) -> RunningMoments {
    let mut acc = RunningMoments::new(y.ncols());
    for &i in members {
        acc.push(y.row(i));
    }
    acc
}

/// Finalizes untrimmed moments into a component, applying the variance floor.
pub(crate) fn component_from_moments(
    acc: &RunningMoments,
    floor: &[f64],
) -> Result<DiagGaussian> {
    let mut var = acc.sample_variance().ok_or_else(|| {
        Error::DegenerateInput(format!("component needs at least 2 members, got {}", acc.count()))
    })?;
    apply_floor(&mut var, floor);
    DiagGaussian::new(acc.mean().to_vec(), var, acc.count())
}

/// Builds a component from ascending per-dimension columns with trimming.
pub(crate) fn component_from_sorted(
    columns: &[Vec<f64>],
    alpha: f64,
    floor: &[f64],
) -> Result<DiagGaussian> {
    let size = columns.first().map_or(0, Vec::len);
    if size < 2 {
        return Err(Error::DegenerateInput(format!(
            "component needs at least 2 members, got {size}"
        )));
    }
    let (mut mean, mut var): (Vec<f64>, Vec<f64>) =
        columns.iter().map(|c| trimmed_mean_var(c, alpha)).unzip();
    apply_floor(&mut var, floor);
    mean.shrink_to_fit();
    DiagGaussian::new(mean, var, size)
}

/// Ascending copy of each dimension over `members`.
pub(crate) fn sorted_columns(y: &DataMatrix, members: &[usize]) -> Vec<Vec<f64>> {
    (0..y.ncols())
        .map(|m| {
            let mut col: Vec<f64> = members.iter().map(|&i| y.row(i)[m]).collect();
            col.sort_by(f64::total_cmp);
            col
        })
        .collect()
}

/// Sample mean and variance of a cluster, optionally trimmed per dimension.
///
/// With `trim_fraction == 0` the statistics are the exact sample moments. With
/// `trim_fraction = alpha > 0`, each dimension independently drops its
/// `floor(alpha/2 * N)` smallest and largest values first. The returned weight
/// is 1; callers normalize weights over a mixture.
pub fn fit_component(y: &DataMatrix, members: &[usize], trim_fraction: f64) -> Result<DiagGaussian> {
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::Config(format!("trim fraction must be in [0, 0.5), got {trim_fraction}")));
    }
    if members.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "component needs at least 2 members, got {}",
            members.len()
        )));
    }
    if trim_fraction == 0.0 {
        component_from_moments(&member_moments(y, members), y.variance_floor())
    } else {
        component_from_sorted(&sorted_columns(y, members), trim_fraction, y.variance_floor())
    }
}
