//! Solution path generation and selection.

use serde::{Deserialize, Serialize};

use super::penalty::PenaltyParams;
use super::solver::{solve_blocks, Blocks, PairDistances, SolveOptions, UnionFind};
use crate::error::{Error, Result};
use crate::model::{DataMatrix, Partition};

/// Default relative merge tolerance (times the median pairwise distance).
pub const DEFAULT_MERGE_TOL_SCALE: f64 = 1e-6;

/// Which inter-center distances set the penalty scale along the path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceBasis {
    /// Each distinct center's distance to its nearest other center, so the
    /// level is roughly the fraction of centers that gain a neighbor.
    #[default]
    NearestNeighbor,
    /// All pairwise distances between distinct centers.
    AllPairs,
}

/// Tuning for one solution path run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcConfig {
    /// Quantile level of inter-center distances that sets each penalty.
    pub omega: f64,
    pub basis: DistanceBasis,
    /// Clusters of size <= n0 count as noise when a solution is selected.
    pub n0: usize,
    /// Absolute fusion tolerance; `None` derives it from the data.
    pub merge_tol: Option<f64>,
    pub conv_tol: f64,
    pub max_mm_iters: usize,
    pub max_path_len: usize,
}

impl Default for SpcConfig {
    fn default() -> Self {
        Self {
            omega: 0.1,
            basis: DistanceBasis::default(),
            n0: 3,
            merge_tol: None,
            conv_tol: 1e-8,
            max_mm_iters: 500,
            max_path_len: 30,
        }
    }
}

impl SpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 1.0) {
            return Err(Error::Config(format!("omega must be in (0, 1), got {}", self.omega)));
        }
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be >= 1".into()));
        }
        if let Some(tol) = self.merge_tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::Config(format!("merge_tol must be positive, got {tol}")));
            }
        }
        if !(self.conv_tol > 0.0) || self.max_mm_iters == 0 || self.max_path_len == 0 {
            return Err(Error::Config(
                "conv_tol, max_mm_iters and max_path_len must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One clustering on the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcSolution {
    /// Labels over the subsample rows; 0 only appears after selection.
    pub partition: Partition,
    /// Center of cluster `k` at index `k - 1`.
    pub centers: Vec<Vec<f64>>,
    /// `None` for the unpenalized start of a degenerate (all-identical) input.
    pub params: Option<PenaltyParams>,
    pub objective: f64,
    /// Cluster count reported along the path, kept non-increasing.
    pub path_k: usize,
    pub converged: bool,
}

impl SpcSolution {
    pub fn num_clusters(&self) -> usize {
        self.partition.num_clusters()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionPath {
    pub solutions: Vec<SpcSolution>,
}

impl SolutionPath {
    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, z)| (x - z) * (x - z)).sum()
}

/// Labels 1..=K from groups of items, largest group first, ties by first item.
fn order_groups(mut groups: Vec<Vec<usize>>, first: impl Fn(&Vec<usize>) -> usize, size: impl Fn(&Vec<usize>) -> usize) -> Vec<Vec<usize>> {
    groups.sort_by(|a, b| size(b).cmp(&size(a)).then(first(a).cmp(&first(b))));
    groups
}

/// Connected components of centers within `merge_tol` of each other.
///
/// `centers` is row-major with `p` columns. Components are labeled by
/// decreasing size, ties broken by their first point; each cluster center is
/// the mean of its members' centers.
pub fn extract_partition(centers: &[f64], p: usize, merge_tol: f64) -> Result<(Partition, Vec<Vec<f64>>)> {
    if p == 0 || centers.len() % p != 0 {
        return Err(Error::DimensionMismatch { expected: p, actual: centers.len() });
    }
    let n = centers.len() / p;
    let row = |i: usize| &centers[i * p..(i + 1) * p];
    let tol_sq = merge_tol * merge_tol;
    let mut uf = UnionFind::new(n);
    for i in 0..n {
        for j in i + 1..n {
            if sq_dist(row(i), row(j)) <= tol_sq {
                uf.union(i, j);
            }
        }
    }
    let groups = order_groups(uf.groups(), |g| g[0], Vec::len);
    let mut labels = vec![0; n];
    let mut means = Vec::with_capacity(groups.len());
    for (k, g) in groups.iter().enumerate() {
        let mut mean = vec![0.0; p];
        for &i in g {
            labels[i] = k + 1;
            mean.iter_mut().zip(row(i)).for_each(|(a, v)| *a += v);
        }
        mean.iter_mut().for_each(|v| *v /= g.len() as f64);
        means.push(mean);
    }
    Ok((Partition::new(labels)?, means))
}

/// Linear-interpolation quantile of an ascending slice.
pub(crate) fn quantile_sorted(sorted: &[f64], level: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * level.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn penalty_from_distances(mut distances: Vec<f64>, level: f64) -> Result<PenaltyParams> {
    distances.retain(|&d| d > 0.0 && d.is_finite());
    if distances.is_empty() {
        return Err(Error::PathExhausted("fewer than 2 distinct centers".into()));
    }
    distances.sort_by(f64::total_cmp);
    let t = quantile_sorted(&distances, level);
    PenaltyParams::new(t, 1.0)
}

/// Penalty for the current blocks.
///
/// With the nearest-neighbor basis a quantile that lands exactly on a pair
/// distance would leave that pair outside the attraction range (the
/// derivative vanishes at the threshold), so the threshold is raised halfway
/// to the next larger pair distance.
fn penalty_for(dist: &PairDistances, level: f64, basis: DistanceBasis) -> Result<PenaltyParams> {
    match basis {
        DistanceBasis::AllPairs => penalty_from_distances(dist.values().to_vec(), level),
        DistanceBasis::NearestNeighbor => {
            let params = penalty_from_distances(dist.nearest(), level)?;
            let t = params.threshold();
            if !dist.values().contains(&t) {
                return Ok(params);
            }
            let next = dist.values().iter().copied().filter(|&d| d > t).fold(f64::INFINITY, f64::min);
            if next.is_finite() {
                PenaltyParams::new(0.5 * (t + next), 1.0)
            } else {
                Ok(params)
            }
        }
    }
}

/// Penalty whose saturation distance `t` is the `omega_level` quantile of
/// the chosen distances among the distinct `centers` (`lambda = t`,
/// `delta = 1`).
pub fn select_penalty(centers: &[Vec<f64>], omega_level: f64, basis: DistanceBasis) -> Result<PenaltyParams> {
    if !(omega_level > 0.0 && omega_level < 1.0) {
        return Err(Error::Config(format!("omega must be in (0, 1), got {omega_level}")));
    }
    let mut distinct: Vec<&Vec<f64>> = Vec::with_capacity(centers.len());
    for c in centers {
        if !distinct.iter().any(|d| *d == c) {
            distinct.push(c);
        }
    }
    let mut d = Vec::with_capacity(distinct.len() * distinct.len().saturating_sub(1) / 2);
    for i in 0..distinct.len() {
        for j in i + 1..distinct.len() {
            d.push(sq_dist(distinct[i], distinct[j]).sqrt());
        }
    }
    penalty_for(&PairDistances::from_condensed(distinct.len(), d), omega_level, basis)
}

/// `merge_tol` default: a millionth of the median pairwise distance.
pub fn default_merge_tol(y: &DataMatrix) -> f64 {
    let n = y.nrows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq_dist(y.row(i), y.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return f64::MIN_POSITIVE;
    }
    d.sort_by(f64::total_cmp);
    let median = quantile_sorted(&d, 0.5);
    let scale = if median > 0.0 { median } else { d[d.len() - 1] };
    if scale > 0.0 {
        DEFAULT_MERGE_TOL_SCALE * scale
    } else {
        f64::MIN_POSITIVE
    }
}

/// Fuses blocks within `tol` and labels them as clusters.
fn snapshot(
    y: &DataMatrix,
    blocks: &mut Blocks,
    tol: f64,
) -> (Partition, Vec<Vec<f64>>, PairDistances) {
    let mut dist = blocks.distances();
    let groups = blocks.components(&dist, tol);
    if blocks.merge(y, &groups) {
        dist = blocks.distances();
    }
    let order = order_groups(
        (0..blocks.len()).map(|b| vec![b]).collect(),
        |g| blocks.members[g[0]][0],
        |g| blocks.members[g[0]].len(),
    );
    let mut labels = vec![0; y.nrows()];
    let mut centers = Vec::with_capacity(order.len());
    for (k, g) in order.iter().enumerate() {
        let b = g[0];
        for &i in &blocks.members[b] {
            labels[i] = k + 1;
        }
        centers.push(blocks.center(b).to_vec());
    }
    (Partition::new(labels).expect("labels are contiguous"), centers, dist)
}

/// Builds the solution path on a subsample.
///
/// Centers start at the observations. Each step sets the penalty from the
/// distances between the current distinct centers, re-solves from the previous
/// centers and records the fused clustering. The quantile level doubles after
/// any step that merges nothing and resets to `omega` once clusters merge
/// again; the path ends at one cluster, at `max_path_len` solutions, or when
/// the level saturates without progress.
pub fn run_spc(y: &DataMatrix, config: &SpcConfig) -> Result<SolutionPath> {
    config.validate()?;
    if y.nrows() < 2 {
        return Err(Error::DegenerateInput(format!(
            "solution path needs at least 2 rows, got {}",
            y.nrows()
        )));
    }
    let merge_tol = config.merge_tol.unwrap_or_else(|| default_merge_tol(y));
    let opts = SolveOptions {
        merge_tol,
        conv_tol: config.conv_tol,
        max_mm_iters: config.max_mm_iters,
    };

    let mut blocks = Blocks::from_centers(y, y.values())?;
    let (partition, centers, mut dist) = snapshot(y, &mut blocks, merge_tol);
    let mut solutions = Vec::new();
    if partition.num_clusters() == 1 {
        solutions.push(SpcSolution {
            partition,
            centers,
            params: None,
            objective: blocks.objective(&dist, PenaltyParams { lambda: 1.0, delta: 1.0 }),
            path_k: 1,
            converged: true,
        });
        return Ok(SolutionPath { solutions });
    }

    let mut prev_k = partition.num_clusters();
    let mut level = config.omega;
    while solutions.len() < config.max_path_len {
        let params = match penalty_for(&dist, level, config.basis) {
            Ok(p) => p,
            Err(Error::PathExhausted(_)) => break,
            Err(e) => return Err(e),
        };
        let stats = solve_blocks(y, &mut blocks, params, &opts);
        let (partition, centers, d) = snapshot(y, &mut blocks, merge_tol);
        dist = d;
        let k = partition.num_clusters();
        let path_k = k.min(solutions.last().map_or(prev_k, |s: &SpcSolution| s.path_k));
        let merged_any = k < prev_k;
        solutions.push(SpcSolution {
            partition,
            centers,
            params: Some(params),
            objective: stats.objective,
            path_k,
            converged: stats.converged,
        });
        if k <= 1 {
            break;
        }
        if merged_any {
            level = config.omega;
        } else {
            if level >= 1.0 {
                break;
            }
            level = (level * 2.0).min(1.0);
        }
        prev_k = k;
    }
    Ok(SolutionPath { solutions })
}

/// The chosen path entry, with clusters of size <= n0 moved to noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Position of the chosen solution on the path.
    pub index: usize,
    pub solution: SpcSolution,
    /// Number of clusters larger than n0 in the chosen solution.
    pub large_clusters: usize,
}

/// Picks the first solution with the most clusters of size > `n0`, then
/// relabels smaller clusters as noise (remaining labels keep their order).
pub fn select_solution(path: &SolutionPath, n0: usize) -> Result<Selection> {
    if path.is_empty() {
        return Err(Error::PathExhausted("empty solution path".into()));
    }
    let count_large = |s: &SpcSolution| s.partition.sizes().iter().skip(1).filter(|&&n| n > n0).count();
    let mut best = 0;
    let mut best_count = count_large(&path.solutions[0]);
    for (idx, sol) in path.solutions.iter().enumerate().skip(1) {
        let c = count_large(sol);
        if c > best_count {
            best = idx;
            best_count = c;
        }
    }

    let chosen = &path.solutions[best];
    let sizes = chosen.partition.sizes();
    let mut remap = vec![0; sizes.len()];
    let mut centers = Vec::new();
    for k in 1..sizes.len() {
        if sizes[k] > n0 {
            centers.push(chosen.centers[k - 1].clone());
            remap[k] = centers.len();
        }
    }
    let labels = chosen.partition.labels().iter().map(|&l| remap[l]).collect();
    Ok(Selection {
        index: best,
        solution: SpcSolution {
            partition: Partition::new(labels)?,
            centers,
            ..chosen.clone()
        },
        large_clusters: best_count,
    })
}
