//! Majorization-minimization solver for the fusion-penalized least-squares
//! objective
//!
//! ```text
//! sum_i ||y_i - theta_i||^2 + lambda * sum_{i<j} rho(||theta_i - theta_j||)
//! ```
//!
//! Each sweep majorizes `rho` by its tangent line at the current distances
//! (slope `w_ij = rho'(d_ij)`) and each distance by `d^2 / (2 d_ij) + d_ij / 2`,
//! giving a separable quadratic surrogate. One cyclic pass of exact block
//! minimization then gives
//!
//! ```text
//! theta_i <- (y_i + lambda/2 * sum_j a_ij theta_j) / (1 + lambda/2 * sum_j a_ij),   a_ij = w_ij / d_ij
//! ```
//!
//! Points whose centers coincide exactly form a block that moves as one; the
//! surrogate for a zero distance is the equality constraint itself, so block
//! moves keep the descent guarantee. Blocks closer than `merge_tol` are fused
//! between sweeps by the fixed-penalty solver.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::penalty::{mcp_derivative_unchecked, mcp_unchecked, PenaltyParams};
use crate::error::{Error, Result};
use crate::model::DataMatrix;

/// Points sharing one center.
#[derive(Debug, Clone)]
pub(crate) struct Blocks {
    p: usize,
    /// Point indices per block, ascending. Blocks are kept in lexicographic
    /// order of their data means, which fixes the sweep order independently of
    /// how the rows are numbered.
    pub(crate) members: Vec<Vec<usize>>,
    /// Mean of the members' observations, block-major.
    ybar: Vec<f64>,
    /// Shared center, block-major.
    pub(crate) theta: Vec<f64>,
    /// Sum of squared deviations of members from `ybar`.
    scatter: Vec<f64>,
}

impl Blocks {
    /// Groups points whose centers are bitwise identical.
    pub(crate) fn from_centers(y: &DataMatrix, centers: &[f64]) -> Result<Self> {
        let (n, p) = (y.nrows(), y.ncols());
        if centers.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, actual: centers.len() });
        }
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut theta = Vec::new();
        for i in 0..n {
            let c = &centers[i * p..(i + 1) * p];
            // -0.0 and 0.0 are the same point.
            let key: Vec<u64> = c.iter().map(|v| (v + 0.0).to_bits()).collect();
            match index.get(&key) {
                Some(&b) => members[b].push(i),
                None => {
                    index.insert(key, members.len());
                    members.push(vec![i]);
                    theta.extend_from_slice(c);
                }
            }
        }
        let mut blocks = Self { p, members, ybar: Vec::new(), theta, scatter: Vec::new() };
        blocks.refresh_data_stats(y);
        blocks.sort_canonically();
        Ok(blocks)
    }

    pub(crate) fn len(&self) -> usize {
        self.members.len()
    }

    fn size(&self, b: usize) -> f64 {
        self.members[b].len() as f64
    }

    pub(crate) fn center(&self, b: usize) -> &[f64] {
        &self.theta[b * self.p..(b + 1) * self.p]
    }

    fn refresh_data_stats(&mut self, y: &DataMatrix) {
        let p = self.p;
        self.ybar = vec![0.0; self.len() * p];
        self.scatter = vec![0.0; self.len()];
        for (b, mem) in self.members.iter().enumerate() {
            let mean = &mut self.ybar[b * p..(b + 1) * p];
            for &i in mem {
                for (m, v) in mean.iter_mut().zip(y.row(i)) {
                    *m += v;
                }
            }
            let k = mem.len() as f64;
            mean.iter_mut().for_each(|v| *v /= k);
            self.scatter[b] = mem
                .iter()
                .map(|&i| y.row(i).iter().zip(mean.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .sum();
        }
    }

    fn sort_canonically(&mut self) {
        let p = self.p;
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            let (ya, yb) = (&self.ybar[a * p..(a + 1) * p], &self.ybar[b * p..(b + 1) * p]);
            ya.iter()
                .zip(yb)
                .map(|(u, v)| u.total_cmp(v))
                .find(|o| o.is_ne())
                .unwrap_or_else(|| self.members[a][0].cmp(&self.members[b][0]))
        });
        if order.iter().enumerate().all(|(i, &o)| i == o) {
            return;
        }
        let gather = |v: &[f64], width: usize| -> Vec<f64> {
            order.iter().flat_map(|&b| v[b * width..(b + 1) * width].iter().copied()).collect()
        };
        self.theta = gather(&self.theta, p);
        self.ybar = gather(&self.ybar, p);
        self.scatter = gather(&self.scatter, 1);
        let mut old = std::mem::take(&mut self.members);
        self.members = order.iter().map(|&b| std::mem::take(&mut old[b])).collect();
    }

    /// Upper-triangular pairwise center distances, row-major over `b < c`.
    pub(crate) fn distances(&self) -> PairDistances {
        let nb = self.len();
        let mut d = Vec::with_capacity(nb * nb.saturating_sub(1) / 2);
        for b in 0..nb {
            let cb = self.center(b);
            for c in b + 1..nb {
                let cc = self.center(c);
                let sq: f64 = cb.iter().zip(cc).map(|(x, z)| (x - z) * (x - z)).sum();
                d.push(sq.sqrt());
            }
        }
        PairDistances { n: nb, d }
    }

    /// Objective value at the current centers.
    pub(crate) fn objective(&self, dist: &PairDistances, params: PenaltyParams) -> f64 {
        let p = self.p;
        let thr = params.threshold();
        let mut loss = 0.0;
        for b in 0..self.len() {
            let fit: f64 = self.ybar[b * p..(b + 1) * p]
                .iter()
                .zip(self.center(b))
                .map(|(a, c)| (a - c) * (a - c))
                .sum();
            loss += self.scatter[b] + self.size(b) * fit;
        }
        let mut penalty = 0.0;
        for b in 0..self.len() {
            for c in b + 1..self.len() {
                penalty += self.size(b) * self.size(c) * mcp_unchecked(dist.get(b, c), thr);
            }
        }
        loss + params.lambda * penalty
    }

    /// One majorization at the current centers followed by one Gauss-Seidel pass.
    pub(crate) fn sweep(&mut self, dist: &PairDistances, params: PenaltyParams) {
        let p = self.p;
        let nb = self.len();
        let thr = params.threshold();
        let half_lambda = params.lambda / 2.0;

        // Active neighbors with weight |H| * w / d.
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nb];
        for b in 0..nb {
            for c in b + 1..nb {
                let d = dist.get(b, c);
                if d >= thr || d <= 0.0 {
                    continue;
                }
                let a = mcp_derivative_unchecked(d, thr) / d;
                if !a.is_finite() {
                    continue;
                }
                adjacency[b].push((c, self.size(c) * a));
                adjacency[c].push((b, self.size(b) * a));
            }
        }

        let mut num = vec![0.0; p];
        for (b, neighbors) in adjacency.iter().enumerate() {
            if neighbors.is_empty() {
                let (theta, ybar) = (&mut self.theta[b * p..(b + 1) * p], &self.ybar[b * p..(b + 1) * p]);
                theta.copy_from_slice(ybar);
                continue;
            }
            num.copy_from_slice(&self.ybar[b * p..(b + 1) * p]);
            let mut den = 1.0;
            for &(c, wc) in neighbors {
                let coef = half_lambda * wc;
                den += coef;
                for (acc, t) in num.iter_mut().zip(&self.theta[c * p..(c + 1) * p]) {
                    *acc += coef * t;
                }
            }
            for (t, v) in self.theta[b * p..(b + 1) * p].iter_mut().zip(&num) {
                *t = v / den;
            }
        }
    }

    /// Connected components of the graph linking blocks within `tol`, as
    /// lists of block indices ordered by first block.
    pub(crate) fn components(&self, dist: &PairDistances, tol: f64) -> Vec<Vec<usize>> {
        let nb = self.len();
        let mut uf = UnionFind::new(nb);
        for b in 0..nb {
            for c in b + 1..nb {
                if dist.get(b, c) <= tol {
                    uf.union(b, c);
                }
            }
        }
        uf.groups()
    }

    /// Replaces each group of blocks by a single block at the size-weighted
    /// mean of their centers. Returns whether anything merged.
    pub(crate) fn merge(&mut self, y: &DataMatrix, groups: &[Vec<usize>]) -> bool {
        if groups.len() == self.len() {
            return false;
        }
        let p = self.p;
        let mut merged: Vec<(Vec<usize>, Vec<f64>)> = groups
            .iter()
            .map(|g| {
                let mut mem = Vec::new();
                let mut center = vec![0.0; p];
                let mut total = 0.0;
                for &b in g {
                    let w = self.size(b);
                    for (acc, v) in center.iter_mut().zip(self.center(b)) {
                        *acc += w * v;
                    }
                    total += w;
                    mem.extend_from_slice(&self.members[b]);
                }
                center.iter_mut().for_each(|v| *v /= total);
                mem.sort_unstable();
                (mem, center)
            })
            .collect();
        merged.sort_by_key(|(mem, _)| mem[0]);
        self.members = merged.iter().map(|(m, _)| m.clone()).collect();
        self.theta = merged.into_iter().flat_map(|(_, c)| c).collect();
        self.refresh_data_stats(y);
        self.sort_canonically();
        true
    }

    /// Expands block centers to one center per point.
    pub(crate) fn point_centers(&self, n: usize) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; n * p];
        for (b, mem) in self.members.iter().enumerate() {
            for &i in mem {
                out[i * p..(i + 1) * p].copy_from_slice(self.center(b));
            }
        }
        out
    }
}

/// Condensed symmetric distance matrix without the diagonal.
#[derive(Debug, Clone)]
pub(crate) struct PairDistances {
    n: usize,
    d: Vec<f64>,
}

impl PairDistances {
    #[inline]
    pub(crate) fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        // Row i starts after sum_{r<i} (n - 1 - r) entries.
        let start = i * (2 * self.n - i - 1) / 2;
        self.d[start + (j - i - 1)]
    }

    pub(crate) fn values(&self) -> &[f64] {
        &self.d
    }

    pub(crate) fn from_condensed(n: usize, d: Vec<f64>) -> Self {
        debug_assert_eq!(d.len(), n * n.saturating_sub(1) / 2);
        Self { n, d }
    }

    /// Distance from each item to its nearest other item.
    pub(crate) fn nearest(&self) -> Vec<f64> {
        let mut best = vec![f64::INFINITY; self.n];
        for i in 0..self.n {
            for j in i + 1..self.n {
                let d = self.get(i, j);
                best[i] = best[i].min(d);
                best[j] = best[j].min(d);
            }
        }
        best
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller index becomes the root so roots stay deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Groups in order of their smallest element, members ascending.
    pub(crate) fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut slot = vec![usize::MAX; n];
        let mut out: Vec<Vec<usize>> = Vec::new();
        for x in 0..n {
            let r = self.find(x);
            if slot[r] == usize::MAX {
                slot[r] = out.len();
                out.push(Vec::new());
            }
            out[slot[r]].push(x);
        }
        out
    }
}

fn check_centers(y: &DataMatrix, centers: &[f64]) -> Result<()> {
    let expected = y.nrows() * y.ncols();
    if centers.len() != expected {
        return Err(Error::DimensionMismatch { expected, actual: centers.len() });
    }
    Ok(())
}

/// Penalized least-squares objective for one center per row of `y`
/// (`centers` is row-major, n x p).
pub fn objective(y: &DataMatrix, centers: &[f64], params: PenaltyParams) -> Result<f64> {
    check_centers(y, centers)?;
    let (n, p) = (y.nrows(), y.ncols());
    let center = |i: usize| &centers[i * p..(i + 1) * p];
    let mut loss = 0.0;
    for i in 0..n {
        loss += y.row(i).iter().zip(center(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    let thr = params.threshold();
    let mut penalty = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let sq: f64 = center(i).iter().zip(center(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            penalty += mcp_unchecked(sq.sqrt(), thr);
        }
    }
    Ok(loss + params.lambda * penalty)
}

/// One majorization plus one cyclic coordinate-descent pass. The objective
/// at the returned centers never exceeds the objective at `centers`.
pub fn mm_sweep(y: &DataMatrix, centers: &[f64], params: PenaltyParams) -> Result<Vec<f64>> {
    check_centers(y, centers)?;
    let mut blocks = Blocks::from_centers(y, centers)?;
    let dist = blocks.distances();
    blocks.sweep(&dist, params);
    Ok(blocks.point_centers(y.nrows()))
}

/// Stopping rules for [`solve_fixed_penalty`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Blocks whose centers are within this distance are fused.
    pub merge_tol: f64,
    /// Relative objective change below which iteration stops.
    pub conv_tol: f64,
    pub max_mm_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { merge_tol: 1e-8, conv_tol: 1e-8, max_mm_iters: 500 }
    }
}

/// Result of minimizing the objective at one penalty level.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPenaltySolution {
    /// Row-major, one center per input row.
    pub centers: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct BlockSolveStats {
    pub(crate) objective: f64,
    pub(crate) iterations: usize,
    pub(crate) converged: bool,
}

/// Iterates sweeps on `blocks` in place, fusing blocks within `merge_tol`.
pub(crate) fn solve_blocks(
    y: &DataMatrix,
    blocks: &mut Blocks,
    params: PenaltyParams,
    opts: &SolveOptions,
) -> BlockSolveStats {
    let mut prev: Option<f64> = None;
    let mut iterations = 0;
    loop {
        let mut dist = blocks.distances();
        let groups = blocks.components(&dist, opts.merge_tol);
        let merged = blocks.merge(y, &groups);
        if merged {
            dist = blocks.distances();
        }
        if blocks.len() == 1 {
            // A lone block sits at the overall mean.
            blocks.sweep(&dist, params);
            let obj = blocks.objective(&dist, params);
            return BlockSolveStats { objective: obj, iterations: iterations + 1, converged: true };
        }
        let obj = blocks.objective(&dist, params);
        // A fresh merge places the block at its members' mean center; let the
        // next sweep move it before judging convergence.
        if let (Some(before), false) = (prev, merged) {
            let scale = before.abs().max(f64::MIN_POSITIVE);
            if (before - obj).abs() <= opts.conv_tol * scale {
                return BlockSolveStats { objective: obj, iterations, converged: true };
            }
        }
        if iterations >= opts.max_mm_iters {
            return BlockSolveStats { objective: obj, iterations, converged: false };
        }
        blocks.sweep(&dist, params);
        iterations += 1;
        prev = Some(obj);
    }
}

/// Runs MM sweeps from `centers_init` until the relative objective change
/// falls below `conv_tol` or `max_mm_iters` sweeps have been made.
pub fn solve_fixed_penalty(
    y: &DataMatrix,
    centers_init: &[f64],
    params: PenaltyParams,
    opts: &SolveOptions,
) -> Result<FixedPenaltySolution> {
    check_centers(y, centers_init)?;
    let mut blocks = Blocks::from_centers(y, centers_init)?;
    let stats = solve_blocks(y, &mut blocks, params, opts);
    Ok(FixedPenaltySolution {
        centers: blocks.point_centers(y.nrows()),
        objective: stats.objective,
        iterations: stats.iterations,
        converged: stats.converged,
    })
}
