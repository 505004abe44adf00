//! The outer loop: subsample the current noise set, cluster the subsample
//! along a solution path, keep the clusters that pass validation, assign the
//! held-out points, and repeat on whatever is still noise.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{sequential_assign, MixtureModel, DEFAULT_C};
use crate::error::{Error, Result};
use crate::model::{fit_background, DataMatrix, DiagGaussian, Partition};
use crate::rng::{stream_rng, Stream};
use crate::spc::{run_spc, select_solution, DistanceBasis, SpcConfig};
use crate::validate::{validate_cluster, ValidationConfig, DEFAULT_BETA};

/// Largest trim fraction accepted by [`IsspcConfig`].
pub const MAX_TRIM: f64 = 0.25;
/// Components are trimmed only above this multiple of `n0` members.
pub const TRIM_SIZE_FACTOR: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleSize {
    Fixed(usize),
    /// `ceil(a * sqrt(n))` for the full data size `n`.
    SqrtMultiple(f64),
}

impl SubsampleSize {
    pub fn resolve(&self, n: usize) -> Result<usize> {
        let nu = match *self {
            SubsampleSize::Fixed(nu) => nu,
            SubsampleSize::SqrtMultiple(a) => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(Error::Config(format!("subsample multiplier must be positive, got {a}")));
                }
                (a * (n as f64).sqrt()).ceil() as usize
            }
        };
        if nu < 2 {
            return Err(Error::Config(format!("subsample size must be >= 2, got {nu}")));
        }
        Ok(nu)
    }
}

/// Solver tuning passed through to each solution path run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpcTuning {
    pub basis: DistanceBasis,
    pub merge_tol: Option<f64>,
    pub conv_tol: f64,
    pub max_mm_iters: usize,
    pub max_path_len: usize,
}

impl Default for SpcTuning {
    fn default() -> Self {
        let d = SpcConfig::default();
        Self {
            basis: d.basis,
            merge_tol: d.merge_tol,
            conv_tol: d.conv_tol,
            max_mm_iters: d.max_mm_iters,
            max_path_len: d.max_path_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsspcConfig {
    /// Penalty quantile level for the first subsample.
    pub omega1: f64,
    /// Penalty quantile level for later subsamples.
    pub omega_later: f64,
    pub nu: SubsampleSize,
    /// Significant dimensions needed to keep a cluster; `None` uses
    /// `max(2, ceil(p / 2))`.
    pub eta: Option<usize>,
    pub beta: f64,
    /// Likelihood-ratio threshold for assigning a point to a cluster.
    pub c: f64,
    pub n0: usize,
    pub trim_fraction: f64,
    pub seed: u64,
    pub max_outer_iters: usize,
    pub spc: SpcTuning,
}

impl Default for IsspcConfig {
    fn default() -> Self {
        Self {
            omega1: 0.1,
            omega_later: 0.1,
            nu: SubsampleSize::SqrtMultiple(2.0),
            eta: None,
            beta: DEFAULT_BETA,
            c: DEFAULT_C,
            n0: 3,
            trim_fraction: 0.0,
            seed: 0,
            max_outer_iters: 50,
            spc: SpcTuning::default(),
        }
    }
}

/// `max(2, ceil(p / 2))`.
pub fn default_eta(p: usize) -> usize {
    p.div_ceil(2).max(2)
}

impl IsspcConfig {
    fn check(&self, p: usize) -> Result<ValidationConfig> {
        for (name, w) in [("omega1", self.omega1), ("omega_later", self.omega_later)] {
            if !(w > 0.0 && w < 1.0) {
                return Err(Error::Config(format!("{name} must be in (0, 1), got {w}")));
            }
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must be positive, got {}", self.c)));
        }
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be >= 1".into()));
        }
        if !(0.0..=MAX_TRIM).contains(&self.trim_fraction) {
            return Err(Error::Config(format!(
                "trim fraction must be in [0, {MAX_TRIM}], got {}",
                self.trim_fraction
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::Config("max_outer_iters must be >= 1".into()));
        }
        ValidationConfig::new(self.beta, self.eta.unwrap_or_else(|| default_eta(p)), p)
    }

    fn spc_config(&self, omega: f64) -> SpcConfig {
        SpcConfig {
            omega,
            basis: self.spc.basis,
            n0: self.n0,
            merge_tol: self.spc.merge_tol,
            conv_tol: self.spc.conv_tol,
            max_mm_iters: self.spc.max_mm_iters,
            max_path_len: self.spc.max_path_len,
        }
    }
}

/// A cluster kept at some iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptedCluster {
    /// Final global label.
    pub label: usize,
    /// Members found in the subsample.
    pub subsample_size: usize,
    /// Members after assignment.
    pub final_size: usize,
    pub significant_dims: usize,
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The last subsample produced no cluster that passed validation.
    NoValidCluster,
    /// Fewer noise points remain than the subsample size.
    NoiseBelowSubsample,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub omega: f64,
    /// Subsampled row indices, ascending.
    pub subsample: Vec<usize>,
    pub path_len: usize,
    /// Number of clusters of size > n0 in the selected solution.
    pub candidates: usize,
    pub accepted: Vec<AcceptedCluster>,
    pub rejected: usize,
    pub assigned_to_clusters: usize,
    pub assigned_to_noise: usize,
    /// Noise points left after this iteration.
    pub residual_noise: usize,
}

/// Wall-clock time spent per phase of one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub path: Duration,
    pub validate: Duration,
    pub assign: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsspcResult {
    pub partition: Partition,
    pub traces: Vec<IterationTrace>,
    /// Final component of each cluster, indexed by label - 1.
    pub clusters: Vec<DiagGaussian>,
    pub termination: Termination,
    pub nu: usize,
    pub eta: usize,
    pub timings: Vec<PhaseTimings>,
    pub background_time: Duration,
}

/// Draws `nu` of `indices` uniformly without replacement. Returns the drawn
/// indices and the rest, both in the order they appear in `indices`.
pub fn subsample<R: Rng + ?Sized>(indices: &[usize], nu: usize, rng: &mut R) -> Result<(Vec<usize>, Vec<usize>)> {
    if indices.len() < nu {
        return Err(Error::DegenerateInput(format!(
            "cannot draw {nu} of {} indices",
            indices.len()
        )));
    }
    let mut picked = vec![false; indices.len()];
    for pos in rand::seq::index::sample(rng, indices.len(), nu) {
        picked[pos] = true;
    }
    let (mut drawn, mut rest) = (Vec::with_capacity(nu), Vec::with_capacity(indices.len() - nu));
    for (&i, &hit) in indices.iter().zip(&picked) {
        if hit {
            drawn.push(i);
        } else {
            rest.push(i);
        }
    }
    Ok((drawn, rest))
}

/// Runs the full procedure on `y`.
pub fn run_isspc(y: &DataMatrix, cfg: &IsspcConfig) -> Result<IsspcResult> {
    let (n, p) = (y.nrows(), y.ncols());
    let validation = cfg.check(p)?;
    let nu = cfg.nu.resolve(n)?;
    if n <= nu {
        return Err(Error::Config(format!("need more rows than the subsample size: n = {n}, nu = {nu}")));
    }

    let started = Instant::now();
    let background = fit_background(y)?;
    let background_time = started.elapsed();

    let mut sub_rng = stream_rng(cfg.seed, Stream::Subsample);
    let mut order_rng = stream_rng(cfg.seed, Stream::AssignOrder);
    let mut labels = vec![0usize; n];
    let mut clusters: Vec<DiagGaussian> = Vec::new();
    let mut noise: Vec<usize> = (0..n).collect();
    let mut traces = Vec::new();
    let mut timings = Vec::new();
    let trim_threshold = TRIM_SIZE_FACTOR * cfg.n0;

    let termination = loop {
        if noise.len() < nu {
            break Termination::NoiseBelowSubsample;
        }
        if traces.len() == cfg.max_outer_iters {
            break Termination::MaxIterations;
        }
        let iteration = traces.len() + 1;
        let omega = if iteration == 1 { cfg.omega1 } else { cfg.omega_later };
        let mut timing = PhaseTimings::default();

        let clock = Instant::now();
        let (drawn, held_out) = subsample(&noise, nu, &mut sub_rng)?;
        let sub = y.select_rows(&drawn);
        let path = run_spc(&sub, &cfg.spc_config(omega))?;
        let selection = select_solution(&path, cfg.n0)?;
        timing.path = clock.elapsed();

        let clock = Instant::now();
        let chosen = &selection.solution.partition;
        let mut kept = Vec::new();
        let mut rejected = 0;
        for k in 1..=chosen.num_clusters() {
            let members: Vec<usize> = chosen.members(k).into_iter().map(|i| drawn[i]).collect();
            let verdict = validate_cluster(&members, y, &background, &validation)?;
            if verdict.keep {
                kept.push((members, verdict.significant_dims));
            } else {
                rejected += 1;
            }
        }
        timing.validate = clock.elapsed();

        let mut trace = IterationTrace {
            iteration,
            omega,
            subsample: drawn.clone(),
            path_len: path.len(),
            candidates: chosen.num_clusters(),
            accepted: Vec::new(),
            rejected,
            assigned_to_clusters: 0,
            assigned_to_noise: 0,
            residual_noise: noise.len(),
        };
        if kept.is_empty() {
            traces.push(trace);
            timings.push(timing);
            break Termination::NoValidCluster;
        }

        let clock = Instant::now();
        let subsample_sizes: Vec<usize> = kept.iter().map(|(m, _)| m.len()).collect();
        let dims: Vec<usize> = kept.iter().map(|(_, d)| *d).collect();
        let mut mixture = MixtureModel::from_clusters(
            y,
            kept.into_iter().map(|(m, _)| m).collect(),
            cfg.trim_fraction,
            trim_threshold,
        )?;
        let mut order = held_out;
        order.shuffle(&mut order_rng);
        let (_, counts) = sequential_assign(&order, y, &mut mixture, &background, cfg.c)?;
        timing.assign = clock.elapsed();

        // Stable sort: equal sizes keep their path order.
        let mut by_size: Vec<usize> = (1..=mixture.len()).collect();
        by_size.sort_by_key(|&k| std::cmp::Reverse(mixture.members(k).len()));
        for k in by_size {
            let label = clusters.len() + 1;
            for &i in mixture.members(k) {
                labels[i] = label;
            }
            clusters.push(mixture.component(k).clone());
            trace.accepted.push(AcceptedCluster {
                label,
                subsample_size: subsample_sizes[k - 1],
                final_size: mixture.members(k).len(),
                significant_dims: dims[k - 1],
            });
        }
        noise.retain(|&i| labels[i] == 0);
        trace.assigned_to_clusters = counts.to_clusters;
        trace.assigned_to_noise = counts.to_noise;
        trace.residual_noise = noise.len();
        traces.push(trace);
        timings.push(timing);
    };

    Ok(IsspcResult {
        partition: Partition::new(labels)?,
        traces,
        clusters,
        termination,
        nu,
        eta: validation.eta,
        timings,
        background_time,
    })
}
