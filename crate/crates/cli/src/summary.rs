//! Machine-readable record of one clustering run.

use std::time::Duration;

use isspc_core::driver::{IterationTrace, Termination};
use isspc_core::model::DiagDensity;
use isspc_core::{IsspcConfig, IsspcResult};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub label: usize,
    pub size: usize,
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Wall-clock seconds per phase of one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeconds {
    pub path: f64,
    pub validate: f64,
    pub assign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub background: f64,
    pub iterations: Vec<PhaseSeconds>,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub seed: u64,
    pub n: usize,
    pub p: usize,
    pub config: IsspcConfig,
    /// Subsample size and significant-dimension cutoff actually used.
    pub nu: usize,
    pub eta: usize,
    pub termination: Termination,
    pub num_clusters: usize,
    pub noise_count: usize,
    pub clusters: Vec<ClusterSummary>,
    pub traces: Vec<IterationTrace>,
    pub timings: TimingSummary,
}

impl RunSummary {
    pub fn new(cfg: &IsspcConfig, result: &IsspcResult, p: usize, total: Duration) -> Self {
        let sizes = result.partition.sizes();
        let clusters = result
            .clusters
            .iter()
            .enumerate()
            .map(|(k, g)| ClusterSummary {
                label: k + 1,
                size: sizes[k + 1],
                weight: g.weight(),
                mean: g.mean().to_vec(),
                var: g.var().to_vec(),
            })
            .collect();
        let iterations = result
            .timings
            .iter()
            .map(|t| PhaseSeconds {
                path: t.path.as_secs_f64(),
                validate: t.validate.as_secs_f64(),
                assign: t.assign.as_secs_f64(),
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            seed: cfg.seed,
            n: result.partition.len(),
            p,
            config: cfg.clone(),
            nu: result.nu,
            eta: result.eta,
            termination: result.termination,
            num_clusters: result.partition.num_clusters(),
            noise_count: sizes[0],
            clusters,
            traces: result.traces.clone(),
            timings: TimingSummary {
                background: result.background_time.as_secs_f64(),
                iterations,
                total: total.as_secs_f64(),
            },
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }
}
