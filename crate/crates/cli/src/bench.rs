//! Replicated runs over a grid of designs, summarized per cell by quartiles.

use std::io::Write;
use std::time::Instant;

use isspc_core::eval::evaluate;
use isspc_core::simgen::{generate, SimData, SimSpec};
use isspc_core::{run_isspc, IsspcConfig, SubsampleSize};
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Grid of data sizes, noise fractions and subsample rules. One dataset is
/// generated per `(n, noise)` pair from `sim.seed`; replicate `r` runs with
/// seed `config.seed + r`.
#[derive(Debug, Clone)]
pub struct BenchDesign {
    pub ns: Vec<usize>,
    pub noise: Vec<f64>,
    pub nus: Vec<SubsampleSize>,
    pub replicates: usize,
    pub sim: SimSpec,
    pub config: IsspcConfig,
}

/// Type-7 quartiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Quartiles {
    /// `None` for an empty sample.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |level: f64| {
            let h = (v.len() - 1) as f64 * level;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(Self { q1: q(0.25), median: q(0.5), q3: q(0.75) })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    /// Over the runs that found at least one cluster.
    pub ari_c: Option<Quartiles>,
    pub ari_n: Quartiles,
    pub k: Quartiles,
    pub seconds: Quartiles,
    /// Runs with no accepted cluster, where ARI_c is undefined.
    pub no_cluster_runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRow {
    pub n: usize,
    pub noise: f64,
    pub nu: SubsampleSize,
    pub replicates: usize,
    /// The error message of the first failing step when the cell failed.
    pub outcome: Result<CellStats, String>,
}

struct RunScore {
    ari_c: Option<f64>,
    ari_n: f64,
    k: usize,
    seconds: f64,
}

fn run_one(sim: &SimData, cfg: &IsspcConfig) -> isspc_core::Result<RunScore> {
    let start = Instant::now();
    let result = run_isspc(&sim.data, cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let report = evaluate(&sim.truth, &result.partition)?;
    Ok(RunScore { ari_c: report.ari_c, ari_n: report.ari_n, k: report.estimated_k, seconds })
}

fn summarize(scores: &[RunScore]) -> Option<CellStats> {
    let col = |f: &dyn Fn(&RunScore) -> f64| scores.iter().map(f).collect::<Vec<_>>();
    let ari_c: Vec<f64> = scores.iter().filter_map(|s| s.ari_c).collect();
    Some(CellStats {
        ari_c: Quartiles::of(&ari_c),
        ari_n: Quartiles::of(&col(&|s| s.ari_n))?,
        k: Quartiles::of(&col(&|s| s.k as f64))?,
        seconds: Quartiles::of(&col(&|s| s.seconds))?,
        no_cluster_runs: scores.len() - ari_c.len(),
    })
}

/// Runs every cell. Failures are recorded in the cell's row and do not stop
/// the sweep. Replicates run on a pool of `threads` workers (all cores when
/// `None`).
pub fn run_bench(design: &BenchDesign, threads: Option<usize>) -> CliResult<Vec<CellRow>> {
    if design.replicates == 0 {
        return Err(CliError::Config("replicates must be >= 1".into()));
    }
    if design.ns.is_empty() || design.noise.is_empty() || design.nus.is_empty() {
        return Err(CliError::Config("every grid axis needs at least one value".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;

    let mut rows = Vec::new();
    for &n in &design.ns {
        for &noise in &design.noise {
            let data = generate(&SimSpec { n, noise_fraction: noise, ..design.sim.clone() });
            for &nu in &design.nus {
                let outcome = match &data {
                    Err(e) => Err(e.to_string()),
                    Ok(sim) => {
                        let scores: Vec<_> = pool.install(|| {
                            (0..design.replicates as u64)
                                .into_par_iter()
                                .map(|r| {
                                    let cfg = IsspcConfig {
                                        nu,
                                        seed: design.config.seed.wrapping_add(r),
                                        ..design.config.clone()
                                    };
                                    run_one(sim, &cfg)
                                })
                                .collect()
                        });
                        scores
                            .into_iter()
                            .collect::<isspc_core::Result<Vec<_>>>()
                            .map_err(|e| e.to_string())
                            .and_then(|s| summarize(&s).ok_or_else(|| "no runs".to_string()))
                    }
                };
                rows.push(CellRow { n, noise, nu, replicates: design.replicates, outcome });
            }
        }
    }
    Ok(rows)
}

fn nu_label(nu: SubsampleSize) -> String {
    match nu {
        SubsampleSize::Fixed(v) => v.to_string(),
        SubsampleSize::SqrtMultiple(a) => format!("{a}sqrt"),
    }
}

/// Writes one CSV row per cell. Quartile columns are empty for failed cells
/// and for ARI_c when no run found a cluster. `omit_timings` drops the
/// wall-clock columns so that seeded sweeps give identical files.
pub fn write_bench_csv<W: Write>(out: W, rows: &[CellRow], omit_timings: bool) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["n", "noise_fraction", "nu", "nu_resolved", "replicates", "status"]
        .map(String::from)
        .to_vec();
    let quartile_cols = |metric: &str| ["q1", "median", "q3"].map(|q| format!("{metric}_{q}"));
    for metric in ["ari_c", "ari_n", "k"] {
        header.extend(quartile_cols(metric));
    }
    header.push("no_cluster_runs".into());
    if !omit_timings {
        header.extend(quartile_cols("seconds"));
    }
    header.push("error".into());
    w.write_record(&header)?;

    let quart = |q: Option<Quartiles>| match q {
        Some(q) => vec![q.q1.to_string(), q.median.to_string(), q.q3.to_string()],
        None => vec![String::new(); 3],
    };
    for row in rows {
        let mut rec = vec![
            row.n.to_string(),
            row.noise.to_string(),
            nu_label(row.nu),
            row.nu.resolve(row.n).map_or(String::new(), |v| v.to_string()),
            row.replicates.to_string(),
        ];
        match &row.outcome {
            Ok(s) => {
                rec.push("ok".into());
                rec.extend(quart(s.ari_c));
                rec.extend(quart(Some(s.ari_n)));
                rec.extend(quart(Some(s.k)));
                rec.push(s.no_cluster_runs.to_string());
                if !omit_timings {
                    rec.extend(quart(Some(s.seconds)));
                }
                rec.push(String::new());
            }
            Err(msg) => {
                rec.push("failed".into());
                rec.extend(vec![String::new(); 10 + if omit_timings { 0 } else { 3 }]);
                rec.push(msg.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_type7() {
        let q = Quartiles::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (2.0, 3.0, 4.0));
        let q = Quartiles::of(&[1.0, 2.0]).unwrap();
        assert_eq!((q.q1, q.median, q.q3), (1.25, 1.5, 1.75));
        assert_eq!(Quartiles::of(&[]), None);
    }

    #[test]
    fn failed_cells_keep_the_column_count() {
        let rows = vec![CellRow {
            n: 10,
            noise: 0.5,
            nu: SubsampleSize::Fixed(20),
            replicates: 2,
            outcome: Err("boom".into()),
        }];
        for omit in [false, true] {
            let mut buf = Vec::new();
            write_bench_csv(&mut buf, &rows, omit).unwrap();
            let text = String::from_utf8(buf).unwrap();
            let lines: Vec<&str> = text.lines().collect();
            assert_eq!(lines[0].split(',').count(), lines[1].split(',').count());
            assert!(lines[1].contains("failed") && lines[1].ends_with("boom"));
        }
    }
}
