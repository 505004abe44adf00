//! Argument parsing and the four subcommands.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use isspc_core::driver::SpcTuning;
use isspc_core::eval::{evaluate, EvalReport};
use isspc_core::simgen::{generate, SimSpec, Variant};
use isspc_core::spc::DistanceBasis;
use isspc_core::{run_isspc, IsspcConfig, Partition, SubsampleSize};

use crate::bench::{run_bench, write_bench_csv, BenchDesign};
use crate::error::{CliError, CliResult};
use crate::io::{read_labels, read_matrix, write_labels, write_matrix, write_text};
use crate::summary::RunSummary;

/// Environment variable capping the number of bench worker threads.
pub const THREADS_ENV: &str = "ISSPC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "isspc", version, about = "Iterative subsampling solution path clustering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic Gaussian mixture with uniform background noise.
    Simulate(SimulateArgs),
    /// Cluster a CSV of observations.
    Cluster(ClusterArgs),
    /// Score an estimated labeling against the truth.
    Evaluate(EvaluateArgs),
    /// Replicated runs over a grid of simulated designs.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Spherical,
    Correlated,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Spherical => Variant::Spherical,
            VariantArg::Correlated => Variant::Correlated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    NearestNeighbor,
    AllPairs,
}

impl From<BasisArg> for DistanceBasis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::NearestNeighbor => DistanceBasis::NearestNeighbor,
            BasisArg::AllPairs => DistanceBasis::AllPairs,
        }
    }
}

/// Significant-dimension cutoff: a count, or a fraction of `p` written like
/// `0.25p` and rounded up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaArg {
    Count(usize),
    FractionOfP(f64),
}

impl EtaArg {
    pub fn resolve(self, p: usize) -> usize {
        match self {
            EtaArg::Count(c) => c,
            // The slack keeps products like 0.1 * 30 from rounding up past 3.
            EtaArg::FractionOfP(f) => (f * p as f64 - 1e-9).ceil().max(0.0) as usize,
        }
    }
}

impl FromStr for EtaArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(frac) = s.strip_suffix('p') {
            let f: f64 = frac.parse().map_err(|_| format!("invalid fraction in {s:?}"))?;
            if !(f > 0.0 && f < 1.0) {
                return Err(format!("fraction of p must be in (0, 1), got {f}"));
            }
            return Ok(EtaArg::FractionOfP(f));
        }
        s.parse().map(EtaArg::Count).map_err(|_| format!("expected an integer or a fraction like 0.25p, got {s:?}"))
    }
}

/// Subsample size: an integer, or a multiple of `sqrt(n)` written like `2sqrt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuArg(pub SubsampleSize);

impl FromStr for NuArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if let Some(a) = s.strip_suffix("sqrt") {
            let a: f64 = a.parse().map_err(|_| format!("invalid multiplier in {s:?}"))?;
            return Ok(NuArg(SubsampleSize::SqrtMultiple(a)));
        }
        s.parse()
            .map(|v| NuArg(SubsampleSize::Fixed(v)))
            .map_err(|_| format!("expected an integer or a multiple like 2sqrt, got {s:?}"))
    }
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[arg(long, default_value_t = 20)]
    pub p: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = VariantArg::Spherical)]
    pub variant: VariantArg,
    /// Half-width of the cube holding the noise.
    #[arg(long = "box", default_value_t = 5.0)]
    pub box_halfwidth: f64,
    /// Per-dimension standard deviation of each cluster.
    #[arg(long, default_value_t = 0.5)]
    pub sd: f64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Fraction of points drawn as background noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[command(flatten)]
    pub design: DesignArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Data CSV to write.
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
    /// Truth labels CSV to write (0 marks noise).
    #[arg(long, default_value = "truth.csv")]
    pub truth: PathBuf,
}

/// Tuning shared by `cluster` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Distance quantile level of the first iteration.
    #[arg(long, default_value_t = 0.1)]
    pub omega1: f64,
    /// Distance quantile level of later iterations.
    #[arg(long, default_value_t = 0.1)]
    pub omega_later: f64,
    /// Significant dimensions needed to keep a cluster, e.g. 10 or 0.25p
    /// [default: max(2, ceil(p / 2))].
    #[arg(long)]
    pub eta: Option<EtaArg>,
    /// False discovery rate of the per-dimension variance tests.
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    /// Likelihood-ratio cutoff for assigning a point to a cluster.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Path clusters of at most this size count as noise.
    #[arg(long, default_value_t = 3)]
    pub n0: usize,
    /// Fraction trimmed per dimension from large clusters, in [0, 0.25].
    #[arg(long, default_value_t = 0.0)]
    pub trim: f64,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Distances whose quantile sets each penalty level.
    #[arg(long, value_enum, default_value_t = BasisArg::NearestNeighbor)]
    pub basis: BasisArg,
}

impl TuningArgs {
    fn config(&self, p: usize, nu: SubsampleSize, seed: u64) -> IsspcConfig {
        IsspcConfig {
            omega1: self.omega1,
            omega_later: self.omega_later,
            nu,
            eta: self.eta.map(|e| e.resolve(p)),
            beta: self.beta,
            c: self.c,
            n0: self.n0,
            trim_fraction: self.trim,
            seed,
            max_outer_iters: self.max_iters,
            spc: SpcTuning { basis: self.basis.into(), ..SpcTuning::default() },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    /// Observations CSV, one row per point.
    pub data: PathBuf,
    /// Subsample size, e.g. 200 or 2sqrt.
    #[arg(long, conflicts_with = "a")]
    pub nu: Option<NuArg>,
    /// Subsample size as a multiple of sqrt(n) [default: 2].
    #[arg(long)]
    pub a: Option<f64>,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Assignment CSV to write.
    #[arg(long, default_value = "labels.csv")]
    pub out: PathBuf,
    /// Run summary JSON [default: the assignment path with extension .summary.json].
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Truth labels CSV.
    pub truth: PathBuf,
    /// Estimated labels CSV.
    pub estimate: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub noise: Vec<f64>,
    /// Subsample sizes, e.g. 2sqrt,500.
    #[arg(long, value_delimiter = ',', default_value = "2sqrt")]
    pub nu: Vec<NuArg>,
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    #[command(flatten)]
    pub design: DesignArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Seed of the generated datasets and of the first replicate.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop wall-clock columns so seeded sweeps are reproducible byte for byte.
    #[arg(long)]
    pub omit_timings: bool,
    /// Results CSV [default: standard output].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn sim_spec(design: &DesignArgs, n: usize, noise: f64, seed: u64) -> SimSpec {
    SimSpec {
        n,
        p: design.p,
        k: design.k,
        noise_fraction: noise,
        variant: design.variant.into(),
        box_halfwidth: design.box_halfwidth,
        cluster_sd: design.sd,
        seed,
    }
}

pub fn simulate(args: &SimulateArgs) -> CliResult<()> {
    let sim = generate(&sim_spec(&args.design, args.n, args.noise, args.seed))?;
    write_matrix(&args.out, &sim.data)?;
    write_labels(&args.truth, sim.data.row_ids(), sim.truth.labels())
}

fn summary_path(args: &ClusterArgs) -> PathBuf {
    args.summary.clone().unwrap_or_else(|| args.out.with_extension("summary.json"))
}

pub fn cluster(args: &ClusterArgs) -> CliResult<RunSummary> {
    let y = read_matrix(&args.data)?;
    let nu = match (args.nu, args.a) {
        (Some(NuArg(nu)), _) => nu,
        (None, Some(a)) => SubsampleSize::SqrtMultiple(a),
        (None, None) => SubsampleSize::SqrtMultiple(2.0),
    };
    let cfg = args.tuning.config(y.ncols(), nu, args.seed);
    let start = Instant::now();
    let result = run_isspc(&y, &cfg)?;
    let summary = RunSummary::new(&cfg, &result, y.ncols(), start.elapsed());
    write_labels(&args.out, y.row_ids(), result.partition.labels())?;
    let json = summary.to_json().map_err(|e| CliError::Internal(e.to_string()))?;
    write_text(&summary_path(args), &json)?;
    Ok(summary)
}

fn read_partition(path: &Path) -> CliResult<(Option<Vec<String>>, Partition)> {
    let file = read_labels(path)?;
    Ok((file.row_ids, Partition::compact(&file.labels)))
}

pub fn evaluate_files(truth_path: &Path, est_path: &Path) -> CliResult<EvalReport> {
    let (truth_ids, truth) = read_partition(truth_path)?;
    let (est_ids, est) = read_partition(est_path)?;
    if truth.len() != est.len() {
        return Err(CliError::Core(isspc_core::Error::DimensionMismatch {
            expected: truth.len(),
            actual: est.len(),
        }));
    }
    if let (Some(a), Some(b)) = (&truth_ids, &est_ids) {
        if let Some(i) = (0..a.len()).find(|&i| a[i] != b[i]) {
            return Err(CliError::Core(isspc_core::Error::InvalidData(format!(
                "row {} has id {:?} in the truth but {:?} in the estimate",
                i + 1,
                a[i],
                b[i]
            ))));
        }
    }
    Ok(evaluate(&truth, &est)?)
}

/// Plain-text rendering of an evaluation.
pub fn format_report(r: &EvalReport) -> String {
    let ari_c = r.ari_c.map_or("NA (no clusters)".to_string(), |v| format!("{v:.6}"));
    let mut out = format!(
        "ari          {:.6}\nari_c        {ari_c}\nari_n        {:.6}\nestimated_k  {}\ntrue_k       {}\n",
        r.ari, r.ari_n, r.estimated_k, r.true_k
    );
    out.push_str("contingency (rows: estimated clusters, then noise; columns: true clusters, then noise)\n");
    for row in r.table.counts() {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> CliResult<String> {
    let report = evaluate_files(&args.truth, &args.estimate)?;
    if let Some(path) = &args.json {
        let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
        write_text(path, &json)?;
    }
    Ok(format_report(&report))
}

/// Reads the bench thread cap; unset or empty means no cap.
pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(Some(t)),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        _ => Ok(None),
    }
}

pub fn bench(args: &BenchArgs) -> CliResult<()> {
    let design = BenchDesign {
        ns: args.n.clone(),
        noise: args.noise.clone(),
        nus: args.nu.iter().map(|v| v.0).collect(),
        replicates: args.replicates,
        sim: sim_spec(&args.design, args.n[0], args.noise[0], args.seed),
        config: args.tuning.config(args.design.p, SubsampleSize::SqrtMultiple(2.0), args.seed),
    };
    let rows = run_bench(&design, threads_from_env()?)?;
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
            write_bench_csv(file, &rows, args.omit_timings).map_err(|e| CliError::io(path, e))
        }
        None => write_bench_csv(std::io::stdout().lock(), &rows, args.omit_timings)
            .map_err(|e| CliError::io(Path::new("<stdout>"), e)),
    }
}

/// Parses arguments and runs the chosen command, returning the exit code.
/// Usage errors exit through clap with code 2.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    let outcome = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Cluster(a) => cluster(a).map(|s| {
            eprintln!("{} clusters, {} noise points", s.num_clusters, s.noise_count);
        }),
        Command::Evaluate(a) => evaluate_cmd(a).map(|text| print!("{text}")),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
