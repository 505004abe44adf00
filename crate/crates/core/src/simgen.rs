//! Synthetic benchmarks: Gaussian clusters in a box with uniform noise kept
//! outside every cluster's radius.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DataMatrix, Partition};
use crate::rng::{stream_rng, Stream};

/// Centers are drawn from the inner `CENTER_BOX_SCALE` fraction of the box.
const CENTER_BOX_SCALE: f64 = 0.8;
/// Minimum center separation in units of the cluster sd.
const CENTER_SEPARATION_SDS: f64 = 6.0;
const MAX_CENTER_ATTEMPTS: usize = 100_000;
/// Noise generation gives up when fewer than this fraction of draws land
/// outside all clusters.
const MIN_NOISE_ACCEPTANCE: f64 = 1e-4;
const NOISE_CHECK_INTERVAL: u64 = 100_000;

/// Relative cluster sizes of the correlated preset (ten clusters).
pub const CORRELATED_SIZES: [f64; 10] = [0.3, 0.2, 0.1, 0.1, 0.05, 0.05, 0.05, 0.05, 0.05, 0.05];
pub const CORRELATED_RHO_LARGE: f64 = 0.5;
pub const CORRELATED_RHO_SMALL: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Spherical,
    Correlated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub noise_fraction: f64,
    pub variant: Variant,
    pub box_halfwidth: f64,
    pub cluster_sd: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            n: 10_000,
            p: 20,
            k: 10,
            noise_fraction: 0.1,
            variant: Variant::Spherical,
            box_halfwidth: 5.0,
            cluster_sd: 0.5,
            seed: 0,
        }
    }
}

impl SimSpec {
    /// Number of noise points, `round(noise_fraction * n)`.
    pub fn noise_count(&self) -> usize {
        (self.noise_fraction * self.n as f64).round() as usize
    }

    pub fn clustered_count(&self) -> usize {
        self.n - self.noise_count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.k == 0 {
            return Err(Error::Config("p and k must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return Err(Error::Config(format!(
                "noise fraction must be in [0, 1), got {}",
                self.noise_fraction
            )));
        }
        if !(self.box_halfwidth > 0.0 && self.box_halfwidth.is_finite()) {
            return Err(Error::Config(format!("box half-width must be positive, got {}", self.box_halfwidth)));
        }
        if !(self.cluster_sd > 0.0 && self.cluster_sd.is_finite()) {
            return Err(Error::Config(format!("cluster sd must be positive, got {}", self.cluster_sd)));
        }
        if self.clustered_count() < self.k {
            return Err(Error::InfeasibleSpec(format!(
                "{} clustered points cannot fill {} clusters",
                self.clustered_count(),
                self.k
            )));
        }
        Ok(())
    }
}

/// Generated data with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct SimData {
    pub data: DataMatrix,
    pub truth: Partition,
    pub centers: Vec<Vec<f64>>,
    /// Largest center-to-member distance of each cluster.
    pub radii: Vec<f64>,
}

/// Splits `total` into `k` near-equal parts, the remainder going one each to
/// the first clusters.
pub fn equal_sizes(total: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| total / k + usize::from(i < total % k)).collect()
}

/// Floors `fractions * total` and hands the remainder out round-robin from
/// the first cluster, so the sizes sum to `total`.
pub fn preset_sizes(total: usize, fractions: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = fractions.iter().map(|f| (f * total as f64).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let len = sizes.len();
    for i in 0..total.saturating_sub(assigned) {
        sizes[i % len] += 1;
    }
    sizes
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn place_centers(spec: &SimSpec, rng: &mut ChaCha8Rng) -> Result<Vec<Vec<f64>>> {
    let half = CENTER_BOX_SCALE * spec.box_halfwidth;
    let min_sep = CENTER_SEPARATION_SDS * spec.cluster_sd;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(spec.k);
    for _ in 0..spec.k {
        let mut placed = false;
        for _ in 0..MAX_CENTER_ATTEMPTS {
            let c: Vec<f64> = (0..spec.p).map(|_| rng.random_range(-half..=half)).collect();
            if centers.iter().all(|o| dist(o, &c) >= min_sep) {
                centers.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasibleSpec(format!(
                "could not place {} centers {min_sep} apart in [-{half}, {half}]^{}",
                spec.k, spec.p
            )));
        }
    }
    Ok(centers)
}

/// Draws `mu + sd * (sqrt(1 - rho) z + sqrt(rho) z0 1)`, a sample with
/// variance `sd^2` and pairwise correlation `rho` in every dimension pair.
pub fn sample_equicorrelated<R: Rng + ?Sized>(rng: &mut R, mu: &[f64], sd: f64, rho: f64) -> Vec<f64> {
    let shared: f64 = StandardNormal.sample(rng);
    let (a, b) = ((1.0 - rho).sqrt(), rho.sqrt());
    mu.iter()
        .map(|&m| {
            let z: f64 = StandardNormal.sample(rng);
            m + sd * (a * z + b * shared)
        })
        .collect()
}

fn draw_noise(
    spec: &SimSpec,
    centers: &[Vec<f64>],
    radii: &[f64],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<f64>>> {
    let count = spec.noise_count();
    let b = spec.box_halfwidth;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0u64;
    while out.len() < count {
        attempts += 1;
        let x: Vec<f64> = (0..spec.p).map(|_| rng.random_range(-b..=b)).collect();
        if centers.iter().zip(radii).all(|(c, &r)| dist(c, &x) > r) {
            out.push(x);
        }
        if attempts % NOISE_CHECK_INTERVAL == 0 && (out.len() as f64) < MIN_NOISE_ACCEPTANCE * attempts as f64 {
            return Err(Error::InfeasibleSpec(format!(
                "only {} of {attempts} noise draws fell outside the clusters",
                out.len()
            )));
        }
    }
    Ok(out)
}

fn generate_with(spec: &SimSpec, sizes: &[usize], rhos: &[f64]) -> Result<SimData> {
    spec.validate()?;
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::InfeasibleSpec(format!("cluster {} would be empty", k + 1)));
    }
    let mut rng = stream_rng(spec.seed, Stream::Generator);
    let centers = place_centers(spec, &mut rng)?;

    let mut rows = Vec::with_capacity(spec.n);
    let mut labels = Vec::with_capacity(spec.n);
    let mut radii = Vec::with_capacity(spec.k);
    for (k, (&size, &rho)) in sizes.iter().zip(rhos).enumerate() {
        let mut radius = 0.0f64;
        for _ in 0..size {
            let x = sample_equicorrelated(&mut rng, &centers[k], spec.cluster_sd, rho);
            radius = radius.max(dist(&centers[k], &x));
            rows.push(x);
            labels.push(k + 1);
        }
        radii.push(radius);
    }
    for x in draw_noise(spec, &centers, &radii, &mut rng)? {
        rows.push(x);
        labels.push(0);
    }

    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.shuffle(&mut stream_rng(spec.seed, Stream::GeneratorShuffle));
    let values = order.iter().flat_map(|&i| rows[i].iter().copied()).collect();
    let labels = order.iter().map(|&i| labels[i]).collect();
    Ok(SimData {
        data: DataMatrix::new(values, spec.n, spec.p)?,
        truth: Partition::new(labels)?,
        centers,
        radii,
    })
}

/// Equal-size spherical clusters `N(center, sd^2 I)` plus uniform noise.
/// Rows are shuffled.
pub fn gen_spherical(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let sizes = equal_sizes(spec.clustered_count(), spec.k);
    generate_with(spec, &sizes, &vec![0.0; spec.k])
}

/// Equicorrelated clusters. With ten clusters the preset sizes and
/// correlations apply; otherwise sizes are equal. The first four clusters
/// get correlation 0.5, the rest 0.3.
pub fn gen_correlated(spec: &SimSpec) -> Result<SimData> {
    spec.validate()?;
    let total = spec.clustered_count();
    let sizes = if spec.k == CORRELATED_SIZES.len() {
        preset_sizes(total, &CORRELATED_SIZES)
    } else {
        equal_sizes(total, spec.k)
    };
    let rhos: Vec<f64> = (0..spec.k)
        .map(|k| if k < 4 { CORRELATED_RHO_LARGE } else { CORRELATED_RHO_SMALL })
        .collect();
    generate_with(spec, &sizes, &rhos)
}

pub fn generate(spec: &SimSpec) -> Result<SimData> {
    match spec.variant {
        Variant::Spherical => gen_spherical(spec),
        Variant::Correlated => gen_correlated(spec),
    }
}
