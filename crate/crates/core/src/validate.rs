//! Cluster acceptance: per-dimension variance tests against the background,
//! combined with Benjamini-Hochberg FDR control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fit_component, BackgroundModel, DataMatrix, DiagDensity};
use crate::special::chi_square_lower_p;

pub const DEFAULT_BETA: f64 = 0.01;

/// FDR cutoff `beta` and the number `eta` of significant dimensions a
/// cluster needs to be kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub beta: f64,
    pub eta: usize,
}

impl ValidationConfig {
    /// Requires `0 < beta < 1` and `1 < eta < p`.
    pub fn new(beta: f64, eta: usize, p: usize) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!("beta must be in (0, 1), got {beta}")));
        }
        if !(eta > 1 && eta < p) {
            return Err(Error::Config(format!("eta must satisfy 1 < eta < p = {p}, got {eta}")));
        }
        Ok(Self { beta, eta })
    }
}

/// `(N_k - 1) s2_k / s2_0`, chi-square with `N_k - 1` df when the variances agree.
pub fn variance_statistic(s2_cluster: f64, s2_background: f64, size: usize) -> Result<f64> {
    if size < 2 {
        return Err(Error::DegenerateInput(format!(
            "variance test needs at least 2 members, got {size}"
        )));
    }
    if !(s2_cluster >= 0.0) || !(s2_background > 0.0) {
        return Err(Error::Domain(format!(
            "variances must be positive, got {s2_cluster} and {s2_background}"
        )));
    }
    Ok((size - 1) as f64 * s2_cluster / s2_background)
}

/// Benjamini-Hochberg count: the largest `m` with `P_(m) <= m / p * beta`
/// over the ascending p-values, or 0.
pub fn bh_count(p_values: &[f64], beta: f64) -> usize {
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let p = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .rev()
        .find(|&(i, &pv)| pv <= (i + 1) as f64 / p * beta)
        .map_or(0, |(i, _)| i + 1)
}

/// Outcome of testing one candidate cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterVerdict {
    pub keep: bool,
    /// Number of dimensions declared significantly tighter than the background.
    pub significant_dims: usize,
    pub p_values: Vec<f64>,
}

/// Tests each dimension's untrimmed sample variance against the background
/// with a lower-tail chi-square test and keeps the cluster when the BH count
/// reaches `eta`. Clusters with fewer than two members are discarded.
pub fn validate_cluster(
    members: &[usize],
    y: &DataMatrix,
    bg: &BackgroundModel,
    cfg: &ValidationConfig,
) -> Result<ClusterVerdict> {
    if members.len() < 2 {
        return Ok(ClusterVerdict { keep: false, significant_dims: 0, p_values: Vec::new() });
    }
    let component = fit_component(y, members, 0.0)?;
    let df = members.len() - 1;
    let p_values = component
        .var()
        .iter()
        .zip(bg.var())
        .map(|(&s2k, &s20)| chi_square_lower_p(variance_statistic(s2k, s20, members.len())?, df))
        .collect::<Result<Vec<_>>>()?;
    let m_star = bh_count(&p_values, cfg.beta);
    Ok(ClusterVerdict { keep: m_star >= cfg.eta, significant_dims: m_star, p_values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fit_background;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// O(p^2) oracle: a value v at ascending rank r = #{q <= v} qualifies when
    /// v <= r / p * beta; the count is the largest qualifying rank.
    fn bh_oracle(p: &[f64], beta: f64) -> usize {
        let len = p.len() as f64;
        p.iter()
            .map(|&v| (v, p.iter().filter(|&&q| q <= v).count()))
            .filter(|&(v, r)| v <= r as f64 / len * beta)
            .map(|(_, r)| r)
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn statistic_values() {
        assert_eq!(variance_statistic(0.5, 1.0, 11).unwrap(), 5.0);
        assert_eq!(variance_statistic(2.0, 2.0, 2).unwrap(), 1.0);
        assert!(variance_statistic(1.0, 1.0, 1).is_err());
        let tight = variance_statistic(1e-12, 1.0, 30).unwrap();
        assert!(chi_square_lower_p(tight, 29).unwrap() < 1e-100);
    }

    #[test]
    fn bh_examples() {
        assert_eq!(bh_count(&[0.001, 0.2, 0.9], 0.05), 1);
        assert_eq!(bh_count(&[1.0; 7], 0.05), 0);
        assert_eq!(bh_count(&[0.0; 7], 0.05), 7);
        assert_eq!(bh_count(&[], 0.05), 0);
        // Step-up: a later qualifying rank rescues earlier failures.
        assert_eq!(bh_count(&[0.04, 0.03, 0.035, 0.9], 0.1), 3);
    }

    #[test]
    fn bh_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let n = rng.random_range(1..25);
            let p: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
            let beta = rng.random_range(0.001..0.5);
            assert_eq!(bh_count(&p, beta), bh_oracle(&p, beta));
        }
    }

    #[test]
    fn config_ranges() {
        assert!(ValidationConfig::new(0.01, 10, 20).is_ok());
        assert!(ValidationConfig::new(0.01, 1, 20).is_err());
        assert!(ValidationConfig::new(0.01, 20, 20).is_err());
        assert!(ValidationConfig::new(0.0, 5, 20).is_err());
    }

    fn background_data(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<f64> {
        let normal = Normal::new(0.0, 1.0).unwrap();
        (0..n * p).map(|_| normal.sample(rng)).collect()
    }

    #[test]
    fn tight_cluster_is_kept() {
        let (n_bg, n_k, p) = (2000, 30, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut values = background_data(&mut rng, n_bg, p);
        let tight = Normal::new(0.0, 0.1).unwrap();
        values.extend((0..n_k * p).map(|_| 2.0 + tight.sample(&mut rng)));
        let y = DataMatrix::new(values, n_bg + n_k, p).unwrap();
        let bg = fit_background(&y).unwrap();
        let members: Vec<usize> = (n_bg..n_bg + n_k).collect();
        let cfg = ValidationConfig::new(0.01, 10, p).unwrap();
        let v = validate_cluster(&members, &y, &bg, &cfg).unwrap();
        assert!(v.keep);
        assert_eq!(v.significant_dims, p);
    }

    #[test]
    fn background_cluster_is_discarded() {
        let (n, p) = (3000, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = DataMatrix::new(background_data(&mut rng, n, p), n, p).unwrap();
        let bg = fit_background(&y).unwrap();
        let cfg = ValidationConfig::new(0.01, 10, p).unwrap();
        let mut kept = 0;
        for trial in 0..100 {
            let members: Vec<usize> = (trial * 30..trial * 30 + 30).collect();
            kept += validate_cluster(&members, &y, &bg, &cfg).unwrap().keep as usize;
        }
        assert!(kept <= 2, "{kept} of 100 background clusters kept");
    }

    #[test]
    fn tiny_clusters_are_discarded() {
        let (n, p) = (500, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut values = background_data(&mut rng, n, p);
        // Two points with a moderately small spread.
        values.extend((0..2 * p).map(|i| if i < p { 0.0 } else { 0.3 }));
        let y = DataMatrix::new(values, n + 2, p).unwrap();
        let bg = fit_background(&y).unwrap();
        let cfg = ValidationConfig::new(0.01, 5, p).unwrap();
        assert!(!validate_cluster(&[n, n + 1], &y, &bg, &cfg).unwrap().keep);
        let single = validate_cluster(&[n], &y, &bg, &cfg).unwrap();
        assert!(!single.keep);
        assert_eq!(single.significant_dims, 0);
    }

    #[test]
    fn keeping_is_monotone_in_beta() {
        let (n, p) = (1000, 12);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut values = background_data(&mut rng, n, p);
        let mid = Normal::new(0.0, 0.55).unwrap();
        values.extend((0..15 * p).map(|_| mid.sample(&mut rng)));
        let y = DataMatrix::new(values, n + 15, p).unwrap();
        let bg = fit_background(&y).unwrap();
        let members: Vec<usize> = (n..n + 15).collect();
        let mut was_kept = false;
        for beta in [0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4] {
            let cfg = ValidationConfig::new(beta, 4, p).unwrap();
            let keep = validate_cluster(&members, &y, &bg, &cfg).unwrap().keep;
            assert!(keep || !was_kept, "kept at smaller beta but not at {beta}");
            was_kept |= keep;
        }
    }
}
