//! Sequential likelihood-ratio assignment of held-out points to a Gaussian
//! mixture or to the background model.
//!
//! Component statistics always equal [`fit_component`] on the current member
//! list: untrimmed components extend a running Welford accumulator in member
//! order, trimmed components keep per-dimension sorted columns and recompute
//! the trimmed moments after each insertion (O(N_k) per update).
//!
//! [`fit_component`]: crate::model::fit_component

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    component_from_moments, component_from_sorted, member_moments, sorted_columns,
    BackgroundModel, DataMatrix, DiagDensity, DiagGaussian,
};
use crate::moments::RunningMoments;

/// Default likelihood-ratio threshold.
pub const DEFAULT_C: f64 = 1.0;

#[derive(Debug, Clone)]
struct ComponentState {
    members: Vec<usize>,
    moments: RunningMoments,
    /// Ascending per-dimension values; kept only when trimming is enabled.
    sorted: Option<Vec<Vec<f64>>>,
    gaussian: DiagGaussian,
}

/// Gaussian mixture over clusters found so far, refreshed as points join.
#[derive(Debug, Clone)]
pub struct MixtureModel {
    components: Vec<ComponentState>,
    trim_fraction: f64,
    trim_size_threshold: usize,
    var_floor: Vec<f64>,
}

impl MixtureModel {
    /// Builds one component per member list. Components with more than
    /// `trim_size_threshold` members use trimmed estimates when
    /// `trim_fraction > 0`.
    pub fn from_clusters(
        y: &DataMatrix,
        clusters: Vec<Vec<usize>>,
        trim_fraction: f64,
        trim_size_threshold: usize,
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&trim_fraction) {
            return Err(Error::Config(format!("trim fraction must be in [0, 0.5), got {trim_fraction}")));
        }
        let mut mix = Self {
            components: Vec::with_capacity(clusters.len()),
            trim_fraction,
            trim_size_threshold,
            var_floor: y.variance_floor().to_vec(),
        };
        for members in clusters {
            let moments = member_moments(y, &members);
            let sorted = (trim_fraction > 0.0).then(|| sorted_columns(y, &members));
            let gaussian = mix.finalize(&moments, sorted.as_deref())?;
            mix.components.push(ComponentState { members, moments, sorted, gaussian });
        }
        mix.renormalize();
        Ok(mix)
    }

    /// A mixture with no components; every point scores as noise.
    pub fn empty(y: &DataMatrix) -> Self {
        Self {
            components: Vec::new(),
            trim_fraction: 0.0,
            trim_size_threshold: 0,
            var_floor: y.variance_floor().to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// Component `k` (1-based, matching assignment labels).
    pub fn component(&self, k: usize) -> &DiagGaussian {
        &self.components[k - 1].gaussian
    }

    pub fn components(&self) -> impl Iterator<Item = &DiagGaussian> {
        self.components.iter().map(|c| &c.gaussian)
    }

    /// Members of component `k` (1-based) in the order they joined.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.components[k - 1].members
    }

    pub fn trim_fraction(&self) -> f64 {
        self.trim_fraction
    }

    pub fn trim_size_threshold(&self) -> usize {
        self.trim_size_threshold
    }

    /// Trim fraction that applies to a component of the given size.
    pub fn effective_trim(&self, size: usize) -> f64 {
        if self.trim_fraction > 0.0 && size > self.trim_size_threshold {
            self.trim_fraction
        } else {
            0.0
        }
    }

    fn finalize(&self, moments: &RunningMoments, sorted: Option<&[Vec<f64>]>) -> Result<DiagGaussian> {
        let trim = self.effective_trim(moments.count());
        match sorted {
            Some(cols) if trim > 0.0 => component_from_sorted(cols, trim, &self.var_floor),
            _ => component_from_moments(moments, &self.var_floor),
        }
    }

    fn renormalize(&mut self) {
        let total: usize = self.components.iter().map(|c| c.members.len()).sum();
        for c in &mut self.components {
            c.gaussian.set_weight(c.members.len() as f64 / total as f64);
        }
    }

    /// Per-component `log pi_k + log N(y; mu_k, Sigma_k)`.
    fn weighted_log_densities<'a>(&'a self, y: &'a [f64]) -> impl Iterator<Item = f64> + 'a {
        self.components.iter().map(move |c| c.gaussian.weight().ln() + c.gaussian.log_density(y))
    }

    /// Adds row `index` of `y` to component `k` (1-based) and refreshes its
    /// statistics and all weights. `k == 0` (noise) leaves the mixture as is.
    pub fn accept_assignment(&mut self, y: &DataMatrix, index: usize, k: usize) -> Result<()> {
        if k == 0 {
            return Ok(());
        }
        if k > self.components.len() {
            return Err(Error::Config(format!(
                "component {k} does not exist (mixture has {})",
                self.components.len()
            )));
        }
        let row = y.row(index);
        let state = &mut self.components[k - 1];
        state.members.push(index);
        state.moments.push(row);
        if let Some(cols) = state.sorted.as_mut() {
            for (col, &v) in cols.iter_mut().zip(row) {
                let at = col.partition_point(|&x| x.total_cmp(&v).is_lt());
                col.insert(at, v);
            }
        }
        let state = &self.components[k - 1];
        let gaussian = self.finalize(&state.moments, state.sorted.as_deref())?;
        self.components[k - 1].gaussian = gaussian;
        self.renormalize();
        Ok(())
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `log sum_k pi_k N(y; mu_k, Sigma_k)`; `-inf` for an empty mixture.
pub fn log_mixture_likelihood(y: &[f64], mix: &MixtureModel) -> f64 {
    log_sum_exp(mix.weighted_log_densities(y))
}

/// Log of the mixture-to-background likelihood ratio.
pub fn log_likelihood_ratio(y: &[f64], mix: &MixtureModel, bg: &BackgroundModel) -> f64 {
    log_mixture_likelihood(y, mix) - bg.log_density(y)
}

/// Returns the most likely component (1-based, lowest index on ties) when the
/// likelihood ratio is at least `c`, else 0 (noise).
pub fn assign_point(y: &[f64], mix: &MixtureModel, bg: &BackgroundModel, c: f64) -> usize {
    if mix.is_empty() {
        return 0;
    }
    let scores: Vec<f64> = mix.weighted_log_densities(y).collect();
    let log_ratio = log_sum_exp(scores.iter().copied()) - bg.log_density(y);
    if log_ratio < c.ln() {
        return 0;
    }
    let mut best = 0;
    for (k, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = k;
        }
    }
    best + 1
}

/// Assignment counts from one sequential pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignCounts {
    pub to_clusters: usize,
    pub to_noise: usize,
}

/// Visits `order` once, assigning each row and updating the mixture after
/// every cluster assignment. Returns labels aligned with `order`.
pub fn sequential_assign(
    order: &[usize],
    y: &DataMatrix,
    mix: &mut MixtureModel,
    bg: &BackgroundModel,
    c: f64,
) -> Result<(Vec<usize>, AssignCounts)> {
    let mut labels = Vec::with_capacity(order.len());
    let mut counts = AssignCounts::default();
    for &i in order {
        let k = assign_point(y.row(i), mix, bg, c);
        mix.accept_assignment(y, i, k)?;
        if k == 0 {
            counts.to_noise += 1;
        } else {
            counts.to_clusters += 1;
        }
        labels.push(k);
    }
    Ok((labels, counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fit_background, fit_component};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, n: usize, p: usize) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..n * p).map(|_| rng.random_range(-3.0..3.0)).collect();
        DataMatrix::new(values, n, p).unwrap()
    }

    #[test]
    fn single_component_reduces_to_density() {
        let y = random_data(1, 40, 3);
        let mix = MixtureModel::from_clusters(&y, vec![(0..10).collect()], 0.0, 30).unwrap();
        let g = fit_component(&y, &(0..10).collect::<Vec<_>>(), 0.0).unwrap();
        let x = y.row(20);
        assert!((log_mixture_likelihood(x, &mix) - g.log_density(x)).abs() < 1e-12);
        assert_eq!(mix.component(1).weight(), 1.0);
    }

    #[test]
    fn identical_components_collapse() {
        let y = random_data(7, 30, 2);
        let a: Vec<usize> = (0..12).collect();
        let mix = MixtureModel::from_clusters(&y, vec![a.clone(), a.clone()], 0.0, 100).unwrap();
        assert_eq!(mix.component(1).weight(), 0.5);
        let single = fit_component(&y, &a, 0.0).unwrap();
        for probe in [[0.4, 2.0], [-3.0, 1.5]] {
            assert!((log_mixture_likelihood(&probe, &mix) - single.log_density(&probe)).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_matches_linear_space_sum() {
        let y = random_data(2, 60, 2);
        let mix = MixtureModel::from_clusters(&y, vec![(0..20).collect(), (20..50).collect()], 0.0, 100)
            .unwrap();
        for i in 50..60 {
            let x = y.row(i);
            let linear: f64 = mix.components().map(|g| g.weight() * g.log_density(x).exp()).sum();
            assert!((log_mixture_likelihood(x, &mix) - linear.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn ratio_signs() {
        // Tight cluster at the origin inside a wide background.
        let mut rows: Vec<Vec<f64>> = (0..20).map(|i| vec![0.01 * (i % 5) as f64, -0.01 * (i % 4) as f64]).collect();
        rows.extend((0..200).map(|i| vec![(i as f64 * 0.37).sin() * 8.0, (i as f64 * 0.11).cos() * 8.0]));
        let y = DataMatrix::from_rows(&rows).unwrap();
        let bg = fit_background(&y).unwrap();
        let mix = MixtureModel::from_clusters(&y, vec![(0..20).collect()], 0.0, 100).unwrap();
        let center = mix.component(1).mean().to_vec();
        assert!(log_likelihood_ratio(&center, &mix, &bg) > 0.0);
        let far = [bg.mean()[0] + 5.0, bg.mean()[1] - 5.0];
        assert!(log_likelihood_ratio(&far, &mix, &bg) < 0.0);
        assert_eq!(assign_point(&far, &mix, &bg, 1.0), 0);
        assert_eq!(assign_point(&center, &mix, &bg, 1.0), 1);
    }

    #[test]
    fn ratio_zero_when_component_equals_background() {
        let y = random_data(3, 50, 4);
        let bg = fit_background(&y).unwrap();
        let mix = MixtureModel::from_clusters(&y, vec![(0..50).collect()], 0.0, 1000).unwrap();
        let x = [0.3, -0.2, 1.0, 2.0];
        assert!(log_likelihood_ratio(&x, &mix, &bg).abs() < 1e-12);
        assert_eq!(assign_point(&x, &mix, &bg, 1.0), 1);
        // Exactly at the threshold the point is kept: use c = ratio itself.
        let c = log_likelihood_ratio(&x, &mix, &bg).exp();
        assert_eq!(assign_point(&x, &mix, &bg, c), 1);
    }

    #[test]
    fn density_ties_go_to_the_lowest_label() {
        // Mirror-image components about 0 with equal sizes.
        let mut rows: Vec<Vec<f64>> = (0..6).map(|i| vec![[1.5, 2.5][i % 2]]).collect();
        rows.extend((0..6).map(|i| vec![[-2.5, -1.5][i % 2]]));
        rows.extend((0..30).map(|i| vec![(i as f64) - 15.0]));
        let y = DataMatrix::from_rows(&rows).unwrap();
        let bg = fit_background(&y).unwrap();
        let mix = MixtureModel::from_clusters(&y, vec![(0..6).collect(), (6..12).collect()], 0.0, 100)
            .unwrap();
        assert_eq!(mix.component(1).log_density(&[0.0]), mix.component(2).log_density(&[0.0]));
        assert_eq!(assign_point(&[0.0], &mix, &bg, 1e-300), 1);
        assert_eq!(assign_point(&[-0.1], &mix, &bg, 1e-300), 2);
    }

    #[test]
    fn weights_enter_the_argmax() {
        // Same spread, 20 vs 4 members: midway between the means the larger
        // component wins even though the densities tie.
        let mut rows: Vec<Vec<f64>> = (0..20).map(|i| vec![[1.5, 2.5][i % 2]]).collect();
        rows.extend((0..4).map(|i| vec![[-2.5, -1.5][i % 2]]));
        rows.extend((0..30).map(|i| vec![(i as f64) - 15.0]));
        let y = DataMatrix::from_rows(&rows).unwrap();
        let bg = fit_background(&y).unwrap();
        let mix = MixtureModel::from_clusters(&y, vec![(20..24).collect(), (0..20).collect()], 0.0, 100)
            .unwrap();
        let (small, large) = (mix.component(1), mix.component(2));
        assert!((small.weight() - 4.0 / 24.0).abs() < 1e-15);
        // Locate points where the small component's log density leads by a
        // given gap; log(20 / 4) = 1.609 decides who wins.
        let gap = |x: f64| small.log_density(&[x]) - large.log_density(&[x]);
        let at_gap = |target: f64| {
            let (mut lo, mut hi) = (-2.0, 2.0);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        assert_eq!(assign_point(&[at_gap(1.0)], &mix, &bg, 1e-300), 2);
        assert_eq!(assign_point(&[at_gap(2.2)], &mix, &bg, 1e-300), 1);
    }

    #[test]
    fn empty_mixture_assigns_noise() {
        let y = random_data(4, 10, 2);
        let bg = fit_background(&y).unwrap();
        let mix = MixtureModel::empty(&y);
        assert_eq!(assign_point(y.row(0), &mix, &bg, 1.0), 0);
        assert_eq!(log_mixture_likelihood(y.row(0), &mix), f64::NEG_INFINITY);
    }

    #[test]
    fn adding_the_mean_shrinks_variance() {
        let y = DataMatrix::from_rows(&[vec![0.0], vec![2.0], vec![4.0], vec![2.0]]).unwrap();
        let mut mix = MixtureModel::from_clusters(&y, vec![vec![0, 1, 2]], 0.0, 100).unwrap();
        assert_eq!(mix.component(1).var(), &[4.0]);
        mix.accept_assignment(&y, 3, 1).unwrap();
        assert_eq!(mix.component(1).mean(), &[2.0]);
        assert_eq!(mix.component(1).var(), &[8.0 / 3.0]);
        let batch = fit_component(&y, &[0, 1, 2, 3], 0.0).unwrap();
        assert_eq!(mix.component(1), &batch);
    }

    #[test]
    fn noise_assignment_is_a_no_op() {
        let y = random_data(5, 10, 2);
        let mut mix = MixtureModel::from_clusters(&y, vec![vec![0, 1, 2]], 0.0, 100).unwrap();
        let before = mix.component(1).clone();
        mix.accept_assignment(&y, 5, 0).unwrap();
        assert_eq!(mix.component(1), &before);
        assert!(mix.accept_assignment(&y, 5, 2).is_err());
    }

    #[test]
    fn streaming_matches_batch_with_trimming() {
        let y = random_data(6, 200, 3);
        let mut mix = MixtureModel::from_clusters(&y, vec![(0..5).collect(), (5..12).collect()], 0.1, 30)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for i in 12..200 {
            let k = rng.random_range(1..=2);
            mix.accept_assignment(&y, i, k).unwrap();
            let members = mix.members(k).to_vec();
            let trim = mix.effective_trim(members.len());
            assert_eq!(trim > 0.0, members.len() > 30);
            let batch = fit_component(&y, &members, trim).unwrap();
            let got = mix.component(k);
            assert_eq!(got.mean(), batch.mean());
            assert_eq!(got.var(), batch.var());
            let total: f64 = mix.components().map(|g| g.weight()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn crossing_trim_threshold_switches_estimates() {
        let mut rows: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 7) as f64]).collect();
        rows.push(vec![500.0]);
        let y = DataMatrix::from_rows(&rows).unwrap();
        let mut mix = MixtureModel::from_clusters(&y, vec![(0..30).collect()], 0.2, 30).unwrap();
        assert_eq!(mix.effective_trim(30), 0.0);
        mix.accept_assignment(&y, 30, 1).unwrap();
        // 31 members > 30: the outlier is trimmed away.
        assert!(mix.component(1).mean()[0] < 10.0);
        let untrimmed = fit_component(&y, mix.members(1), 0.0).unwrap();
        assert!(untrimmed.mean()[0] > 10.0);
    }

    #[test]
    fn sequential_assign_dense_component() {
        let mut rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0 + 1e-3 * (i % 2) as f64, 1.0]).collect();
        rows.extend((0..40).map(|i| vec![(i as f64 * 0.7).sin() * 5.0, (i as f64 * 0.3).cos() * 5.0]));
        rows.extend((0..15).map(|_| vec![1.0005, 1.0]));
        let y = DataMatrix::from_rows(&rows).unwrap();
        let bg = fit_background(&y).unwrap();
        let mut mix = MixtureModel::from_clusters(&y, vec![(0..10).collect()], 0.0, 30).unwrap();
        let order: Vec<usize> = (50..65).collect();
        let (labels, counts) = sequential_assign(&order, &y, &mut mix, &bg, 1.0).unwrap();
        assert!(labels.iter().all(|&l| l == 1));
        assert_eq!(counts, AssignCounts { to_clusters: 15, to_noise: 0 });
        assert_eq!(mix.component(1).size(), 25);

        let (labels, _) = sequential_assign(&[], &y, &mut mix, &bg, 1.0).unwrap();
        assert!(labels.is_empty());
        assert_eq!(mix.component(1).size(), 25);
    }
}
