//! Streaming per-dimension mean and variance (Welford's one-pass update).
//!
//! Component statistics are defined as the result of folding member rows into
//! a [`RunningMoments`] in member order, so extending an existing accumulator
//! by one row yields exactly the same bits as refitting from the full list.

use serde::{Deserialize, Serialize};

/// One-pass accumulator of per-dimension mean and sum of squared deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningMoments {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl RunningMoments {
    pub fn new(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds one observation. Panics if `row` has the wrong length.
    pub fn push(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.mean.len(), "row length mismatch");
        self.count += 1;
        let n = self.count as f64;
        for ((mean, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(row) {
            let delta = x - *mean;
            *mean += delta / n;
            *m2 += delta * (x - *mean);
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased (n - 1) variance per dimension; `None` with fewer than two observations.
    pub fn sample_variance(&self) -> Option<Vec<f64>> {
        if self.count < 2 {
            return None;
        }
        let denom = (self.count - 1) as f64;
        Some(self.m2.iter().map(|&m| (m / denom).max(0.0)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pass(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let n = rows.len() as f64;
        let p = rows[0].len();
        let mut mean = vec![0.0; p];
        for r in rows {
            for m in 0..p {
                mean[m] += r[m];
            }
        }
        mean.iter_mut().for_each(|v| *v /= n);
        let mut var = vec![0.0; p];
        for r in rows {
            for m in 0..p {
                var[m] += (r[m] - mean[m]).powi(2);
            }
        }
        var.iter_mut().for_each(|v| *v /= n - 1.0);
        (mean, var)
    }

    #[test]
    fn matches_two_pass() {
        let rows: Vec<Vec<f64>> = (0..57)
            .map(|i| {
                let t = i as f64;
                vec![1e6 + (t * 0.37).sin(), -3.0 + t * 0.01, (t * 1.3).cos() * 50.0]
            })
            .collect();
        let mut acc = RunningMoments::new(3);
        rows.iter().for_each(|r| acc.push(r));
        let (mean, var) = two_pass(&rows);
        let got_var = acc.sample_variance().unwrap();
        for m in 0..3 {
            assert!(((acc.mean()[m] - mean[m]) / mean[m]).abs() < 1e-12);
            assert!(((got_var[m] - var[m]) / var[m]).abs() < 1e-10);
        }
    }

    #[test]
    fn single_observation_has_no_variance() {
        let mut acc = RunningMoments::new(2);
        acc.push(&[1.0, 2.0]);
        assert_eq!(acc.count(), 1);
        assert!(acc.sample_variance().is_none());
        assert_eq!(acc.mean(), &[1.0, 2.0]);
    }
}
