//! Minimax concave penalty and its derivative.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Penalty strength `lambda` and concavity scale `delta`; the penalty is flat
/// beyond `lambda * delta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyParams {
    pub lambda: f64,
    pub delta: f64,
}

impl PenaltyParams {
    pub fn new(lambda: f64, delta: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!(
                "penalty parameters must be positive and finite, got lambda={lambda}, delta={delta}"
            )));
        }
        Ok(Self { lambda, delta })
    }

    /// Distance at which the penalty saturates.
    #[inline]
    pub fn threshold(&self) -> f64 {
        self.lambda * self.delta
    }
}

#[inline]
pub(crate) fn mcp_unchecked(t: f64, threshold: f64) -> f64 {
    if t < threshold {
        t - t * t / (2.0 * threshold)
    } else {
        threshold / 2.0
    }
}

#[inline]
pub(crate) fn mcp_derivative_unchecked(t: f64, threshold: f64) -> f64 {
    (1.0 - t / threshold).max(0.0)
}

fn check_nonnegative(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("penalty argument must be >= 0, got {t}")))
    }
}

/// `rho(t) = t - t^2 / (2 lambda delta)` below the threshold, `lambda delta / 2` above.
pub fn mcp(t: f64, params: PenaltyParams) -> Result<f64> {
    check_nonnegative(t)?;
    Ok(mcp_unchecked(t, params.threshold()))
}

/// `rho'(t) = (1 - t / (lambda delta))_+`.
pub fn mcp_derivative(t: f64, params: PenaltyParams) -> Result<f64> {
    check_nonnegative(t)?;
    Ok(mcp_derivative_unchecked(t, params.threshold()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(lambda: f64, delta: f64) -> PenaltyParams {
        PenaltyParams::new(lambda, delta).unwrap()
    }

    /// Simpson quadrature of the integrand `(1 - x / (lambda delta))_+`.
    fn mcp_quadrature(t: f64, p: PenaltyParams) -> f64 {
        let steps = 2000;
        let h = t / steps as f64;
        let f = |x: f64| (1.0 - x / (p.lambda * p.delta)).max(0.0);
        let mut acc = f(0.0) + f(t);
        for i in 1..steps {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn flat_branch() {
        assert_eq!(mcp(3.0, params(1.0, 2.0)).unwrap(), 1.0);
    }

    #[test]
    fn zero_at_origin() {
        assert_eq!(mcp(0.0, params(0.7, 3.0)).unwrap(), 0.0);
        assert_eq!(mcp_derivative(0.0, params(0.7, 3.0)).unwrap(), 1.0);
    }

    #[test]
    fn quadratic_branch_matches_quadrature() {
        let p = params(1.0, 2.0);
        let q = mcp_quadrature(1.0, p);
        assert!((q - 0.75).abs() < 1e-12);
        assert_eq!(mcp(1.0, p).unwrap(), 0.75);
    }

    #[test]
    fn derivative_values() {
        let p = params(1.0, 2.0);
        assert_eq!(mcp_derivative(1.0, p).unwrap(), 0.5);
        assert_eq!(mcp_derivative(2.0, p).unwrap(), 0.0);
        assert_eq!(mcp_derivative(5.0, p).unwrap(), 0.0);
    }

    #[test]
    fn negative_argument_is_domain_error() {
        assert!(matches!(mcp(-1e-9, params(1.0, 1.0)), Err(Error::Domain(_))));
        assert!(matches!(mcp_derivative(-1.0, params(1.0, 1.0)), Err(Error::Domain(_))));
        assert!(PenaltyParams::new(0.0, 1.0).is_err());
        assert!(PenaltyParams::new(1.0, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn shape(lambda in 0.01f64..10.0, delta in 0.01f64..10.0, t in 0.0f64..50.0) {
            let p = params(lambda, delta);
            let h = 1e-3 * p.threshold();
            let r0 = mcp(t, p).unwrap();
            let r1 = mcp(t + h, p).unwrap();
            let r2 = mcp(t + 2.0 * h, p).unwrap();
            prop_assert!(r1 >= r0);
            prop_assert!(r2 - 2.0 * r1 + r0 <= 1e-12 * p.threshold());
            prop_assert!(r0 <= p.threshold() / 2.0 + 1e-15);
        }

        #[test]
        fn tangent_line_majorizes(lambda in 0.01f64..10.0, delta in 0.01f64..10.0,
                                  t0 in 0.0f64..30.0, t in 0.0f64..30.0) {
            let p = params(lambda, delta);
            let tangent = mcp(t0, p).unwrap() + mcp_derivative(t0, p).unwrap() * (t - t0);
            prop_assert!(tangent + 1e-12 * (1.0 + t.abs()) >= mcp(t, p).unwrap());
            let at_t0 = mcp(t0, p).unwrap();
            prop_assert_eq!(at_t0 + mcp_derivative(t0, p).unwrap() * 0.0, at_t0);
        }
    }
}
