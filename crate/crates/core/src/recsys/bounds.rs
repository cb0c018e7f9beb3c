//! Error and success-probability bounds of the recommendation guarantee.

use serde::Serialize;

use crate::error::{invalid, Result};

/// `eps = sqrt((1+zeta)(1/p - p)) + eps0 sqrt(2(1+gamma)/(delta p))`.
pub fn bound_epsilon(gamma: f64, zeta: f64, delta: f64, p: f64, eps0: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("p must be in (0, 1], got {p}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must be in (0, 1], got {delta}")));
    }
    if !((0.0..=1.0).contains(&gamma) && (0.0..=1.0).contains(&zeta)) {
        return Err(invalid("gamma and zeta must be in [0, 1]"));
    }
    if !(eps0 >= 0.0) {
        return Err(invalid("eps0 must be non-negative"));
    }
    Ok(((1.0 + zeta) * (1.0 / p - p)).sqrt() + eps0 * (2.0 * (1.0 + gamma) / (delta * p)).sqrt())
}

/// `(eps / (1 - eps))^2`, defined for `eps < 1`.
pub fn bad_recommendation_bound(eps: f64) -> Result<f64> {
    if !(eps >= 0.0) {
        return Err(invalid("eps must be non-negative"));
    }
    if eps >= 1.0 {
        return Err(invalid(format!(
            "the bad-recommendation bound is vacuous for eps = {eps} >= 1"
        )));
    }
    Ok((eps / (1.0 - eps)).powi(2))
}

/// `(p1, p2)` with `p1 = 1 - exp(-||T||^2 / (3p))` and
/// `p2 = 1 - exp(-zeta^2 (1/p - p) ||T||^2 / (3 N (1+gamma)))`.
pub fn success_probabilities(
    frobenius: f64,
    p: f64,
    zeta: f64,
    gamma: f64,
    n: usize,
) -> Result<(f64, f64)> {
    if !(p > 0.0 && p <= 1.0) || n == 0 || !(gamma >= 0.0) {
        return Err(invalid("p must be in (0, 1] and N positive"));
    }
    let f2 = frobenius * frobenius;
    let p1 = 1.0 - (-f2 / (3.0 * p)).exp();
    let p2 = 1.0 - (-zeta * zeta * (1.0 / p - p) * f2 / (3.0 * n as f64 * (1.0 + gamma))).exp();
    Ok((p1, p2))
}

/// Expected number of pipeline repetitions before the flag postselection
/// succeeds: `sqrt(2)(1+gamma) / ((1+eps) sqrt(p))`.
pub fn repeat_count_estimate(gamma: f64, eps: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid("p must be in (0, 1]"));
    }
    Ok(2f64.sqrt() * (1.0 + gamma) / ((1.0 + eps) * p.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub p: f64,
    pub k: usize,
    pub gamma: f64,
    pub zeta: f64,
    pub delta: f64,
    pub eps0: f64,
    pub epsilon: f64,
    /// `None` when `epsilon >= 1`.
    pub bad_bound: Option<f64>,
    pub vacuous: bool,
    pub p1: f64,
    pub p2: f64,
    /// `1 - 1/poly(N)`: the polynomial is left unspecified, so this is not
    /// evaluated.
    pub p3: Option<f64>,
    pub repeat_count: f64,
}

impl BoundReport {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        p: f64,
        k: usize,
        gamma: f64,
        zeta: f64,
        delta: f64,
        eps0: f64,
        frobenius: f64,
        n: usize,
    ) -> Result<Self> {
        let epsilon = bound_epsilon(gamma, zeta, delta, p, eps0)?;
        let bad_bound = bad_recommendation_bound(epsilon).ok();
        let (p1, p2) = success_probabilities(frobenius, p, zeta, gamma, n)?;
        Ok(Self {
            p,
            k,
            gamma,
            zeta,
            delta,
            eps0,
            epsilon,
            bad_bound,
            vacuous: bad_bound.is_none(),
            p1,
            p2,
            p3: None,
            repeat_count: repeat_count_estimate(gamma, epsilon, p)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_examples() {
        assert_eq!(bound_epsilon(1.0, 0.5, 0.5, 1.0, 0.0).unwrap(), 0.0);
        let e = bound_epsilon(0.0, 0.0, 1.0, 1.0, 0.3).unwrap();
        assert!((e - 2f64.sqrt() * 0.3).abs() < 1e-15);
        assert!(bound_epsilon(1.5, 0.0, 0.5, 1.0, 0.1).is_err());
        let e = bound_epsilon(0.0, 0.0, 1.0, 0.5, 0.0).unwrap();
        assert!((e - 1.5f64.sqrt()).abs() < 1e-15);
        let e = bound_epsilon(1.0, 0.0, 1.0, 1.0, 0.1).unwrap();
        assert!((e - 0.2).abs() < 1e-15);
        assert!(bound_epsilon(1.0, 0.0, 0.0, 1.0, 0.1).is_err());
        assert!(bound_epsilon(1.0, 0.0, 0.5, 0.0, 0.1).is_err());
    }

    #[test]
    fn bad_bound_examples() {
        assert_eq!(bad_recommendation_bound(0.0).unwrap(), 0.0);
        assert!((bad_recommendation_bound(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((bad_recommendation_bound(0.2).unwrap() - 0.0625).abs() < 1e-15);
        assert!((bad_recommendation_bound(1.0 / 3.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(matches!(
            bad_recommendation_bound(1.0),
            Err(crate::Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn probabilities_and_repeats() {
        let (p1, p2) = success_probabilities(3.0, 1.0, 0.5, 1.0, 4).unwrap();
        assert!((p1 - (1.0 - (-3.0f64).exp())).abs() < 1e-15);
        assert_eq!(p2, 0.0);
        assert!((repeat_count_estimate(1.0, 0.0, 1.0).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let r = BoundReport::new(0.9, 2, 1.0, 0.5, 0.5, 0.0, 10.0, 8).unwrap();
        assert!(!r.vacuous);
        let r = BoundReport::new(0.2, 2, 1.0, 0.5, 0.5, 0.3, 10.0, 8).unwrap();
        assert!(r.vacuous && r.bad_bound.is_none());
    }
}
