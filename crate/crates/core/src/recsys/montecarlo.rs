//! Empirical bad-recommendation rate against the theoretical bound.

use num_complex::Complex64;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::bounds::BoundReport;
use super::pipeline::{algorithm4, classical_reference_pipeline, Algorithm4Config};
use super::{slice_epsilons, subsample, TruncationPolicy};
use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::tensor::DenseTensor;

/// Where the per-user output distribution comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// [`classical_reference_pipeline`].
    Classical,
    /// [`algorithm4`] in oracle mode with `bits` estimate qubits.
    Oracle { bits: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloConfig {
    /// Subsampling probability.
    pub p: f64,
    /// Rank used for the per-slice errors `eps^(m)`.
    pub k: usize,
    pub gamma: f64,
    pub zeta: f64,
    pub delta: f64,
    pub policy: TruncationPolicy,
    /// Draws of `(user, t, j)`.
    pub samples: usize,
    pub seed: u64,
    pub backend: Backend,
}

#[derive(Debug, Clone, Serialize)]
pub struct UserResult {
    pub user: usize,
    /// `||T(i,:,:) - T_>=sigma(i,:,:)||_F / ||T(i,:,:)||_F`.
    pub slice_error_ratio: f64,
    /// Whether the ratio is at most `epsilon`.
    pub satisfies: bool,
    /// Skipped because the subsampled row is zero or fully truncated.
    pub skipped: bool,
    pub samples: usize,
    pub bad: usize,
    /// Draws whose context carried no output mass.
    pub empty_contexts: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub bound: BoundReport,
    pub slice_eps: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub users: Vec<UserResult>,
    pub skipped_users: usize,
    pub empty_contexts: usize,
    /// Bad draws over all counted draws.
    pub empirical_bad_rate: f64,
    /// Bad draws over counted draws of users satisfying the slice-error inequality.
    pub satisfying_bad_rate: f64,
    /// Fraction of users violating the slice-error inequality.
    pub violating_fraction: f64,
    /// Threshold decisions changed by the estimate grid (oracle backend).
    pub flips: usize,
}

impl MonteCarloReport {
    /// `delta + 3 sqrt(delta (1 - delta) / N)`.
    pub fn violating_allowance(&self) -> f64 {
        let d = self.bound.delta;
        d + 3.0 * (d * (1.0 - d) / self.users.len() as f64).sqrt()
    }

    /// `None` when the bound is vacuous.
    pub fn rate_within_bound(&self) -> Option<bool> {
        self.bound.bad_bound.map(|b| self.satisfying_bad_rate <= b)
    }
}

/// Subsamples `t`, truncates with `cfg.policy`, and draws `(i, t, j)` with the
/// user uniform over non-skipped users, `t` uniform and `j` from the output
/// distribution of user `i` given `t`. A draw is bad when `T(i, j, t) = 0`.
pub fn monte_carlo_bad_rate(t: &DenseTensor, cfg: &MonteCarloConfig) -> Result<MonteCarloReport> {
    t.require_order(3, "Monte Carlo")?;
    if cfg.samples == 0 {
        return Err(invalid("samples must be at least 1"));
    }
    let (n1, n2, n3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let sub_seed: u64 = rng.random();
    let tt = subsample(t, cfg.p, sub_seed)?;
    let slice_eps = slice_epsilons(&tt, cfg.k)?;
    let eps0 = slice_eps.iter().fold(0.0f64, |a, &e| a.max(2.0 * e));
    let bound = BoundReport::new(
        cfg.p,
        cfg.k,
        cfg.gamma,
        cfg.zeta,
        cfg.delta,
        eps0,
        t.frobenius_norm(),
        n1,
    )?;
    let thresholds = cfg.policy.thresholds(&tt)?;

    let mut users = Vec::with_capacity(n1);
    let mut outputs: Vec<Option<Vec<f64>>> = Vec::with_capacity(n1);
    let mut flips = 0;
    for i in 0..n1 {
        let row_sq: f64 = (0..n2)
            .flat_map(|j| (0..n3).map(move |c| (j, c)))
            .map(|(j, c)| t.get(&[i, j, c]).powi(2))
            .sum();
        let reference = match classical_reference_pipeline(&tt, &thresholds, i) {
            Ok(r) => Some(r),
            Err(Error::EmptyRecommendation { .. }) => None,
            Err(e) => return Err(e),
        };
        let approx = reference
            .as_ref()
            .map_or_else(|| CMatrix::zeros(n2, n3), |r| r.matrix.clone());
        let diff_sq: f64 = (0..n2)
            .flat_map(|j| (0..n3).map(move |c| (j, c)))
            .map(|(j, c)| (approx[(j, c)] - Complex64::new(t.get(&[i, j, c]), 0.0)).norm_sqr())
            .sum();
        let ratio = if row_sq > 0.0 {
            (diff_sq / row_sq).sqrt()
        } else {
            0.0
        };
        let joint = match (&reference, cfg.backend) {
            (None, _) => None,
            (Some(r), Backend::Classical) => Some(r.joint.clone()),
            (Some(_), Backend::Oracle { bits }) => {
                let out = algorithm4(&tt, &thresholds, i, &Algorithm4Config::oracle(bits)?)?;
                flips += out.trace.weighted_flips;
                Some(out.joint)
            }
        };
        users.push(UserResult {
            user: i,
            slice_error_ratio: ratio,
            satisfies: ratio <= bound.epsilon,
            skipped: joint.is_none(),
            samples: 0,
            bad: 0,
            empty_contexts: 0,
        });
        outputs.push(joint);
    }

    let active: Vec<usize> = (0..n1).filter(|&i| outputs[i].is_some()).collect();
    let conditionals: Vec<Vec<Option<WeightedIndex<f64>>>> = outputs
        .iter()
        .map(|o| match o {
            None => Vec::new(),
            Some(joint) => (0..n3)
                .map(|c| WeightedIndex::new((0..n2).map(|j| joint[j * n3 + c])).ok())
                .collect(),
        })
        .collect();
    if !active.is_empty() {
        for _ in 0..cfg.samples {
            let i = active[rng.random_range(0..active.len())];
            let c = rng.random_range(0..n3);
            let u = &mut users[i];
            match &conditionals[i][c] {
                None => u.empty_contexts += 1,
                Some(dist) => {
                    let j = dist.sample(&mut rng);
                    u.samples += 1;
                    if t.get(&[i, j, c]) == 0.0 {
                        u.bad += 1;
                    }
                }
            }
        }
    }

    let rate = |pred: &dyn Fn(&UserResult) -> bool| {
        let (s, b) = users
            .iter()
            .filter(|u| pred(u))
            .fold((0usize, 0usize), |(s, b), u| (s + u.samples, b + u.bad));
        if s == 0 {
            0.0
        } else {
            b as f64 / s as f64
        }
    };
    let empirical_bad_rate = rate(&|_| true);
    let satisfying_bad_rate = rate(&|u| u.satisfies);
    let violating = users.iter().filter(|u| !u.satisfies).count();
    Ok(MonteCarloReport {
        bound,
        slice_eps,
        thresholds,
        skipped_users: users.iter().filter(|u| u.skipped).count(),
        empty_contexts: users.iter().map(|u| u.empty_contexts).sum(),
        empirical_bad_rate,
        satisfying_bad_rate,
        violating_fraction: violating as f64 / n1 as f64,
        users,
        flips,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(p: f64, policy: TruncationPolicy, backend: Backend) -> MonteCarloConfig {
        MonteCarloConfig {
            p,
            k: 2,
            gamma: 1.0,
            zeta: 0.5,
            delta: 0.5,
            policy,
            samples: 2000,
            seed: 17,
            backend,
        }
    }

    #[test]
    fn full_sampling_without_truncation_is_never_bad() {
        let t = DenseTensor::from_fn(&[4, 4, 4], |i| f64::from((i[0] + 2 * i[1] + i[2]) % 3 != 0)).unwrap();
        let pol = TruncationPolicy::Explicit { thresholds: vec![0.0; 4] };
        let r = monte_carlo_bad_rate(&t, &cfg(1.0, pol.clone(), Backend::Classical)).unwrap();
        assert_eq!(r.empirical_bad_rate, 0.0);
        assert_eq!(r.violating_fraction, 0.0);
        let r = monte_carlo_bad_rate(&t, &cfg(1.0, pol, Backend::Oracle { bits: 6 })).unwrap();
        assert_eq!(r.empirical_bad_rate, 0.0);
    }

    #[test]
    fn all_ones_is_never_bad() {
        let t = DenseTensor::from_fn(&[4, 4, 4], |_| 1.0).unwrap();
        let r = monte_carlo_bad_rate(
            &t,
            &cfg(0.6, TruncationPolicy::PerSliceBestRank { k: 2 }, Backend::Classical),
        )
        .unwrap();
        assert_eq!(r.empirical_bad_rate, 0.0);
        assert_eq!(r.users.iter().map(|u| u.samples + u.empty_contexts).sum::<usize>(), 2000);
    }
}
