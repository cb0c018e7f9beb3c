//! Context-aware recommendation from a binary preference tensor
//! `T(user, product, context)`.
//!
//! The tensor is subsampled, transformed along the context mode with the
//! unitary Fourier transform, each Fourier slice is truncated by a singular
//! value threshold, and a product is drawn from the transformed-back row of
//! the user. [`classical_reference_pipeline`] computes that distribution
//! directly; [`algorithm4`] runs it on the state-vector simulator.

mod bounds;
mod montecarlo;
mod pipeline;

pub use bounds::{
    bad_recommendation_bound, bound_epsilon, repeat_count_estimate, success_probabilities,
    BoundReport,
};
pub use montecarlo::{monte_carlo_bad_rate, Backend, MonteCarloConfig, MonteCarloReport, UserResult};
pub use pipeline::{
    algorithm4, classical_reference_pipeline, completion_variant, total_variation,
    Algorithm4Config, PipelineOutcome, PipelineTrace, ReferenceOutput,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::tensor::{qft_trailing_modes, DenseTensor};
use crate::tsvd::{best_rank_k_relative_error, error_threshold, FftConvention, SliceSvdSet};

/// Keeps each entry, scaled by `1/p`, with probability `p`.
pub fn subsample(t: &DenseTensor, p: f64, seed: u64) -> Result<DenseTensor> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(invalid(format!("subsample probability must be in (0, 1], got {p}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let values = t
        .values()
        .iter()
        .map(|&v| if rng.random::<f64>() < p { v / p } else { 0.0 })
        .collect();
    DenseTensor::new(t.dims().to_vec(), values)
}

/// Per `(user, context)` typicality flags, `flags[i][m]`:
/// `||T||_F^2 / ((1+gamma) N1 N3) <= ||T(i,:,m)||^2 <= (1+gamma) ||T||_F^2 / (N1 N3)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypicalityReport {
    pub flags: Vec<Vec<bool>>,
    pub lower: f64,
    pub upper: f64,
}

impl TypicalityReport {
    pub fn all_typical(&self) -> bool {
        self.flags.iter().all(|r| r.iter().all(|&f| f))
    }
}

pub fn check_typical_user(t: &DenseTensor, gamma: f64) -> Result<TypicalityReport> {
    t.require_order(3, "typicality check")?;
    if !(gamma > 0.0) {
        return Err(invalid("gamma must be positive"));
    }
    let (n1, n2, n3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
    let mean = t.frobenius_norm().powi(2) / (n1 * n3) as f64;
    let (lower, upper) = (mean / (1.0 + gamma), mean * (1.0 + gamma));
    let flags = (0..n1)
        .map(|i| {
            (0..n3)
                .map(|m| {
                    let r: f64 = (0..n2).map(|j| t.get(&[i, j, m]).powi(2)).sum();
                    r >= lower * (1.0 - 1e-12) && r <= upper * (1.0 + 1e-12)
                })
                .collect()
        })
        .collect();
    Ok(TypicalityReport {
        flags,
        lower,
        upper,
    })
}

/// How the per-slice thresholds are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationPolicy {
    /// `sigma^(m) = eps^(m) ||T_hat^(m)||_F / sqrt(k)`.
    PerSlice { k: usize, eps: Vec<f64> },
    /// `eps^(m)` is the best rank-`k` relative error of each slice.
    PerSliceBestRank { k: usize },
    /// One threshold for every slice.
    GlobalThreshold { sigma: f64 },
    /// Explicit thresholds.
    Explicit { thresholds: Vec<f64> },
}

impl TruncationPolicy {
    /// Thresholds for the unitary-convention Fourier slices of `t`.
    pub fn thresholds(&self, t: &DenseTensor) -> Result<Vec<f64>> {
        let set = unitary_slices(t)?;
        let n3 = set.len();
        let norms: Vec<f64> = set.slices().iter().map(|f| f.frobenius_norm()).collect();
        let out = match self {
            TruncationPolicy::PerSlice { k, eps } => {
                check_rank(*k)?;
                if eps.len() != n3 {
                    return Err(invalid(format!("{} eps values for {n3} slices", eps.len())));
                }
                norms
                    .iter()
                    .zip(eps)
                    .map(|(&n, &e)| error_threshold(n, e, *k))
                    .collect()
            }
            TruncationPolicy::PerSliceBestRank { k } => {
                check_rank(*k)?;
                set.slices()
                    .iter()
                    .map(|f| {
                        let e = best_rank_k_relative_error(&f.sigma, *k);
                        error_threshold(f.frobenius_norm(), e, *k)
                    })
                    .collect()
            }
            TruncationPolicy::GlobalThreshold { sigma } => vec![*sigma; n3],
            TruncationPolicy::Explicit { thresholds } => {
                if thresholds.len() != n3 {
                    return Err(invalid(format!(
                        "{} thresholds for {n3} slices",
                        thresholds.len()
                    )));
                }
                thresholds.clone()
            }
        };
        if out.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("thresholds must be non-negative"));
        }
        Ok(out)
    }
}

fn check_rank(k: usize) -> Result<()> {
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    Ok(())
}

/// SVDs of `QFT_e(T)` slices (unitary transform, `w = e^{+2 pi i / N}`), in
/// register order.
pub fn unitary_slices(t: &DenseTensor) -> Result<SliceSvdSet> {
    t.require_order(3, "recommendation")?;
    let hat = qft_trailing_modes(&t.to_complex(), 3, false)?;
    SliceSvdSet::from_hat(&hat, FftConvention::Unitary)
}

/// Best rank-`k` relative error `eps^(m)` of every unitary Fourier slice.
pub fn slice_epsilons(t: &DenseTensor, k: usize) -> Result<Vec<f64>> {
    Ok(unitary_slices(t)?
        .slices()
        .iter()
        .map(|f| best_rank_k_relative_error(&f.sigma, k))
        .collect())
}

/// Single threshold keeping exactly the top `k` of the pooled Fourier-slice
/// singular values: the midpoint between the `k`-th and `(k+1)`-th largest.
/// Ties at that boundary keep every tied value.
pub fn global_threshold_for_top_k(t: &DenseTensor, k: usize) -> Result<f64> {
    let set = unitary_slices(t)?;
    let mut pooled: Vec<f64> = set.slices().iter().flat_map(|f| f.sigma.clone()).collect();
    if k == 0 || k >= pooled.len() {
        return Err(invalid(format!(
            "k must be in 1..{} for the pooled spectrum",
            pooled.len()
        )));
    }
    pooled.sort_by(|a, b| b.total_cmp(a));
    Ok(0.5 * (pooled[k - 1] + pooled[k]))
}
