use std::f64::consts::PI;

use num_complex::Complex64;
use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::Rng;

use super::{RegisterLayout, StateVector};
use crate::error::{invalid, Result};
use crate::linalg::{unitarity_defect, CMatrix};

/// Largest phase register the simulator accepts.
pub const MAX_PHASE_BITS: usize = 12;

/// How a single estimate is extracted from the outcome distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PePolicy {
    /// The most likely outcome.
    Exact,
    /// Median of this many independent samples, unwrapped around the first.
    MedianOfRepeats(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseEstimationConfig {
    pub bits: usize,
    pub policy: PePolicy,
}

impl PhaseEstimationConfig {
    pub fn new(bits: usize, policy: PePolicy) -> Result<Self> {
        let cfg = Self { bits, policy };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_PHASE_BITS).contains(&self.bits) {
            return Err(invalid(format!(
                "phase register must have 1..={MAX_PHASE_BITS} bits, got {}",
                self.bits
            )));
        }
        if self.policy == PePolicy::MedianOfRepeats(0) {
            return Err(invalid("median of zero repeats"));
        }
        Ok(())
    }

    /// Draws one estimate from an outcome distribution.
    pub fn estimate(&self, dist: &[f64], rng: &mut impl Rng) -> Result<usize> {
        match self.policy {
            PePolicy::Exact => Ok(dist
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, _)| k)
                .unwrap_or(0)),
            PePolicy::MedianOfRepeats(r) => {
                let w = WeightedIndex::new(dist).map_err(|e| invalid(e.to_string()))?;
                let samples: Vec<usize> = (0..r).map(|_| w.sample(rng)).collect();
                Ok(median_of_repeats(&samples, self.bits))
            }
        }
    }
}

/// `U^0, U^1, ..., U^{count-1}`.
pub fn unitary_powers(u: &CMatrix, count: usize) -> Vec<CMatrix> {
    let n = u.nrows();
    let mut out = Vec::with_capacity(count);
    let mut acc = CMatrix::identity(n, n);
    for _ in 0..count {
        let next = &acc * u;
        out.push(std::mem::replace(&mut acc, next));
    }
    out
}

/// Simulates textbook phase estimation of `u` on `eigstate` and returns the
/// distribution of the `bits`-bit outcome. Outcome `k` estimates the
/// eigenphase `2 pi k / 2^bits`.
pub fn phase_estimate(
    u: &CMatrix,
    eigstate: &[Complex64],
    cfg: &PhaseEstimationConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let n = u.nrows();
    if !u.is_square() || eigstate.len() != n {
        return Err(invalid("unitary and state dimensions disagree"));
    }
    if unitarity_defect(u) > 1e-10 {
        return Err(invalid("phase estimation needs a unitary"));
    }
    let norm = eigstate.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(invalid("input state is not normalized"));
    }
    // Pad the system to a power of two with an identity block.
    let padded = n.next_power_of_two();
    let mut up = CMatrix::identity(padded, padded);
    up.view_mut((0, 0), (n, n)).copy_from(u);
    let layout = RegisterLayout::new(&[("ph", cfg.bits), ("s", padded.trailing_zeros() as usize)])?;
    let mut amps = vec![Complex64::default(); layout.dim()];
    amps[..n].copy_from_slice(eigstate);
    let mut state = StateVector::from_amplitudes(layout, amps)?;
    state.apply_qft("ph", false)?;
    let powers = unitary_powers(&up, 1 << cfg.bits);
    state.apply_multiplexed("ph", &["s"], None, |y| Some(&powers[y]))?;
    state.apply_qft("ph", true)?;
    state.marginal(&["ph"])
}

/// Probability that `bits`-bit phase estimation of eigenphase
/// `2 pi phase_fraction` reports outcome `k`.
pub fn pe_kernel(phase_fraction: f64, bits: usize, k: usize) -> f64 {
    let n = (1usize << bits) as f64;
    let delta = (phase_fraction * n - k as f64).rem_euclid(n);
    let delta = if delta > n / 2.0 { delta - n } else { delta };
    if delta.abs() < 1e-12 {
        return 1.0;
    }
    let num = (PI * delta).sin().powi(2);
    let den = n * n * (PI * delta / n).sin().powi(2);
    num / den
}

/// The whole kernel as a distribution over outcomes.
pub fn phase_estimate_distribution(phase_fraction: f64, bits: usize) -> Vec<f64> {
    (0..1usize << bits)
        .map(|k| pe_kernel(phase_fraction, bits, k))
        .collect()
}

/// Circular median: samples are unwrapped into the half-open window of width
/// `2^bits` centred on the first sample, the median taken, and the result
/// wrapped back.
pub fn median_of_repeats(samples: &[usize], bits: usize) -> usize {
    let n = 1i64 << bits;
    let Some(&first) = samples.first() else {
        return 0;
    };
    let first = first as i64;
    let mut unwrapped: Vec<i64> = samples
        .iter()
        .map(|&s| {
            let mut d = (s as i64 - first).rem_euclid(n);
            if d >= n / 2 {
                d -= n;
            }
            first + d
        })
        .collect();
    unwrapped.sort_unstable();
    unwrapped[unwrapped.len() / 2].rem_euclid(n) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag_phases(ph: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            ph.len(),
            ph.iter().map(|&p| Complex64::from_polar(1.0, 2.0 * PI * p)),
        ))
    }

    #[test]
    fn exact_grid_phase_is_deterministic() {
        let u = diag_phases(&[0.0, 3.0 / 8.0]);
        let cfg = PhaseEstimationConfig::new(3, PePolicy::Exact).unwrap();
        let one = [Complex64::default(), Complex64::new(1.0, 0.0)];
        let d = phase_estimate(&u, &one, &cfg).unwrap();
        assert!((d[3] - 1.0).abs() < 1e-12);
        let id = CMatrix::identity(2, 2);
        let d0 = phase_estimate(&id, &one, &cfg).unwrap();
        assert!((d0[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn off_grid_matches_kernel() {
        let u = diag_phases(&[0.3]);
        let cfg = PhaseEstimationConfig::new(4, PePolicy::Exact).unwrap();
        let d = phase_estimate(&u, &[Complex64::new(1.0, 0.0)], &cfg).unwrap();
        let k = phase_estimate_distribution(0.3, 4);
        for (a, b) in d.iter().zip(&k) {
            assert!((a - b).abs() < 1e-12);
        }
        let mode = cfg.estimate(&d, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(mode, 5);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // Within one grid step of the phase with probability at least 8/pi^2.
        assert!(k[4] + k[5] >= 8.0 / (PI * PI));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(PhaseEstimationConfig::new(0, PePolicy::Exact).is_err());
        assert!(PhaseEstimationConfig::new(13, PePolicy::Exact).is_err());
        assert!(PhaseEstimationConfig::new(4, PePolicy::MedianOfRepeats(0)).is_err());
    }

    #[test]
    fn median_unwraps_around_zero() {
        assert_eq!(median_of_repeats(&[0, 15, 1, 15, 0], 4), 0);
        assert_eq!(median_of_repeats(&[15, 14, 0, 15, 1], 4), 15);
        assert_eq!(median_of_repeats(&[3, 9, 4], 4), 4);
    }
}
