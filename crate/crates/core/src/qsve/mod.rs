//! Quantum singular value estimation of matrix slices.
//!
//! Estimates live in a `t`-qubit register `b` as a folded phase index
//! `q ∈ [0, 2^{t-1}]`; the decoded value is `||A||_F cos(pi q / 2^t)`. Phase
//! estimation of the walk operator reports `k ≈ 2^t theta / (2 pi)` for the
//! eigenphase `theta = 2 arccos(sigma / ||A||_F)` and `2^t - k` for its
//! partner `-theta`; folding `min(k, 2^t - k)` merges the two.
//!
//! Two interchangeable implementations are provided:
//! - [`SliceQsve`] applies the ideal estimation map `sum_l |y_l><y_l| ⊗ X^{q_l}`
//!   (oracle mode), which satisfies `|sigma_bar - sigma| <= (pi / 2^t) ||A||_F`
//!   deterministically;
//! - [`qsve_circuit`] simulates the full walk-operator circuit.

mod circuit;
pub mod kptree;
mod pipeline;
pub mod walk;

pub use circuit::{qsve_circuit, readout_modal_estimates, CircuitRun, CIRCUIT_MAX_WALK_DIM};
pub use kptree::KpTree;
pub use pipeline::{
    controlled_qsve, quantum_tsvd, quantum_tsvd_readout, QuantumTsvdReadout, QuantumTsvdRun,
};
pub use walk::{
    build_isometries, build_walk_operator, invariant_subspace_defect, reflection, EigenPhaseMatch,
    unitary_eigenphases, IsometrySet, WalkOperator,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{svd_complex, CMatrix, FullSvd};
use crate::qsim::{pe_kernel, StateVector, MAX_PHASE_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QsveMode {
    Circuit,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QsveConfig {
    pub mode: QsveMode,
    /// Estimate register width `t`.
    pub bits: usize,
    /// Oracle mode only: draw each estimate from the phase-estimation kernel
    /// with this seed instead of rounding to the nearest grid point.
    pub kernel_seed: Option<u64>,
}

impl QsveConfig {
    pub fn oracle(bits: usize) -> Result<Self> {
        let c = Self {
            mode: QsveMode::Oracle,
            bits,
            kernel_seed: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn circuit(bits: usize) -> Result<Self> {
        let c = Self {
            mode: QsveMode::Circuit,
            bits,
            kernel_seed: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=MAX_PHASE_BITS).contains(&self.bits) {
            return Err(invalid(format!(
                "estimate register needs 2..={MAX_PHASE_BITS} bits, got {}",
                self.bits
            )));
        }
        Ok(())
    }

    /// Precision `epsilon_SVE = pi / 2^t`.
    pub fn epsilon(&self) -> f64 {
        epsilon_for_bits(self.bits)
    }
}

pub fn epsilon_for_bits(bits: usize) -> f64 {
    PI / (1u64 << bits) as f64
}

/// Nearest grid index `round(2^t arccos(ratio) / pi)` for `ratio = sigma / ||A||_F`.
pub fn grid_index(ratio: f64, bits: usize) -> usize {
    let n = (1u64 << bits) as f64;
    (n * ratio.clamp(-1.0, 1.0).acos() / PI).round() as usize
}

/// `||A||_F cos(pi q / 2^t)`.
pub fn decode_estimate(q: usize, norm: f64, bits: usize) -> f64 {
    norm * (PI * q as f64 / (1u64 << bits) as f64).cos()
}

/// `min(k, 2^t - k)`.
pub fn fold_phase(k: usize, bits: usize) -> usize {
    let n = 1usize << bits;
    k.min(n - k)
}

/// Ideal estimation map of one nonzero slice.
#[derive(Debug, Clone)]
pub struct SliceQsve {
    a: CMatrix,
    norm: f64,
    bits: usize,
    /// Factors of `conj(A)`; its right singular vectors span the input register.
    factors: FullSvd,
    /// Folded index per right singular vector (zero singular value beyond the rank bound).
    estimates: Vec<usize>,
}

impl SliceQsve {
    pub fn new(a: &CMatrix, cfg: &QsveConfig) -> Result<Self> {
        cfg.validate()?;
        let norm = a.norm();
        if norm == 0.0 {
            return Err(invalid("cannot estimate singular values of a zero slice"));
        }
        let factors = svd_complex(&a.map(|z| z.conj()))?;
        let n2 = a.ncols();
        let ratios: Vec<f64> = (0..n2)
            .map(|l| factors.sigma.get(l).copied().unwrap_or(0.0) / norm)
            .collect();
        let estimates = match cfg.kernel_seed {
            None => ratios.iter().map(|&r| grid_index(r, cfg.bits)).collect(),
            Some(seed) => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                ratios
                    .iter()
                    .map(|&r| sample_folded(r, cfg.bits, &mut rng))
                    .collect()
            }
        };
        Ok(Self {
            a: a.clone(),
            norm,
            bits: cfg.bits,
            factors,
            estimates,
        })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Exact singular values (descending).
    pub fn singular_values(&self) -> &[f64] {
        &self.factors.sigma
    }

    /// Folded grid indices, one per right singular vector.
    pub fn estimate_indices(&self) -> &[usize] {
        &self.estimates
    }

    /// Decoded estimates `sigma_bar_l` for `l < min(N1, N2)`.
    pub fn estimates(&self) -> Vec<f64> {
        self.estimates[..self.factors.sigma.len()]
            .iter()
            .map(|&q| decode_estimate(q, self.norm, self.bits))
            .collect()
    }

    /// Left singular vectors as they appear in amplitude-encoded states
    /// (`sum_ij A_ij |i>|j> = sum_l sigma_l |u_l>|conj(v_l)>`).
    pub fn left_vector(&self, l: usize) -> Vec<Complex64> {
        self.factors.u.column(l).iter().map(|z| z.conj()).collect()
    }

    /// Right singular vector of `conj(A)`, i.e. the column-register partner
    /// of [`Self::left_vector`].
    pub fn input_vector(&self, l: usize) -> Vec<Complex64> {
        self.factors.v.column(l).iter().copied().collect()
    }

    /// Applies `sum_l |y_l><y_l| ⊗ X^{q_l}` (XOR into `estimate`) on the
    /// `input` register, optionally only where `gate.0 == gate.1`.
    pub fn apply(
        &self,
        state: &mut StateVector,
        input: &str,
        estimate: &str,
        gate: Option<(&str, usize)>,
    ) -> Result<()> {
        let n2 = self.a.ncols();
        if state.layout().size(input)? != n2 {
            return Err(invalid(format!(
                "register `{input}` does not match {n2} slice columns"
            )));
        }
        let nb = state.layout().size(estimate)?;
        if nb != 1 << self.bits {
            return Err(invalid(format!(
                "register `{estimate}` does not have {} qubits",
                self.bits
            )));
        }
        let v = &self.factors.v;
        let est = &self.estimates;
        state.apply_block_map(&[input, estimate], gate, |x, out| {
            // x, out indexed by j * nb + b.
            out.iter_mut().for_each(|o| *o = Complex64::default());
            for (l, &q) in est.iter().enumerate() {
                for b in 0..nb {
                    let mut coef = Complex64::default();
                    for j in 0..n2 {
                        coef += v[(j, l)].conj() * x[j * nb + b];
                    }
                    if coef == Complex64::default() {
                        continue;
                    }
                    let tb = b ^ q;
                    for j in 0..n2 {
                        out[j * nb + tb] += v[(j, l)] * coef;
                    }
                }
            }
        })
    }
}

fn sample_folded(ratio: f64, bits: usize, rng: &mut impl Rng) -> usize {
    let frac = 2.0 * ratio.clamp(-1.0, 1.0).acos() / (2.0 * PI);
    let n = 1usize << bits;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for k in 0..n {
        acc += pe_kernel(frac, bits, k);
        if u < acc {
            return fold_phase(k, bits);
        }
    }
    fold_phase(grid_index(ratio, bits) % n, bits)
}

/// Oracle-mode estimation of one slice: appends a `bits`-qubit register `b`
/// to `input` (which must contain a register `d` over the slice columns) and
/// writes the estimates.
pub fn qsve_oracle(a: &CMatrix, input: &StateVector, cfg: &QsveConfig) -> Result<StateVector> {
    let q = SliceQsve::new(a, cfg)?;
    let mut s = input.clone();
    let at = s.layout().registers().len();
    s.add_register("b", cfg.bits, at)?;
    q.apply(&mut s, "d", "b", None)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::RegisterLayout;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn grid_rounding_examples() {
        let c = (PI * 5.0 / 16.0).cos();
        assert_eq!(grid_index(c, 4), 5);
        assert!((decode_estimate(5, 1.0, 4) - c).abs() < 1e-15);
        assert_eq!(grid_index(1.0, 8), 0);
        assert_eq!(grid_index(0.0, 8), 128);
        assert_eq!(fold_phase(250, 8), 6);
        assert_eq!(fold_phase(0, 8), 0);
        assert!(QsveConfig::oracle(1).is_err());
    }

    #[test]
    fn oracle_bound_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for bits in [2, 5, 12] {
            let cfg = QsveConfig::oracle(bits).unwrap();
            for _ in 0..20 {
                let a = random_matrix(&mut rng, 3, 4);
                let q = SliceQsve::new(&a, &cfg).unwrap();
                for (e, s) in q.estimates().iter().zip(q.singular_values()) {
                    assert!((e - s).abs() <= cfg.epsilon() * q.norm());
                }
            }
        }
        assert!(SliceQsve::new(&CMatrix::zeros(2, 2), &QsveConfig::oracle(4).unwrap()).is_err());
    }

    #[test]
    fn oracle_writes_estimates_on_singular_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(&mut rng, 4, 4);
        let cfg = QsveConfig::oracle(6).unwrap();
        let q = SliceQsve::new(&a, &cfg).unwrap();
        for l in 0..4 {
            let layout = RegisterLayout::new(&[("d", 2)]).unwrap();
            let input = StateVector::from_amplitudes(layout, q.input_vector(l)).unwrap();
            let out = qsve_oracle(&a, &input, &cfg).unwrap();
            let marg = out.marginal(&["b"]).unwrap();
            assert!((marg[q.estimate_indices()[l]] - 1.0).abs() < 1e-12);
            // Applying the map twice restores the input.
            let mut twice = out.clone();
            q.apply(&mut twice, "d", "b", None).unwrap();
            assert!((twice.marginal(&["b"]).unwrap()[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_sampling_is_seeded() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(&mut rng, 4, 4);
        let mut cfg = QsveConfig::oracle(8).unwrap();
        cfg.kernel_seed = Some(3);
        let x = SliceQsve::new(&a, &cfg).unwrap();
        let y = SliceQsve::new(&a, &cfg).unwrap();
        assert_eq!(x.estimate_indices(), y.estimate_indices());
    }
}
