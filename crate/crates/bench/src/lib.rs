//! Deterministic inputs shared by the benchmarks.

use num_complex::Complex64;
use rand::Rng;
use tqsvd_core::harness::trial_rng;
use tqsvd_core::{CMatrix, DenseTensor};

pub fn random_tensor(dims: &[usize], seed: u64) -> DenseTensor {
    let mut rng = trial_rng(seed, 0);
    DenseTensor::from_fn(dims, |_| rng.random_range(-1.0..1.0)).expect("valid dims")
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> CMatrix {
    let mut rng = trial_rng(seed, 0);
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}
