//! Synthetic tensors with known structure.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::linalg::CMatrix;
use crate::recsys::check_typical_user;
use crate::tensor::{ifft_trailing_modes, ComplexTensor, DenseTensor, REAL_RESIDUE_TOL};

/// Attempts made by [`generate_preference_tensor`] before giving up.
pub const REJECTION_BUDGET: usize = 1000;

/// Real `N1 x N2 x N3` tensor whose Fourier slice `m` has rank exactly
/// `targets[m]` (with probability one).
///
/// A real tensor has conjugate Fourier slices `m` and `N3 - m`, so targets
/// must satisfy `targets[m] == targets[(N3 - m) % N3]`.
pub fn generate_low_multirank_tensor(
    dims: &[usize],
    targets: &[usize],
    seed: u64,
) -> Result<DenseTensor> {
    let &[n1, n2, n3] = dims else {
        return Err(invalid("low multi-rank generator needs three dimensions"));
    };
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(invalid("dimensions must be positive"));
    }
    if targets.len() != n3 {
        return Err(invalid(format!("{} targets for {n3} slices", targets.len())));
    }
    for (m, &r) in targets.iter().enumerate() {
        if r > n1.min(n2) {
            return Err(invalid(format!("target {r} of slice {m} exceeds min(N1, N2)")));
        }
        if targets[(n3 - m) % n3] != r {
            return Err(invalid(format!(
                "targets of conjugate slices {m} and {} differ",
                (n3 - m) % n3
            )));
        }
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut slices = vec![CMatrix::zeros(n1, n2); n3];
    for m in 0..=n3 / 2 {
        let partner = (n3 - m) % n3;
        let real = partner == m;
        let mut draw = |r: usize, c: usize| {
            CMatrix::from_fn(r, c, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = if real { 0.0 } else { rng.sample(StandardNormal) };
                Complex64::new(re, im)
            })
        };
        let r = targets[m];
        let s = draw(n1, r) * draw(r, n2);
        slices[partner] = s.map(|z| z.conj());
        slices[m] = s;
    }
    let hat = ComplexTensor::from_frontal_slices(&[n1, n2, n3], &slices)?;
    ifft_trailing_modes(&hat, 3)?.into_real(REAL_RESIDUE_TOL)
}

/// Binary `N x N x N` preference tensor `T(user, product, context)` built from
/// `k` user archetypes, with every `(user, context)` row typical for `gamma`.
///
/// Each archetype marks `c` products good in every context, `c` drawn from
/// `[N/2 / sqrt(1+gamma), N/2 sqrt(1+gamma)]`, so all row counts are within a
/// factor `1+gamma` of each other. Users cycle through the archetypes.
pub fn generate_preference_tensor(n: usize, k: usize, gamma: f64, seed: u64) -> Result<DenseTensor> {
    if n == 0 || k == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= N, got N = {n}, k = {k}")));
    }
    if !(gamma > 0.0) {
        return Err(Error::InfeasibleParameters(format!(
            "gamma = {gamma}: typicality with gamma <= 0 forces constant rows"
        )));
    }
    let w = n as f64 / 2.0;
    let lo = ((w / (1.0 + gamma).sqrt()).ceil() as usize).max(1);
    let hi = ((w * (1.0 + gamma).sqrt()).floor() as usize).min(n);
    if lo > hi {
        return Err(Error::InfeasibleParameters(format!(
            "no binary row count fits gamma = {gamma} at N = {n}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..REJECTION_BUDGET {
        let archetypes: Vec<DMatrix<f64>> = (0..k)
            .map(|_| {
                let mut p = DMatrix::zeros(n, n);
                for t in 0..n {
                    let c = rng.random_range(lo..=hi);
                    for j in sample(&mut rng, n, c) {
                        p[(j, t)] = 1.0;
                    }
                }
                p
            })
            .collect();
        let distinct = (0..k).all(|a| (0..a).all(|b| archetypes[a] != archetypes[b]));
        if !distinct {
            continue;
        }
        let t = DenseTensor::from_fn(&[n, n, n], |i| archetypes[i[0] % k][(i[1], i[2])])?;
        if check_typical_user(&t, gamma)?.all_typical() {
            return Ok(t);
        }
    }
    Err(Error::InfeasibleParameters(format!(
        "no typical preference tensor within {REJECTION_BUDGET} attempts"
    )))
}
