//! Tensor SVD under the t-product: per-slice SVDs of the Fourier-domain
//! tensor, truncations, error formulas and the tensor nuclear norm.

mod export;

pub use export::{write_factors, FactorManifest};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Result};
use crate::linalg::{svd_complex, svd_real, CMatrix, FullSvd};
use crate::tensor::{
    fft_trailing_modes, ifft_trailing_modes, register_slice_index, storage_slice_index,
    ComplexTensor, DenseTensor, REAL_RESIDUE_TOL,
};

/// Normalization of the transform along the trailing modes.
///
/// `Unnormalized` is the classical `fft`/`ifft` pair; `Unitary` scales each
/// mode by `1/sqrt(N)` as a quantum Fourier transform does. Singular values
/// convert as `sigma_unitary = sigma_unnormalized / sqrt(N3 ... Np)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FftConvention {
    Unnormalized,
    Unitary,
}

/// Default relative tolerance for counting nonzero singular values.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Per-frontal-slice SVD factors of a Fourier-domain tensor, in storage order
/// of the trailing modes.
#[derive(Debug, Clone)]
pub struct SliceSvdSet {
    dims: Vec<usize>,
    convention: FftConvention,
    slices: Vec<FullSvd>,
}

impl SliceSvdSet {
    /// SVDs of every frontal slice of an arbitrary complex tensor.
    pub fn from_hat(hat: &ComplexTensor, convention: FftConvention) -> Result<Self> {
        let slices = hat
            .frontal_slices()
            .iter()
            .map(svd_complex)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dims: hat.dims().to_vec(),
            convention,
            slices,
        })
    }

    /// Transforms a real tensor along modes `3..p` and factors each slice.
    ///
    /// Conjugate-symmetric partner slices reuse the conjugated factors, and
    /// self-conjugate slices use a real SVD, so the inverse transform of any
    /// factor assembled from this set is real.
    pub fn from_real(a: &DenseTensor, convention: FftConvention) -> Result<Self> {
        if a.order() < 3 {
            return Err(invalid("t-svd needs a tensor of order at least 3"));
        }
        let mut hat = fft_trailing_modes(a, 3)?;
        if convention == FftConvention::Unitary {
            let s = 1.0 / (a.slice_count() as f64).sqrt();
            hat.values_mut().iter_mut().for_each(|v| *v *= s);
        }
        let trailing = &a.dims()[2..];
        let count = a.slice_count();
        let mut slices: Vec<Option<FullSvd>> = vec![None; count];
        for m in 0..count {
            if slices[m].is_some() {
                continue;
            }
            let multi = storage_multi_index(trailing, m);
            let partner_multi: Vec<usize> = multi
                .iter()
                .zip(trailing)
                .map(|(&i, &n)| (n - i) % n)
                .collect();
            let partner = storage_slice_index(trailing, &partner_multi);
            let slice = hat.frontal_slice(m);
            if partner == m {
                slices[m] = Some(svd_real(&slice.map(|z| z.re))?);
            } else {
                let f = svd_complex(&slice)?;
                slices[partner] = Some(f.conj());
                slices[m] = Some(f);
            }
        }
        Ok(Self {
            dims: a.dims().to_vec(),
            convention,
            slices: slices.into_iter().map(|s| s.expect("filled")).collect(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn convention(&self) -> FftConvention {
        self.convention
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// `min(N1, N2)`.
    pub fn rank_bound(&self) -> usize {
        self.dims[0].min(self.dims[1])
    }

    pub fn slice(&self, m: usize) -> &FullSvd {
        &self.slices[m]
    }

    pub fn slices(&self) -> &[FullSvd] {
        &self.slices
    }

    /// Slice addressed by the register numbering of the trailing modes
    /// (`m = ((m3 N4 + m4) N5 + ...)`, last mode fastest).
    pub fn slice_at_register_index(&self, m: usize) -> &FullSvd {
        let trailing = &self.dims[2..];
        let multi = crate::tensor::register_slice_multi_index(trailing, m);
        &self.slices[storage_slice_index(trailing, &multi)]
    }

    /// Storage position of a register-numbered slice.
    pub fn storage_index_of_register(&self, m: usize) -> usize {
        let trailing = &self.dims[2..];
        storage_slice_index(trailing, &crate::tensor::register_slice_multi_index(trailing, m))
    }

    /// Register position of a storage-numbered slice.
    pub fn register_index_of_storage(&self, m: usize) -> usize {
        let trailing = &self.dims[2..];
        register_slice_index(trailing, &storage_multi_index(trailing, m))
    }

    pub fn singular_values(&self, m: usize) -> &[f64] {
        &self.slices[m].sigma
    }

    /// Rescales singular values into another transform convention.
    pub fn with_convention(mut self, convention: FftConvention) -> Self {
        if convention != self.convention {
            let n = self.slices.len() as f64;
            let s = match convention {
                FftConvention::Unitary => 1.0 / n.sqrt(),
                FftConvention::Unnormalized => n.sqrt(),
            };
            for f in &mut self.slices {
                f.sigma.iter_mut().for_each(|v| *v *= s);
            }
            self.convention = convention;
        }
        self
    }

    /// Rebuilds the Fourier-domain tensor from the factors.
    pub fn hat_tensor(&self) -> ComplexTensor {
        self.assemble(|_, _, _| true)
    }

    /// Keeps, in slice `m`, the singular triples with `sigma >= thresholds[m]`.
    pub fn threshold_truncate(&self, thresholds: &[f64]) -> Result<ComplexTensor> {
        if thresholds.len() != self.len() {
            return Err(mismatch(format!(
                "{} thresholds for {} slices",
                thresholds.len(),
                self.len()
            )));
        }
        if thresholds.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("thresholds must be non-negative"));
        }
        Ok(self.assemble(|m, _, s| s >= thresholds[m]))
    }

    /// Keeps the leading `k` triples of every slice.
    pub fn rank_truncate(&self, k: usize) -> ComplexTensor {
        self.assemble(|_, l, _| l < k)
    }

    fn assemble(&self, keep: impl Fn(usize, usize, f64) -> bool) -> ComplexTensor {
        let mats: Vec<CMatrix> = self
            .slices
            .iter()
            .enumerate()
            .map(|(m, f)| f.reconstruct_where(|l, s| keep(m, l, s)))
            .collect();
        ComplexTensor::from_frontal_slices(&self.dims, &mats).expect("shapes match")
    }

    /// Inverse transform of a hat tensor assembled from this set, back to a
    /// real tensor.
    pub fn inverse_real(&self, hat: &ComplexTensor) -> Result<DenseTensor> {
        let mut out = ifft_trailing_modes(hat, 3)?;
        if self.convention == FftConvention::Unitary {
            let s = (self.slices.len() as f64).sqrt();
            out.values_mut().iter_mut().for_each(|v| *v *= s);
        }
        out.into_real(REAL_RESIDUE_TOL)
    }
}

fn storage_multi_index(trailing: &[usize], mut m: usize) -> Vec<usize> {
    trailing
        .iter()
        .map(|&d| {
            let i = m % d;
            m /= d;
            i
        })
        .collect()
}

/// `A = U * S * V^T` with orthogonal `U`, `V` and f-diagonal `S`.
#[derive(Debug, Clone)]
pub struct TSvdFactors {
    pub u: DenseTensor,
    pub s: DenseTensor,
    pub v: DenseTensor,
}

impl TSvdFactors {
    /// Keeps the leading `k` lateral slices of `U`, `S` and `V`.
    pub fn truncated(&self, k: usize) -> Result<TSvdFactors> {
        let d = self.s.dims();
        let r = d[0].min(d[1]);
        if k == 0 || k > r {
            return Err(invalid(format!("k must be in 1..={r}, got {k}")));
        }
        let keep_cols = |t: &DenseTensor| {
            let dims = [t.dims()[0], k, t.dims()[2]];
            DenseTensor::from_fn(&dims, |i| t.get(&[i[0], i[1], i[2]]))
        };
        Ok(TSvdFactors {
            u: keep_cols(&self.u)?,
            s: DenseTensor::from_fn(&[k, k, d[2]], |i| self.s.get(i))?,
            v: keep_cols(&self.v)?,
        })
    }

    /// `U * S * V^T`.
    pub fn reconstruct(&self) -> Result<DenseTensor> {
        use crate::tensor::{t_product, t_transpose};
        t_product(&self.u, &t_product(&self.s, &t_transpose(&self.v)?)?)
    }

    /// Tube `S(i, i, :)`.
    pub fn singular_tube(&self, i: usize) -> Vec<f64> {
        self.s.tube(i, i)
    }
}

/// t-svd of an order-3 tensor.
pub fn tsvd(a: &DenseTensor) -> Result<TSvdFactors> {
    a.require_order(3, "tsvd")?;
    let set = SliceSvdSet::from_real(a, FftConvention::Unnormalized)?;
    factors_from_set(&set)
}

/// Real factors `U`, `S`, `V` assembled from hat-domain slice factors.
pub fn factors_from_set(set: &SliceSvdSet) -> Result<TSvdFactors> {
    let d = set.dims();
    let (n1, n2) = (d[0], d[1]);
    let mut dims_u = d.to_vec();
    dims_u[1] = n1;
    let mut dims_v = d.to_vec();
    dims_v[0] = n2;
    dims_v[1] = n2;
    let us: Vec<CMatrix> = set.slices().iter().map(|f| f.u.clone()).collect();
    let vs: Vec<CMatrix> = set.slices().iter().map(|f| f.v.clone()).collect();
    let ss: Vec<CMatrix> = set
        .slices()
        .iter()
        .map(|f| {
            let mut m = CMatrix::zeros(n1, n2);
            for (l, &s) in f.sigma.iter().enumerate() {
                m[(l, l)] = Complex64::from(s);
            }
            m
        })
        .collect();
    let unscaled = |dims: &[usize], mats: &[CMatrix]| -> Result<DenseTensor> {
        let hat = ComplexTensor::from_frontal_slices(dims, mats)?;
        ifft_trailing_modes(&hat, 3)?.into_real(REAL_RESIDUE_TOL)
    };
    let u = unscaled(&dims_u, &us)?;
    let v = unscaled(&dims_v, &vs)?;
    let s = set.inverse_real(&ComplexTensor::from_frontal_slices(d, &ss)?)?;
    Ok(TSvdFactors { u, s, v })
}

/// Per-slice SVDs of an order-p tensor (`p >= 3`) after transforming modes `3..p`.
pub fn tsvd_order_p(a: &DenseTensor) -> Result<SliceSvdSet> {
    SliceSvdSet::from_real(a, FftConvention::Unnormalized)
}

fn check_k(a: &DenseTensor, k: usize) -> Result<()> {
    let r = a.dims()[0].min(a.dims()[1]);
    if k == 0 || k >= r {
        return Err(invalid(format!("k must satisfy 1 <= k < {r}, got {k}")));
    }
    Ok(())
}

/// `A_k`: the sum of the leading `k` t-svd components.
pub fn truncate_k(a: &DenseTensor, k: usize) -> Result<DenseTensor> {
    a.require_order(3, "truncate_k")?;
    check_k(a, k)?;
    let set = SliceSvdSet::from_real(a, FftConvention::Unnormalized)?;
    set.inverse_real(&set.rank_truncate(k))
}

/// `||A - A_k||_F` from the discarded singular tubes of `S`.
pub fn truncation_error(a: &DenseTensor, k: usize) -> Result<f64> {
    a.require_order(3, "truncation_error")?;
    check_k(a, k)?;
    let f = tsvd(a)?;
    let r = a.dims()[0].min(a.dims()[1]);
    Ok((k..r)
        .map(|i| f.singular_tube(i).iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        .sqrt())
}

/// Threshold truncation of every slice (see [`SliceSvdSet::threshold_truncate`]).
pub fn threshold_truncate_slices(set: &SliceSvdSet, thresholds: &[f64]) -> Result<ComplexTensor> {
    set.threshold_truncate(thresholds)
}

/// Relative error `||A - A_k||_F / ||A||_F` of the best rank-`k` approximation
/// of a matrix with singular values `sigma` (zero for a zero matrix).
pub fn best_rank_k_relative_error(sigma: &[f64], k: usize) -> f64 {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    let tail: f64 = sigma.iter().skip(k).map(|s| s * s).sum();
    (tail / total).sqrt()
}

/// Threshold `eps * ||A||_F / sqrt(k)` under which the threshold truncation
/// is within `2 eps ||A||_F` of `A` whenever `||A - A_k||_F <= eps ||A||_F`.
pub fn error_threshold(frobenius: f64, eps: f64, k: usize) -> f64 {
    eps * frobenius / (k as f64).sqrt()
}

/// Tensor nuclear norm: the sum of all hat-domain singular values
/// (unnormalized transform).
pub fn tnn(a: &DenseTensor) -> Result<f64> {
    a.require_order(3, "tnn")?;
    let set = SliceSvdSet::from_real(a, FftConvention::Unnormalized)?;
    Ok(set.slices().iter().flat_map(|f| f.sigma.iter()).sum())
}

/// Rank of every hat-domain slice, counting `sigma > rank_tol * sigma_max`.
pub fn multi_rank(a: &DenseTensor, rank_tol: f64) -> Result<Vec<usize>> {
    if !(rank_tol > 0.0) {
        return Err(invalid("rank_tol must be positive"));
    }
    let set = SliceSvdSet::from_real(a, FftConvention::Unnormalized)?;
    Ok(set
        .slices()
        .iter()
        .map(|f| {
            let max = f.sigma.first().copied().unwrap_or(0.0);
            f.sigma.iter().filter(|&&s| s > 0.0 && s > rank_tol * max).count()
        })
        .collect())
}

/// Diagonal of every Fourier-domain `S` slice as a real matrix `rank x slices`.
pub fn hat_singular_values(set: &SliceSvdSet) -> DMatrix<f64> {
    DMatrix::from_fn(set.rank_bound(), set.len(), |l, m| set.singular_values(m)[l])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::tensor::{identity_tensor, is_orthogonal_tensor, t_product, t_transpose};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(seed: u64, dims: &[usize]) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseTensor::from_fn(dims, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn identity_factors() {
        let id = identity_tensor(2, 2).unwrap();
        let f = tsvd(&id).unwrap();
        assert!(f.u.max_abs_diff(&id) < 1e-14);
        assert!(f.s.max_abs_diff(&id) < 1e-14);
        assert!(f.v.max_abs_diff(&id) < 1e-14);
        assert!((tnn(&id).unwrap() - 4.0).abs() < 1e-14);
        assert_eq!(multi_rank(&id, 1e-10).unwrap(), vec![2, 2]);
    }

    #[test]
    fn reconstruction_and_orthogonality() {
        for (seed, dims) in [(1, [6, 5, 4]), (2, [3, 7, 5]), (3, [4, 4, 1])] {
            let a = random_tensor(seed, &dims);
            let f = tsvd(&a).unwrap();
            let rec = f.reconstruct().unwrap();
            assert!(rec.sub(&a).unwrap().frobenius_norm() <= 1e-10 * a.frobenius_norm());
            assert!(is_orthogonal_tensor(&f.u, 1e-10).unwrap());
            assert!(is_orthogonal_tensor(&f.v, 1e-10).unwrap());
            let norms: Vec<f64> = (0..dims[0].min(dims[1]))
                .map(|i| f.singular_tube(i).iter().map(|x| x * x).sum())
                .collect();
            assert!(norms.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        }
    }

    #[test]
    fn single_slice_is_matrix_svd() {
        let a = random_tensor(9, &[3, 4, 1]);
        let f = tsvd(&a).unwrap();
        let direct = nalgebra::SVD::new(a.frontal_slice(0), false, false);
        for (l, s) in direct.singular_values.iter().enumerate() {
            assert!((f.s.get(&[l, l, 0]) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn truncation_formula_matches_direct() {
        let a = random_tensor(4, &[5, 5, 3]);
        for k in 1..4 {
            let ak = truncate_k(&a, k).unwrap();
            let direct = a.sub(&ak).unwrap().frobenius_norm();
            assert!((truncation_error(&a, k).unwrap() - direct).abs() <= 1e-10 * direct.max(1.0));
        }
        assert!(truncate_k(&a, 0).is_err());
        assert!(truncate_k(&a, 5).is_err());
    }

    #[test]
    fn truncate_k_is_sum_of_components() {
        let a = random_tensor(5, &[4, 3, 4]);
        let f = tsvd(&a).unwrap().truncated(2).unwrap();
        let direct = t_product(&f.u, &t_product(&f.s, &t_transpose(&f.v).unwrap()).unwrap()).unwrap();
        assert!(truncate_k(&a, 2).unwrap().max_abs_diff(&direct) < 1e-12);
    }

    #[test]
    fn threshold_examples() {
        let a = random_tensor(6, &[4, 3, 4]);
        let set = SliceSvdSet::from_real(&a, FftConvention::Unnormalized).unwrap();
        let full = set.threshold_truncate(&[0.0; 4]).unwrap();
        let hat = fft_trailing_modes(&a, 3).unwrap();
        assert!(full.sub(&hat).unwrap().frobenius_norm() < 1e-12);
        let none = set.threshold_truncate(&[1e9; 4]).unwrap();
        assert_eq!(none.frobenius_norm(), 0.0);
        assert!(set.threshold_truncate(&[0.0; 3]).is_err());
        assert!(set.threshold_truncate(&[-1.0; 4]).is_err());

        let sigma = [1.0, 0.5, 0.1];
        let eps = best_rank_k_relative_error(&sigma, 2);
        assert!((eps - 0.1 / 1.26f64.sqrt()).abs() < 1e-15);
        let thr = error_threshold(1.26f64.sqrt(), eps, 2);
        assert!((thr - 0.1 / 2f64.sqrt()).abs() < 1e-15);
        assert!(sigma.iter().all(|&s| s >= thr));
    }

    #[test]
    fn order_p_reconstruction_and_symmetry() {
        let a = random_tensor(7, &[3, 3, 2, 3]);
        let set = tsvd_order_p(&a).unwrap();
        let back = set.inverse_real(&set.hat_tensor()).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-12);
        let hat = fft_trailing_modes(&a, 3).unwrap();
        for m in 0..set.len() {
            assert!(max_abs_diff(&set.slice(m).reconstruct(), &hat.frontal_slice(m)) < 1e-12);
        }
        let flat = random_tensor(8, &[3, 2, 1, 1]);
        let s = tsvd_order_p(&flat).unwrap();
        let direct = nalgebra::SVD::new(flat.frontal_slice(0), false, false);
        assert!((s.singular_values(0)[0] - direct.singular_values[0]).abs() < 1e-12);
    }

    #[test]
    fn unitary_convention_scales_sigma() {
        let a = random_tensor(10, &[3, 3, 4]);
        let un = SliceSvdSet::from_real(&a, FftConvention::Unnormalized).unwrap();
        let un2 = un.clone().with_convention(FftConvention::Unitary);
        let u = SliceSvdSet::from_real(&a, FftConvention::Unitary).unwrap();
        for m in 0..4 {
            for (x, y) in u.singular_values(m).iter().zip(un2.singular_values(m)) {
                assert!((x - y).abs() < 1e-12);
            }
        }
        let back = u.inverse_real(&u.hat_tensor()).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-12);
    }
}
