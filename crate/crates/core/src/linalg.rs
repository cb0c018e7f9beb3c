//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

const SVD_MAX_ITER: usize = 10_000;

/// Full SVD `A = U diag(sigma) V^H` with square unitary `U`, `V` and
/// `min(rows, cols)` singular values in descending order.
///
/// Each right singular vector is rotated so its first nonzero component is
/// real and positive; the left vector gets the same phase so the product is
/// unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct FullSvd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

impl FullSvd {
    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    pub fn cols(&self) -> usize {
        self.v.nrows()
    }

    /// `sum_l sigma_l u_l v_l^H` over the components where `keep(l)` holds.
    pub fn reconstruct_where(&self, mut keep: impl FnMut(usize, f64) -> bool) -> CMatrix {
        let mut out = CMatrix::zeros(self.rows(), self.cols());
        for (l, &s) in self.sigma.iter().enumerate() {
            if s != 0.0 && keep(l, s) {
                out += self.u.column(l) * self.v.column(l).adjoint() * Complex64::from(s);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> CMatrix {
        self.reconstruct_where(|_, _| true)
    }

    /// Factors of the entrywise conjugate matrix.
    pub fn conj(&self) -> FullSvd {
        FullSvd {
            u: self.u.map(|z| z.conj()),
            sigma: self.sigma.clone(),
            v: self.v.map(|z| z.conj()),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sigma.iter().map(|s| s * s).sum::<f64>().sqrt()
    }
}

pub fn to_complex(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Relative residual `||A - U S V^H||_F / ||A||_F` an SVD must meet.
pub const SVD_RESIDUAL_TOL: f64 = 1e-13;

/// SVD of a complex matrix.
pub fn svd_complex(a: &CMatrix) -> Result<FullSvd> {
    let (rows, cols) = a.shape();
    let (u, sigma, v) = verified_svd(a)
        .or_else(|| jacobi_svd(a))
        .ok_or(Error::SvdNonConvergence { rows, cols })?;
    finish(u, sigma, v, rows, cols)
}

/// SVD of a real matrix; the factors are real.
pub fn svd_real(a: &DMatrix<f64>) -> Result<FullSvd> {
    let (rows, cols) = a.shape();
    if let Some((u, sigma, v)) = verified_svd(a) {
        return finish(to_complex(&u), sigma, to_complex(&v), rows, cols);
    }
    // Jacobi rotations of a real matrix stay real.
    let (u, sigma, v) =
        jacobi_svd(&to_complex(a)).ok_or(Error::SvdNonConvergence { rows, cols })?;
    let real = |m: CMatrix| to_complex(&m.map(|z| z.re));
    finish(real(u), sigma, real(v), rows, cols)
}

/// nalgebra SVD, accepted only if it reconstructs `a`.
///
/// The bidiagonal iteration returns wrong factors for many rank-deficient
/// inputs, so every result is checked.
fn verified_svd<T>(a: &DMatrix<T>) -> Option<(DMatrix<T>, Vec<f64>, DMatrix<T>)>
where
    T: nalgebra::ComplexField<RealField = f64>,
{
    let svd = nalgebra::SVD::try_new(a.clone(), true, true, f64::EPSILON, SVD_MAX_ITER)?;
    let u = svd.u?;
    let v = svd.v_t?.adjoint();
    let sigma = svd.singular_values;
    if sigma.iter().any(|s| !s.is_finite()) {
        return None;
    }
    let s = DMatrix::from_diagonal(&sigma.map(T::from_real));
    let residual = (a - &u * s * v.adjoint()).norm();
    (residual <= SVD_RESIDUAL_TOL * a.norm()).then(|| (u, sigma.as_slice().to_vec(), v))
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// One-sided (Hestenes) Jacobi SVD: rotates column pairs of `a` until they
/// are mutually orthogonal. Returns thin factors with `min(rows, cols)`
/// singular values; left vectors of zero singular values are zero columns.
pub fn jacobi_svd(a: &CMatrix) -> Option<(CMatrix, Vec<f64>, CMatrix)> {
    let (rows, cols) = a.shape();
    if rows < cols {
        let (u, s, v) = jacobi_svd(&a.adjoint())?;
        return Some((v, s, u));
    }
    let mut w = a.clone();
    let mut v = CMatrix::identity(cols, cols);
    let tol = rows as f64 * f64::EPSILON;
    // Columns below this squared norm are roundoff and count as zero.
    let negligible = (f64::EPSILON * a.norm()).powi(2);
    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dotc(&w.column(q));
                let g = gamma.norm();
                if alpha.min(beta) <= negligible || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for m in [&mut w, &mut v] {
                    for i in 0..m.nrows() {
                        let x = m[(i, p)];
                        let y = m[(i, q)] * phase.conj();
                        m[(i, p)] = x * c - y * s;
                        m[(i, q)] = x * s + y * c;
                    }
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return None;
    }
    let sigma: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    let mut u = CMatrix::zeros(rows, cols);
    for (l, &s) in sigma.iter().enumerate() {
        if s > 0.0 {
            u.set_column(l, &(w.column(l) / Complex64::from(s)));
        }
    }
    Some((u, sigma, v))
}

fn finish(u: CMatrix, sigma: Vec<f64>, v: CMatrix, rows: usize, cols: usize) -> Result<FullSvd> {
    let r = sigma.len();
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let mut u_sorted = CMatrix::zeros(rows, r);
    let mut v_sorted = CMatrix::zeros(cols, r);
    let mut s_sorted = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &v.column(src));
        s_sorted.push(sigma[src].max(0.0));
    }
    let mut u = complete_orthonormal(&u_sorted, rows);
    let mut v = complete_orthonormal(&v_sorted, cols);
    for l in 0..rows.max(cols) {
        if l < cols {
            let phase = leading_phase(v.column(l).iter().copied());
            v.column_mut(l).scale_mut_complex(phase.conj());
            if l < r && l < rows {
                u.column_mut(l).scale_mut_complex(phase.conj());
            }
        }
        if l >= r && l < rows {
            let phase = leading_phase(u.column(l).iter().copied());
            u.column_mut(l).scale_mut_complex(phase.conj());
        }
    }
    Ok(FullSvd {
        u,
        sigma: s_sorted,
        v,
    })
}

trait ScaleComplex {
    fn scale_mut_complex(&mut self, z: Complex64);
}

impl<S: nalgebra::StorageMut<Complex64, nalgebra::Dyn, nalgebra::U1>> ScaleComplex
    for nalgebra::Matrix<Complex64, nalgebra::Dyn, nalgebra::U1, S>
{
    fn scale_mut_complex(&mut self, z: Complex64) {
        for x in self.iter_mut() {
            *x *= z;
        }
    }
}

/// Unit phase of the first component whose magnitude is non-negligible.
fn leading_phase(it: impl Iterator<Item = Complex64>) -> Complex64 {
    let vals: Vec<Complex64> = it.collect();
    let max = vals.iter().map(|z| z.norm()).fold(0.0, f64::max);
    vals.iter()
        .find(|z| z.norm() > 1e-8 * max.max(f64::MIN_POSITIVE))
        .map(|z| z / z.norm())
        .unwrap_or(Complex64::new(1.0, 0.0))
}

/// Extends orthonormal columns to an `n x n` unitary by Gram-Schmidt against
/// the standard basis, picking the basis vector with the largest residual each
/// time.
pub fn complete_orthonormal(cols: &CMatrix, n: usize) -> CMatrix {
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(n);
    for c in cols.column_iter().take(n) {
        let mut v = c.clone_owned();
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            basis.push(v / Complex64::from(norm));
        }
    }
    while basis.len() < n {
        let mut best: Option<(f64, nalgebra::DVector<Complex64>)> = None;
        for k in 0..n {
            let mut v = nalgebra::DVector::<Complex64>::zeros(n);
            v[k] = Complex64::new(1.0, 0.0);
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dotc(&v);
                    v -= b * proj;
                }
            }
            let norm = v.norm();
            if best.as_ref().is_none_or(|(bn, _)| norm > *bn) {
                best = Some((norm, v));
            }
        }
        let (norm, v) = best.expect("n > 0");
        basis.push(v / Complex64::from(norm));
    }
    CMatrix::from_columns(&basis)
}

/// `max |M^H M - I|` entrywise.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let g = m.adjoint() * m;
    let n = g.nrows();
    (g - CMatrix::identity(n, n))
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_complex(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn jacobi_factors_random_and_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (r, c, rank) in [(5, 3, 3), (3, 5, 3), (6, 5, 2), (4, 4, 1), (2, 7, 2), (8, 8, 1), (8, 8, 2), (8, 8, 5)] {
            let a = random_complex(&mut rng, r, rank) * random_complex(&mut rng, rank, c);
            let (u, s, v) = jacobi_svd(&a).unwrap();
            let rec = &u * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                s.len(),
                s.iter().map(|&x| Complex64::from(x)),
            )) * v.adjoint();
            assert!((&a - rec).norm() < 1e-12 * a.norm(), "{r}x{c} rank {rank}");
            assert!(unitarity_defect(&v) < 1e-12);
            let f = svd_complex(&a).unwrap();
            assert!((&a - f.reconstruct()).norm() < 1e-12 * a.norm());
            assert_eq!(f.sigma.iter().filter(|&&x| x > 1e-10 * f.sigma[0]).count(), rank);
        }
        let real = DMatrix::from_fn(6, 2, |i, j| (i + 2 * j) as f64 - 2.5)
            * DMatrix::from_fn(2, 5, |i, j| ((i * 3 + j) % 4) as f64 - 1.0);
        let f = svd_real(&real).unwrap();
        assert!((to_complex(&real) - f.reconstruct()).norm() < 1e-12 * real.norm());
        assert!(f.u.iter().chain(f.v.iter()).all(|z| z.im == 0.0));
    }

    #[test]
    fn rank_deficient_slices_reconstruct() {
        // Fourier slices of this tensor have ranks 2, 1, 2, 1; the unchecked
        // nalgebra factors of slices 1 and 2 are wrong.
        let a = crate::harness::generate_low_multirank_tensor(&[4, 4, 4], &[2, 1, 2, 1], 7).unwrap();
        let hat = crate::tensor::fft_trailing_modes(&a, 3).unwrap();
        for m in 0..4 {
            let s = hat.frontal_slice(m);
            let f = svd_complex(&s).unwrap();
            assert!((&s - f.reconstruct()).norm() <= 1e-12 * s.norm(), "slice {m}");
            let r = svd_real(&s.map(|z| z.re)).unwrap();
            assert!((s.map(|z| Complex64::new(z.re, 0.0)) - r.reconstruct()).norm() <= 1e-12 * s.norm());
        }
        assert_eq!(svd_complex(&CMatrix::zeros(3, 2)).unwrap().sigma, vec![0.0, 0.0]);
    }

    #[test]
    fn full_svd_shapes_and_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(r, c) in &[(4, 4), (3, 5), (5, 2), (1, 1), (1, 3)] {
            let a = random_complex(&mut rng, r, c);
            let s = svd_complex(&a).unwrap();
            assert_eq!(s.u.shape(), (r, r));
            assert_eq!(s.v.shape(), (c, c));
            assert_eq!(s.sigma.len(), r.min(c));
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
            assert!(unitarity_defect(&s.u) < 1e-12);
            assert!(unitarity_defect(&s.v) < 1e-12);
            assert!(max_abs_diff(&s.reconstruct(), &a) < 1e-12);
            for l in 0..c {
                let lead = s.v.column(l).iter().find(|z| z.norm() > 1e-8).copied().unwrap();
                assert!(lead.im.abs() < 1e-12 && lead.re > 0.0);
            }
        }
    }

    #[test]
    fn rank_deficient_and_real() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 0.0]);
        let s = svd_real(&a).unwrap();
        assert!(s.sigma[1] < 1e-12 && s.sigma[2] < 1e-12);
        assert!(s.u.iter().chain(s.v.iter()).all(|z| z.im == 0.0));
        assert!(unitarity_defect(&s.u) < 1e-12);
        assert!(max_abs_diff(&s.reconstruct(), &to_complex(&a)) < 1e-12);

        let z = svd_complex(&CMatrix::zeros(2, 3)).unwrap();
        assert_eq!(z.sigma, vec![0.0, 0.0]);
        assert!(unitarity_defect(&z.u) < 1e-12 && unitarity_defect(&z.v) < 1e-12);
    }
}
