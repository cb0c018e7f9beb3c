use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{fft_trailing_modes, ifft_trailing_modes, ComplexTensor, DenseTensor, REAL_RESIDUE_TOL};
use crate::error::{invalid, Result};

/// Circulant matrix whose column `j` is `u` cyclically shifted down by `j`.
pub fn circ_vector(u: &[f64]) -> Result<DMatrix<f64>> {
    if u.is_empty() {
        return Err(invalid("circ of an empty vector"));
    }
    let n = u.len();
    Ok(DMatrix::from_fn(n, n, |i, j| u[(i + n - j) % n]))
}

/// Block-circulant matrix of the frontal slices: block `(r, c)` is `B^{(r-c mod N3)}`.
pub fn circ_tensor(b: &DenseTensor) -> Result<DMatrix<f64>> {
    b.require_order(3, "circ")?;
    let (n1, n2, n3) = (b.dims()[0], b.dims()[1], b.dims()[2]);
    let slices = b.frontal_slices();
    let mut out = DMatrix::zeros(n1 * n3, n2 * n3);
    for r in 0..n3 {
        for c in 0..n3 {
            out.view_mut((r * n1, c * n2), (n1, n2))
                .copy_from(&slices[(r + n3 - c) % n3]);
        }
    }
    Ok(out)
}

/// `circ(u) v`, evaluated directly from the definition.
pub fn cyclic_convolve(u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    if u.len() != v.len() || u.is_empty() {
        return Err(invalid(format!(
            "cyclic convolution needs equal nonzero lengths, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    let n = u.len();
    Ok((0..n)
        .map(|i| (0..n).map(|j| u[(i + n - j) % n] * v[j]).sum())
        .collect())
}

/// t-product of `N1 x N2 x N3` and `N2 x N4 x N3` tensors, computed slice-wise
/// in the Fourier domain.
pub fn t_product(m: &DenseTensor, n: &DenseTensor) -> Result<DenseTensor> {
    m.require_order(3, "t-product")?;
    n.require_order(3, "t-product")?;
    let (dm, dn) = (m.dims(), n.dims());
    if dm[1] != dn[0] || dm[2] != dn[2] {
        return Err(invalid(format!(
            "t-product dimension mismatch: {dm:?} * {dn:?}"
        )));
    }
    let mh = fft_trailing_modes(m, 3)?;
    let nh = fft_trailing_modes(n, 3)?;
    let slices: Vec<DMatrix<Complex64>> = (0..dm[2])
        .map(|l| mh.frontal_slice(l) * nh.frontal_slice(l))
        .collect();
    let ph = ComplexTensor::from_frontal_slices(&[dm[0], dn[1], dm[2]], &slices)?;
    ifft_trailing_modes(&ph, 3)?.into_real(REAL_RESIDUE_TOL)
}

/// Transposes every frontal slice and reverses the order of slices `1..N3`.
pub fn t_transpose(a: &DenseTensor) -> Result<DenseTensor> {
    a.require_order(3, "t-transpose")?;
    let n3 = a.dims()[2];
    let slices: Vec<DMatrix<f64>> = (0..n3)
        .map(|l| a.frontal_slice((n3 - l) % n3).transpose())
        .collect();
    DenseTensor::from_frontal_slices(&[a.dims()[1], a.dims()[0], n3], &slices)
}

/// `n x n x n3` tensor whose first frontal slice is the identity and the rest are zero.
pub fn identity_tensor(n: usize, n3: usize) -> Result<DenseTensor> {
    DenseTensor::from_fn(&[n, n, n3], |i| {
        if i[0] == i[1] && i[2] == 0 {
            1.0
        } else {
            0.0
        }
    })
}

/// Whether `U^T * U` and `U * U^T` are both within `tol` (Frobenius) of the identity tensor.
pub fn is_orthogonal_tensor(u: &DenseTensor, tol: f64) -> Result<bool> {
    u.require_order(3, "orthogonality check")?;
    let d = u.dims();
    if d[0] != d[1] {
        return Err(invalid(format!("orthogonal tensors are square, got {d:?}")));
    }
    let id = identity_tensor(d[0], d[2])?;
    let ut = t_transpose(u)?;
    let left = t_product(&ut, u)?.sub(&id)?.frobenius_norm();
    let right = t_product(u, &ut)?.sub(&id)?.frobenius_norm();
    Ok(left <= tol && right <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
        DenseTensor::from_fn(dims, |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    /// Tube-wise sum of cyclic convolutions, straight from the definition.
    fn t_product_by_tubes(m: &DenseTensor, n: &DenseTensor) -> DenseTensor {
        let (n1, n2, n3, n4) = (m.dims()[0], m.dims()[1], m.dims()[2], n.dims()[1]);
        let mut out = DenseTensor::zeros(&[n1, n4, n3]).unwrap();
        for i in 0..n1 {
            for j in 0..n4 {
                let mut acc = vec![0.0; n3];
                for k in 0..n2 {
                    let c = cyclic_convolve(&m.tube(i, k), &n.tube(k, j)).unwrap();
                    acc.iter_mut().zip(c).for_each(|(a, b)| *a += b);
                }
                for (l, v) in acc.into_iter().enumerate() {
                    out.set(&[i, j, l], v);
                }
            }
        }
        out
    }

    #[test]
    fn circ_examples() {
        let c = circ_vector(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            c,
            DMatrix::from_row_slice(3, 3, &[1.0, 3.0, 2.0, 2.0, 1.0, 3.0, 3.0, 2.0, 1.0])
        );
        assert_eq!(circ_vector(&[1.0]).unwrap(), DMatrix::identity(1, 1));
        assert_eq!(
            circ_vector(&[1.0, 0.0, 0.0, 0.0]).unwrap(),
            DMatrix::identity(4, 4)
        );
        assert!(circ_vector(&[]).is_err());
        assert_eq!(
            circ_tensor(&identity_tensor(2, 2).unwrap()).unwrap(),
            DMatrix::identity(4, 4)
        );
        let tube = DenseTensor::new(vec![1, 1, 3], vec![4.0, 5.0, 6.0]).unwrap();
        assert_eq!(circ_tensor(&tube).unwrap(), circ_vector(&[4.0, 5.0, 6.0]).unwrap());
    }

    #[test]
    fn convolution_examples() {
        assert_eq!(cyclic_convolve(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![11.0, 10.0]);
        assert_eq!(
            cyclic_convolve(&[1.0, 0.0, 0.0], &[7.0, -1.0, 2.0]).unwrap(),
            vec![7.0, -1.0, 2.0]
        );
        assert!(cyclic_convolve(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn t_product_matches_definition_and_circ() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_tensor(&mut rng, &[3, 2, 4]);
        let n = random_tensor(&mut rng, &[2, 5, 4]);
        let p = t_product(&m, &n).unwrap();
        assert!(p.max_abs_diff(&t_product_by_tubes(&m, &n)) < 1e-12);

        // circ(M) times the slice-stacked N equals the slice-stacked product.
        let stack = |t: &DenseTensor| {
            let (r, c, n3) = (t.dims()[0], t.dims()[1], t.dims()[2]);
            DMatrix::from_fn(r * n3, c, |i, j| t.get(&[i % r, j, i / r]))
        };
        let lhs = circ_tensor(&m).unwrap() * stack(&n);
        assert!((lhs - stack(&p)).amax() < 1e-12);

        let tubes = t_product(
            &DenseTensor::new(vec![1, 1, 2], vec![1.0, 2.0]).unwrap(),
            &DenseTensor::new(vec![1, 1, 2], vec![3.0, 4.0]).unwrap(),
        )
        .unwrap();
        assert!((tubes.values()[0] - 11.0).abs() < 1e-12);
        assert!((tubes.values()[1] - 10.0).abs() < 1e-12);
        assert!(t_product(&m, &m).is_err());
    }

    #[test]
    fn identity_and_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor(&mut rng, &[3, 4, 5]);
        let i3 = identity_tensor(3, 5).unwrap();
        assert!(t_product(&i3, &a).unwrap().max_abs_diff(&a) < 1e-12);
        assert_eq!(t_transpose(&t_transpose(&a).unwrap()).unwrap(), a);
        let id = identity_tensor(2, 2).unwrap();
        assert_eq!(t_transpose(&id).unwrap(), id);
        assert!((id.frobenius_norm() - 2f64.sqrt()).abs() < 1e-15);

        let b = random_tensor(&mut rng, &[4, 2, 5]);
        let lhs = t_transpose(&t_product(&a, &b).unwrap()).unwrap();
        let rhs = t_product(&t_transpose(&b).unwrap(), &t_transpose(&a).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10);

        let m = DenseTensor::from_fn(&[2, 3, 1], |i| (i[0] * 3 + i[1]) as f64).unwrap();
        assert_eq!(
            t_transpose(&m).unwrap().frontal_slice(0),
            m.frontal_slice(0).transpose()
        );
    }

    #[test]
    fn orthogonality_checks() {
        assert!(is_orthogonal_tensor(&identity_tensor(3, 4).unwrap(), 1e-12).unwrap());
        assert!(!is_orthogonal_tensor(&DenseTensor::zeros(&[2, 2, 2]).unwrap(), 1e-8).unwrap());
        assert!(is_orthogonal_tensor(&DenseTensor::zeros(&[2, 3, 2]).unwrap(), 1e-8).is_err());
        // A cyclic shift along the tube is orthogonal.
        let shift = DenseTensor::from_fn(&[1, 1, 4], |i| if i[2] == 1 { 1.0 } else { 0.0 }).unwrap();
        assert!(is_orthogonal_tensor(&shift, 1e-12).unwrap());
    }
}
