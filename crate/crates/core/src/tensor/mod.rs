//! Dense order-p tensors stored column-major (mode 1 fastest).
//!
//! The same container backs real tensors (`DenseTensor`) and hat-domain
//! complex tensors (`ComplexTensor`). Frontal slices of an order-3 tensor are
//! contiguous `N1*N2` runs, so slice extraction is a copy of one block.

mod algebra;
mod fft;
pub mod io;

pub use algebra::{
    circ_tensor, circ_vector, cyclic_convolve, identity_tensor, is_orthogonal_tensor, t_product,
    t_transpose,
};
pub use fft::{fft_trailing_modes, ifft_trailing_modes, qft_trailing_modes};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, mismatch, Error, Result};

/// Scalars a tensor can hold.
pub trait Scalar: Copy + Default + PartialEq + std::fmt::Debug + nalgebra::Scalar {
    fn abs_sq(&self) -> f64;
}

impl Scalar for f64 {
    fn abs_sq(&self) -> f64 {
        self * self
    }
}

impl Scalar for Complex64 {
    fn abs_sq(&self) -> f64 {
        self.norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    values: Vec<T>,
}

/// Real order-p tensor.
pub type DenseTensor = Tensor<f64>;
/// Complex order-p tensor, typically the image of a transform along trailing modes.
pub type ComplexTensor = Tensor<Complex64>;

/// A 1 x 1 x N fiber.
pub type Tube<T> = Vec<T>;

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: Vec<usize>, values: Vec<T>) -> Result<Self> {
        validate_dims(&dims)?;
        let len: usize = dims.iter().product();
        if values.len() != len {
            return Err(mismatch(format!(
                "{} values supplied for dims {:?} (expected {len})",
                values.len(),
                dims
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        validate_dims(dims)?;
        let len = dims.iter().product();
        Ok(Self {
            dims: dims.to_vec(),
            values: vec![T::default(); len],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: &[usize], mut f: impl FnMut(&[usize]) -> T) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        let mut idx = vec![0usize; dims.len()];
        for v in t.values.iter_mut() {
            *v = f(&idx);
            for (k, d) in idx.iter_mut().zip(dims) {
                *k += 1;
                if *k < *d {
                    break;
                }
                *k = 0;
            }
        }
        Ok(t)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.dims.len());
        let mut lin = 0;
        for (k, (&i, &d)) in idx.iter().zip(&self.dims).enumerate().rev() {
            debug_assert!(i < d, "index {i} out of range on mode {}", k + 1);
            lin = lin * d + i;
        }
        lin
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.values[self.linear_index(idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let lin = self.linear_index(idx);
        self.values[lin] = value;
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(Scalar::abs_sq).sum::<f64>().sqrt()
    }

    /// Number of frontal slices, i.e. the product of modes 3..p.
    pub fn slice_count(&self) -> usize {
        self.dims[2..].iter().product()
    }

    /// Frontal slice at a flat position of the trailing modes (mode 3 fastest,
    /// which is the storage order).
    pub fn frontal_slice(&self, m: usize) -> DMatrix<T> {
        let (n1, n2) = (self.dims[0], self.dims[1]);
        assert!(m < self.slice_count(), "slice {m} out of range");
        let block = &self.values[m * n1 * n2..(m + 1) * n1 * n2];
        DMatrix::from_column_slice(n1, n2, block)
    }

    /// Reassembles a tensor of the given dims from frontal slices in storage order.
    pub fn from_frontal_slices(dims: &[usize], slices: &[DMatrix<T>]) -> Result<Self> {
        let mut t = Self::zeros(dims)?;
        if t.order() < 3 && slices.len() != 1 || t.order() >= 3 && slices.len() != t.slice_count()
        {
            return Err(mismatch(format!(
                "{} slices supplied for dims {dims:?}",
                slices.len()
            )));
        }
        let (n1, n2) = (dims[0], dims[1]);
        for (m, s) in slices.iter().enumerate() {
            if s.shape() != (n1, n2) {
                return Err(mismatch(format!(
                    "slice {m} has shape {:?}, expected ({n1}, {n2})",
                    s.shape()
                )));
            }
            t.values[m * n1 * n2..(m + 1) * n1 * n2].copy_from_slice(s.as_slice());
        }
        Ok(t)
    }

    pub fn frontal_slices(&self) -> Vec<DMatrix<T>> {
        (0..self.slice_count()).map(|m| self.frontal_slice(m)).collect()
    }

    /// Tube `A(i, j, :)` of an order-3 tensor.
    pub fn tube(&self, i: usize, j: usize) -> Tube<T> {
        let (n1, n2) = (self.dims[0], self.dims[1]);
        (0..self.slice_count())
            .map(|k| self.values[i + n1 * (j + n2 * k)])
            .collect()
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor<U> {
        Tensor {
            dims: self.dims.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub(crate) fn require_order(&self, order: usize, what: &str) -> Result<()> {
        if self.order() != order {
            return Err(invalid(format!(
                "{what} needs an order-{order} tensor, got order {}",
                self.order()
            )));
        }
        Ok(())
    }
}

impl DenseTensor {
    pub fn to_complex(&self) -> ComplexTensor {
        self.map(|v| Complex64::new(v, 0.0))
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(mismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(Tensor {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn add(&self, other: &DenseTensor) -> Result<DenseTensor> {
        if self.dims != other.dims {
            return Err(mismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(Tensor {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

impl ComplexTensor {
    /// Drops imaginary parts when they are at most `rel_tol * ||self||_F`.
    ///
    /// A larger residue means the caller's "real" result is not real, which is
    /// reported instead of silently truncated.
    pub fn into_real(self, rel_tol: f64) -> Result<DenseTensor> {
        let norm = self.frobenius_norm();
        let residue = self
            .values
            .iter()
            .map(|v| v.im * v.im)
            .sum::<f64>()
            .sqrt();
        if residue > rel_tol * norm.max(f64::MIN_POSITIVE) && residue > 0.0 {
            return Err(Error::NumericInconsistency(format!(
                "imaginary residue {residue:e} exceeds {rel_tol:e} of norm {norm:e}"
            )));
        }
        Ok(Tensor {
            dims: self.dims,
            values: self.values.into_iter().map(|v| v.re).collect(),
        })
    }

    pub fn sub(&self, other: &ComplexTensor) -> Result<ComplexTensor> {
        if self.dims != other.dims {
            return Err(mismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(Tensor {
            dims: self.dims.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }
}

/// Frobenius norm of a real or complex tensor.
pub fn frobenius_norm<T: Scalar>(a: &Tensor<T>) -> f64 {
    a.frobenius_norm()
}

/// Default tolerance for discarding imaginary residues of algebraically real results.
pub const REAL_RESIDUE_TOL: f64 = 1e-10;

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(invalid(format!(
            "tensor order must be at least 2, got {}",
            dims.len()
        )));
    }
    if dims.iter().any(|&d| d == 0) {
        return Err(invalid(format!("dimensions must be positive: {dims:?}")));
    }
    Ok(())
}

/// Position of a trailing-mode multi-index `(m3, .., mp)` in the flat slice
/// numbering used by the quantum register `m`: the last mode varies fastest.
pub fn register_slice_index(trailing_dims: &[usize], multi: &[usize]) -> usize {
    multi
        .iter()
        .zip(trailing_dims)
        .fold(0, |acc, (&m, &d)| acc * d + m)
}

/// Inverse of [`register_slice_index`].
pub fn register_slice_multi_index(trailing_dims: &[usize], mut m: usize) -> Vec<usize> {
    let mut out = vec![0; trailing_dims.len()];
    for (slot, &d) in out.iter_mut().zip(trailing_dims).rev() {
        *slot = m % d;
        m /= d;
    }
    out
}

/// Position of a trailing-mode multi-index in storage order (mode 3 fastest).
pub fn storage_slice_index(trailing_dims: &[usize], multi: &[usize]) -> usize {
    multi
        .iter()
        .zip(trailing_dims)
        .rev()
        .fold(0, |acc, (&m, &d)| acc * d + m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_major_layout() {
        let t = DenseTensor::from_fn(&[2, 3, 2], |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64)
            .unwrap();
        assert_eq!(t.values()[0..4], [0.0, 1.0, 10.0, 11.0]);
        assert_eq!(t.get(&[1, 2, 1]), 121.0);
        let s = t.frontal_slice(1);
        assert_eq!(s[(1, 2)], 121.0);
        assert_eq!(t.tube(1, 2), vec![21.0, 121.0]);
        let back = DenseTensor::from_frontal_slices(t.dims(), &t.frontal_slices()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DenseTensor::new(vec![2, 2], vec![1.0; 3]).is_err());
        assert!(DenseTensor::zeros(&[3]).is_err());
        assert!(DenseTensor::zeros(&[2, 0, 2]).is_err());
    }

    #[test]
    fn norm_zero_iff_zero() {
        let z = DenseTensor::zeros(&[2, 2, 2]).unwrap();
        assert_eq!(z.frobenius_norm(), 0.0);
        let mut t = z.clone();
        t.set(&[1, 0, 1], -3.0);
        assert_eq!(t.frobenius_norm(), 3.0);
    }

    #[test]
    fn into_real_rejects_large_residue() {
        let t = ComplexTensor::new(
            vec![1, 2],
            vec![Complex64::new(1.0, 1e-13), Complex64::new(0.0, 0.0)],
        )
        .unwrap();
        assert!(t.clone().into_real(1e-10).is_ok());
        let bad = ComplexTensor::new(
            vec![1, 2],
            vec![Complex64::new(1.0, 0.5), Complex64::new(0.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(
            bad.into_real(1e-10),
            Err(Error::NumericInconsistency(_))
        ));
    }

    #[test]
    fn slice_index_orders() {
        let dims = [2, 3, 4];
        for m in 0..24 {
            let multi = register_slice_multi_index(&dims, m);
            assert_eq!(register_slice_index(&dims, &multi), m);
        }
        assert_eq!(register_slice_index(&dims, &[1, 0, 0]), 12);
        assert_eq!(storage_slice_index(&dims, &[1, 0, 0]), 1);
    }
}
