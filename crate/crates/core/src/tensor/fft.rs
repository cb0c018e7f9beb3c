use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use super::{ComplexTensor, Scalar, Tensor};
use crate::error::{invalid, Result};

/// Unnormalized forward DFT (`e^{-2 pi i jk/N}`) along modes `first_mode..=p`
/// (1-based).
pub fn fft_trailing_modes<T: Scalar + Into<Complex64>>(
    a: &Tensor<T>,
    first_mode: usize,
) -> Result<ComplexTensor> {
    let mut out = a.map(|v| v.into());
    transform(&mut out, first_mode, FftDirection::Forward, |_| 1.0)?;
    Ok(out)
}

/// Inverse of [`fft_trailing_modes`] (`e^{+2 pi i jk/N}`, scaled by `1/N` per mode).
pub fn ifft_trailing_modes(a: &ComplexTensor, first_mode: usize) -> Result<ComplexTensor> {
    let mut out = a.clone();
    transform(&mut out, first_mode, FftDirection::Inverse, |n| 1.0 / n as f64)?;
    Ok(out)
}

/// Unitary quantum Fourier transform along trailing modes:
/// `|x> -> N^{-1/2} sum_y w^{xy} |y>` with `w = e^{+2 pi i/N}`; `inverse`
/// applies the adjoint.
pub fn qft_trailing_modes(
    a: &ComplexTensor,
    first_mode: usize,
    inverse: bool,
) -> Result<ComplexTensor> {
    let mut out = a.clone();
    let dir = if inverse {
        FftDirection::Forward
    } else {
        FftDirection::Inverse
    };
    transform(&mut out, first_mode, dir, |n| 1.0 / (n as f64).sqrt())?;
    Ok(out)
}

fn transform(
    t: &mut ComplexTensor,
    first_mode: usize,
    dir: FftDirection,
    scale: impl Fn(usize) -> f64,
) -> Result<()> {
    if first_mode == 0 || first_mode > t.order() {
        return Err(invalid(format!(
            "mode {first_mode} out of range for order {}",
            t.order()
        )));
    }
    let dims = t.dims().to_vec();
    let mut planner = FftPlanner::<f64>::new();
    for k in first_mode - 1..dims.len() {
        let n = dims[k];
        if n == 1 {
            continue;
        }
        let stride: usize = dims[..k].iter().product();
        let outer: usize = dims[k + 1..].iter().product();
        let fft = planner.plan_fft(n, dir);
        let s = scale(n);
        let mut buf = vec![Complex64::default(); n];
        let values = t.values_mut();
        for o in 0..outer {
            for inner in 0..stride {
                let base = inner + stride * n * o;
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = values[base + stride * j];
                }
                fft.process(&mut buf);
                for (j, b) in buf.iter().enumerate() {
                    values[base + stride * j] = b * s;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DenseTensor;
    use std::f64::consts::PI;

    fn naive_dft(x: &[Complex64], sign: f64) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| v * Complex64::from_polar(1.0, sign * 2.0 * PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_naive_dft_on_tubes() {
        let a = DenseTensor::from_fn(&[2, 3, 5], |i| ((i[0] * 7 + i[1] * 3 + i[2] * i[2]) % 11) as f64 - 4.0)
            .unwrap();
        let ah = fft_trailing_modes(&a, 3).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                let tube: Vec<Complex64> = a.tube(i, j).iter().map(|&v| v.into()).collect();
                let want = naive_dft(&tube, -1.0);
                for (x, y) in ah.tube(i, j).iter().zip(&want) {
                    assert!((x - y).norm() < 1e-12);
                }
            }
        }
        let back = ifft_trailing_modes(&ah, 3).unwrap().into_real(1e-12).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn qft_is_unitary_and_conjugate_of_fft() {
        let a = DenseTensor::from_fn(&[2, 2, 4], |i| (i[0] + 2 * i[1]) as f64 * 0.5 - (i[2] as f64).sin())
            .unwrap();
        let q = qft_trailing_modes(&a.to_complex(), 3, false).unwrap();
        assert!((q.frobenius_norm() - a.frobenius_norm()).abs() < 1e-12);
        let f = fft_trailing_modes(&a, 3).unwrap();
        let s = 2.0;
        for (x, y) in q.values().iter().zip(f.values()) {
            assert!((x - y.conj() / s).norm() < 1e-12);
        }
        let back = qft_trailing_modes(&q, 3, true).unwrap();
        assert!(back.sub(&a.to_complex()).unwrap().frobenius_norm() < 1e-12);
    }

    #[test]
    fn order_four_roundtrip() {
        let a = DenseTensor::from_fn(&[2, 2, 3, 2], |i| (i.iter().sum::<usize>() as f64).cos()).unwrap();
        let ah = fft_trailing_modes(&a, 3).unwrap();
        let back = ifft_trailing_modes(&ah, 3).unwrap().into_real(1e-12).unwrap();
        assert!(back.max_abs_diff(&a) < 1e-12);
    }
}
