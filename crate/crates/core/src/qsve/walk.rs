//! Row/column isometries of a slice and the walk operator built from their
//! reflections.
//!
//! The walk space is `w (N1) ⊗ d (N2)` with index `i * N2 + j`. Column `i` of
//! `P` is `|i> ⊗ |A_i>` (the amplitude-encoded row) and column `j` of `Q` is
//! `|s_A> ⊗ |j>`. Their overlap is `P^H Q = conj(A) / ||A||_F`, so for real
//! slices it is the normalized slice itself and for complex slices its
//! entrywise conjugate; singular values are the same either way.

use nalgebra::Schur;
use num_complex::Complex64;
use serde::Serialize;

use super::kptree::KpTree;
use crate::error::{Error, Result};
use crate::linalg::{complete_orthonormal, svd_complex, CMatrix};

#[derive(Debug, Clone)]
pub struct IsometrySet {
    pub p: CMatrix,
    pub q: CMatrix,
    /// `||A||_F`.
    pub norm: f64,
    /// Row-norm state `s_A`.
    pub row_norms: Vec<f64>,
}

impl IsometrySet {
    pub fn rows(&self) -> usize {
        self.p.ncols()
    }

    pub fn cols(&self) -> usize {
        self.q.ncols()
    }

    /// Unitary on the row register whose first column is `s_A`, so that
    /// `U ⊗ I` maps `|0>|j>` to `Q e_j`.
    pub fn row_norm_unitary(&self) -> CMatrix {
        let n = self.rows();
        let s = CMatrix::from_iterator(n, 1, self.row_norms.iter().map(|&v| Complex64::new(v, 0.0)));
        complete_orthonormal(&s, n)
    }
}

/// `P`, `Q` for a nonzero slice, with row states taken from a [`KpTree`].
/// Zero rows get the basis state `|0>` and zero weight in `s_A`.
pub fn build_isometries(a: &CMatrix) -> Result<IsometrySet> {
    let tree = KpTree::build(a)?;
    let (n1, n2) = a.shape();
    let mut p = CMatrix::zeros(n1 * n2, n1);
    for i in 0..n1 {
        if tree.row_norm_sq(i) > 0.0 {
            for (j, z) in tree.sample_row_state(i)?.into_iter().enumerate() {
                p[(i * n2 + j, i)] = z;
            }
        } else {
            p[(i * n2, i)] = Complex64::new(1.0, 0.0);
        }
    }
    let s = tree.norm_state();
    let mut q = CMatrix::zeros(n1 * n2, n2);
    for (i, &si) in s.iter().enumerate() {
        for j in 0..n2 {
            q[(i * n2 + j, j)] = Complex64::new(si, 0.0);
        }
    }
    Ok(IsometrySet {
        p,
        q,
        norm: tree.frobenius_sq().sqrt(),
        row_norms: s,
    })
}

/// `2 M M^H - I`.
pub fn reflection(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    m * m.adjoint() * Complex64::new(2.0, 0.0) - CMatrix::identity(n, n)
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenPhaseMatch {
    /// `sigma / ||A||_F` being matched.
    pub ratio: f64,
    /// Matched eigenphases in `(-pi, pi]`.
    pub phases: Vec<f64>,
    /// `max |cos(|theta| / 2) - ratio|` over the matched phases.
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct WalkOperator {
    pub w: CMatrix,
    /// Eigenphases of `w` in `(-pi, pi]`.
    pub eigenphases: Vec<f64>,
}

impl WalkOperator {
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Pairs every ratio with eigenphases `±theta`, `cos(theta/2) = ratio`:
    /// one eigenvalue when `theta = 0`, a conjugate pair otherwise (two copies
    /// of `-1` when the ratio is zero). Each eigenvalue is used once.
    pub fn match_ratios(&self, ratios: &[f64]) -> Result<Vec<EigenPhaseMatch>> {
        let eig: Vec<Complex64> = self
            .eigenphases
            .iter()
            .map(|&t| Complex64::from_polar(1.0, t))
            .collect();
        let mut used = vec![false; eig.len()];
        let mut order: Vec<usize> = (0..ratios.len()).collect();
        order.sort_by(|&a, &b| ratios[b].total_cmp(&ratios[a]));
        let mut out = vec![None; ratios.len()];
        for idx in order {
            let c = ratios[idx].clamp(-1.0, 1.0);
            let theta = 2.0 * c.acos();
            let targets: Vec<f64> = if 1.0 - c < 1e-12 {
                vec![0.0]
            } else {
                vec![theta, -theta]
            };
            let mut phases = Vec::new();
            let mut err: f64 = 0.0;
            for t in targets {
                let want = Complex64::from_polar(1.0, t);
                let best = (0..eig.len())
                    .filter(|&k| !used[k])
                    .min_by(|&a, &b| (eig[a] - want).norm().total_cmp(&(eig[b] - want).norm()))
                    .ok_or_else(|| {
                        Error::NumericInconsistency("walk spectrum has too few eigenvalues".into())
                    })?;
                used[best] = true;
                let ph = self.eigenphases[best];
                phases.push(ph);
                err = err.max(((ph.abs() / 2.0).cos() - c).abs());
            }
            out[idx] = Some(EigenPhaseMatch {
                ratio: ratios[idx],
                phases,
                error: err,
            });
        }
        Ok(out.into_iter().map(|m| m.expect("all matched")).collect())
    }
}

/// `W = (2 P P^H - I)(2 Q Q^H - I)` and its eigenphases.
pub fn build_walk_operator(iso: &IsometrySet) -> Result<WalkOperator> {
    let w = reflection(&iso.p) * reflection(&iso.q);
    let eigenphases = unitary_eigenphases(&w)?;
    Ok(WalkOperator { w, eigenphases })
}

const SCHUR_MAX_ITER: usize = 100_000;
const EIGEN_RESIDUAL_TOL: f64 = 1e-10;

/// Eigenphases of a unitary matrix in `(-pi, pi]`.
///
/// Complex Schur can stall on the degenerate `±1` eigenvalues walk operators
/// have. The fallback diagonalizes the Hermitian matrix
/// `cos(a) (W + W^H)/2 + sin(a) (W - W^H)/(2i)`, which shares eigenvectors
/// with the normal `W`, and reads each eigenvalue off a Rayleigh quotient.
pub fn unitary_eigenphases(w: &CMatrix) -> Result<Vec<f64>> {
    let n = w.nrows();
    if let Some(schur) = Schur::try_new(w.clone(), f64::EPSILON, SCHUR_MAX_ITER) {
        let (_, t) = schur.unpack();
        return Ok((0..n).map(|k| t[(k, k)].arg()).collect());
    }
    hermitian_eigenphases(w)
}

fn hermitian_eigenphases(w: &CMatrix) -> Result<Vec<f64>> {
    let n = w.nrows();
    let wh = w.adjoint();
    let re = (w + &wh) * Complex64::new(0.5, 0.0);
    let im = (w - &wh) * Complex64::new(0.0, -0.5);
    for a in [0.3731_f64, 1.1903, 2.0417, 2.7639] {
        let h = &re * Complex64::new(a.cos(), 0.0) + &im * Complex64::new(a.sin(), 0.0);
        let eig = nalgebra::SymmetricEigen::new(h);
        let mut phases = Vec::with_capacity(n);
        let mut ok = true;
        for k in 0..n {
            let x = eig.eigenvectors.column(k);
            let lambda = (x.adjoint() * w * x)[(0, 0)];
            ok &= (w * x - x * lambda).norm() <= EIGEN_RESIDUAL_TOL;
            phases.push(lambda.arg());
        }
        if ok {
            return Ok(phases);
        }
    }
    Err(Error::NumericInconsistency(
        "eigendecomposition of the walk operator did not converge".into(),
    ))
}

/// `max_l ||W Q y_l - (2 c_l P x_l - Q y_l)||` over the singular triples
/// `(c_l, x_l, y_l)` of `P^H Q`: the two-dimensional invariant subspaces of
/// the walk.
pub fn invariant_subspace_defect(iso: &IsometrySet, walk: &WalkOperator) -> Result<f64> {
    let b = iso.p.adjoint() * &iso.q;
    let svd = svd_complex(&b)?;
    let mut worst: f64 = 0.0;
    for (l, &c) in svd.sigma.iter().enumerate() {
        let qy = &iso.q * svd.v.column(l);
        let px = &iso.p * svd.u.column(l);
        let lhs = &walk.w * &qy;
        let rhs = px * Complex64::new(2.0 * c, 0.0) - qy;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}
