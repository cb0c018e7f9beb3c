//! Binary-tree store of squared magnitudes supporting amplitude-encoding
//! state preparation and weighted sampling of matrix entries.
//!
//! Each row has a heap-ordered tree whose leaves hold `|a_ij|^2` (and a unit
//! phase `a_ij / |a_ij|`); a further tree holds the squared row norms, so its
//! root is `||A||_F^2`. Point updates rewrite one leaf and recompute the sums
//! on the path to the root from the children, so no drift accumulates.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::CMatrix;

#[derive(Debug, Clone)]
pub struct KpTree {
    rows: usize,
    cols: usize,
    col_leaves: usize,
    row_leaves: usize,
    row_trees: Vec<Vec<f64>>,
    phases: Vec<Complex64>,
    norm_tree: Vec<f64>,
}

impl KpTree {
    /// Builds the trees for a nonzero matrix.
    pub fn build(a: &CMatrix) -> Result<Self> {
        let (rows, cols) = a.shape();
        if rows == 0 || cols == 0 {
            return Err(invalid("empty matrix"));
        }
        if a.iter().all(|z| z.norm_sqr() == 0.0) {
            return Err(invalid("cannot build a tree over the zero matrix"));
        }
        let col_leaves = cols.next_power_of_two();
        let row_leaves = rows.next_power_of_two();
        let mut t = Self {
            rows,
            cols,
            col_leaves,
            row_leaves,
            row_trees: vec![vec![0.0; 2 * col_leaves]; rows],
            phases: vec![Complex64::new(1.0, 0.0); rows * cols],
            norm_tree: vec![0.0; 2 * row_leaves],
        };
        for i in 0..rows {
            for j in 0..cols {
                let z = a[(i, j)];
                t.row_trees[i][col_leaves + j] = z.norm_sqr();
                t.phases[i * cols + j] = unit_phase(z);
            }
            for n in (1..col_leaves).rev() {
                t.row_trees[i][n] = t.row_trees[i][2 * n] + t.row_trees[i][2 * n + 1];
            }
            t.norm_tree[row_leaves + i] = t.row_trees[i][1];
        }
        for n in (1..row_leaves).rev() {
            t.norm_tree[n] = t.norm_tree[2 * n] + t.norm_tree[2 * n + 1];
        }
        Ok(t)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `||A||_F^2`.
    pub fn frobenius_sq(&self) -> f64 {
        self.norm_tree[1]
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_trees[i][1]
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.phases[i * self.cols + j] * self.row_trees[i][self.col_leaves + j].sqrt()
    }

    /// Sets `a_ij` and recomputes the sums on both root-to-leaf paths.
    pub fn update(&mut self, i: usize, j: usize, value: Complex64) -> Result<()> {
        if i >= self.rows || j >= self.cols {
            return Err(invalid(format!("entry ({i}, {j}) out of range")));
        }
        self.phases[i * self.cols + j] = unit_phase(value);
        let tree = &mut self.row_trees[i];
        let mut n = self.col_leaves + j;
        tree[n] = value.norm_sqr();
        while n > 1 {
            n /= 2;
            tree[n] = tree[2 * n] + tree[2 * n + 1];
        }
        let mut n = self.row_leaves + i;
        self.norm_tree[n] = tree[1];
        while n > 1 {
            n /= 2;
            self.norm_tree[n] = self.norm_tree[2 * n] + self.norm_tree[2 * n + 1];
        }
        Ok(())
    }

    /// Largest relative violation of "node = left + right" over all trees,
    /// including the link between row roots and row-norm leaves.
    pub fn invariant_violation(&self) -> f64 {
        let rel = |node: f64, sum: f64| {
            let scale = node.abs().max(sum.abs());
            if scale == 0.0 {
                0.0
            } else {
                (node - sum).abs() / scale
            }
        };
        let mut worst: f64 = 0.0;
        for tree in &self.row_trees {
            for n in 1..self.col_leaves {
                worst = worst.max(rel(tree[n], tree[2 * n] + tree[2 * n + 1]));
            }
        }
        for n in 1..self.row_leaves {
            worst = worst.max(rel(
                self.norm_tree[n],
                self.norm_tree[2 * n] + self.norm_tree[2 * n + 1],
            ));
        }
        for (i, tree) in self.row_trees.iter().enumerate() {
            worst = worst.max(rel(self.norm_tree[self.row_leaves + i], tree[1]));
        }
        worst
    }

    /// Samples `(i, j)` with probability `|a_ij|^2 / ||A||_F^2` by descending
    /// the row-norm tree and then the row tree.
    pub fn sample_entry(&self, rng: &mut impl Rng) -> (usize, usize) {
        let i = descend(&self.norm_tree, self.row_leaves, rng);
        let j = descend(&self.row_trees[i], self.col_leaves, rng);
        (i, j)
    }

    /// `A_i / ||A_i||` built by descending row `i`'s tree: each leaf's
    /// amplitude is the product of `sqrt(child / parent)` along its path times
    /// the stored phase.
    pub fn sample_row_state(&self, i: usize) -> Result<Vec<Complex64>> {
        if i >= self.rows {
            return Err(invalid(format!("row {i} out of range")));
        }
        let tree = &self.row_trees[i];
        if tree[1] == 0.0 {
            return Err(invalid(format!("row {i} is zero")));
        }
        let amps = descent_amplitudes(tree, self.col_leaves);
        Ok((0..self.cols)
            .map(|j| self.phases[i * self.cols + j] * amps[j])
            .collect())
    }

    /// Row-norm state `(||A_0||, ||A_1||, ...) / ||A||_F`.
    pub fn norm_state(&self) -> Vec<f64> {
        descent_amplitudes(&self.norm_tree, self.row_leaves)[..self.rows].to_vec()
    }
}

fn unit_phase(z: Complex64) -> Complex64 {
    let n = z.norm();
    if n == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z / n
    }
}

fn descend(tree: &[f64], leaves: usize, rng: &mut impl Rng) -> usize {
    let mut n = 1;
    while n < leaves {
        let left = tree[2 * n];
        let total = left + tree[2 * n + 1];
        n = if rng.random::<f64>() * total < left {
            2 * n
        } else {
            2 * n + 1
        };
    }
    n - leaves
}

fn descent_amplitudes(tree: &[f64], leaves: usize) -> Vec<f64> {
    let mut amp = vec![0.0; 2 * leaves];
    amp[1] = 1.0;
    for n in 1..leaves {
        let parent = tree[n];
        for c in [2 * n, 2 * n + 1] {
            amp[c] = if parent > 0.0 {
                amp[n] * (tree[c] / parent).sqrt()
            } else {
                0.0
            };
        }
    }
    amp[leaves..].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn ones_and_update() {
        let mut t = KpTree::build(&CMatrix::from_element(2, 2, c(1.0))).unwrap();
        assert_eq!(t.frobenius_sq(), 4.0);
        t.update(0, 0, c(2.0)).unwrap();
        assert_eq!(t.frobenius_sq(), 7.0);
        assert_eq!(t.row_norm_sq(0), 5.0);
        assert_eq!(t.invariant_violation(), 0.0);
        assert!(KpTree::build(&CMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn row_states() {
        let a = CMatrix::from_row_slice(3, 3, &[c(3.0), c(4.0), c(0.0), c(0.0), c(0.0), c(-2.0), c(0.0), c(0.0), c(0.0)]);
        let t = KpTree::build(&a).unwrap();
        let r0 = t.sample_row_state(0).unwrap();
        assert!((r0[0] - c(0.6)).norm() < 1e-15 && (r0[1] - c(0.8)).norm() < 1e-15);
        let r1 = t.sample_row_state(1).unwrap();
        assert_eq!(r1, vec![c(0.0), c(0.0), c(-1.0)]);
        assert!(t.sample_row_state(2).is_err());
        let s = t.norm_state();
        assert!((s[0] - 5.0 / 29f64.sqrt()).abs() < 1e-15);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn complex_entries_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = CMatrix::from_fn(3, 5, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let t = KpTree::build(&a).unwrap();
        for i in 0..3 {
            let row = t.sample_row_state(i).unwrap();
            let n = a.row(i).norm();
            for j in 0..5 {
                assert!((row[j] - a[(i, j)] / n).norm() < 1e-14);
                assert!((t.entry(i, j) - a[(i, j)]).norm() < 1e-14);
            }
        }
    }
}
