use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use tqsvd_core::harness::{Check, RunReport};
use tqsvd_core::linalg::{svd_complex, svd_real};
use tqsvd_core::qsve::KpTree;
use tqsvd_core::recsys::{bad_recommendation_bound, bound_epsilon};
use tqsvd_core::tensor::{
    fft_trailing_modes, identity_tensor, ifft_trailing_modes, t_product, t_transpose,
};
use tqsvd_core::tsvd::{truncation_error, tsvd};
use tqsvd_core::{CMatrix, DenseTensor, ExperimentConfig};

fn tensor(dims: [usize; 3]) -> impl Strategy<Value = DenseTensor> {
    prop::collection::vec(-5.0f64..5.0, dims.iter().product::<usize>())
        .prop_map(move |v| DenseTensor::new(dims.to_vec(), v).unwrap())
}

fn any_tensor() -> impl Strategy<Value = DenseTensor> {
    (1usize..=4, 1usize..=4, 1usize..=4).prop_flat_map(|(a, b, c)| tensor([a, b, c]))
}

/// Three tensors with chainable shapes `n1 x n2`, `n2 x n4`, `n4 x n5`.
fn chain() -> impl Strategy<Value = (DenseTensor, DenseTensor, DenseTensor)> {
    (1usize..=3, 1usize..=3, 1usize..=3, 1usize..=3, 1usize..=4).prop_flat_map(
        |(n1, n2, n4, n5, n3)| (tensor([n1, n2, n3]), tensor([n2, n4, n3]), tensor([n4, n5, n3])),
    )
}

fn complex_matrix() -> impl Strategy<Value = CMatrix> {
    (1usize..=6, 1usize..=6, 1usize..=6).prop_flat_map(|(r, c, rank)| {
        let rank = rank.min(r).min(c);
        (
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * rank),
            prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), rank * c),
        )
            .prop_map(move |(x, y)| {
                let z = |v: &[(f64, f64)]| v.iter().map(|&(a, b)| Complex64::new(a, b)).collect::<Vec<_>>();
                CMatrix::from_vec(r, rank, z(&x)) * CMatrix::from_vec(rank, c, z(&y))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 256,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn t_product_is_associative((a, b, c) in chain()) {
        let left = t_product(&t_product(&a, &b).unwrap(), &c).unwrap();
        let right = t_product(&a, &t_product(&b, &c).unwrap()).unwrap();
        let scale = 1.0 + a.frobenius_norm() * b.frobenius_norm() * c.frobenius_norm();
        prop_assert!(left.max_abs_diff(&right) <= 1e-12 * scale);
    }

    #[test]
    fn identity_is_neutral(a in any_tensor()) {
        let [n1, n2, n3] = [a.dims()[0], a.dims()[1], a.dims()[2]];
        let left = t_product(&identity_tensor(n1, n3).unwrap(), &a).unwrap();
        let right = t_product(&a, &identity_tensor(n2, n3).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&a) <= 1e-12 * (1.0 + a.frobenius_norm()));
        prop_assert!(right.max_abs_diff(&a) <= 1e-12 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn transpose_reverses_products((a, b, _) in chain()) {
        prop_assert_eq!(t_transpose(&t_transpose(&a).unwrap()).unwrap(), a.clone());
        let lhs = t_transpose(&t_product(&a, &b).unwrap()).unwrap();
        let rhs = t_product(&t_transpose(&b).unwrap(), &t_transpose(&a).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-12 * (1.0 + a.frobenius_norm() * b.frobenius_norm()));
    }

    #[test]
    fn fft_round_trip(a in any_tensor()) {
        let back = ifft_trailing_modes(&fft_trailing_modes(&a, 3).unwrap(), 3)
            .unwrap()
            .into_real(1e-12)
            .unwrap();
        prop_assert!(back.max_abs_diff(&a) <= 1e-12 * (1.0 + a.frobenius_norm()));
    }

    #[test]
    fn tsvd_reconstructs_and_truncation_is_monotone(a in any_tensor()) {
        let f = tsvd(&a).unwrap();
        let rec = f.reconstruct().unwrap();
        prop_assert!(rec.sub(&a).unwrap().frobenius_norm() <= 1e-10 * (1.0 + a.frobenius_norm()));
        let mut last = a.frobenius_norm();
        for k in 1..a.dims()[0].min(a.dims()[1]) {
            let e = truncation_error(&a, k).unwrap();
            prop_assert!(e <= last + 1e-12);
            last = e;
        }
    }

    #[test]
    fn svd_reconstructs_low_rank(a in complex_matrix()) {
        let f = svd_complex(&a).unwrap();
        prop_assert!((&a - f.reconstruct()).norm() <= 1e-12 * (1.0 + a.norm()));
        prop_assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
        let eye = |n| CMatrix::identity(n, n);
        prop_assert!((f.u.adjoint() * &f.u - eye(f.u.ncols())).norm() <= 1e-10);
        prop_assert!((f.v.adjoint() * &f.v - eye(f.v.ncols())).norm() <= 1e-10);

        let re = a.map(|z| z.re);
        let g = svd_real(&re).unwrap();
        let back = g.reconstruct().map(|z| z.re);
        prop_assert!((&re - back).norm() <= 1e-12 * (1.0 + re.norm()));
    }

    #[test]
    fn kp_tree_tracks_updates(
        a in complex_matrix(),
        updates in prop::collection::vec((0usize..6, 0usize..6, -2.0f64..2.0, -2.0f64..2.0), 1..20),
    ) {
        let mut tree = KpTree::build(&a).unwrap();
        let mut shadow = a.clone();
        for (i, j, re, im) in updates {
            let (i, j) = (i % a.nrows(), j % a.ncols());
            let v = Complex64::new(re, im);
            tree.update(i, j, v).unwrap();
            shadow[(i, j)] = v;
        }
        prop_assert!(tree.invariant_violation() <= 1e-10 * (1.0 + shadow.norm_squared()));
        prop_assert!((tree.frobenius_sq() - shadow.norm_squared()).abs() <= 1e-10 * (1.0 + shadow.norm_squared()));
        for i in 0..shadow.nrows() {
            let row = shadow.row(i).norm_squared();
            prop_assert!((tree.row_norm_sq(i) - row).abs() <= 1e-10 * (1.0 + row));
            if row > 1e-12 {
                let state = tree.sample_row_state(i).unwrap();
                for (j, amp) in state.iter().enumerate() {
                    prop_assert!((amp * row.sqrt() - shadow[(i, j)]).norm() <= 1e-10 * (1.0 + row.sqrt()));
                }
            }
        }
    }

    #[test]
    fn bounds_are_monotone(
        gamma in 0.0f64..=1.0,
        zeta in 0.0f64..=1.0,
        delta in 0.05f64..=1.0,
        p in 0.05f64..=1.0,
        eps0 in 0.0f64..0.5,
        bump in 0.0f64..0.3,
    ) {
        let e = bound_epsilon(gamma, zeta, delta, p, eps0).unwrap();
        prop_assert!(bound_epsilon(gamma, zeta, delta, p, eps0 + bump).unwrap() >= e);
        prop_assert!(bound_epsilon(gamma, zeta, delta, (p + bump).min(1.0), eps0).unwrap() <= e + 1e-15);
        prop_assert!(bound_epsilon(gamma, zeta, (delta + bump).min(1.0), p, eps0).unwrap() <= e + 1e-15);
        if e + bump < 1.0 {
            prop_assert!(bad_recommendation_bound(e + bump).unwrap() >= bad_recommendation_bound(e).unwrap());
        }
    }

    #[test]
    fn report_json_round_trip(seed in any::<u64>(), values in prop::collection::vec(-1e6f64..1e6, 0..6)) {
        let mut r = RunReport {
            name: "prop".into(),
            seed,
            config: Some(ExperimentConfig::suite("tsvd", seed)),
            ..Default::default()
        };
        for (i, v) in values.iter().enumerate() {
            r.metric(&format!("m{i}"), *v);
            r.checks.push(Check::at_most(&format!("c{i}"), v.abs(), 1e3));
        }
        let back = RunReport::from_json(&r.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(back.passed(), r.passed());
    }
}

#[test]
fn real_svd_of_zero_matrix() {
    let f = svd_real(&DMatrix::zeros(3, 2)).unwrap();
    assert!(f.sigma.iter().all(|&s| s == 0.0));
}
