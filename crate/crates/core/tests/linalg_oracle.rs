//! Dense LU, inverse diagonal and condition numbers checked against nalgebra.

use kernmol::densela::{cond2, lu_factor, norm_inf, Matrix};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn to_nalgebra(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn oracle_cond2(a: &Matrix) -> f64 {
    let sv = to_nalgebra(a).svd(false, false).singular_values;
    sv.max() / sv.min()
}

/// Random square matrix with a mildly dominant diagonal.
fn matrix_strategy(max_n: usize) -> impl Strategy<Value = Matrix> {
    (1..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| {
            Matrix::from_fn(n, n, |i, j| v[i * n + j] + if i == j { 0.5 * n as f64 } else { 0.0 })
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn solve_is_a_left_inverse(a in matrix_strategy(50), seed in 0u64..1000) {
        prop_assume!(oracle_cond2(&a) <= 1e6);
        let n = a.nrows();
        let b: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 101) as f64 / 50.0 - 1.0).collect();
        prop_assume!(norm_inf(&b) > 0.0);
        let x = lu_factor(&a).unwrap().solve(&b).unwrap();
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(ax, bi)| ax - bi).collect();
        prop_assert!(norm_inf(&r) / norm_inf(&b) <= 1e-9);
    }
}

proptest! {
    #[test]
    fn inverse_diagonal_matches_oracle_inverse(a in matrix_strategy(20)) {
        let inv = to_nalgebra(&a).try_inverse().unwrap();
        let diag = lu_factor(&a).unwrap().inverse_diagonal();
        for (k, d) in diag.iter().enumerate() {
            let r = inv[(k, k)];
            prop_assert!((d - r).abs() <= 1e-12 * r.abs(), "k={}: {} vs {}", k, d, r);
        }
    }

    #[test]
    fn cond2_matches_svd_and_is_scale_invariant(a in matrix_strategy(25), alpha in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
        let c = cond2(&a);
        let oracle = oracle_cond2(&a);
        prop_assert!((c - oracle).abs() <= 1e-10 * oracle);
        let scaled = cond2(&a.scaled(alpha));
        prop_assert!((scaled - c).abs() <= 1e-10 * c);
    }

    #[test]
    fn transpose_solve_matches_oracle(a in matrix_strategy(30)) {
        let n = a.nrows();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let x = lu_factor(&a).unwrap().solve_transpose(&b).unwrap();
        let oracle = to_nalgebra(&a).transpose().lu().solve(&nalgebra::DVector::from_vec(b)).unwrap();
        for (xi, oi) in x.iter().zip(oracle.iter()) {
            prop_assert!((xi - oi).abs() <= 1e-10 * oi.abs().max(1.0));
        }
    }
}

#[test]
fn factorization_reproduces_permuted_matrix() {
    let a = Matrix::from_rows(&[
        vec![0.0, 2.0, 1.0],
        vec![4.0, -1.0, 3.0],
        vec![2.0, 5.0, -2.0],
    ])
    .unwrap();
    let f = lu_factor(&a).unwrap();
    let lu = f.packed();
    let n = 3;
    let l = Matrix::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => lu[(i, j)],
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => 0.0,
    });
    let u = Matrix::from_fn(n, n, |i, j| if i <= j { lu[(i, j)] } else { 0.0 });
    let prod = l.matmul(&u);
    for (i, &p) in f.permutation().iter().enumerate() {
        for j in 0..n {
            assert!((prod[(i, j)] - a[(p, j)]).abs() <= 1e-14);
        }
    }
}
