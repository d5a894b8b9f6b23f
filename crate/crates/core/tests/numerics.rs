mod common;

use common::jacobi_singular_values;
use csrn::numerics::{
    idf, read_matrix, tfidf, truncated_svd, write_matrix, DenseMatrix, SeededRng, SparseBinaryMatrix, SparseMatrix,
};
use proptest::prelude::*;

fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng = SeededRng::new(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gaussian())
}

#[test]
fn jacobi_oracle_on_a_known_spectrum() {
    // diag(3, 2, 1) rotated on both sides keeps its singular values
    let c = (0.3f64).cos();
    let s = (0.3f64).sin();
    let rot = DenseMatrix::from_vec(3, 3, vec![c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let d = DenseMatrix::from_vec(3, 3, vec![3.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let a = rot.matmul(&d).unwrap().matmul(&rot.transpose()).unwrap();
    let sv = jacobi_singular_values(&a);
    for (got, want) in sv.iter().zip([3.0, 2.0, 1.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn truncated_svd_matches_jacobi_oracle() {
    for seed in 0..20 {
        let a = gaussian_matrix(50, 80, seed);
        let oracle = jacobi_singular_values(&a);
        let f = truncated_svd(&SparseMatrix::from_dense(&a), 8, seed).unwrap();
        for (got, want) in f.sigma.iter().zip(&oracle) {
            assert!((got - want).abs() <= 1e-6 * want, "seed {seed}: {got} vs {want}");
        }
    }
}

#[test]
fn truncation_error_is_the_discarded_spectrum() {
    let a = gaussian_matrix(30, 20, 4);
    let oracle = jacobi_singular_values(&a);
    let f = truncated_svd(&SparseMatrix::from_dense(&a), 5, 1).unwrap();
    let approx = f.reconstruct().unwrap();
    let mut err = 0.0;
    for r in 0..30 {
        for c in 0..20 {
            err += (a.get(r, c) - approx.get(r, c)).powi(2);
        }
    }
    let tail: f64 = oracle[5..].iter().map(|s| s * s).sum();
    assert!((err - tail).abs() < 1e-8 * tail);
}

#[test]
fn idf_hand_value() {
    assert!((idf(2, 1) - (1.5f64.ln() + 1.0)).abs() < 1e-15);
    assert!((idf(2, 1) - 1.405465).abs() < 1e-6);
}

fn binary_rows() -> impl Strategy<Value = (usize, Vec<Vec<u32>>)> {
    (1usize..12, 1usize..10).prop_flat_map(|(cols, rows)| {
        (Just(cols), prop::collection::vec(prop::collection::btree_set(0..cols as u32, 0..cols), rows))
            .prop_map(|(c, rs)| (c, rs.into_iter().map(|s| s.into_iter().collect()).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tfidf_weights_are_positive_and_keep_the_pattern((cols, rows) in binary_rows()) {
        let r = SparseBinaryMatrix::from_rows(cols, rows.clone()).unwrap();
        let w = tfidf(&r);
        for (i, row) in rows.iter().enumerate() {
            let (idx, vals) = w.row(i);
            prop_assert_eq!(idx, row.as_slice());
            prop_assert!(vals.iter().all(|v| *v >= 1.0 && v.is_finite()));
        }
    }

    #[test]
    fn svd_factors_are_orthonormal_and_sorted(seed in any::<u64>(), rows in 4usize..20, cols in 4usize..20) {
        let a = gaussian_matrix(rows, cols, seed);
        let rank = rows.min(cols).min(4);
        let f = truncated_svd(&SparseMatrix::from_dense(&a), rank, seed).unwrap();
        prop_assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
        for s in 0..rank {
            for t in 0..rank {
                let d: f64 = (0..rows).map(|r| f.u.get(r, s) * f.u.get(r, t)).sum();
                let want = if s == t { 1.0 } else { 0.0 };
                prop_assert!((d - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matrix_snapshot_round_trip(seed in any::<u64>(), rows in 0usize..6, cols in 0usize..6) {
        let a = gaussian_matrix(rows, cols, seed);
        let mut buf = Vec::new();
        write_matrix(&mut buf, &a).unwrap();
        let b = read_matrix(&mut buf.as_slice()).unwrap();
        prop_assert_eq!(a.rows(), b.rows());
        prop_assert!(a.as_slice().iter().zip(b.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn derived_streams_are_reproducible(seed in any::<u64>(), stream in any::<u64>()) {
        let mut a = SeededRng::derived(seed, stream);
        let mut b = SeededRng::derived(seed, stream);
        for _ in 0..8 {
            prop_assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
