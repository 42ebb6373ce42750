use std::io::Cursor;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use slabdsa::sparse::{AssembledMatrix, MATRIX_MARKET_HEADER};

fn sample() -> AssembledMatrix<f64> {
    AssembledMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (0, 2, -1.0), (1, 1, 0.5), (2, 0, 4.0), (0, 0, 1.0)], false)
}

#[test]
fn triplets_accumulate() {
    let a = sample();
    assert_eq!(a.get(0, 0), 3.0);
    assert_eq!(a.get(1, 0), 0.0);
    assert_eq!(a.nnz(), 4);
}

#[test]
fn matrix_market_round_trip() {
    let a = sample();
    let mut buf = Vec::new();
    a.write_matrix_market(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with(MATRIX_MARKET_HEADER));
    assert!(text.lines().nth(1).unwrap() == "3 3 4");
    assert!(text.contains("\n1 1 "), "indices are one-based");
    let b = AssembledMatrix::<f64>::read_matrix_market(Cursor::new(buf)).unwrap();
    assert_eq!(a.to_dense(), b.to_dense());
}

#[test]
fn rejects_malformed_matrix_market() {
    let bad = "%%MatrixMarket matrix array real general\n1 1\n1.0\n";
    assert!(AssembledMatrix::<f64>::read_matrix_market(Cursor::new(bad)).is_err());
    let short = format!("{MATRIX_MARKET_HEADER}\n2 2 2\n1 1 1.0\n");
    assert!(AssembledMatrix::<f64>::read_matrix_market(Cursor::new(short)).is_err());
}

#[test]
fn algebra_matches_dense() {
    let a = sample();
    let b = a.transpose();
    let ad = a.to_dense();
    let bd = b.to_dense();
    assert_eq!(a.matmul(&b).to_dense(), &ad * &bd);
    assert_eq!(a.add(&b).to_dense(), &ad + &bd);
    assert_eq!(a.sub(&b).to_dense(), &ad - &bd);
    assert_eq!(a.scale(2.0).to_dense(), &ad * 2.0);
    let x = DVector::from_vec(vec![1.0, -2.0, 3.0]);
    assert_eq!(a.mul_vec(&x), &ad * &x);
    assert_eq!(a.max_abs(), 4.0);
    assert_eq!(a.symmetry_defect(), 5.0);
}

#[test]
fn identity_and_zeros() {
    assert_eq!(AssembledMatrix::<f64>::identity(3).to_dense(), DMatrix::identity(3, 3));
    assert_eq!(AssembledMatrix::<f64>::zeros(2, 3).nnz(), 0);
}

proptest! {
    #[test]
    fn dense_round_trip(v in proptest::collection::vec(-5.0f64..5.0, 16)) {
        let m = DMatrix::from_vec(4, 4, v);
        let a = AssembledMatrix::from_dense(&m, false);
        prop_assert_eq!(a.to_dense(), m);
    }
}
