use nalgebra::{DMatrix, DVector};
use slabdsa::oracles::*;

#[test]
fn default_suite_passes_and_is_deterministic() {
    let a = run_suite(7).unwrap();
    let b = run_suite(7).unwrap();
    assert!(a.len() >= 40);
    for r in &a {
        assert!(r.passed, "{}", r.line());
    }
    assert!(all_passed(&a));
    assert_eq!(a, b);
    let text = format_reports(&a);
    assert!(text.trim_end().ends_with("0 failed"), "{text}");
}

#[test]
fn diagonal_singular_instance_has_closed_form_error() {
    let f0 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0, 1.0]));
    let p = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
    let q = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let inst = SingularInstance {
        f0,
        d: DMatrix::identity(3, 3),
        d1: DMatrix::zeros(3, 3),
        p,
        q,
    };
    for eps in [1e-1f64, 1e-3] {
        let err = singular_perturbation_error(&inst, eps).unwrap();
        assert!((err - eps / (1.0 + eps)).abs() < 1e-12);
        assert_eq!(perturbed_inverse_error(&inst, eps).unwrap(), 0.0);
    }
    let r = check_singular_perturbation(&inst, &[1e-2, 1e-3], "diag").unwrap();
    assert!(r.passed, "{}", r.line());
}

#[test]
fn singular_instance_needs_proper_nullspace() {
    assert!(random_singular_instance::<f64>(5, 0, 1).is_err());
    assert!(random_singular_instance::<f64>(5, 5, 1).is_err());
    let inst = random_singular_instance::<f64>(12, 4, 1).unwrap();
    assert!((&inst.f0 * &inst.p).amax() < 1e-13);
    assert!((inst.p.transpose() * &inst.d1).amax() < 1e-13);
    assert!((&inst.d1 * &inst.p).amax() < 1e-13);
}

#[test]
fn rate_reports_classify_orders() {
    let eps = [1e-1, 1e-2, 1e-3];
    let quad: Vec<f64> = eps.iter().map(|e| e * e).collect();
    assert!(rate_report("q", "x", &eps, &quad, SECOND_ORDER_BAND).passed);
    assert!(!rate_report("q", "x", &eps, &quad, FIRST_ORDER_BAND).passed);
    let growing: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
    assert!(growth_report("g", "x", &eps, &growing, FIRST_ORDER_BAND).passed);
}

#[test]
fn report_formatting() {
    assert!(Bound::AtMost(1e-3).admits(1e-3));
    assert!(!Bound::Band(1.0, 2.0).admits(2.5));
    assert!(Bound::Skipped.admits(f64::NAN));
    let r = OracleReport::new("c", "a, b", 0.5, Bound::Band(0.0, 1.0)).with_note("n");
    assert!(r.line().starts_with("PASS c"));
    assert_eq!(r.csv_row(), "c,\"a, b\",5.0000000000000000e-1,\"[0, 1]\",true,n");
    let f = OracleReport::new("c", "i", 2.0, Bound::AtMost(1.0));
    assert!(f.line().starts_with("FAIL"));
    assert!(OracleReport::skipped("c", "i", "why").line().starts_with("SKIP"));
    let mut buf = Vec::new();
    write_csv(&[r, f], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some(OracleReport::CSV_HEADER));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn dense_operators_are_consistent() {
    let sys = small_system(5, 1, 4, 1.0, 0.5, 0.1).unwrap();
    let dense = DenseTransport::new(&sys);
    let p0 = dense.p0();
    assert!((&p0 * &p0 - &p0).amax() < 1e-13);
    assert_eq!(p0, dense.replication() * dense.average());
    let a = dense.average() * dense.replication();
    assert!((a - DMatrix::identity(dense.n, dense.n)).amax() < 1e-13);
    let r = check_sip_equivalence(&sys).unwrap();
    assert!(r.passed, "{}", r.line());
    assert!(check_lagged_inverse_identity(12, 0.2, 2, 3).unwrap().passed);
}
