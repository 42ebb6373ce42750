use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabdsa::cycles::{dense_lagged_inverse, iterate_with_inners, lagged_sweeps, split_h, verify_lemma3, Lemma3Report};
use slabdsa::dsa::{Preconditioner, PreconditionerKind};
use slabdsa::mesh::{adversarial_ordering, upwind_ordering};
use slabdsa::oracles::small_system;
use slabdsa::transport::{source_iteration, AngularFlux};
use slabdsa::{Error, ExperimentConfig};

fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
}

fn random_flux(nd: usize, n: usize, seed: u64) -> AngularFlux<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    AngularFlux::new((0..nd).map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))).collect()).unwrap()
}

fn dense_h(split_part: &[slabdsa::AssembledMatrix]) -> Vec<DMatrix<f64>> {
    split_part.iter().map(|m| m.to_dense()).collect()
}

#[test]
fn split_reassembles_h() {
    let sys = small_system(7, 2, 4, 1.0, 0.5, 0.1).unwrap();
    let ord = adversarial_ordering(sys.space.mesh(), &sys.dirs, 0.5, 2).unwrap();
    let split = split_h(&sys, &ord).unwrap();
    for d in 0..sys.n_angles() {
        let sum = split.h_le[d].add(&split.h_gt[d]).to_dense();
        assert_eq!(sum, sys.build_h(d).to_dense());
        assert!(split.h_gt[d].max_abs() > 0.0);
    }
}

#[test]
fn upwind_split_has_no_lagged_part() {
    let sys = small_system(5, 1, 2, 1.0, 0.5, 0.1).unwrap();
    let split = split_h(&sys, &upwind_ordering(sys.space.mesh(), &sys.dirs)).unwrap();
    assert!(split.h_gt.iter().all(|m| m.max_abs() == 0.0));
}

#[test]
fn fully_lagged_split_is_block_diagonal() {
    let sys = small_system(5, 2, 2, 1.0, 0.5, 0.1).unwrap();
    let ord = adversarial_ordering(sys.space.mesh(), &sys.dirs, 1.0, 0).unwrap();
    let split = split_h(&sys, &ord).unwrap();
    let nl = sys.space.n_local();
    for m in &split.h_le {
        for (i, j, v) in m.triplets() {
            assert!(v == 0.0 || i / nl == j / nl);
        }
    }
}

#[test]
fn lagged_sweeps_match_truncated_series() {
    let sys = small_system(6, 1, 2, 1.0, 0.5, 0.2).unwrap();
    let ord = adversarial_ordering(sys.space.mesh(), &sys.dirs, 0.5, 5).unwrap();
    let split = split_h(&sys, &ord).unwrap();
    let rhs = random_flux(2, sys.n_dofs(), 1);
    let le = dense_h(&split.h_le);
    let gt = dense_h(&split.h_gt);
    for k in 1..=4 {
        let got = lagged_sweeps(&sys, &split, k, &rhs).unwrap();
        for d in 0..2 {
            let inv = dense_lagged_inverse(&le[d], &gt[d], 0.2, k).unwrap();
            let want = &inv * rhs.block(d);
            let diff = (got.block(d) - &want).amax();
            assert!(diff <= 1e-11 * want.amax(), "k={k} d={d} diff {diff}");
        }
    }
}

#[test]
fn lagged_sweeps_without_lag_are_exact() {
    let sys = small_system(6, 2, 2, 1.0, 0.5, 0.2).unwrap();
    let ord = upwind_ordering(sys.space.mesh(), &sys.dirs);
    let split = split_h(&sys, &ord).unwrap();
    let rhs = random_flux(2, sys.n_dofs(), 3);
    for k in [1, 3] {
        let got = lagged_sweeps(&sys, &split, k, &rhs).unwrap();
        for d in 0..2 {
            let exact = sys.sweep(d, &ord, rhs.block(d)).unwrap();
            assert!((got.block(d) - exact).amax() < 1e-13);
        }
    }
    assert!(lagged_sweeps(&sys, &split, 0, &rhs).is_err());
}

#[test]
fn three_lagged_sweeps_leave_third_order_residual() {
    let residual = |eps: f64| {
        let sys = small_system(8, 1, 2, 1.0, 1.0, eps).unwrap();
        let ord = adversarial_ordering(sys.space.mesh(), &sys.dirs, 0.5, 7).unwrap();
        let split = split_h(&sys, &ord).unwrap();
        let rhs = random_flux(2, sys.n_dofs(), 4);
        let x = lagged_sweeps(&sys, &split, 3, &rhs).unwrap();
        let n = sys.n_dofs();
        (0..2)
            .map(|d| {
                let a = DMatrix::identity(n, n) + sys.build_h(d).to_dense() * eps;
                (&a * x.block(d) - rhs.block(d)).amax()
            })
            .fold(0.0, f64::max)
    };
    let ratio = residual(1e-2) / residual(1e-3);
    assert!((300.0..3000.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn lagged_inverse_identity_on_random_matrices() {
    let n = 20;
    let mut le = random_matrix(n, 1);
    let mut gt = random_matrix(n, 2);
    for i in 0..n {
        for j in 0..n {
            if j > i {
                le[(i, j)] = 0.0;
            } else {
                gt[(i, j)] = 0.0;
            }
        }
    }
    let b = random_matrix(n, 3) * 0.5;
    let rep: Lemma3Report = verify_lemma3(&le, &gt, &b, 0.1, 3).unwrap();
    assert!(rep.discrepancy <= 1e-10 * rep.scale);
    assert_eq!(rep.csv_row().split(',').count(), Lemma3Report::CSV_HEADER.split(',').count());
    assert!(rep.summary().contains("k = 3"));

    let zero = DMatrix::zeros(n, n);
    let exact = verify_lemma3(&le, &zero, &b, 0.1, 2).unwrap();
    assert!(exact.discrepancy <= 1e-13 * exact.scale);
    let one = verify_lemma3(&le, &gt, &b, 0.1, 1).unwrap();
    assert!(one.discrepancy <= 1e-12 * one.scale);
}

#[test]
fn lagged_inverse_check_rejects_bad_input() {
    let n = 3;
    let le = -DMatrix::identity(n, n);
    let gt = DMatrix::zeros(n, n);
    let b = DMatrix::zeros(n, n);
    assert!(matches!(verify_lemma3(&le, &gt, &b, 1.0, 2), Err(Error::InvalidInstance(_))));
    assert!(verify_lemma3(&DMatrix::zeros(n, n), &gt, &b, 1.0, 0).is_err());
    assert!(verify_lemma3(&DMatrix::zeros(n, n), &DMatrix::zeros(2, 2), &b, 1.0, 1).is_err());
}

#[test]
fn no_inner_sweeps_reproduce_source_iteration() {
    let sys = small_system(6, 2, 4, 1.0, 0.5, 1e-2).unwrap();
    let ord = upwind_ordering(sys.space.mesh(), &sys.dirs);
    let split = split_h(&sys, &ord).unwrap();
    let p = Preconditioner::new(&sys, PreconditionerKind::Ip).unwrap();
    let (_, a) = iterate_with_inners(&sys, &split, Some(&p), 0, false, 20, 1e-12).unwrap();
    let (_, b) = source_iteration(&sys, &ord, Some(&p), 20, 1e-12).unwrap();
    assert_eq!(a, b);
}

#[test]
fn inner_sweeps_count_every_sweep() {
    let mut cfg = ExperimentConfig::paper_1d();
    cfg.n_elements = 6;
    cfg.degree = 1;
    cfg.n_angles = 2;
    cfg.eps = 1e-2;
    let sys = cfg.build_system().unwrap();
    let ord = adversarial_ordering(sys.space.mesh(), &sys.dirs, 0.5, 1).unwrap();
    let split = split_h(&sys, &ord).unwrap();
    for update in [false, true] {
        let (_, h) = iterate_with_inners(&sys, &split, None, 2, update, 5, 0.0).unwrap();
        let sweeps: Vec<usize> = h.rows.iter().map(|r| r.cumulative_sweeps).collect();
        assert_eq!(sweeps, [3, 6, 9, 12, 15]);
        assert_eq!(h.final_sweeps, 3);
    }
    assert!(source_iteration(&sys, &ord, None, 5, 0.0).is_err());
}
