use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabdsa::dsa::{
    apply_additive_e_eps, apply_preconditioned_step, assemble_d0, assemble_d1, assemble_d_eps, assemble_ip, assemble_mip,
    assemble_sip_direct, build_cg_embedding, default_mip_cp, mip_penalty_coefficient, AdditiveSolver, DsaOperators,
    Preconditioner, PreconditionerKind,
};
use slabdsa::dg::DgSpace;
use slabdsa::harness::ExperimentConfig;
use slabdsa::linalg::{cond2, max_abs, norm2, DenseLu};
use slabdsa::mesh::uniform_mesh;
use slabdsa::oracles::{small_system, AdditivePieces, DenseTransport};
use slabdsa::Error;

fn random(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn d0_on_a_hat_function() {
    // sigma_t = 2, sigma_a = 0, hat at the middle vertex of [0,1] with h = 1/4.
    let sys = small_system(4, 1, 2, 2.0, 0.0, 0.1).unwrap();
    let emb = build_cg_embedding(&sys.space).unwrap();
    let u = sys.space.interpolate(|x| (1.0 - (x - 0.5).abs() / 0.25).max(0.0));
    assert!((emb.complement(&u)).amax() < 1e-14);
    let d0 = assemble_d0(&sys);
    let val = u.dot(&d0.mul_vec(&u));
    let exact = (2.0 / 0.25) / (3.0 * 2.0);
    assert!((val - exact).abs() < 1e-13, "{val} vs {exact}");
}

#[test]
fn d0_of_constant_is_boundary_and_absorption_only() {
    let sys = small_system(6, 2, 2, 1.0, 0.3, 0.1).unwrap();
    let ones = DVector::from_element(sys.n_dofs(), 1.0);
    let r = assemble_d0(&sys).mul_vec(&ones) - sys.m_a.mul_vec(&ones);
    let nl = sys.space.n_local();
    for i in nl..sys.n_dofs() - nl {
        assert!(r[i].abs() < 1e-13);
    }
    assert!(r[0].abs() > 1e-3);
}

#[test]
fn d1_annihilates_the_continuous_subspace() {
    for r in 1..=3 {
        let sys = small_system(5, r, 4, 1.5, 0.2, 0.1).unwrap();
        let d1 = assemble_d1(&sys).to_dense();
        let p = build_cg_embedding(&sys.space).unwrap().p.to_dense();
        let scale = max_abs(&d1);
        assert!(scale > 0.0);
        assert!(max_abs(&(p.transpose() * &d1)) <= 1e-12 * scale);
        assert!(max_abs(&(&d1 * &p)) <= 1e-12 * scale);
    }
}

#[test]
fn sip_direct_matches_d_eps() {
    for r in 1..=3 {
        for eps in [1e-1, 1e-3] {
            let sys = small_system(6, r, 4, 2.0, 0.5, eps).unwrap();
            let a = assemble_d_eps(&sys).to_dense();
            let b = assemble_sip_direct(&sys).to_dense();
            assert!(max_abs(&(&a - &b)) <= 1e-11 * max_abs(&b));
            assert!(max_abs(&(&b - b.transpose())) <= 1e-12 * max_abs(&b));
        }
    }
}

#[test]
fn ip_drops_one_coupling_term() {
    let sys = small_system(4, 2, 2, 1.0, 0.5, 0.1).unwrap();
    let ip = assemble_ip(&sys).to_dense();
    let de = assemble_d_eps(&sys).to_dense();
    let c = sys.g.transpose().matmul(&sys.m_t_inv).matmul(&sys.moments.f1).to_dense();
    assert!(max_abs(&(&ip - &de + &c)) < 1e-12 * max_abs(&de));
}

#[test]
fn ip_is_nonsymmetric_but_diffusive_on_continuous_functions() {
    let sys = small_system(2, 1, 2, 1.0, 0.5, 0.1).unwrap();
    let ip = assemble_ip(&sys).to_dense();
    assert!(max_abs(&(&ip - ip.transpose())) > 1e-3);
    let p = build_cg_embedding(&sys.space).unwrap().p.to_dense();
    let g = sys.g.to_dense();
    let diff = g.transpose() * sys.m_t_inv.to_dense() * &g / 3.0 + sys.m_a.to_dense();
    let lhs = p.transpose() * &ip * &p;
    let rhs = p.transpose() * diff * &p;
    assert!(max_abs(&(lhs - rhs)) < 1e-13);
}

#[test]
fn mip_penalty() {
    assert_eq!(mip_penalty_coefficient(1e-4, 1.0, 1.0, 4.0), 2500.0);
    assert!((mip_penalty_coefficient(1.0f64, 1.0, 0.01, 4.0) - 400.0).abs() < 1e-9);
    assert_eq!(mip_penalty_coefficient(0.25, 1.0, 4.0, 4.0), 1.0);
    assert_eq!(default_mip_cp(2), 6.0);
    let sys = small_system(4, 2, 2, 1.0, 0.5, 1e-3).unwrap();
    let m = assemble_mip(&sys, 6.0).to_dense();
    assert!(max_abs(&(&m - m.transpose())) <= 1e-12 * max_abs(&m));
}

#[test]
fn cg_embedding_properties() {
    let space = DgSpace::new(uniform_mesh(0.0, 1.0, 5).unwrap(), 3);
    let emb = build_cg_embedding(&space).unwrap();
    assert_eq!(emb.n_cg(), 5 * 3 - 1);
    let c = random(emb.n_cg(), 1);
    let u = emb.embed(&c);
    assert!((emb.project(&u) - &c).amax() < 1e-14);
    assert!((emb.embed(&emb.project(&u)) - &u).amax() < 1e-14);
    assert!(emb.complement(&u).amax() < 1e-14);
    assert_eq!(u[0], 0.0);
    assert_eq!(u[space.n_dofs() - 1], 0.0);
    let zero = DgSpace::new(uniform_mesh(0.0, 1.0, 5).unwrap(), 0);
    assert!(matches!(build_cg_embedding(&zero), Err(Error::UnsupportedDegree(0))));
}

#[test]
fn additive_matches_dense_formula() {
    let sys = small_system(6, 2, 2, 1.0, 1.0, 1e-2).unwrap();
    let d0 = assemble_d0(&sys);
    let emb = build_cg_embedding(&sys.space).unwrap();
    let solver = AdditiveSolver::new(&sys, &d0, emb).unwrap();
    let dense = DenseTransport::new(&sys);
    let pieces = AdditivePieces::new(&sys.space, &dense).unwrap();
    let e = pieces.e_eps(&dense.d0, 1e-2);
    assert!(max_abs(&(solver.to_dense() - &e)) <= 1e-10 * max_abs(&e));
    let y = random(sys.n_dofs(), 4);
    assert!((apply_additive_e_eps(&solver, &y) - &e * &y).amax() <= 1e-10 * (&e * &y).amax());
}

#[test]
fn additive_subsolves_are_eps_independent() {
    let conds: Vec<(f64, f64)> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let sys = small_system(8, 1, 2, 1.0, 1.0, eps).unwrap();
            let d0 = assemble_d0(&sys);
            let a = AdditiveSolver::new(&sys, &d0, build_cg_embedding(&sys.space).unwrap()).unwrap();
            (cond2(a.cg_matrix()), cond2(a.jump_matrix()))
        })
        .collect();
    for c in &conds {
        assert!((c.0 / conds[0].0 - 1.0).abs() < 1e-10);
        assert!((c.1 / conds[0].1 - 1.0).abs() < 1e-10);
    }
}

#[test]
fn additive_approximates_the_dsa_inverse() {
    // E_eps - (F0 + eps D0)^{-1} = O(eps).
    let err = |eps: f64| {
        let sys = small_system(6, 1, 2, 1.0, 1.0, eps).unwrap();
        let dense = DenseTransport::new(&sys);
        let pieces = AdditivePieces::new(&sys.space, &dense).unwrap();
        let inv = DenseLu::new(&dense.f0 + &dense.d0 * eps, "F0 + eps D0").unwrap().inverse();
        norm2(&(pieces.e_eps(&dense.d0, eps) - inv))
    };
    let ratio = err(1e-2) / err(1e-3);
    assert!((3.0..30.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn corrections_vanish_on_zero_input() {
    let sys = small_system(4, 2, 2, 1.0, 0.5, 1e-2).unwrap();
    let zero = DVector::zeros(sys.n_dofs());
    for kind in PreconditionerKind::ALL {
        let p = Preconditioner::new(&sys, kind).unwrap();
        assert_eq!(p.kind(), kind);
        assert_eq!(p.correction(&sys, &zero).unwrap().amax(), 0.0);
        let phi = random(sys.n_dofs(), 2);
        assert_eq!(apply_preconditioned_step(&sys, &p, &phi, &phi).unwrap(), phi);
    }
    assert!(Preconditioner::new(&sys, PreconditionerKind::Additive).unwrap().additive().is_some());
}

#[test]
fn operators_are_named_for_dumping() {
    let sys = small_system(3, 1, 2, 1.0, 0.5, 0.1).unwrap();
    let ops = DsaOperators::assemble(&sys);
    let names: Vec<&str> = ops.named().iter().map(|(n, _)| *n).collect();
    assert_eq!(names, ["D0", "D1", "D_eps", "D_IP", "B_SIP"]);
}

#[test]
fn thick_regime_contraction() {
    for eps in [1e-4, 1e-3] {
        let mut cfg = ExperimentConfig::paper_1d();
        cfg.eps = eps;
        let (_, _, h) = slabdsa::harness::solve(&cfg).unwrap();
        let e: Vec<f64> = h.rows.iter().map(|r| r.error_inf).collect();
        assert!(e[1] <= 0.1 * e[0], "eps {eps}: {e:?}");
    }
}

#[test]
fn sip_and_additive_dense_operators_agree_with_solvers() {
    let sys = small_system(5, 1, 2, 1.0, 1.0, 1e-2).unwrap();
    let dense = DenseTransport::new(&sys);
    let sip = Preconditioner::new(&sys, PreconditionerKind::Sip).unwrap();
    let r = random(sys.n_dofs(), 8);
    let want = dense.sip_correction(1e-2).unwrap() * &r;
    let got = sip.correction(&sys, &r).unwrap();
    assert!((got - &want).amax() <= 1e-10 * want.amax());
    let _: DMatrix<f64> = dense.d_eps(1e-2);
}
