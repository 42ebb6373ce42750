use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slabdsa::dg::{
    assemble_face_adjoint, assemble_face_upwind, assemble_gradient, assemble_mass, assemble_moments,
    assemble_total_mass, Coefficient, DgSpace,
};
use slabdsa::dsa::build_cg_embedding;
use slabdsa::linalg::max_abs;
use slabdsa::mesh::uniform_mesh;
use slabdsa::quadrature::{face_alpha, gauss_legendre_set};

fn space(n: usize, r: usize) -> DgSpace<f64> {
    DgSpace::new(uniform_mesh(0.0, 1.0, n).unwrap(), r)
}

fn random(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn linear_mass_matrix() {
    let m = assemble_mass(&space(1, 1), &Coefficient::constant(1.0)).unwrap().to_dense();
    let expect = DMatrix::from_row_slice(2, 2, &[1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0]);
    assert!(max_abs(&(m - expect)) < 1e-15);
}

#[test]
fn mass_linearity_and_zero() {
    let s = space(3, 2);
    let one = assemble_mass(&s, &Coefficient::constant(1.0)).unwrap().to_dense();
    let five = assemble_mass(&s, &Coefficient::constant(5.0)).unwrap().to_dense();
    assert!(max_abs(&(five - one * 5.0)) < 1e-14);
    let zero = assemble_mass(&s, &Coefficient::constant(0.0)).unwrap();
    assert_eq!(zero.max_abs(), 0.0);
    assert!(assemble_total_mass(&s, &Coefficient::constant(0.0)).is_err());
    assert!(assemble_mass(&s, &Coefficient::constant(-1.0)).is_err());
}

#[test]
fn polynomial_coefficient_is_integrated_exactly() {
    // sigma = x on [0,1], r = 1: int x (1-x)^2 = 1/12, int x (1-x) x = 1/12, int x^3 = 1/4.
    let m = assemble_mass(&space(1, 1), &Coefficient::polynomial(vec![0.0, 1.0])).unwrap();
    assert_relative_eq!(m.get(0, 0), 1.0 / 12.0, epsilon = 1e-15);
    assert_relative_eq!(m.get(0, 1), 1.0 / 12.0, epsilon = 1e-15);
    assert_relative_eq!(m.get(1, 1), 1.0 / 4.0, epsilon = 1e-15);
}

#[test]
fn linear_gradient_matrix() {
    let g = assemble_gradient(&space(1, 1)).to_dense();
    let expect = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, -0.5, 0.5]);
    assert!(max_abs(&(g - expect)) < 1e-15);
}

#[test]
fn gradient_kills_constants_and_degree_zero() {
    let s = space(4, 3);
    let g = assemble_gradient(&s);
    assert!(g.mul_vec(&DVector::from_element(s.n_dofs(), 1.0)).amax() < 1e-14);
    assert_eq!(assemble_gradient(&space(4, 0)).max_abs(), 0.0);
}

#[test]
fn single_element_upwind_face() {
    // mu = 1: inflow through the left face, nothing enters from the right.
    let f = assemble_face_upwind(&space(1, 1), 1.0).unwrap().to_dense();
    let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    assert!(max_abs(&(f - expect)) < 1e-15);
    assert!(assemble_face_upwind(&space(1, 1), 0.0).is_err());
    assert!(assemble_face_adjoint(&space(1, 1), 0.0).is_err());
}

#[test]
fn face_nullspace_and_support() {
    let s = space(6, 2);
    let p = build_cg_embedding(&s).unwrap().p.to_dense();
    let ones = DVector::from_element(s.n_dofs(), 1.0);
    for mu in [-0.7, 0.3] {
        let f = assemble_face_upwind(&s, mu).unwrap().to_dense();
        let ft = assemble_face_adjoint(&s, mu).unwrap().to_dense();
        assert!(max_abs(&(&f * &p)) < 1e-14);
        assert!(max_abs(&(p.transpose() * &ft)) < 1e-14);
        let fu = &f * &ones;
        for (i, v) in fu.iter().enumerate() {
            if i != 0 && i != s.n_dofs() - 1 {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

#[test]
fn integration_by_parts() {
    let s = space(5, 3);
    let g = assemble_gradient(&s).to_dense();
    for mu in [-0.9, -0.2, 0.4, 1.0] {
        let f = assemble_face_upwind(&s, mu).unwrap().to_dense();
        let ft = assemble_face_adjoint(&s, mu).unwrap().to_dense();
        let lhs = &g * mu + f;
        let rhs = -g.transpose() * mu + ft;
        assert!(max_abs(&(&lhs - &rhs)) <= 1e-12 * max_abs(&lhs));
    }
}

#[test]
fn penalty_part_is_even_in_mu() {
    let s = space(4, 2);
    let a = assemble_face_upwind(&s, 0.6).unwrap().to_dense();
    let b = assemble_face_upwind(&s, -0.6).unwrap().to_dense();
    let even = &a + &b;
    assert!(max_abs(&(&even - even.transpose())) < 1e-14);
}

#[test]
fn f0_is_the_penalty_form() {
    let s = space(5, 2);
    let dirs = gauss_legendre_set::<f64>(4).unwrap();
    let mo = assemble_moments(&s, &dirs).unwrap();
    let f0 = mo.f0.to_dense();
    // The upwind penalty carries a half.
    let alpha = face_alpha(&dirs) / 2.0;
    let mut direct = DMatrix::zeros(s.n_dofs(), s.n_dofs());
    for face in s.faces() {
        for &(i, ji) in &face.jump {
            for &(j, jj) in &face.jump {
                direct[(i, j)] += alpha * ji * jj;
            }
        }
    }
    assert!(max_abs(&(&f0 - &direct)) < 1e-14);
    assert!(max_abs(&(&f0 - f0.transpose())) < 1e-15);
}

#[test]
fn f1_is_the_average_jump_form() {
    let s = space(4, 2);
    let dirs = gauss_legendre_set::<f64>(4).unwrap();
    let mo = assemble_moments(&s, &dirs).unwrap();
    let mut direct = DMatrix::zeros(s.n_dofs(), s.n_dofs());
    for face in s.faces() {
        for &(i, ai) in &face.average {
            for &(j, jj) in &face.jump {
                direct[(i, j)] -= face.normal * jj * ai / 3.0;
            }
        }
    }
    assert!(max_abs(&(mo.f1.to_dense() - direct)) < 1e-14);
}

#[test]
fn f0_nullspace_is_continuous_zero_boundary() {
    let s = space(6, 3);
    let dirs = gauss_legendre_set::<f64>(2).unwrap();
    let f0 = assemble_moments(&s, &dirs).unwrap().f0;
    let emb = build_cg_embedding(&s).unwrap();
    for seed in 0..5 {
        let c = random(emb.n_cg(), seed);
        let u = emb.embed(&c);
        assert!(u.dot(&f0.mul_vec(&u)).abs() < 1e-13);
        let v = random(s.n_dofs(), 100 + seed);
        assert!(v.dot(&f0.mul_vec(&v)) > 1e-6);
    }
}

#[test]
fn degree_zero_load_vector() {
    let s = DgSpace::new(uniform_mesh(0.0, 2.0, 4).unwrap(), 0);
    let b = s.load_vector(|_| 1.0, 0);
    for v in b.iter() {
        assert_relative_eq!(*v, 0.5, epsilon = 1e-15);
    }
}

#[test]
fn dof_layout_is_element_contiguous() {
    let s = space(3, 2);
    assert_eq!(s.n_dofs(), 9);
    assert_eq!(s.element_dofs(1), 3..6);
    assert_eq!(s.dof(2, 1), 7);
    assert_eq!(s.element_of(7), 2);
    let x = s.node_coordinates();
    assert_relative_eq!(x[2], x[3]);
}
