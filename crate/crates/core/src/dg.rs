//! Nodal DG space on Gauss-Lobatto points and assembly of the volume, face
//! and angular-moment matrices.
//!
//! Face terms use the outward normal on boundary faces (`n = -1` on the left,
//! `n = +1` on the right) with a zero exterior trace, so there
//! `[[u]] = u` and `{u} = u / 2`. On interior faces `n = +1`,
//! `[[u]] = u_left - u_right` and `{u}` is the arithmetic mean.

use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::mesh::Mesh;
use crate::quadrature::{gauss_legendre, gauss_lobatto, DirectionSet};
use crate::sparse::AssembledMatrix;
use crate::{lit, Error, Real, Result};

/// Spatial coefficient `sigma(x)` with the polynomial degree used to size
/// quadrature rules.
#[derive(Clone)]
pub struct Coefficient<T: Real> {
    f: Arc<dyn Fn(T) -> T + Send + Sync>,
    degree: usize,
    constant: Option<T>,
}

impl<T: Real> fmt::Debug for Coefficient<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "Coefficient::Constant({c})"),
            None => write!(f, "Coefficient::Function(degree = {})", self.degree),
        }
    }
}

impl<T: Real> Coefficient<T> {
    pub fn constant(c: T) -> Self {
        Self {
            f: Arc::new(move |_| c),
            degree: 0,
            constant: Some(c),
        }
    }

    /// Polynomial with coefficients in increasing powers of `x`.
    pub fn polynomial(coeffs: Vec<T>) -> Self {
        let degree = coeffs.len().saturating_sub(1);
        Self {
            f: Arc::new(move |x| coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)),
            degree,
            constant: None,
        }
    }

    /// Arbitrary function; `degree` is the polynomial degree the quadrature
    /// should treat it as.
    pub fn function(f: impl Fn(T) -> T + Send + Sync + 'static, degree: usize) -> Self {
        Self {
            f: Arc::new(f),
            degree,
            constant: None,
        }
    }

    pub fn eval(&self, x: T) -> T {
        (self.f)(x)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn as_constant(&self) -> Option<T> {
        self.constant
    }
}

/// Trace data of one face: normal and the dof weights producing the jump,
/// the average and the average of `n * du/dx`.
#[derive(Debug, Clone)]
pub struct FaceTrace<T: Real> {
    pub face: usize,
    pub x: T,
    pub normal: T,
    pub elements: Vec<usize>,
    pub jump: Vec<(usize, T)>,
    pub average: Vec<(usize, T)>,
    pub normal_derivative: Vec<(usize, T)>,
}

#[derive(Debug, Clone)]
pub struct DgSpace<T: Real> {
    mesh: Mesh<T>,
    degree: usize,
    ref_nodes: Vec<T>,
    trace_left: Vec<T>,
    trace_right: Vec<T>,
    dtrace_left: Vec<T>,
    dtrace_right: Vec<T>,
}

impl<T: Real> DgSpace<T> {
    pub fn new(mesh: Mesh<T>, degree: usize) -> Self {
        let ref_nodes = if degree == 0 {
            vec![T::zero()]
        } else {
            gauss_lobatto::<T>(degree + 1)
        };
        let mut s = Self {
            mesh,
            degree,
            ref_nodes,
            trace_left: Vec::new(),
            trace_right: Vec::new(),
            dtrace_left: Vec::new(),
            dtrace_right: Vec::new(),
        };
        s.trace_left = s.basis_values(-T::one());
        s.trace_right = s.basis_values(T::one());
        s.dtrace_left = s.basis_derivatives(-T::one());
        s.dtrace_right = s.basis_derivatives(T::one());
        s
    }

    pub fn mesh(&self) -> &Mesh<T> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_elements()
    }

    pub fn n_local(&self) -> usize {
        self.degree + 1
    }

    pub fn n_dofs(&self) -> usize {
        self.n_local() * self.n_elements()
    }

    pub fn dof(&self, e: usize, i: usize) -> usize {
        e * self.n_local() + i
    }

    pub fn element_of(&self, dof: usize) -> usize {
        dof / self.n_local()
    }

    pub fn element_dofs(&self, e: usize) -> std::ops::Range<usize> {
        e * self.n_local()..(e + 1) * self.n_local()
    }

    pub fn reference_nodes(&self) -> &[T] {
        &self.ref_nodes
    }

    pub fn to_physical(&self, e: usize, xi: T) -> T {
        let half = lit::<T>(0.5);
        let a = self.mesh.left(e);
        let b = self.mesh.right(e);
        half * (a + b) + half * (b - a) * xi
    }

    /// Physical coordinates of every dof.
    pub fn node_coordinates(&self) -> Vec<T> {
        (0..self.n_elements())
            .flat_map(|e| self.ref_nodes.iter().map(move |&xi| self.to_physical(e, xi)))
            .collect()
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(T) -> T) -> DVector<T> {
        DVector::from_iterator(self.n_dofs(), self.node_coordinates().into_iter().map(f))
    }

    /// Lagrange basis values at reference coordinate `xi`.
    pub fn basis_values(&self, xi: T) -> Vec<T> {
        let n = &self.ref_nodes;
        (0..n.len())
            .map(|i| {
                n.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != i)
                    .fold(T::one(), |p, (_, &xk)| p * (xi - xk) / (n[i] - xk))
            })
            .collect()
    }

    /// Reference-coordinate derivatives of the Lagrange basis at `xi`.
    pub fn basis_derivatives(&self, xi: T) -> Vec<T> {
        let n = &self.ref_nodes;
        (0..n.len())
            .map(|i| {
                let mut s = T::zero();
                for m in 0..n.len() {
                    if m == i {
                        continue;
                    }
                    let mut p = T::one() / (n[i] - n[m]);
                    for k in 0..n.len() {
                        if k != i && k != m {
                            p *= (xi - n[k]) / (n[i] - n[k]);
                        }
                    }
                    s += p;
                }
                s
            })
            .collect()
    }

    /// Trace data for every face in face order.
    pub fn faces(&self) -> Vec<FaceTrace<T>> {
        let ne = self.n_elements();
        let half = lit::<T>(0.5);
        let two = lit::<T>(2.0);
        let mut out = Vec::with_capacity(ne + 1);
        for f in 0..=ne {
            let mut jump = Vec::new();
            let mut average = Vec::new();
            let mut nd = Vec::new();
            let (normal, elements) = if f == 0 {
                let e = 0;
                let jac = two / self.mesh.h(e);
                for i in 0..self.n_local() {
                    let dof = self.dof(e, i);
                    jump.push((dof, self.trace_left[i]));
                    average.push((dof, half * self.trace_left[i]));
                    nd.push((dof, -half * jac * self.dtrace_left[i]));
                }
                (-T::one(), vec![e])
            } else if f == ne {
                let e = ne - 1;
                let jac = two / self.mesh.h(e);
                for i in 0..self.n_local() {
                    let dof = self.dof(e, i);
                    jump.push((dof, self.trace_right[i]));
                    average.push((dof, half * self.trace_right[i]));
                    nd.push((dof, half * jac * self.dtrace_right[i]));
                }
                (T::one(), vec![e])
            } else {
                let (l, r) = (f - 1, f);
                let jl = two / self.mesh.h(l);
                let jr = two / self.mesh.h(r);
                for i in 0..self.n_local() {
                    let dof = self.dof(l, i);
                    jump.push((dof, self.trace_right[i]));
                    average.push((dof, half * self.trace_right[i]));
                    nd.push((dof, half * jl * self.dtrace_right[i]));
                }
                for i in 0..self.n_local() {
                    let dof = self.dof(r, i);
                    jump.push((dof, -self.trace_left[i]));
                    average.push((dof, half * self.trace_left[i]));
                    nd.push((dof, half * jr * self.dtrace_left[i]));
                }
                (T::one(), vec![l, r])
            };
            let keep = |v: Vec<(usize, T)>| v.into_iter().filter(|(_, c)| *c != T::zero()).collect();
            out.push(FaceTrace {
                face: f,
                x: self.mesh.vertices()[f],
                normal,
                elements,
                jump: keep(jump),
                average: keep(average),
                normal_derivative: keep(nd),
            });
        }
        out
    }

    /// Gauss-Legendre points per element for integrands of the given degree.
    pub(crate) fn quadrature_points(degree: usize) -> usize {
        (degree + 2) / 2
    }

    /// `sum_e int_e f(x) v_m dx` for every basis function.
    pub fn load_vector(&self, f: impl Fn(T) -> T, f_degree: usize) -> DVector<T> {
        let nq = Self::quadrature_points(self.degree + f_degree);
        let (xq, wq) = gauss_legendre::<T>(nq);
        let vals: Vec<Vec<T>> = xq.iter().map(|&x| self.basis_values(x)).collect();
        let mut out = DVector::zeros(self.n_dofs());
        let half = lit::<T>(0.5);
        for e in 0..self.n_elements() {
            let jac = half * self.mesh.h(e);
            for q in 0..nq {
                let fx = f(self.to_physical(e, xq[q])) * wq[q] * jac;
                for i in 0..self.n_local() {
                    out[self.dof(e, i)] += fx * vals[q][i];
                }
            }
        }
        out
    }
}

/// `sum_e int_e sigma u v dx`. Negative samples of `sigma` are rejected.
pub fn assemble_mass<T: Real>(space: &DgSpace<T>, coeff: &Coefficient<T>) -> Result<AssembledMatrix<T>> {
    let nl = space.n_local();
    let nq = DgSpace::<T>::quadrature_points(2 * space.degree() + coeff.degree());
    let (xq, wq) = gauss_legendre::<T>(nq);
    let vals: Vec<Vec<T>> = xq.iter().map(|&x| space.basis_values(x)).collect();
    let half = lit::<T>(0.5);
    let mut trips = Vec::with_capacity(space.n_elements() * nl * nl);
    for e in 0..space.n_elements() {
        let jac = half * space.mesh().h(e);
        let mut local = vec![T::zero(); nl * nl];
        for q in 0..nq {
            let x = space.to_physical(e, xq[q]);
            let s = coeff.eval(x);
            if !(s >= T::zero()) {
                return Err(Error::InvalidCoefficient(format!(
                    "coefficient sample {s} at x = {x} is negative or not finite"
                )));
            }
            let c = s * wq[q] * jac;
            for i in 0..nl {
                for j in 0..nl {
                    local[i * nl + j] += c * vals[q][i] * vals[q][j];
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                trips.push((space.dof(e, i), space.dof(e, j), local[i * nl + j]));
            }
        }
    }
    let n = space.n_dofs();
    Ok(AssembledMatrix::from_triplets(n, n, &trips, true))
}

/// Like [`assemble_mass`] but every sample must be strictly positive.
pub fn assemble_total_mass<T: Real>(space: &DgSpace<T>, coeff: &Coefficient<T>) -> Result<AssembledMatrix<T>> {
    check_positive(space, coeff)?;
    assemble_mass(space, coeff)
}

pub(crate) fn check_positive<T: Real>(space: &DgSpace<T>, coeff: &Coefficient<T>) -> Result<()> {
    let nq = DgSpace::<T>::quadrature_points(2 * space.degree() + coeff.degree());
    let (xq, _) = gauss_legendre::<T>(nq);
    let mut pts: Vec<T> = space.mesh().vertices().to_vec();
    for e in 0..space.n_elements() {
        pts.extend(xq.iter().map(|&xi| space.to_physical(e, xi)));
    }
    for x in pts {
        let s = coeff.eval(x);
        if !(s > T::zero()) || !s.is_finite() {
            return Err(Error::InvalidCoefficient(format!(
                "total cross section must be positive, got {s} at x = {x}"
            )));
        }
    }
    Ok(())
}

/// `G_mn = int phi_n' phi_m` per element.
pub fn assemble_gradient<T: Real>(space: &DgSpace<T>) -> AssembledMatrix<T> {
    let nl = space.n_local();
    let (xq, wq) = gauss_legendre::<T>(nl);
    let vals: Vec<Vec<T>> = xq.iter().map(|&x| space.basis_values(x)).collect();
    let ders: Vec<Vec<T>> = xq.iter().map(|&x| space.basis_derivatives(x)).collect();
    let mut local = vec![T::zero(); nl * nl];
    for q in 0..nl {
        for m in 0..nl {
            for n in 0..nl {
                local[m * nl + n] += wq[q] * ders[q][n] * vals[q][m];
            }
        }
    }
    let mut trips = Vec::with_capacity(space.n_elements() * nl * nl);
    for e in 0..space.n_elements() {
        for m in 0..nl {
            for n in 0..nl {
                trips.push((space.dof(e, m), space.dof(e, n), local[m * nl + n]));
            }
        }
    }
    let n = space.n_dofs();
    AssembledMatrix::from_triplets(n, n, &trips, false)
}

fn check_direction<T: Real>(mu: T) -> Result<()> {
    if mu == T::zero() || !mu.is_finite() {
        return Err(Error::arg("direction cosine must be nonzero"));
    }
    Ok(())
}

/// Upwind face matrix: `-mu n [[u]]{v} + |mu|/2 [[u]][[v]]` over all faces.
pub fn assemble_face_upwind<T: Real>(space: &DgSpace<T>, mu: T) -> Result<AssembledMatrix<T>> {
    check_direction(mu)?;
    let half = lit::<T>(0.5);
    let mut trips = Vec::new();
    for face in space.faces() {
        let c = -mu * face.normal;
        for &(i, bi) in &face.average {
            for &(j, aj) in &face.jump {
                trips.push((i, j, c * bi * aj));
            }
        }
        for &(i, ai) in &face.jump {
            for &(j, aj) in &face.jump {
                trips.push((i, j, half * mu.abs() * ai * aj));
            }
        }
    }
    let n = space.n_dofs();
    Ok(AssembledMatrix::from_triplets(n, n, &trips, false))
}

/// Adjoint face matrix: `mu n {u}[[v]] + |mu|/2 [[u]][[v]]` over all faces.
pub fn assemble_face_adjoint<T: Real>(space: &DgSpace<T>, mu: T) -> Result<AssembledMatrix<T>> {
    check_direction(mu)?;
    let half = lit::<T>(0.5);
    let mut trips = Vec::new();
    for face in space.faces() {
        let c = mu * face.normal;
        for &(i, ai) in &face.jump {
            for &(j, bj) in &face.average {
                trips.push((i, j, c * ai * bj));
            }
        }
        for &(i, ai) in &face.jump {
            for &(j, aj) in &face.jump {
                trips.push((i, j, half * mu.abs() * ai * aj));
            }
        }
    }
    let n = space.n_dofs();
    Ok(AssembledMatrix::from_triplets(n, n, &trips, false))
}

/// Angular moments of the face matrices.
#[derive(Debug, Clone)]
pub struct Moments<T: Real> {
    pub f0: AssembledMatrix<T>,
    pub f1: AssembledMatrix<T>,
    pub f1_adjoint: AssembledMatrix<T>,
}

/// `F0 = (1/S) sum w F_d`, `F1 = (1/S) sum w mu F_d`, adjoint likewise.
pub fn assemble_moments<T: Real>(space: &DgSpace<T>, dirs: &DirectionSet<T>) -> Result<Moments<T>> {
    let n = space.n_dofs();
    let mut f0 = AssembledMatrix::zeros(n, n);
    let mut f1 = AssembledMatrix::zeros(n, n);
    let mut f1a = AssembledMatrix::zeros(n, n);
    let s = dirs.normalization();
    for d in 0..dirs.len() {
        let (mu, w) = (dirs.mu(d), dirs.weight(d));
        let f = assemble_face_upwind(space, mu)?;
        let fa = assemble_face_adjoint(space, mu)?;
        f0 = f0.add(&f.scale(w / s));
        f1 = f1.add(&f.scale(w * mu / s));
        f1a = f1a.add(&fa.scale(w * mu / s));
    }
    Ok(Moments {
        f0: f0.with_symmetric(true),
        f1: f1.with_symmetric(false),
        f1_adjoint: f1a.with_symmetric(false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::uniform_mesh;

    fn space(n: usize, r: usize) -> DgSpace<f64> {
        DgSpace::new(uniform_mesh(0.0, 1.0, n).unwrap(), r)
    }

    #[test]
    fn linear_mass_on_unit_element() {
        let m = assemble_mass(&space(1, 1), &Coefficient::constant(1.0)).unwrap();
        let d = m.to_dense();
        let expect = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((d[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        let z = assemble_mass(&space(3, 2), &Coefficient::constant(0.0)).unwrap();
        assert_eq!(z.nnz(), 0);
        assert!(assemble_total_mass(&space(2, 1), &Coefficient::constant(0.0)).is_err());
        assert!(assemble_mass(&space(2, 1), &Coefficient::constant(-1.0)).is_err());
    }

    #[test]
    fn linear_gradient_on_unit_element() {
        let g = assemble_gradient(&space(1, 1)).to_dense();
        let expect = [[-0.5, 0.5], [-0.5, 0.5]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((g[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        assert_eq!(assemble_gradient(&space(4, 0)).nnz(), 0);
    }

    #[test]
    fn single_element_upwind_faces() {
        // Inflow face carries |mu| u v, outflow face nothing.
        let f = assemble_face_upwind(&space(1, 1), 1.0).unwrap().to_dense();
        assert!((f[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(f[(1, 1)], 0.0);
        assert_eq!(f[(0, 1)], 0.0);
        assert!(assemble_face_upwind(&space(1, 1), 0.0).is_err());
        assert!(assemble_face_adjoint(&space(1, 1), 0.0).is_err());
    }

    #[test]
    fn mass_quadrature_follows_coefficient_degree() {
        let s = space(1, 1);
        let m = assemble_mass(&s, &Coefficient::polynomial(vec![0.0, 0.0, 3.0])).unwrap();
        // int_0^1 3 x^2 (1-x)^2 dx = 1/10
        assert!((m.get(0, 0) - 0.1).abs() < 1e-15);
    }
}
