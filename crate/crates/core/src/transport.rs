//! The discrete S_N system, transport sweeps, source iteration and the
//! residual of the discrete equations.
//!
//! Per direction the system reads
//! `(mu G + F_d + M_t / eps) psi_d = (1/S)(M_t / eps - eps M_a) phi + (1/S)(q_inc_d + eps q_d)`
//! with `phi = sum_d w_d psi_d` and `S` the quadrature normalization.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::dg::{
    assemble_face_adjoint, assemble_face_upwind, assemble_gradient, assemble_mass, assemble_moments,
    check_positive, Coefficient, DgSpace, Moments,
};
use crate::dsa::Preconditioner;
use crate::linalg::{block_diagonal_inverse, inf_norm};
use crate::mesh::SweepOrdering;
use crate::quadrature::DirectionSet;
use crate::sparse::AssembledMatrix;
use crate::{lit, Error, Real, Result};

/// Angular-dependent field `f(x, mu)` with the polynomial degree in `x` used
/// to size volume quadrature.
#[derive(Clone)]
pub struct AngularSource<T: Real> {
    f: Arc<dyn Fn(T, T) -> T + Send + Sync>,
    degree: usize,
    zero: bool,
}

impl<T: Real> fmt::Debug for AngularSource<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AngularSource(degree = {}, zero = {})", self.degree, self.zero)
    }
}

impl<T: Real> AngularSource<T> {
    pub fn zero() -> Self {
        Self {
            f: Arc::new(|_, _| T::zero()),
            degree: 0,
            zero: true,
        }
    }

    pub fn constant(c: T) -> Self {
        Self {
            f: Arc::new(move |_, _| c),
            degree: 0,
            zero: c == T::zero(),
        }
    }

    pub fn function(f: impl Fn(T, T) -> T + Send + Sync + 'static, degree: usize) -> Self {
        Self {
            f: Arc::new(f),
            degree,
            zero: false,
        }
    }

    pub fn eval(&self, x: T, mu: T) -> T {
        (self.f)(x, mu)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

/// Per-direction coefficient vectors, blocked by direction.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFlux<T: Real> {
    blocks: Vec<DVector<T>>,
}

impl<T: Real> AngularFlux<T> {
    pub fn new(blocks: Vec<DVector<T>>) -> Result<Self> {
        if let Some(first) = blocks.first() {
            if blocks.iter().any(|b| b.len() != first.len()) {
                return Err(Error::arg("angular flux blocks must share a length"));
            }
        }
        Ok(Self { blocks })
    }

    pub fn zeros(n_angles: usize, n_dofs: usize) -> Self {
        Self {
            blocks: vec![DVector::zeros(n_dofs); n_angles],
        }
    }

    pub fn n_angles(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, d: usize) -> &DVector<T> {
        &self.blocks[d]
    }

    pub fn blocks(&self) -> &[DVector<T>] {
        &self.blocks
    }

    /// `phi = sum_d w_d psi_d`.
    pub fn scalar_flux(&self, dirs: &DirectionSet<T>) -> DVector<T> {
        let mut phi = DVector::zeros(self.blocks[0].len());
        for (d, b) in self.blocks.iter().enumerate() {
            phi.axpy(dirs.weight(d), b, T::one());
        }
        phi
    }

    /// Concatenated vector `(psi_1; ...; psi_N)`.
    pub fn to_vector(&self) -> DVector<T> {
        let n = self.blocks.first().map_or(0, |b| b.len());
        DVector::from_iterator(
            n * self.blocks.len(),
            self.blocks.iter().flat_map(|b| b.iter().copied()),
        )
    }

    pub fn from_vector(v: &DVector<T>, n_angles: usize) -> Result<Self> {
        if n_angles == 0 || !v.len().is_multiple_of(n_angles) {
            return Err(Error::arg("vector length is not a multiple of n_angles"));
        }
        let n = v.len() / n_angles;
        Ok(Self {
            blocks: (0..n_angles).map(|d| v.rows(d * n, n).into_owned()).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .fold(T::zero(), |m, (a, b)| m.max(inf_norm(&(a - b))))
    }
}

/// One recorded outer iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryRow<T: Real> {
    pub iter: usize,
    pub error_inf: T,
    pub residual_inf: T,
    pub cumulative_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationHistory<T: Real> {
    pub rows: Vec<HistoryRow<T>>,
    pub converged: bool,
    pub diverged: bool,
    /// Sweeps spent reconstructing the returned angular flux.
    pub final_sweeps: usize,
}

impl<T: Real> IterationHistory<T> {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn final_error(&self) -> Option<T> {
        self.rows.last().map(|r| r.error_inf)
    }

    pub fn final_residual(&self) -> Option<T> {
        self.rows.last().map(|r| r.residual_inf)
    }

    pub fn total_sweeps(&self) -> usize {
        self.rows.last().map_or(0, |r| r.cumulative_sweeps)
    }

    /// First iteration whose error estimate is at or below `tol`.
    pub fn iterations_to(&self, tol: T) -> Option<usize> {
        self.rows.iter().find(|r| r.error_inf <= tol).map(|r| r.iter)
    }

    /// Every `group`-th row, renumbered, so runs doing different numbers of
    /// sweeps per iteration can be compared per group of sweeps.
    pub fn grouped(&self, group: usize) -> Self {
        let group = group.max(1);
        let rows = self
            .rows
            .iter()
            .filter(|r| r.iter % group == 0)
            .map(|r| HistoryRow {
                iter: r.iter / group,
                ..*r
            })
            .collect();
        Self {
            rows,
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iter,error_inf,residual_inf,cumulative_sweeps")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{}",
                r.iter, r.error_inf, r.residual_inf, r.cumulative_sweeps
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// Assembled discrete S_N system with per-element sweep factorizations.
#[derive(Debug, Clone)]
pub struct TransportSystem<T: Real> {
    pub space: DgSpace<T>,
    pub dirs: DirectionSet<T>,
    pub eps: T,
    pub sigma_t: Coefficient<T>,
    pub sigma_a: Coefficient<T>,
    pub m_t: AssembledMatrix<T>,
    pub m_a: AssembledMatrix<T>,
    pub m_t_inv: AssembledMatrix<T>,
    pub g: AssembledMatrix<T>,
    pub f: Vec<AssembledMatrix<T>>,
    pub f_adjoint: Vec<AssembledMatrix<T>>,
    /// `mu_d G + F_d`.
    pub k: Vec<AssembledMatrix<T>>,
    pub moments: Moments<T>,
    pub q: Vec<DVector<T>>,
    pub q_inc: Vec<DVector<T>>,
    blocks: Vec<Vec<LU<T, Dyn, Dyn>>>,
}

/// Assembles every matrix and source vector of the discrete system.
pub fn build_system<T: Real>(
    space: DgSpace<T>,
    dirs: DirectionSet<T>,
    eps: T,
    sigma_t: Coefficient<T>,
    sigma_a: Coefficient<T>,
    q: &AngularSource<T>,
    psi_inc: &AngularSource<T>,
) -> Result<TransportSystem<T>> {
    if !(eps > T::zero()) || !eps.is_finite() {
        return Err(Error::arg(format!("eps must be positive, got {eps}")));
    }
    check_positive(&space, &sigma_t)?;
    let m_t = assemble_mass(&space, &sigma_t)?;
    let m_a = assemble_mass(&space, &sigma_a)?;
    let m_t_inv = block_diagonal_inverse(&m_t, space.n_local(), "M_t element block")?;
    let g = assemble_gradient(&space);
    let mut f = Vec::with_capacity(dirs.len());
    let mut fa = Vec::with_capacity(dirs.len());
    let mut k = Vec::with_capacity(dirs.len());
    for &mu in dirs.directions() {
        let fd = assemble_face_upwind(&space, mu)?;
        k.push(g.scale(mu).add(&fd));
        fa.push(assemble_face_adjoint(&space, mu)?);
        f.push(fd);
    }
    let moments = assemble_moments(&space, &dirs)?;
    let n = space.n_dofs();
    let half = lit::<T>(0.5);
    let mut qv = Vec::with_capacity(dirs.len());
    let mut qinc = Vec::with_capacity(dirs.len());
    let faces = space.faces();
    for &mu in dirs.directions() {
        qv.push(if q.zero {
            DVector::zeros(n)
        } else {
            space.load_vector(|x| q.eval(x, mu), q.degree)
        });
        let mut b = DVector::zeros(n);
        if !psi_inc.zero {
            for face in faces.iter().filter(|fc| space.mesh().is_boundary_face(fc.face)) {
                let wgt = half * (-mu * face.normal + (mu * face.normal).abs());
                if wgt == T::zero() {
                    continue;
                }
                let val = psi_inc.eval(face.x, mu);
                for &(i, a) in &face.jump {
                    b[i] += wgt * a * val;
                }
            }
        }
        qinc.push(b);
    }
    let mut sys = TransportSystem {
        space,
        dirs,
        eps,
        sigma_t,
        sigma_a,
        m_t,
        m_a,
        m_t_inv,
        g,
        f,
        f_adjoint: fa,
        k,
        moments,
        q: qv,
        q_inc: qinc,
        blocks: Vec::new(),
    };
    sys.factor_blocks()?;
    Ok(sys)
}

impl<T: Real> TransportSystem<T> {
    fn factor_blocks(&mut self) -> Result<()> {
        let nl = self.space.n_local();
        let mut all = Vec::with_capacity(self.dirs.len());
        for d in 0..self.dirs.len() {
            let mut per = Vec::with_capacity(self.space.n_elements());
            for e in 0..self.space.n_elements() {
                let r0 = e * nl;
                let blk = DMatrix::from_fn(nl, nl, |i, j| {
                    self.m_t.get(r0 + i, r0 + j) + self.eps * self.k[d].get(r0 + i, r0 + j)
                });
                let lu = blk.lu();
                if !lu.is_invertible() {
                    return Err(Error::NumericalBreakdown(format!(
                        "singular sweep block for direction {d}, element {e}"
                    )));
                }
                per.push(lu);
            }
            all.push(per);
        }
        self.blocks = all;
        Ok(())
    }

    pub fn n_dofs(&self) -> usize {
        self.space.n_dofs()
    }

    pub fn n_angles(&self) -> usize {
        self.dirs.len()
    }

    /// Whether every volume and boundary source vanishes.
    pub fn is_homogeneous(&self) -> bool {
        self.q.iter().chain(&self.q_inc).all(|v| v.iter().all(|x| *x == T::zero()))
    }

    /// `(1/S)(q_inc_d + eps q_d)`.
    pub fn source(&self, d: usize) -> DVector<T> {
        (&self.q_inc[d] + &self.q[d] * self.eps) / self.dirs.normalization()
    }

    /// `H_d = M_t^{-1}(mu_d G + F_d)`.
    pub fn build_h(&self, d: usize) -> AssembledMatrix<T> {
        self.m_t_inv.matmul(&self.k[d])
    }

    /// Solves `(M_t + eps K_d restricted to unlagged couplings) x = b - eps F_lagged x_lag`
    /// by block forward substitution in the ordering for direction `d`.
    pub(crate) fn solve_lower(
        &self,
        d: usize,
        ordering: &SweepOrdering,
        b: &DVector<T>,
        lagged: Option<&DVector<T>>,
    ) -> DVector<T> {
        let nl = self.space.n_local();
        let mut x = DVector::zeros(self.n_dofs());
        let mut rhs = DVector::zeros(nl);
        for &e in ordering.order(d) {
            let r0 = e * nl;
            for i in 0..nl {
                let mut s = b[r0 + i];
                for (j, v) in self.f[d].row(r0 + i) {
                    let ej = j / nl;
                    if ej == e {
                        continue;
                    }
                    let face = e.max(ej);
                    let xj = if ordering.is_lagged(d, face) {
                        match lagged {
                            Some(l) => l[j],
                            None => continue,
                        }
                    } else {
                        x[j]
                    };
                    s -= self.eps * v * xj;
                }
                rhs[i] = s;
            }
            let sol = self.blocks[d][e]
                .solve(&rhs)
                .expect("sweep block was checked to be invertible");
            x.rows_mut(r0, nl).copy_from(&sol);
        }
        x
    }

    /// Solves `(I + eps H_d) x = rhs` with an exact ordering.
    pub fn sweep(&self, d: usize, ordering: &SweepOrdering, rhs: &DVector<T>) -> Result<DVector<T>> {
        if ordering.n_lagged(d) > 0 {
            return Err(Error::arg(
                "sweep needs an ordering without lagged couplings; use lagged sweeps instead",
            ));
        }
        let b = self.m_t.mul_vec(rhs);
        let x = self.solve_lower(d, ordering, &b, None);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown(format!("non-finite sweep result in direction {d}")));
        }
        Ok(x)
    }

    /// `S_eps phi = sum_d (w_d/S)(I + eps H_d)^{-1}(I - eps^2 M_t^{-1} M_a) phi`.
    pub fn apply_s_eps(&self, ordering: &SweepOrdering, phi: &DVector<T>) -> Result<DVector<T>> {
        if !ordering.is_exact() {
            return Err(Error::arg("apply_s_eps needs exact sweeps"));
        }
        let b = self.m_t.mul_vec(phi) - self.m_a.mul_vec(phi) * (self.eps * self.eps);
        let mut out = DVector::zeros(self.n_dofs());
        for d in 0..self.n_angles() {
            let x = self.solve_lower(d, ordering, &b, None);
            out.axpy(self.dirs.weight(d) / self.dirs.normalization(), &x, T::one());
        }
        Ok(out)
    }

    /// Right-hand side of the defect sweep: for `psi_d = phi/S + chi_d`,
    /// `L_d chi_d = (eps/S)(q_inc + eps q) - (eps/S) K_d phi - (eps^2/S) M_a phi`.
    pub(crate) fn defect_rhs(&self, d: usize, phi: &DVector<T>, m_a_phi: &DVector<T>) -> DVector<T> {
        let s = self.dirs.normalization();
        let e = self.eps;
        (&self.q_inc[d] + &self.q[d] * e - self.k[d].mul_vec(phi) - m_a_phi * e) * (e / s)
    }

    /// Maximum over directions of the infinity-norm residual of the discrete equations.
    pub fn compute_residual(&self, psi: &AngularFlux<T>) -> T {
        let s = self.dirs.normalization();
        let phi = psi.scalar_flux(&self.dirs);
        let iso = &phi / s;
        let ma_phi = self.m_a.mul_vec(&phi) * (self.eps / s);
        let mut worst = T::zero();
        for d in 0..self.n_angles() {
            let p = psi.block(d);
            let r = self.k[d].mul_vec(p) + self.m_t.mul_vec(&(p - &iso)) / self.eps + &ma_phi
                - self.source(d);
            worst = worst.max(inf_norm(&r));
        }
        worst
    }
}

/// Divergence rule: the error estimate is non-finite, or it grew by more than
/// a factor ten while increasing at each of the last five iterations.
pub fn is_divergent<T: Real>(errors: &[T]) -> bool {
    match errors.last() {
        None => false,
        Some(last) if !last.is_finite() => true,
        Some(&last) => {
            let n = errors.len();
            n > 5
                && errors[n - 6..].windows(2).all(|w| w[1] > w[0])
                && last > lit::<T>(10.0) * errors[n - 6]
        }
    }
}

/// Inner-sweep policy of one outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InnerSweeps {
    /// Additional sweeps after the first one.
    pub n_inner: usize,
    /// Update the scalar flux after each sweep instead of freezing it.
    pub update_flux_each_sweep: bool,
}

pub(crate) struct SweepOutcome<T: Real> {
    pub psi: Vec<DVector<T>>,
    pub phi_base: DVector<T>,
    pub update: DVector<T>,
}

impl<T: Real> TransportSystem<T> {
    /// `Q0 psi`, the part of each block orthogonal to the angular average.
    fn anisotropic_part(&self, psi: &[DVector<T>]) -> Vec<DVector<T>> {
        let mut avg = DVector::zeros(self.n_dofs());
        for (d, p) in psi.iter().enumerate() {
            avg.axpy(self.dirs.weight(d) / self.dirs.normalization(), p, T::one());
        }
        psi.iter().map(|p| p - &avg).collect()
    }

    /// Performs `n_inner + 1` sweeps starting from scalar flux `phi`. Lagged
    /// couplings read the previous angular flux `psi_prev`.
    pub(crate) fn outer_sweeps(
        &self,
        ordering: &SweepOrdering,
        phi: &DVector<T>,
        psi_prev: &[DVector<T>],
        inner: InnerSweeps,
    ) -> SweepOutcome<T> {
        let s = self.dirs.normalization();
        let exact = ordering.is_exact();
        let mut lag = if exact {
            Vec::new()
        } else {
            self.anisotropic_part(psi_prev)
        };
        let mut phi_base = phi.clone();
        let mut chi: Vec<DVector<T>> = Vec::new();
        let mut update = DVector::zeros(self.n_dofs());
        for sweep in 0..=inner.n_inner {
            let m_a_phi = self.m_a.mul_vec(&phi_base);
            chi = (0..self.n_angles())
                .map(|d| {
                    let b = self.defect_rhs(d, &phi_base, &m_a_phi);
                    self.solve_lower(d, ordering, &b, lag.get(d))
                })
                .collect();
            update = DVector::zeros(self.n_dofs());
            for (d, c) in chi.iter().enumerate() {
                update.axpy(self.dirs.weight(d), c, T::one());
            }
            if sweep == inner.n_inner {
                break;
            }
            if inner.update_flux_each_sweep {
                if !exact {
                    let mean = &update / s;
                    lag = chi.iter().map(|c| c - &mean).collect();
                }
                phi_base += &update;
            } else if !exact {
                lag = chi.clone();
            }
        }
        let iso = &phi_base / s;
        SweepOutcome {
            psi: chi.into_iter().map(|c| c + &iso).collect(),
            phi_base,
            update,
        }
    }

    /// Outer iteration shared by plain and inner-sweep source iteration.
    pub(crate) fn iterate(
        &self,
        ordering: &SweepOrdering,
        precond: Option<&Preconditioner<T>>,
        inner: InnerSweeps,
        max_iters: usize,
        tol: T,
    ) -> Result<(AngularFlux<T>, IterationHistory<T>)> {
        if ordering.n_directions() != self.n_angles() {
            return Err(Error::arg("ordering does not match the direction set"));
        }
        let n = self.n_dofs();
        let nd = self.n_angles();
        let mut history = IterationHistory {
            rows: Vec::new(),
            converged: false,
            diverged: false,
            final_sweeps: 0,
        };
        if self.is_homogeneous() {
            history.converged = true;
            return Ok((AngularFlux::zeros(nd, n), history));
        }
        let mut phi = DVector::zeros(n);
        let mut psi_prev = vec![DVector::zeros(n); nd];
        let mut sweeps = 0;
        let mut errors = Vec::new();
        for it in 1..=max_iters {
            let out = self.outer_sweeps(ordering, &phi, &psi_prev, inner);
            sweeps += inner.n_inner + 1;
            let flux = AngularFlux { blocks: out.psi };
            let residual = self.compute_residual(&flux);
            let delta = match precond {
                Some(p) => p
                    .correction(self, &out.update)
                    .unwrap_or_else(|_| DVector::from_element(n, lit(f64::NAN))),
                None => DVector::zeros(n),
            };
            // The accelerated iterate carries the isotropic correction.
            let iso = &delta / self.dirs.normalization();
            let psi: Vec<DVector<T>> = flux.blocks.into_iter().map(|p| p + &iso).collect();
            let err = psi
                .iter()
                .zip(&psi_prev)
                .fold(T::zero(), |m, (a, b)| m.max(inf_norm(&(a - b))));
            let err = if psi.iter().any(|p| p.iter().any(|v| !v.is_finite())) {
                lit::<T>(f64::NAN)
            } else {
                err
            };
            // Stop on the change relative to the iterate: the first sweeps of a
            // thick problem are tiny in absolute terms.
            let scale = psi.iter().fold(T::zero(), |m, p| m.max(inf_norm(p)));
            history.rows.push(HistoryRow {
                iter: it,
                error_inf: err,
                residual_inf: residual,
                cumulative_sweeps: sweeps,
            });
            psi_prev = psi;
            errors.push(err);
            if is_divergent(&errors) {
                history.diverged = true;
                break;
            }
            phi = out.phi_base + &out.update + delta;
            if err <= tol * scale {
                history.converged = true;
                break;
            }
        }
        if history.diverged {
            return Ok((AngularFlux { blocks: psi_prev }, history));
        }
        let last = self.outer_sweeps(ordering, &phi, &psi_prev, inner);
        history.final_sweeps = inner.n_inner + 1;
        Ok((AngularFlux { blocks: last.psi }, history))
    }
}

/// Source iteration `phi <- S_eps phi + s`, optionally DSA-accelerated.
/// Stops once the change of the angular iterate falls to `tol` times its
/// max norm; the recorded `error_inf` is the absolute change.
pub fn source_iteration<T: Real>(
    sys: &TransportSystem<T>,
    ordering: &SweepOrdering,
    precond: Option<&Preconditioner<T>>,
    max_iters: usize,
    tol: T,
) -> Result<(AngularFlux<T>, IterationHistory<T>)> {
    if !ordering.is_exact() {
        return Err(Error::arg(
            "source_iteration needs exact sweeps; use iterate_with_inners for lagged orderings",
        ));
    }
    sys.iterate(ordering, precond, InnerSweeps::default(), max_iters, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_rule() {
        assert!(!is_divergent(&[1.0, 2.0, 3.0]));
        assert!(is_divergent(&[1.0, 2.0, 4.0, 8.0, 16.0, 32.0]));
        assert!(!is_divergent(&[1.0, 2.0, 4.0, 8.0, 9.0, 9.5]));
        assert!(is_divergent(&[1.0, f64::NAN]));
    }

    #[test]
    fn csv_format() {
        let h = IterationHistory {
            rows: vec![HistoryRow {
                iter: 1,
                error_inf: 0.1f64,
                residual_inf: 2.0,
                cumulative_sweeps: 3,
            }],
            converged: false,
            diverged: false,
            final_sweeps: 0,
        };
        assert_eq!(
            h.to_csv(),
            "iter,error_inf,residual_inf,cumulative_sweeps\n1,1.0000000000000001e-1,2.0000000000000000e0,3\n"
        );
    }
}
