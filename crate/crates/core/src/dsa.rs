//! Diffusion synthetic acceleration operators and the preconditioned
//! correction step.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dg::{DgSpace, FaceTrace};
use crate::linalg::DenseLu;
use crate::quadrature::{face_alpha, gauss_legendre};
use crate::sparse::AssembledMatrix;
use crate::transport::TransportSystem;
use crate::{lit, Error, Real, Result};

/// `D0 = (1/3) G^T M_t^{-1} G - F~1 M_t^{-1} G + G^T M_t^{-1} F1 + M_a`.
pub fn assemble_d0<T: Real>(sys: &TransportSystem<T>) -> AssembledMatrix<T> {
    let gt = sys.g.transpose();
    let minv_g = sys.m_t_inv.matmul(&sys.g);
    let third = lit::<T>(1.0 / 3.0);
    let diffusion = gt.matmul(&minv_g).scale(third).with_symmetric(true);
    let c1 = sys.moments.f1_adjoint.matmul(&minv_g);
    let c2 = gt.matmul(&sys.m_t_inv.matmul(&sys.moments.f1));
    diffusion.sub(&c1).add(&c2).add(&sys.m_a).with_symmetric(false)
}

/// `D1 = -(1/S) sum_d w_d F~_d M_t^{-1} F_d`.
pub fn assemble_d1<T: Real>(sys: &TransportSystem<T>) -> AssembledMatrix<T> {
    let n = sys.n_dofs();
    let mut out = AssembledMatrix::zeros(n, n).with_symmetric(false);
    let s = sys.dirs.normalization();
    for d in 0..sys.n_angles() {
        let term = sys.f_adjoint[d].matmul(&sys.m_t_inv.matmul(&sys.f[d]));
        out = out.sub(&term.scale(sys.dirs.weight(d) / s));
    }
    out
}

/// `D_eps = F0 / eps + D0`.
pub fn assemble_d_eps<T: Real>(sys: &TransportSystem<T>) -> AssembledMatrix<T> {
    sys.moments
        .f0
        .scale(T::one() / sys.eps)
        .add(&assemble_d0(sys))
        .with_symmetric(false)
}

/// Nonsymmetric IP matrix: `D_eps` without the `G^T M_t^{-1} F1` coupling.
pub fn assemble_ip<T: Real>(sys: &TransportSystem<T>) -> AssembledMatrix<T> {
    let minv_g = sys.m_t_inv.matmul(&sys.g);
    let third = lit::<T>(1.0 / 3.0);
    let diffusion = sys.g.transpose().matmul(&minv_g).scale(third);
    sys.moments
        .f0
        .scale(T::one() / sys.eps)
        .add(&diffusion)
        .sub(&sys.moments.f1_adjoint.matmul(&minv_g))
        .add(&sys.m_a)
        .with_symmetric(false)
}

/// `max(1/(4 eps), C_p / (sigma_t h))`.
pub fn mip_penalty_coefficient<T: Real>(eps: T, sigma_t: T, h: T, c_p: T) -> T {
    (T::one() / (lit::<T>(4.0) * eps)).max(c_p / (sigma_t * h))
}

/// Direct interior-penalty assembly with penalty `gamma(face)`:
/// `sum_F gamma [[u]][[v]] + int grad u grad v / (3 sigma_t) + int sigma_a u v
///  - sum_F [[u]]{n grad v / (3 sigma_t)} - sum_F [[v]]{n grad u / (3 sigma_t)}`.
pub fn assemble_interior_penalty<T: Real>(
    sys: &TransportSystem<T>,
    gamma: impl Fn(&FaceTrace<T>) -> T,
) -> AssembledMatrix<T> {
    let space = &sys.space;
    let n = space.n_dofs();
    let nl = space.n_local();
    let third = lit::<T>(1.0 / 3.0);
    let mut trips = Vec::new();

    let nq = (2 * space.degree() + sys.sigma_t.degree() + 2) / 2 + 1;
    let (xq, wq) = gauss_legendre::<T>(nq);
    let ders: Vec<Vec<T>> = xq.iter().map(|&x| space.basis_derivatives(x)).collect();
    for e in 0..space.n_elements() {
        let h = space.mesh().h(e);
        let jac = lit::<T>(2.0) / h;
        for q in 0..nq {
            let x = space.to_physical(e, xq[q]);
            let c = third / sys.sigma_t.eval(x) * wq[q] * jac;
            for i in 0..nl {
                for j in 0..nl {
                    trips.push((space.dof(e, i), space.dof(e, j), c * ders[q][i] * ders[q][j]));
                }
            }
        }
    }
    for face in space.faces() {
        let g = gamma(&face);
        for &(i, ai) in &face.jump {
            for &(j, aj) in &face.jump {
                trips.push((i, j, g * ai * aj));
            }
        }
        let flux: Vec<(usize, T)> = face
            .normal_derivative
            .iter()
            .map(|&(i, c)| (i, c * third / sys.sigma_t.eval(face.x)))
            .collect();
        for &(i, ci) in &flux {
            for &(j, aj) in &face.jump {
                trips.push((i, j, -ci * aj));
                trips.push((j, i, -aj * ci));
            }
        }
    }
    for (i, j, v) in sys.m_a.triplets() {
        trips.push((i, j, v));
    }
    AssembledMatrix::from_triplets(n, n, &trips, true)
}

/// Penalty weight that reproduces `F0`: half the angle-averaged `|mu|`.
pub fn sip_penalty<T: Real>(sys: &TransportSystem<T>) -> T {
    face_alpha(&sys.dirs) * lit(0.5)
}

/// Symmetric IP bilinear form assembled face by face.
pub fn assemble_sip_direct<T: Real>(sys: &TransportSystem<T>) -> AssembledMatrix<T> {
    let g = sip_penalty(sys) / sys.eps;
    assemble_interior_penalty(sys, |_| g)
}

fn element_sigma_h<T: Real>(sys: &TransportSystem<T>, e: usize) -> T {
    let m = sys.space.mesh();
    let mid = lit::<T>(0.5) * (m.left(e) + m.right(e));
    sys.sigma_t.eval(mid) * m.h(e)
}

/// Symmetric IP form with the MIP penalty; interior faces use the smaller
/// `sigma_t h` of the two neighbours.
pub fn assemble_mip<T: Real>(sys: &TransportSystem<T>, c_p: T) -> AssembledMatrix<T> {
    assemble_interior_penalty(sys, |face| {
        let sh = face
            .elements
            .iter()
            .map(|&e| element_sigma_h(sys, e))
            .fold(T::max_value().unwrap(), |a, b| a.min(b));
        mip_penalty_coefficient(sys.eps, T::one(), sh, c_p)
    })
}

/// Every DSA matrix of one system.
#[derive(Debug, Clone)]
pub struct DsaOperators<T: Real> {
    pub d0: AssembledMatrix<T>,
    pub d1: AssembledMatrix<T>,
    pub d_eps: AssembledMatrix<T>,
    pub d_ip: AssembledMatrix<T>,
    pub b_sip: AssembledMatrix<T>,
}

impl<T: Real> DsaOperators<T> {
    pub fn assemble(sys: &TransportSystem<T>) -> Self {
        let d0 = assemble_d0(sys);
        let d_eps = sys.moments.f0.scale(T::one() / sys.eps).add(&d0).with_symmetric(false);
        Self {
            d1: assemble_d1(sys),
            d_ip: assemble_ip(sys),
            b_sip: assemble_sip_direct(sys),
            d0,
            d_eps,
        }
    }

    /// Named operators in a fixed order, for dumping.
    pub fn named(&self) -> [(&'static str, &AssembledMatrix<T>); 5] {
        [
            ("D0", &self.d0),
            ("D1", &self.d1),
            ("D_eps", &self.d_eps),
            ("D_IP", &self.d_ip),
            ("B_SIP", &self.b_sip),
        ]
    }
}

/// Embedding of continuous, zero-boundary piecewise polynomials and a
/// complementary basis of face jumps and boundary values.
#[derive(Debug, Clone)]
pub struct CgEmbedding<T: Real> {
    pub p: AssembledMatrix<T>,
    pub q: AssembledMatrix<T>,
    pub projection: AssembledMatrix<T>,
}

pub fn build_cg_embedding<T: Real>(space: &DgSpace<T>) -> Result<CgEmbedding<T>> {
    let r = space.degree();
    if r == 0 {
        return Err(Error::UnsupportedDegree(0));
    }
    let ne = space.n_elements();
    let n = space.n_dofs();
    let half = lit::<T>(0.5);
    let mut p = Vec::new();
    let mut proj = Vec::new();
    let mut q = Vec::new();
    let mut col = 0;
    for e in 0..ne {
        for i in 1..r {
            let dof = space.dof(e, i);
            p.push((dof, col, T::one()));
            proj.push((col, dof, T::one()));
            col += 1;
        }
        if e + 1 < ne {
            let (l, rr) = (space.dof(e, r), space.dof(e + 1, 0));
            p.push((l, col, T::one()));
            p.push((rr, col, T::one()));
            proj.push((col, l, half));
            proj.push((col, rr, half));
            col += 1;
            q.push((l, e, T::one()));
            q.push((rr, e, -T::one()));
        }
    }
    q.push((space.dof(0, 0), ne - 1, T::one()));
    q.push((space.dof(ne - 1, r), ne, T::one()));
    Ok(CgEmbedding {
        p: AssembledMatrix::from_triplets(n, col, &p, false),
        q: AssembledMatrix::from_triplets(n, ne + 1, &q, false),
        projection: AssembledMatrix::from_triplets(col, n, &proj, false),
    })
}

impl<T: Real> CgEmbedding<T> {
    pub fn n_cg(&self) -> usize {
        self.p.ncols()
    }

    pub fn embed(&self, c: &DVector<T>) -> DVector<T> {
        self.p.mul_vec(c)
    }

    pub fn project(&self, u: &DVector<T>) -> DVector<T> {
        self.projection.mul_vec(u)
    }

    /// `u - P(project(u))`.
    pub fn complement(&self, u: &DVector<T>) -> DVector<T> {
        u - self.embed(&self.project(u))
    }
}

/// Factorized pieces of the additive preconditioner
/// `E_eps = E_P / eps + (I - E_P D0) E_Q (I - D0 E_P)` with
/// `E_P = P (P^T D0 P)^{-1} P^T` and `E_Q = Q (Q^T F0 Q)^{-1} Q^T`.
#[derive(Debug, Clone)]
pub struct AdditiveSolver<T: Real> {
    pub emb: CgEmbedding<T>,
    d0: AssembledMatrix<T>,
    eps: T,
    cg_matrix: DMatrix<T>,
    jump_matrix: DMatrix<T>,
    lu_p: DenseLu<T>,
    lu_q: DenseLu<T>,
}

impl<T: Real> AdditiveSolver<T> {
    pub fn new(sys: &TransportSystem<T>, d0: &AssembledMatrix<T>, emb: CgEmbedding<T>) -> Result<Self> {
        let pt = emb.p.transpose();
        let qt = emb.q.transpose();
        let cg = pt.matmul(&d0.matmul(&emb.p)).to_dense();
        let jm = qt.matmul(&sys.moments.f0.matmul(&emb.q)).to_dense();
        let lu_p = DenseLu::new(cg.clone(), "P^T D0 P")?;
        let lu_q = DenseLu::new(jm.clone(), "Q^T F0 Q")?;
        Ok(Self {
            emb,
            d0: d0.clone(),
            eps: sys.eps,
            cg_matrix: cg,
            jump_matrix: jm,
            lu_p,
            lu_q,
        })
    }

    /// `P^T D0 P`.
    pub fn cg_matrix(&self) -> &DMatrix<T> {
        &self.cg_matrix
    }

    /// `Q^T F0 Q`.
    pub fn jump_matrix(&self) -> &DMatrix<T> {
        &self.jump_matrix
    }

    pub fn apply_e_p(&self, y: &DVector<T>) -> DVector<T> {
        self.emb.p.mul_vec(&self.lu_p.solve(&self.emb.p.transpose().mul_vec(y)))
    }

    pub fn apply_e_q(&self, y: &DVector<T>) -> DVector<T> {
        self.emb.q.mul_vec(&self.lu_q.solve(&self.emb.q.transpose().mul_vec(y)))
    }

    /// `E_eps y`; the `E_P y` solve is shared between the two terms.
    pub fn apply(&self, y: &DVector<T>) -> DVector<T> {
        let z = self.apply_e_p(y);
        let t = y - self.d0.mul_vec(&z);
        let u = self.apply_e_q(&t);
        let back = self.apply_e_p(&self.d0.mul_vec(&u));
        z / self.eps + u - back
    }

    /// Dense `E_eps`, column by column.
    pub fn to_dense(&self) -> DMatrix<T> {
        let n = self.d0.nrows();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = DVector::zeros(n);
            e[j] = T::one();
            m.set_column(j, &self.apply(&e));
        }
        m
    }
}

/// `E_eps rhs` for the given system.
pub fn apply_additive_e_eps<T: Real>(solver: &AdditiveSolver<T>, rhs: &DVector<T>) -> DVector<T> {
    solver.apply(rhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PreconditionerKind {
    None,
    Sip,
    Ip,
    Mip,
    Additive,
}

impl PreconditionerKind {
    pub const ALL: [PreconditionerKind; 5] = [
        PreconditionerKind::None,
        PreconditionerKind::Sip,
        PreconditionerKind::Ip,
        PreconditionerKind::Mip,
        PreconditionerKind::Additive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PreconditionerKind::None => "none",
            PreconditionerKind::Sip => "sip",
            PreconditionerKind::Ip => "ip",
            PreconditionerKind::Mip => "mip",
            PreconditionerKind::Additive => "additive",
        }
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" | "no" | "si" => Ok(PreconditionerKind::None),
            "sip" => Ok(PreconditionerKind::Sip),
            "ip" => Ok(PreconditionerKind::Ip),
            "mip" => Ok(PreconditionerKind::Mip),
            "additive" | "add" => Ok(PreconditionerKind::Additive),
            other => Err(Error::arg(format!("unknown preconditioner `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
enum Solver<T: Real> {
    Identity,
    Direct(DenseLu<T>),
    Additive(Box<AdditiveSolver<T>>),
}

/// A factorized DSA preconditioner.
#[derive(Debug, Clone)]
pub struct Preconditioner<T: Real> {
    kind: PreconditionerKind,
    solver: Solver<T>,
}

/// Default MIP constant `C_p`.
pub fn default_mip_cp(degree: usize) -> f64 {
    let r = degree.max(1) as f64;
    r * (r + 1.0)
}

impl<T: Real> Preconditioner<T> {
    pub fn new(sys: &TransportSystem<T>, kind: PreconditionerKind) -> Result<Self> {
        Self::with_mip_constant(sys, kind, lit(default_mip_cp(sys.space.degree())))
    }

    pub fn with_mip_constant(sys: &TransportSystem<T>, kind: PreconditionerKind, c_p: T) -> Result<Self> {
        let solver = match kind {
            PreconditionerKind::None => Solver::Identity,
            PreconditionerKind::Sip => Solver::Direct(DenseLu::from_sparse(&assemble_d_eps(sys), "D_eps")?),
            PreconditionerKind::Ip => Solver::Direct(DenseLu::from_sparse(&assemble_ip(sys), "D_IP")?),
            PreconditionerKind::Mip => Solver::Direct(DenseLu::from_sparse(&assemble_mip(sys, c_p), "B_MIP")?),
            PreconditionerKind::Additive => {
                let emb = build_cg_embedding(&sys.space)?;
                Solver::Additive(Box::new(AdditiveSolver::new(sys, &assemble_d0(sys), emb)?))
            }
        };
        Ok(Self { kind, solver })
    }

    pub fn kind(&self) -> PreconditionerKind {
        self.kind
    }

    pub fn additive(&self) -> Option<&AdditiveSolver<T>> {
        match &self.solver {
            Solver::Additive(a) => Some(a),
            _ => None,
        }
    }

    /// DSA correction for the scalar-flux update `r = phi_half - phi`:
    /// `(eps^2 D)^{-1} M_t r`, or `(1/eps) E_eps M_t r` for the additive kind.
    pub fn correction(&self, sys: &TransportSystem<T>, r: &DVector<T>) -> Result<DVector<T>> {
        let y = sys.m_t.mul_vec(r);
        let eps = sys.eps;
        let out = match &self.solver {
            Solver::Identity => DVector::zeros(r.len()),
            Solver::Direct(lu) => lu.solve(&y) / (eps * eps),
            Solver::Additive(a) => a.apply(&y) / eps,
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBreakdown(format!(
                "{} correction produced non-finite values",
                self.kind
            )));
        }
        Ok(out)
    }
}

/// `phi_new = phi_half + correction(phi_half - phi)`.
pub fn apply_preconditioned_step<T: Real>(
    sys: &TransportSystem<T>,
    precond: &Preconditioner<T>,
    phi: &DVector<T>,
    phi_half: &DVector<T>,
) -> Result<DVector<T>> {
    let r = phi_half - phi;
    Ok(phi_half + precond.correction(sys, &r)?)
}
