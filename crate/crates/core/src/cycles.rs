//! Splitting `H = H_le + H_gt` for orderings with lagged couplings, the
//! lagged-sweep approximate inverse and outer iterations with inner sweeps.

use nalgebra::{DMatrix, DVector};

use crate::dsa::Preconditioner;
use crate::linalg::DenseLu;
use crate::mesh::SweepOrdering;
use crate::sparse::AssembledMatrix;
use crate::transport::{AngularFlux, InnerSweeps, IterationHistory, TransportSystem};
use crate::{to_f64, Error, Real, Result};

/// Per-direction splitting of the face couplings by an ordering.
#[derive(Debug, Clone)]
pub struct SplitSystem<T: Real> {
    pub ordering: SweepOrdering,
    pub eps: T,
    pub f_le: Vec<AssembledMatrix<T>>,
    pub f_gt: Vec<AssembledMatrix<T>>,
    pub h_le: Vec<AssembledMatrix<T>>,
    pub h_gt: Vec<AssembledMatrix<T>>,
}

/// Moves the lagged face couplings of every direction into `H_gt`.
pub fn split_h<T: Real>(sys: &TransportSystem<T>, ordering: &SweepOrdering) -> Result<SplitSystem<T>> {
    if ordering.n_directions() != sys.n_angles() {
        return Err(Error::arg("ordering does not match the direction set"));
    }
    let n = sys.n_dofs();
    let nl = sys.space.n_local();
    let mut f_le = Vec::new();
    let mut f_gt = Vec::new();
    let mut h_le = Vec::new();
    let mut h_gt = Vec::new();
    for d in 0..sys.n_angles() {
        let mut le = Vec::new();
        let mut gt = Vec::new();
        for (i, j, v) in sys.f[d].triplets() {
            let (ei, ej) = (i / nl, j / nl);
            if ei != ej && ordering.is_lagged(d, ei.max(ej)) {
                gt.push((i, j, v));
            } else {
                le.push((i, j, v));
            }
        }
        let fl = AssembledMatrix::from_triplets(n, n, &le, false);
        let fg = AssembledMatrix::from_triplets(n, n, &gt, false);
        h_le.push(sys.m_t_inv.matmul(&sys.g.scale(sys.dirs.mu(d)).add(&fl)));
        h_gt.push(sys.m_t_inv.matmul(&fg));
        f_le.push(fl);
        f_gt.push(fg);
    }
    Ok(SplitSystem {
        ordering: ordering.clone(),
        eps: sys.eps,
        f_le,
        f_gt,
        h_le,
        h_gt,
    })
}

/// Applies `M_k^{-1} = [sum_{l<k} (-eps (I + eps H_le)^{-1} H_gt)^l] (I + eps H_le)^{-1}`
/// blockwise, i.e. `k` lagged sweeps per direction starting from zero.
pub fn lagged_sweeps<T: Real>(
    sys: &TransportSystem<T>,
    split: &SplitSystem<T>,
    k: usize,
    rhs: &AngularFlux<T>,
) -> Result<AngularFlux<T>> {
    if k == 0 {
        return Err(Error::arg("lagged_sweeps needs k >= 1"));
    }
    if rhs.n_angles() != sys.n_angles() {
        return Err(Error::arg("right-hand side does not match the direction set"));
    }
    let blocks = (0..sys.n_angles())
        .map(|d| {
            let b = sys.m_t.mul_vec(rhs.block(d));
            let mut x = DVector::zeros(sys.n_dofs());
            for _ in 0..k {
                x = sys.solve_lower(d, &split.ordering, &b, Some(&x));
            }
            x
        })
        .collect();
    AngularFlux::new(blocks)
}

/// Outcome of the dense check of
/// `M_k^{-1} Hc = (I - X^k) (I + eps H)^{-1} Hc` with `X = -eps (I + eps H_le)^{-1} H_gt`
/// and `Hc = I + eps H - B`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma3Report {
    pub n: usize,
    pub eps: f64,
    pub k: usize,
    pub discrepancy: f64,
    pub scale: f64,
}

impl Lemma3Report {
    pub fn summary(&self) -> String {
        format!(
            "lagged-sweep identity: n = {}, eps = {:e}, k = {}, max discrepancy = {:.3e} (operator scale {:.3e})",
            self.n, self.eps, self.k, self.discrepancy, self.scale
        )
    }

    pub const CSV_HEADER: &'static str = "n,eps,k,discrepancy,scale";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.16e},{},{:.16e},{:.16e}",
            self.n, self.eps, self.k, self.discrepancy, self.scale
        )
    }
}

/// Dense `M_k^{-1}`.
pub fn dense_lagged_inverse<T: Real>(h_le: &DMatrix<T>, h_gt: &DMatrix<T>, eps: T, k: usize) -> Result<DMatrix<T>> {
    let n = h_le.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let lu = DenseLu::new(&id + h_le * eps, "I + eps H_le").map_err(|_| Error::InvalidInstance("I + eps H_le is singular".into()))?;
    let x = -lu.solve_mat(h_gt) * eps;
    let mut sum = id.clone();
    let mut pow = id;
    for _ in 1..k {
        pow = &x * &pow;
        sum += &pow;
    }
    Ok(sum * lu.inverse())
}

pub fn verify_lemma3<T: Real>(
    h_le: &DMatrix<T>,
    h_gt: &DMatrix<T>,
    b: &DMatrix<T>,
    eps: T,
    k: usize,
) -> Result<Lemma3Report> {
    let n = h_le.nrows();
    if h_le.shape() != (n, n) || h_gt.shape() != (n, n) || b.shape() != (n, n) {
        return Err(Error::InvalidInstance("matrices must be square and equally sized".into()));
    }
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    let id = DMatrix::<T>::identity(n, n);
    let h = h_le + h_gt;
    let hc = &id + &h * eps - b;
    let full = DenseLu::new(&id + &h * eps, "I + eps H").map_err(|_| Error::InvalidInstance("I + eps H is singular".into()))?;
    let lower = DenseLu::new(&id + h_le * eps, "I + eps H_le")
        .map_err(|_| Error::InvalidInstance("I + eps H_le is singular".into()))?;
    let x = -lower.solve_mat(h_gt) * eps;
    let mut xk = id.clone();
    for _ in 0..k {
        xk = &x * &xk;
    }
    let lhs = dense_lagged_inverse(h_le, h_gt, eps, k)? * &hc;
    let rhs = (&id - xk) * full.solve_mat(&hc);
    let discrepancy = crate::linalg::max_abs(&(&lhs - &rhs));
    Ok(Lemma3Report {
        n,
        eps: to_f64(eps),
        k,
        discrepancy: to_f64(discrepancy),
        scale: to_f64(crate::linalg::max_abs(&lhs)),
    })
}

/// Outer DSA-accelerated iteration doing `n_inner + 1` sweeps per step, with
/// the scalar flux either frozen across the sweeps or updated after each.
pub fn iterate_with_inners<T: Real>(
    sys: &TransportSystem<T>,
    split: &SplitSystem<T>,
    precond: Option<&Preconditioner<T>>,
    n_inner: usize,
    update_flux_each_sweep: bool,
    max_iters: usize,
    tol: T,
) -> Result<(AngularFlux<T>, IterationHistory<T>)> {
    sys.iterate(
        &split.ordering,
        precond,
        InnerSweeps {
            n_inner,
            update_flux_each_sweep,
        },
        max_iters,
        tol,
    )
}
