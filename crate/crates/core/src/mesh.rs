//! Interval meshes and per-direction element orderings.
//!
//! Face `f` sits at vertex `f`; faces `0` and `n_elements` are the domain
//! boundaries, and interior face `f` couples elements `f - 1` and `f`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::quadrature::DirectionSet;
use crate::{lit, Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh<T: Real> {
    vertices: Vec<T>,
}

impl<T: Real> Mesh<T> {
    pub fn from_vertices(vertices: Vec<T>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::arg("a mesh needs at least two vertices"));
        }
        if vertices.windows(2).any(|v| !(v[1] > v[0])) {
            return Err(Error::arg("mesh vertices must be strictly increasing"));
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[T] {
        &self.vertices
    }

    pub fn n_elements(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn n_faces(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_interior_faces(&self) -> usize {
        self.n_elements() - 1
    }

    pub fn h(&self, e: usize) -> T {
        self.vertices[e + 1] - self.vertices[e]
    }

    pub fn left(&self, e: usize) -> T {
        self.vertices[e]
    }

    pub fn right(&self, e: usize) -> T {
        self.vertices[e + 1]
    }

    pub fn domain(&self) -> (T, T) {
        (self.vertices[0], *self.vertices.last().unwrap())
    }

    pub fn is_boundary_face(&self, f: usize) -> bool {
        f == 0 || f == self.n_elements()
    }
}

/// `n` equal intervals on `[a, b]`.
pub fn uniform_mesh<T: Real>(a: T, b: T, n: usize) -> Result<Mesh<T>> {
    if !(a < b) {
        return Err(Error::arg("uniform_mesh requires a < b"));
    }
    if n == 0 {
        return Err(Error::arg("uniform_mesh requires at least one element"));
    }
    let nf = lit::<T>(n as f64);
    let mut v: Vec<T> = (0..=n)
        .map(|i| a + (b - a) * lit::<T>(i as f64) / nf)
        .collect();
    v[n] = b;
    Mesh::from_vertices(v)
}

/// Whether an interior face coupling is solved in the forward sweep or lagged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingClass {
    Lower,
    StrictUpper,
}

/// Element orderings and lagged-coupling flags for every direction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepOrdering {
    orders: Vec<Vec<usize>>,
    lagged: Vec<Vec<bool>>,
}

impl SweepOrdering {
    /// Builds an ordering from explicit per-direction element orders and
    /// per-face lag flags (indexed by face, boundaries must be `false`).
    pub fn new(orders: Vec<Vec<usize>>, lagged: Vec<Vec<bool>>) -> Result<Self> {
        if orders.len() != lagged.len() {
            return Err(Error::arg("orders and lag flags must cover the same directions"));
        }
        for (o, l) in orders.iter().zip(&lagged) {
            let n = o.len();
            if l.len() != n + 1 || l[0] || l[n] {
                return Err(Error::arg("lag flags must be per face with unlagged boundaries"));
            }
            let mut seen = vec![false; n];
            for &e in o {
                if e >= n || seen[e] {
                    return Err(Error::arg("element order must be a permutation"));
                }
                seen[e] = true;
            }
        }
        Ok(Self { orders, lagged })
    }

    pub fn n_directions(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self, d: usize) -> &[usize] {
        &self.orders[d]
    }

    pub fn is_lagged(&self, d: usize, face: usize) -> bool {
        self.lagged[d][face]
    }

    pub fn classify(&self, d: usize, face: usize) -> CouplingClass {
        if self.lagged[d][face] {
            CouplingClass::StrictUpper
        } else {
            CouplingClass::Lower
        }
    }

    pub fn n_lagged(&self, d: usize) -> usize {
        self.lagged[d].iter().filter(|&&l| l).count()
    }

    /// True when no direction has a lagged coupling.
    pub fn is_exact(&self) -> bool {
        self.lagged.iter().all(|l| l.iter().all(|&x| !x))
    }
}

fn upwind_sequence(n: usize, mu_positive: bool) -> Vec<usize> {
    if mu_positive {
        (0..n).collect()
    } else {
        (0..n).rev().collect()
    }
}

/// Left-to-right for `mu > 0`, right-to-left for `mu < 0`; nothing lagged.
pub fn upwind_ordering<T: Real>(mesh: &Mesh<T>, dirs: &DirectionSet<T>) -> SweepOrdering {
    let n = mesh.n_elements();
    let orders = dirs
        .directions()
        .iter()
        .map(|&m| upwind_sequence(n, m > T::zero()))
        .collect();
    let lagged = vec![vec![false; n + 1]; dirs.len()];
    SweepOrdering { orders, lagged }
}

/// Lags `floor(fraction * n_interior_faces)` seeded-random couplings per
/// direction. The element order walks the upwind chain split at lagged faces,
/// visiting the resulting segments from the downwind end first, so every
/// lagged coupling points to an element solved later.
pub fn adversarial_ordering<T: Real>(
    mesh: &Mesh<T>,
    dirs: &DirectionSet<T>,
    fraction: f64,
    seed: u64,
) -> Result<SweepOrdering> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::arg(format!("fraction must lie in [0,1], got {fraction}")));
    }
    let n = mesh.n_elements();
    let n_int = mesh.n_interior_faces();
    let n_lag = (fraction * n_int as f64).floor() as usize;
    let mut orders = Vec::with_capacity(dirs.len());
    let mut lagged = Vec::with_capacity(dirs.len());
    for (d, &m) in dirs.directions().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((d as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut faces: Vec<usize> = (1..n).collect();
        faces.shuffle(&mut rng);
        let mut lag = vec![false; n + 1];
        for &f in faces.iter().take(n_lag) {
            lag[f] = true;
        }
        let chain = upwind_sequence(n, m > T::zero());
        let mut segments: Vec<Vec<usize>> = vec![vec![chain[0]]];
        for w in chain.windows(2) {
            let face = w[0].max(w[1]);
            if lag[face] {
                segments.push(Vec::new());
            }
            segments.last_mut().unwrap().push(w[1]);
        }
        orders.push(segments.into_iter().rev().flatten().collect());
        lagged.push(lag);
    }
    Ok(SweepOrdering { orders, lagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss_legendre_set;

    #[test]
    fn uniform_widths() {
        let m = uniform_mesh(0.0f64, 1.0, 4).unwrap();
        for e in 0..4 {
            assert!((m.h(e) - 0.25).abs() < 1e-15);
        }
        assert_eq!(uniform_mesh(0.0, 7.0, 100).unwrap().vertices().len(), 101);
        let one = uniform_mesh(0.0, 1.0, 1).unwrap();
        assert_eq!(one.n_faces(), 2);
        assert_eq!(one.n_interior_faces(), 0);
        assert!(uniform_mesh(1.0, 1.0, 3).is_err());
        assert!(uniform_mesh(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn upwind_orders() {
        let m = uniform_mesh(0.0, 1.0, 3).unwrap();
        let s = gauss_legendre_set::<f64>(2).unwrap();
        let o = upwind_ordering(&m, &s);
        assert_eq!(o.order(0), &[2, 1, 0]);
        assert_eq!(o.order(1), &[0, 1, 2]);
        assert!(o.is_exact());
        assert_eq!(o.classify(1, 1), CouplingClass::Lower);
    }

    #[test]
    fn adversarial_extremes() {
        let m = uniform_mesh(0.0, 1.0, 3).unwrap();
        let s = gauss_legendre_set::<f64>(2).unwrap();
        assert_eq!(adversarial_ordering(&m, &s, 0.0, 5).unwrap(), upwind_ordering(&m, &s));
        let full = adversarial_ordering(&m, &s, 1.0, 5).unwrap();
        assert_eq!(full.n_lagged(1), 2);
        assert_eq!(full.order(1), &[2, 1, 0]);
        assert_eq!(full.classify(1, 1), CouplingClass::StrictUpper);
        assert_eq!(full, adversarial_ordering(&m, &s, 1.0, 5).unwrap());
    }
}
