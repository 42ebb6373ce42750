//! Angular quadrature for slab geometry and the 1D point rules used by the
//! spatial discretization.

use crate::{lit, Error, Real, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, nodes ascending.
///
/// Nodes are refined by Newton iteration in `f64` and then symmetrized so
/// that `x[i] == -x[n-1-i]` and the paired weights agree bit for bit.
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut x = vec![0.0f64; n];
    let mut w = vec![0.0f64; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (
        x.into_iter().map(lit).collect(),
        w.into_iter().map(lit).collect(),
    )
}

/// Gauss-Lobatto nodes on `[-1, 1]` with `n >= 2` points, ascending,
/// endpoints included.
pub fn gauss_lobatto<T: Real>(n: usize) -> Vec<T> {
    assert!(n >= 2, "Gauss-Lobatto rule needs at least two points");
    let m = n - 1;
    let mut x = vec![0.0f64; n];
    for i in 0..n.div_ceil(2) {
        let mut z = -(std::f64::consts::PI * i as f64 / m as f64).cos();
        if i > 0 {
            for _ in 0..100 {
                // Newton on (1 - z^2) P'_m(z), whose roots are the Lobatto nodes.
                let (p, dp) = legendre_with_derivative(m, z);
                let f = (1.0 - z * z) * dp;
                let df = -(m as f64) * (m as f64 + 1.0) * p;
                let dz = f / df;
                z -= dz;
                if dz.abs() <= 1e-16 {
                    break;
                }
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x.into_iter().map(lit).collect()
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Discrete-ordinates direction cosines with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet<T: Real> {
    directions: Vec<T>,
    weights: Vec<T>,
    normalization: T,
}

impl<T: Real> DirectionSet<T> {
    /// Validates and wraps an explicit set.
    pub fn new(directions: Vec<T>, weights: Vec<T>, normalization: T) -> Result<Self> {
        if directions.is_empty() || directions.len() != weights.len() {
            return Err(Error::arg("directions and weights must be nonempty and equal in length"));
        }
        if weights.iter().any(|w| *w <= T::zero()) {
            return Err(Error::arg("quadrature weights must be positive"));
        }
        if directions.iter().any(|m| *m == T::zero() || m.abs() > T::one()) {
            return Err(Error::arg("directions must lie in (-1,0) or (0,1)"));
        }
        let tol = lit::<T>(1e-12);
        for (i, (&m, &w)) in directions.iter().zip(&weights).enumerate() {
            let paired = directions
                .iter()
                .zip(&weights)
                .enumerate()
                .any(|(j, (&m2, &w2))| j != i && (m + m2).abs() <= tol && (w - w2).abs() <= tol);
            if !paired {
                return Err(Error::arg(format!("direction {i} has no reversed partner")));
            }
        }
        let total = weights.iter().fold(T::zero(), |a, &w| a + w);
        if (total - normalization).abs() > tol * normalization {
            return Err(Error::arg("weights must sum to the normalization"));
        }
        Ok(Self {
            directions,
            weights,
            normalization,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn directions(&self) -> &[T] {
        &self.directions
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn mu(&self, d: usize) -> T {
        self.directions[d]
    }

    pub fn weight(&self, d: usize) -> T {
        self.weights[d]
    }

    /// The total angular measure, `2` for the slab.
    pub fn normalization(&self) -> T {
        self.normalization
    }

    /// `sum_d w_d f(mu_d)`.
    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        self.directions
            .iter()
            .zip(&self.weights)
            .fold(T::zero(), |acc, (&m, &w)| acc + w * f(m))
    }
}

/// Gauss-Legendre direction set with `n_angles` points and normalization 2.
pub fn gauss_legendre_set<T: Real>(n_angles: usize) -> Result<DirectionSet<T>> {
    if n_angles == 0 || n_angles % 2 == 1 {
        return Err(Error::arg(format!(
            "n_angles must be a positive even integer, got {n_angles}"
        )));
    }
    let (x, w) = gauss_legendre::<T>(n_angles);
    DirectionSet::new(x, w, lit(2.0))
}

/// Angle-averaged face weight `(1/Sigma) sum_d w_d |mu_d|`.
pub fn face_alpha<T: Real>(dirs: &DirectionSet<T>) -> T {
    dirs.integrate(|m| m.abs()) / dirs.normalization()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_set() {
        let s = gauss_legendre_set::<f64>(2).unwrap();
        assert_relative_eq!(s.mu(0), -0.5773502691896258, epsilon = 1e-15);
        assert_relative_eq!(s.mu(1), 0.5773502691896258, epsilon = 1e-15);
        assert_relative_eq!(s.weight(0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(s.weight(1), 1.0, epsilon = 1e-15);
        assert_relative_eq!(face_alpha(&s), 0.5773502691896258, epsilon = 1e-15);
    }

    #[test]
    fn moments_of_four_point_set() {
        let s = gauss_legendre_set::<f64>(4).unwrap();
        assert!(s.integrate(|m| m).abs() < 1e-15);
        assert!((s.integrate(|m| m * m) - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.integrate(|_| 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_odd_and_zero() {
        assert!(gauss_legendre_set::<f64>(0).is_err());
        assert!(gauss_legendre_set::<f64>(3).is_err());
    }

    #[test]
    fn alpha_tends_to_half() {
        let s = gauss_legendre_set::<f64>(16).unwrap();
        assert!((face_alpha(&s) - 0.5).abs() < 0.01);
    }

    #[test]
    fn lobatto_three_points() {
        let x = gauss_lobatto::<f64>(3);
        assert_eq!(x, vec![-1.0, 0.0, 1.0]);
        let x = gauss_lobatto::<f64>(4);
        assert_relative_eq!(x[1], -(1.0f64 / 5.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn single_precision_set() {
        let s = gauss_legendre_set::<f32>(8).unwrap();
        assert!((s.integrate(|m| m * m) - 2.0 / 3.0).abs() < 1e-6);
    }
}
