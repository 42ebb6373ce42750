//! One-dimensional slab discrete-ordinates transport with discontinuous
//! Galerkin elements, source iteration and diffusion synthetic acceleration.
//!
//! Every numerical type is generic over a [`Real`] scalar; `f64` aliases are
//! provided at the crate root for the common case.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN.

pub mod cycles;
pub mod dg;
pub mod dsa;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mesh;
pub mod oracles;
pub mod quadrature;
pub mod sparse;
pub mod transport;

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

pub use error::{Error, Result};

/// Scalar type the solver is generic over.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + LowerExp + Display + Debug + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a scalar to `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub type DirectionSet = quadrature::DirectionSet<f64>;
pub type Mesh = mesh::Mesh<f64>;
pub type DgSpace = dg::DgSpace<f64>;
pub type AssembledMatrix = sparse::AssembledMatrix<f64>;
pub type TransportSystem = transport::TransportSystem<f64>;
pub type AngularFlux = transport::AngularFlux<f64>;
pub type IterationHistory = transport::IterationHistory<f64>;
pub type DsaOperators = dsa::DsaOperators<f64>;
pub type CgEmbedding = dsa::CgEmbedding<f64>;
pub type Preconditioner = dsa::Preconditioner<f64>;
pub type SplitSystem = cycles::SplitSystem<f64>;

pub type ExperimentConfig = harness::ExperimentConfig<f64>;
pub type ExperimentResult = harness::ExperimentResult<f64>;
