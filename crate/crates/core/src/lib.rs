//! Functional a posteriori error majorants for elliptic and convection-diffusion
//! problems, used both as certificates for arbitrary approximate solutions and
//! as training losses for physics-informed networks and neural operators.
//!
//! All numerics are generic over [`Real`] (implemented for `f32` and `f64`).
//! The `*64` aliases at the crate root fix the scalar to `f64`, which is what
//! the command-line front end uses.

pub mod certify;
pub mod error;
pub mod field;
pub mod majorant;
pub mod nn;
pub mod norms;
pub mod problems;
pub mod rng;
pub mod solver;

mod real;

pub use error::{Error, Result};
pub use real::Real;

pub use certify::{BoundMetrics, CertifyConfig};
pub use field::{GridKind, Rule, ScalarField, SpdTensorField, TensorGrid, VectorField};
pub use majorant::{Certificate, ConstantMode, MajorantReport};
pub use problems::{ConvDiffProblem, EllipticProblem, Family, PinnProblem, TrigPolySpec};

pub type Grid64 = TensorGrid<f64>;
pub type Field64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type Tensor64 = SpdTensorField<f64>;
pub type Problem64 = EllipticProblem<f64>;
pub type ConvDiff64 = ConvDiffProblem<f64>;
pub type Certificate64 = Certificate<f64>;
pub type Report64 = MajorantReport<f64>;

pub type Grid32 = TensorGrid<f32>;
pub type Field32 = ScalarField<f32>;
pub type Problem32 = EllipticProblem<f32>;
