//! Grids, nodal fields, quadrature, finite differences and inter-grid transfer.

mod diff;
mod fields;
mod grid;
mod quadrature;
mod transfer;

pub use diff::{
    div_fd, for_each_stencil_entry, grad_fd, partial, partial_transpose_values, partial_values, spatial_grad_fd,
    weighted_normal_diagonal,
};
pub use fields::{lambda_min_field, ScalarField, SpdTensorField, VectorField};
pub use grid::{make_grid, GridKind, TensorGrid, MAX_LEVEL, MIN_LEVEL};
pub use quadrature::{
    gauss_legendre_unit, integrate, integrate_fn, QuadratureSet, Rule, DEFAULT_GAUSS_POINTS, MAX_GAUSS_POINTS,
};
pub use transfer::{interpolate, prolong, restrict};
