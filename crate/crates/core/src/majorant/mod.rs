//! Error majorants and the training losses built on them or compared against them.

mod astral;
mod constant;
mod convdiff;
mod losses;

pub use astral::{
    astral_1d, astral_elliptic, astral_elliptic_grad, astral_scalar, AstralGradient, AstralSplit, Certificate,
    MajorantReport,
};
pub use constant::{friedrichs_constant, friedrichs_from_bounds, ConstantMode};
pub use convdiff::astral_convdiff;
pub use losses::{
    astral_training_loss, boundary_rms, optimal_alpha, pino_loss, residual_loss, residual_loss_grad, strong_residual, variational_loss,
};
