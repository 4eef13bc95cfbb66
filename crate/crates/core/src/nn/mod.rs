//! Small dense networks with exact input and parameter derivatives, optimizers,
//! and the physics-informed and operator training regimes.

mod activation;
mod dense;
mod operator;
mod optim;
mod pinn;
mod train_op;

pub use activation::{gelu_taylor, GeluTaylor};
pub use dense::{DenseNet, Jets, NetSpec};
pub use operator::{OperatorNet, OperatorSpec};
pub use optim::{OptimizerConfig, OptimizerState, Schedule};
pub use pinn::{train_pinn, LossKind, PinnObjective, PinnRun, TraceEntry, TrainConfig, TrainFailure};
pub use train_op::*;

#[cfg(test)]
mod tests;
