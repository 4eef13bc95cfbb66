//! Problem definitions and the random generators behind every experiment.

mod convdiff;
mod elliptic;
mod pinn;
mod trig;

pub use convdiff::{gen_convdiff, ConvDiffProblem, DEFAULT_MODES};
pub use elliptic::{
    gen_dataset, gen_elliptic_1d, gen_elliptic_2d, manufactured_poisson, EllipticProblem, Family, SampleKey,
    COERCIVITY_FLOOR, MAX_RESAMPLES,
};
pub use pinn::{gen_pinn_problem, PinnProblem, GRF_MODES, SCALE_MEAN};
pub use trig::{sample_trig_poly, TrigPoly, TrigPolySpec};
