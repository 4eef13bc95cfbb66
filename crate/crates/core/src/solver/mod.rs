//! Trusted discrete solutions used as the exact-solution proxy in all error measurements.

mod assemble;
mod cg;
mod csr;

pub use assemble::{assemble_elliptic, Assembled};
pub use cg::{pcg, solve_spd, CgOutcome, DEFAULT_TOL};
pub use csr::CsrMatrix;

use crate::field::{restrict, ScalarField};
use crate::problems::EllipticProblem;
use crate::{Error, Real, Result};

/// Level of the reference grid (`2^7 + 1` points per axis).
pub const DEFAULT_REFERENCE_LEVEL: u32 = 7;
pub const DEFAULT_MAX_ITER: usize = 50_000;

/// Finite-element solution on the problem's own grid.
pub fn solve<T: Real>(problem: &EllipticProblem<T>) -> Result<ScalarField<T>> {
    let sys = assemble_elliptic(problem)?;
    let out = solve_spd(&sys.matrix, &sys.rhs, T::lit(DEFAULT_TOL), DEFAULT_MAX_ITER)?;
    Ok(sys.embed(problem, &out.x))
}

/// Exact-solution proxy on the problem grid.
///
/// Manufactured problems return their analytic solution. Otherwise the
/// coefficients are regenerated on level `j_ref`, solved there and injected
/// back onto the problem grid.
pub fn reference_solution<T: Real>(problem: &EllipticProblem<T>, j_ref: u32) -> Result<ScalarField<T>> {
    if let Some(u) = &problem.exact_solution {
        return Ok(u.clone());
    }
    let level = problem.grid().level();
    if j_ref <= level {
        return Err(Error::param(format!("reference level {j_ref} must exceed the problem level {level}")));
    }
    let fine = problem.regenerate(j_ref)?;
    restrict(&solve(&fine)?, level)
}
