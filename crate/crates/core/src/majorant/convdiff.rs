use crate::field::{partial_values, ScalarField};
use crate::problems::ConvDiffProblem;
use crate::real::pairwise_sum;
use crate::{Error, Real, Result};

/// `int int (y - v_x)^2 + (1/pi) (f - v_t - a v_x + y_x)^2 dx dt` on the space-time grid.
pub fn astral_convdiff<T: Real>(v: &ScalarField<T>, y: &ScalarField<T>, problem: &ConvDiffProblem<T>) -> Result<T> {
    let grid = *problem.grid();
    v.check_grid(&grid)?;
    y.check_grid(&grid)?;
    if !v.is_finite() || !y.is_finite() {
        return Err(Error::data("non-finite approximation or flux"));
    }
    let vx = partial_values(&grid, v.values(), 0);
    let vt = partial_values(&grid, v.values(), 1);
    let yx = partial_values(&grid, y.values(), 0);
    let inv_pi = T::one() / T::PI();
    let (f, yv) = (problem.f.values(), y.values());
    let terms: Vec<T> = (0..grid.len())
        .map(|n| {
            let gap = yv[n] - vx[n];
            let r = f[n] - vt[n] - problem.speed * vx[n] + yx[n];
            grid.trapezoid_weight(n) * (gap * gap + inv_pi * r * r)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}
