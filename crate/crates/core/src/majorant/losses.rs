use super::{astral_elliptic, Certificate, ConstantMode};
use crate::field::{integrate, partial_transpose_values, partial_values, spatial_grad_fd, Rule, ScalarField};
use crate::norms::l2_norm;
use crate::problems::EllipticProblem;
use crate::real::pairwise_sum;
use crate::{Error, Real, Result};

/// Strong residual `div(a grad v) + f - b^2 v` with nested finite differences.
pub fn strong_residual<T: Real>(v: &ScalarField<T>, problem: &EllipticProblem<T>) -> Result<ScalarField<T>> {
    v.check_grid(problem.grid())?;
    let grid = *problem.grid();
    let d = problem.dim();
    let g = spatial_grad_fd(v);
    let mut flux = vec![vec![T::zero(); grid.len()]; d];
    for n in 0..grid.len() {
        let ag = problem.a.apply(n, g.at(n));
        for i in 0..d {
            flux[i][n] = ag[i];
        }
    }
    let mut out: Vec<T> = (0..grid.len())
        .map(|n| problem.f.values()[n] - problem.b_sq.values()[n] * v.values()[n])
        .collect();
    for (i, fi) in flux.iter().enumerate() {
        for (o, dv) in out.iter_mut().zip(partial_values(&grid, fi, i)) {
            *o += dv;
        }
    }
    ScalarField::new(grid, out)
}

/// `int (div(a grad v) + f - b^2 v)^2` over the grid.
pub fn residual_loss<T: Real>(v: &ScalarField<T>, problem: &EllipticProblem<T>) -> Result<T> {
    let r = strong_residual(v, problem)?;
    integrate(&r.mul(&r), Rule::Trapezoid)
}

/// [`residual_loss`] and its gradient with respect to the nodal values of `v`.
pub fn residual_loss_grad<T: Real>(v: &ScalarField<T>, problem: &EllipticProblem<T>) -> Result<(T, ScalarField<T>)> {
    let r = strong_residual(v, problem)?;
    let grid = *problem.grid();
    let two = T::lit(2.0);
    let w = grid.trapezoid_weights();
    let s: Vec<T> = (0..grid.len()).map(|n| two * w[n] * r.values()[n]).collect();
    let loss = pairwise_sum(&(0..grid.len()).map(|n| w[n] * r.values()[n] * r.values()[n]).collect::<Vec<_>>());
    let d = problem.dim();
    let t: Vec<Vec<T>> = (0..d).map(|i| partial_transpose_values(&grid, &s, i)).collect();
    let mut q = vec![vec![T::zero(); grid.len()]; d];
    for n in 0..grid.len() {
        let tn = [t[0][n], if d == 2 { t[1][n] } else { T::zero() }];
        let at = problem.a.apply(n, tn);
        for (i, qi) in q.iter_mut().enumerate() {
            qi[n] = at[i];
        }
    }
    let mut grad: Vec<T> = (0..grid.len()).map(|n| -problem.b_sq.values()[n] * s[n]).collect();
    for (j, qj) in q.iter().enumerate() {
        for (g, x) in grad.iter_mut().zip(partial_transpose_values(&grid, qj, j)) {
            *g += x;
        }
    }
    Ok((loss, ScalarField::new(grid, grad)?))
}

/// Dirichlet energy `int (1/2 grad v^T a grad v - f v)`.
pub fn variational_loss<T: Real>(v: &ScalarField<T>, problem: &EllipticProblem<T>, rule: Rule) -> Result<T> {
    v.check_grid(problem.grid())?;
    if problem.has_reaction() {
        return Err(Error::param("variational loss is stated for b = 0"));
    }
    let grid = *problem.grid();
    let g = spatial_grad_fd(v);
    let half = T::lit(0.5);
    let density: Vec<T> = (0..grid.len())
        .map(|n| {
            let gn = g.at(n);
            let ag = problem.a.apply(n, gn);
            half * (gn[0] * ag[0] + gn[1] * ag[1]) - problem.f.values()[n] * v.values()[n]
        })
        .collect();
    integrate(&ScalarField::new(grid, density)?, rule)
}

/// `sqrt(mean of v^2 over the boundary nodes)`.
pub fn boundary_rms<T: Real>(v: &ScalarField<T>) -> T {
    let b = v.grid().boundary_nodes();
    let sq: Vec<T> = b.iter().map(|&n| v.values()[n] * v.values()[n]).collect();
    (pairwise_sum(&sq) / T::from_usize_lossy(b.len())).sqrt()
}

/// `||v - u|| + alpha sqrt(int residual^2) + gamma sqrt(mean boundary v^2)`.
pub fn pino_loss<T: Real>(
    v: &ScalarField<T>,
    u_exact: &ScalarField<T>,
    problem: &EllipticProblem<T>,
    alpha: T,
    gamma: T,
) -> Result<T> {
    u_exact.check_grid(problem.grid())?;
    let data = l2_norm(&v.sub(u_exact));
    let physics = if alpha == T::zero() { T::zero() } else { alpha * residual_loss(v, problem)?.sqrt() };
    Ok(data + physics + gamma * boundary_rms(v))
}

/// `sqrt(majorant) + lambda sqrt(mean boundary v^2)`.
pub fn astral_training_loss<T: Real>(
    v: &ScalarField<T>,
    cert: &Certificate<T>,
    problem: &EllipticProblem<T>,
    lambda: T,
    mode: ConstantMode,
) -> Result<T> {
    if lambda < T::zero() {
        return Err(Error::param("boundary penalty must be non-negative"));
    }
    let report = astral_elliptic(v, cert, problem, mode)?;
    Ok(report.total.sqrt() + lambda * boundary_rms(v))
}

/// Pointwise minimiser `alpha = Q / (P + Q)` of `alpha^2 P + (1 - alpha)^2 Q` and its minimum `PQ / (P + Q)`.
pub fn optimal_alpha<T: Real>(p: &ScalarField<T>, q: &ScalarField<T>) -> Result<(ScalarField<T>, ScalarField<T>)> {
    p.check_same_grid(q)?;
    if p.values().iter().chain(q.values()).any(|&x| !(x >= T::zero())) {
        return Err(Error::data("P and Q must be non-negative"));
    }
    let alpha = p.zip_map(q, |p, q| if p + q == T::zero() { T::zero() } else { q / (p + q) });
    let ups = p.zip_map(q, |p, q| if p + q == T::zero() { T::zero() } else { p * q / (p + q) });
    Ok((alpha, ups))
}
