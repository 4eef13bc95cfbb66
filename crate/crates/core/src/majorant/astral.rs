//! The elliptic majorant
//!
//! ```text
//! M(v; y, beta) = int w R^2 + c int (a grad v - y)^T a^{-1} (a grad v - y),
//! R = f - b^2 v + div y,   w = C^2 (1 + beta) / (C^2 b^2 (1 + beta) + 1),   c = (1 + beta) / beta,
//! ```
//!
//! discretized with finite-difference derivatives and the trapezoid rule.
//! For every `v` vanishing on the boundary, `|||v - u|||^2 <= M`.

use super::{friedrichs_constant, ConstantMode};
use crate::field::{div_fd, partial_transpose_values, spatial_grad_fd, ScalarField, VectorField};
use crate::problems::EllipticProblem;
use crate::real::pairwise_sum;
use crate::{Error, Real, Result};

/// Free parameters of the majorant: flux `y` and `beta > 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate<T> {
    pub y: VectorField<T>,
    pub beta: T,
}

impl<T: Real> Certificate<T> {
    pub fn new(y: VectorField<T>, beta: T) -> Result<Self> {
        if !(beta > T::zero() && beta.is_finite()) {
            return Err(Error::param(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { y, beta })
    }

    /// `y = a grad v`.
    pub fn naive(v: &ScalarField<T>, problem: &EllipticProblem<T>, beta: T) -> Result<Self> {
        v.check_grid(problem.grid())?;
        let g = spatial_grad_fd(v);
        let d = problem.dim();
        let grid = *problem.grid();
        let mut comps = vec![vec![T::zero(); grid.len()]; d];
        for n in 0..grid.len() {
            let ag = problem.a.apply(n, g.at(n));
            for (i, c) in comps.iter_mut().enumerate() {
                c[n] = ag[i];
            }
        }
        let y = VectorField::new(comps.into_iter().map(|c| ScalarField::from_vec_unchecked(grid, c)).collect())?;
        Self::new(y, beta)
    }
}

/// Value of the majorant split into its two parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MajorantReport<T> {
    pub residual_term: T,
    pub flux_term: T,
    pub total: T,
    pub friedrichs_c: T,
    pub constant_mode: ConstantMode,
}

impl<T: Real> MajorantReport<T> {
    fn new(residual_term: T, flux_term: T, friedrichs_c: T, constant_mode: ConstantMode) -> Self {
        Self { residual_term, flux_term, total: residual_term + flux_term, friedrichs_c, constant_mode }
    }

    /// `sqrt(total)`, the bound on the energy error.
    pub fn bound(&self) -> T {
        self.total.sqrt()
    }
}

/// The `beta`-independent pieces of the majorant for fixed `(v, y)`.
#[derive(Clone, Debug)]
pub struct AstralSplit<T> {
    weights: Vec<T>,
    residual: Vec<T>,
    b_sq: Vec<T>,
    /// `a^{-1} (a grad v - y)` per component.
    scaled_gap: Vec<Vec<T>>,
    /// Pointwise `(a grad v - y)^T a^{-1} (a grad v - y)`.
    gap_density: Vec<T>,
    flux: T,
    c_f: T,
    mode: ConstantMode,
}

fn check_inputs<T: Real>(v: &ScalarField<T>, y: &VectorField<T>, problem: &EllipticProblem<T>) -> Result<()> {
    v.check_grid(problem.grid())?;
    if y.grid() != problem.grid() || y.dim() != problem.dim() {
        return Err(Error::data("certificate does not match the problem grid and dimension"));
    }
    if !v.is_finite() || y.components().iter().any(|c| !c.is_finite()) {
        return Err(Error::data("non-finite approximation or certificate"));
    }
    Ok(())
}

impl<T: Real> AstralSplit<T> {
    pub fn new(v: &ScalarField<T>, y: &VectorField<T>, problem: &EllipticProblem<T>, mode: ConstantMode) -> Result<Self> {
        check_inputs(v, y, problem)?;
        let c_f = friedrichs_constant(&problem.a, mode)?;
        let grid = *problem.grid();
        let d = problem.dim();
        let div = div_fd(y)?;
        let (f, b, vv) = (problem.f.values(), problem.b_sq.values(), v.values());
        let residual: Vec<T> = (0..grid.len()).map(|n| f[n] - b[n] * vv[n] + div.values()[n]).collect();
        let g = spatial_grad_fd(v);
        let mut scaled_gap = vec![vec![T::zero(); grid.len()]; d];
        let mut gap_density = vec![T::zero(); grid.len()];
        for n in 0..grid.len() {
            let gv = g.at(n);
            let yn = y.at(n);
            let ag = problem.a.apply(n, gv);
            let z = [ag[0] - yn[0], ag[1] - yn[1]];
            let s = problem.a.solve(n, z);
            for i in 0..d {
                scaled_gap[i][n] = s[i];
            }
            gap_density[n] = z[0] * s[0] + z[1] * s[1];
        }
        let weights = grid.trapezoid_weights();
        let terms: Vec<T> = weights.iter().zip(&gap_density).map(|(&w, &q)| w * q).collect();
        let flux = pairwise_sum(&terms);
        Ok(Self { weights, residual, b_sq: b.to_vec(), scaled_gap, gap_density, flux, c_f, mode })
    }

    pub fn friedrichs_c(&self) -> T {
        self.c_f
    }

    /// Pointwise residual `f - b^2 v + div y`.
    pub fn residual(&self) -> &[T] {
        &self.residual
    }

    fn weight(&self, beta: T, b_sq: T) -> T {
        let c2 = self.c_f * self.c_f;
        c2 * (T::one() + beta) / (c2 * b_sq * (T::one() + beta) + T::one())
    }

    fn weight_dbeta(&self, beta: T, b_sq: T) -> T {
        let c2 = self.c_f * self.c_f;
        let den = c2 * b_sq * (T::one() + beta) + T::one();
        c2 / (den * den)
    }

    pub fn residual_term(&self, beta: T) -> T {
        let terms: Vec<T> = (0..self.residual.len())
            .map(|n| self.weights[n] * self.weight(beta, self.b_sq[n]) * self.residual[n] * self.residual[n])
            .collect();
        pairwise_sum(&terms)
    }

    /// `int (a grad v - y)^T a^{-1} (a grad v - y)`.
    pub fn flux_integral(&self) -> T {
        self.flux
    }

    /// `int C^2 R^2`: the residual part per unit `(1 + beta)` when `b = 0`.
    pub fn residual_integral(&self) -> T {
        let c2 = self.c_f * self.c_f;
        let terms: Vec<T> = self.residual.iter().zip(&self.weights).map(|(&r, &w)| w * c2 * r * r).collect();
        pairwise_sum(&terms)
    }

    pub fn flux_term(&self, beta: T) -> T {
        (T::one() + beta) / beta * self.flux
    }

    pub fn total(&self, beta: T) -> T {
        self.residual_term(beta) + self.flux_term(beta)
    }

    pub fn d_total_d_beta(&self, beta: T) -> T {
        let terms: Vec<T> = (0..self.residual.len())
            .map(|n| self.weights[n] * self.weight_dbeta(beta, self.b_sq[n]) * self.residual[n] * self.residual[n])
            .collect();
        pairwise_sum(&terms) - self.flux / (beta * beta)
    }

    pub fn report(&self, beta: T) -> MajorantReport<T> {
        MajorantReport::new(self.residual_term(beta), self.flux_term(beta), self.c_f, self.mode)
    }

    /// Pointwise density of the flux part, before the factor `c`.
    pub fn gap_density(&self) -> &[T] {
        &self.gap_density
    }

    /// Gradient in `y` at fixed `beta`, consistent with the discrete functional.
    pub fn grad_y(&self, grid: &crate::TensorGrid<T>, beta: T) -> Vec<Vec<T>> {
        let two = T::lit(2.0);
        let c = (T::one() + beta) / beta;
        let wr: Vec<T> = (0..self.residual.len())
            .map(|n| two * self.weights[n] * self.weight(beta, self.b_sq[n]) * self.residual[n])
            .collect();
        (0..self.scaled_gap.len())
            .map(|i| {
                let mut g = partial_transpose_values(grid, &wr, i);
                for (n, gn) in g.iter_mut().enumerate() {
                    *gn -= two * c * self.weights[n] * self.scaled_gap[i][n];
                }
                g
            })
            .collect()
    }

    /// Gradient in the nodal values of `v` at fixed `(y, beta)`, given the problem's `a`.
    pub fn grad_v(&self, problem: &EllipticProblem<T>, beta: T) -> Vec<T> {
        let grid = *problem.grid();
        let two = T::lit(2.0);
        let c = (T::one() + beta) / beta;
        let mut out: Vec<T> = (0..grid.len())
            .map(|n| {
                -two * self.weights[n] * self.weight(beta, self.b_sq[n]) * self.residual[n] * self.b_sq[n]
            })
            .collect();
        // d/d(grad v) of z^T a^{-1} z is 2 z = 2 a (a^{-1} z).
        let d = self.scaled_gap.len();
        let mut z = vec![vec![T::zero(); grid.len()]; d];
        for n in 0..grid.len() {
            let s = [self.scaled_gap[0][n], if d > 1 { self.scaled_gap[1][n] } else { T::zero() }];
            let zn = problem.a.apply(n, s);
            for i in 0..d {
                z[i][n] = two * c * self.weights[n] * zn[i];
            }
        }
        for (i, zi) in z.iter().enumerate() {
            for (o, t) in out.iter_mut().zip(partial_transpose_values(&grid, zi, i)) {
                *o += t;
            }
        }
        out
    }
}

/// Majorant value for `(v, y, beta)` in one or two dimensions.
pub fn astral_elliptic<T: Real>(
    v: &ScalarField<T>,
    cert: &Certificate<T>,
    problem: &EllipticProblem<T>,
    mode: ConstantMode,
) -> Result<MajorantReport<T>> {
    Ok(AstralSplit::new(v, &cert.y, problem, mode)?.report(cert.beta))
}

/// Gradients of the majorant with respect to `v`, `y` and `beta`.
#[derive(Clone, Debug)]
pub struct AstralGradient<T> {
    pub v: ScalarField<T>,
    pub y: VectorField<T>,
    pub beta: T,
}

pub fn astral_elliptic_grad<T: Real>(
    v: &ScalarField<T>,
    cert: &Certificate<T>,
    problem: &EllipticProblem<T>,
    mode: ConstantMode,
) -> Result<(MajorantReport<T>, AstralGradient<T>)> {
    let split = AstralSplit::new(v, &cert.y, problem, mode)?;
    let grid = *problem.grid();
    let gy = split
        .grad_y(&grid, cert.beta)
        .into_iter()
        .map(|c| ScalarField::from_vec_unchecked(grid, c))
        .collect();
    let grad = AstralGradient {
        v: ScalarField::from_vec_unchecked(grid, split.grad_v(problem, cert.beta)),
        y: VectorField::new(gy)?,
        beta: split.d_total_d_beta(cert.beta),
    };
    Ok((split.report(cert.beta), grad))
}

/// Scalar-coefficient, reaction-free form
/// `(1 + beta) int [C^2 (f + div y)^2 + sum_i (a d_i v - y_i)^2 / (beta a)]`.
pub fn astral_scalar<T: Real>(
    v: &ScalarField<T>,
    cert: &Certificate<T>,
    problem: &EllipticProblem<T>,
    mode: ConstantMode,
) -> Result<MajorantReport<T>> {
    if !problem.is_scalar() {
        return Err(Error::param("scalar majorant needs a scalar diffusion coefficient"));
    }
    if problem.has_reaction() {
        return Err(Error::param("scalar majorant assumes b = 0"));
    }
    check_inputs(v, &cert.y, problem)?;
    let c_f = friedrichs_constant(&problem.a, mode)?;
    let grid = *problem.grid();
    let beta = cert.beta;
    let div = div_fd(&cert.y)?;
    let g = spatial_grad_fd(v);
    let a = problem.a.a11().values();
    let w = grid.trapezoid_weights();
    let res: Vec<T> = (0..grid.len())
        .map(|n| {
            let r = problem.f.values()[n] + div.values()[n];
            w[n] * r * r
        })
        .collect();
    let flux: Vec<T> = (0..grid.len())
        .map(|n| {
            let s: T = (0..problem.dim())
                .map(|i| {
                    let d = a[n] * g.component(i).values()[n] - cert.y.component(i).values()[n];
                    d * d
                })
                .sum();
            w[n] * s / a[n]
        })
        .collect();
    let one_beta = T::one() + beta;
    Ok(MajorantReport::new(
        one_beta * c_f * c_f * pairwise_sum(&res),
        one_beta / beta * pairwise_sum(&flux),
        c_f,
        mode,
    ))
}

/// One-dimensional bound `||y - a v'||_{1/a} + C_F ||f + y' - b^2 v||`.
pub fn astral_1d<T: Real>(
    v: &ScalarField<T>,
    y: &ScalarField<T>,
    problem: &EllipticProblem<T>,
    mode: ConstantMode,
) -> Result<T> {
    if problem.dim() != 1 {
        return Err(Error::param("one-dimensional bound on a two-dimensional problem"));
    }
    let yf = VectorField::new(vec![y.clone()])?;
    check_inputs(v, &yf, problem)?;
    let c_f = friedrichs_constant(&problem.a, mode)?;
    let grid = *problem.grid();
    let w = grid.trapezoid_weights();
    let dv = crate::field::partial(v, 0);
    let dy = crate::field::partial(y, 0);
    let a = problem.a.a11().values();
    let flux: Vec<T> = (0..grid.len())
        .map(|n| {
            let d = y.values()[n] - a[n] * dv.values()[n];
            w[n] * d * d / a[n]
        })
        .collect();
    let res: Vec<T> = (0..grid.len())
        .map(|n| {
            let r = problem.f.values()[n] + dy.values()[n] - problem.b_sq.values()[n] * v.values()[n];
            w[n] * r * r
        })
        .collect();
    Ok(pairwise_sum(&flux).sqrt() + c_f * pairwise_sum(&res).sqrt())
}
