//! Tightening the majorant over certificates for a fixed approximate solution,
//! and the bound-quality metrics reported for datasets.

use serde::{Deserialize, Serialize};

use crate::field::{partial_transpose_values, partial_values, weighted_normal_diagonal, ScalarField, VectorField};
use crate::majorant::{astral_elliptic_grad, AstralSplit, Certificate, ConstantMode, MajorantReport};
use crate::problems::EllipticProblem;
use crate::solver::pcg;
use crate::{Error, Real, Result};

/// Returned instead of `0` or infinity when one part of the split vanishes.
pub const BETA_FLOOR: f64 = 1e-8;
pub const BETA_CAP: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YSolver {
    /// Conjugate gradients on the exact quadratic subproblem.
    Quadratic { tol: f64, max_iter: usize },
    Adam { lr: f64, steps: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaSolver {
    /// `sqrt(B / A)` when `b = 0`; golden section otherwise.
    ClosedForm,
    /// Golden-section search on `log beta` over `[lo, hi]`.
    GoldenSection { lo: f64, hi: f64, tol: f64 },
}

impl BetaSolver {
    pub const DEFAULT_GOLDEN: BetaSolver = BetaSolver::GoldenSection { lo: BETA_FLOOR, hi: BETA_CAP, tol: 1e-10 };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    pub max_outer_iters: usize,
    pub y_solver: YSolver,
    pub beta_solver: BetaSolver,
    /// Stop once the relative decrease of the total over one outer iteration falls below this.
    pub rel_tol: f64,
    pub mode: ConstantMode,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 20,
            y_solver: YSolver::Quadratic { tol: 1e-10, max_iter: 20_000 },
            beta_solver: BetaSolver::ClosedForm,
            rel_tol: 1e-9,
            mode: ConstantMode::Safe,
        }
    }
}

impl CertifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || !(self.rel_tol > 0.0) {
            return Err(Error::param("certify needs at least one iteration and a positive tolerance"));
        }
        match self.y_solver {
            YSolver::Quadratic { tol, max_iter } if tol > 0.0 && max_iter > 0 => {}
            YSolver::Adam { lr, steps } if lr > 0.0 && steps > 0 => {}
            _ => return Err(Error::param("invalid flux solver settings")),
        }
        if let BetaSolver::GoldenSection { lo, hi, tol } = self.beta_solver {
            if !(lo > 0.0 && hi > lo && tol > 0.0) {
                return Err(Error::param("invalid golden-section bracket"));
            }
        }
        Ok(())
    }
}

/// Minimiser of `(1 + beta) A + (1 + beta) / beta B`.
pub fn optimal_beta<T: Real>(a_res: T, b_flux: T) -> T {
    if !(a_res > T::zero()) {
        return T::lit(BETA_CAP);
    }
    if !(b_flux > T::zero()) {
        return T::lit(BETA_FLOOR);
    }
    (b_flux / a_res).sqrt().max(T::lit(BETA_FLOOR)).min(T::lit(BETA_CAP))
}

/// Golden-section minimisation of a unimodal function of `log beta`.
pub fn golden_section_beta<T: Real>(total: impl Fn(T) -> T, lo: T, hi: T, tol: T) -> T {
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (total(c.exp()), total(d.exp()));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = total(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = total(d.exp());
        }
    }
    ((a + b) / T::lit(2.0)).exp()
}

/// Gradient of the majorant with respect to the flux certificate.
pub fn majorant_grad_y<T: Real>(
    v: &ScalarField<T>,
    cert: &Certificate<T>,
    problem: &EllipticProblem<T>,
    mode: ConstantMode,
) -> Result<VectorField<T>> {
    Ok(astral_elliptic_grad(v, cert, problem, mode)?.1.y)
}

#[derive(Clone, Debug)]
pub struct CertifyOutcome<T> {
    pub certificate: Certificate<T>,
    pub report: MajorantReport<T>,
    /// Total before the first and after every outer iteration.
    pub trace: Vec<T>,
}

/// Failure of the flux solve, with the best certificate reached so far.
#[derive(Clone, Debug)]
pub struct CertifyFailure<T> {
    pub error: Error,
    pub partial: Option<Certificate<T>>,
}

impl<T> From<Error> for CertifyFailure<T> {
    fn from(error: Error) -> Self {
        Self { error, partial: None }
    }
}

impl<T> From<CertifyFailure<T>> for Error {
    fn from(f: CertifyFailure<T>) -> Self {
        f.error
    }
}

/// Best `beta` for a fixed flux under the configured search.
pub fn tight_beta<T: Real>(split: &AstralSplit<T>, problem: &EllipticProblem<T>, solver: BetaSolver) -> T {
    match solver {
        BetaSolver::ClosedForm if !problem.has_reaction() => {
            optimal_beta(split.residual_integral(), split.flux_integral())
        }
        BetaSolver::ClosedForm => {
            golden_section_beta(|b| split.total(b), T::lit(BETA_FLOOR), T::lit(BETA_CAP), T::lit(1e-10))
        }
        BetaSolver::GoldenSection { lo, hi, tol } => {
            golden_section_beta(|b| split.total(b), T::lit(lo), T::lit(hi), T::lit(tol))
        }
    }
}

/// One exact minimisation of the quadratic flux subproblem at fixed `beta`.
fn quadratic_y_step<T: Real>(
    split: &AstralSplit<T>,
    y: &VectorField<T>,
    problem: &EllipticProblem<T>,
    beta: T,
    tol: f64,
    max_iter: usize,
) -> Result<VectorField<T>> {
    let grid = *problem.grid();
    let d = problem.dim();
    let n = grid.len();
    let w = grid.trapezoid_weights();
    let c_f = split.friedrichs_c();
    let c2 = c_f * c_f;
    let c = (T::one() + beta) / beta;
    let ww: Vec<T> = (0..n)
        .map(|k| {
            let b = problem.b_sq.values()[k];
            w[k] * c2 * (T::one() + beta) / (c2 * b * (T::one() + beta) + T::one())
        })
        .collect();
    let inv: Vec<(T, T, T)> = (0..n).map(|k| problem.a.inverse_at(k)).collect();
    let apply = |x: &[T], out: &mut [T]| {
        let mut div = vec![T::zero(); n];
        for i in 0..d {
            for (dv, t) in div.iter_mut().zip(partial_values(&grid, &x[i * n..(i + 1) * n], i)) {
                *dv += t;
            }
        }
        let wdiv: Vec<T> = div.iter().zip(&ww).map(|(&a, &b)| a * b).collect();
        for i in 0..d {
            let dt = partial_transpose_values(&grid, &wdiv, i);
            for k in 0..n {
                let (i11, i12, i22) = inv[k];
                let ainv_x = if d == 1 {
                    i11 * x[k]
                } else if i == 0 {
                    i11 * x[k] + i12 * x[n + k]
                } else {
                    i12 * x[k] + i22 * x[n + k]
                };
                out[i * n + k] = dt[k] + c * w[k] * ainv_x;
            }
        }
    };
    let mut diag = vec![T::zero(); d * n];
    for i in 0..d {
        let dd = weighted_normal_diagonal(&grid, i, &ww);
        for k in 0..n {
            let (i11, _, i22) = inv[k];
            diag[i * n + k] = dd[k] + c * w[k] * if i == 0 { i11 } else { i22 };
        }
    }
    let g = split.grad_y(&grid, beta);
    let rhs: Vec<T> = g.iter().flatten().map(|&x| -x / T::lit(2.0)).collect();
    let out = pcg(apply, &diag, &rhs, vec![T::zero(); d * n], T::lit(tol), max_iter)?;
    let flat: Vec<T> = y.flatten().iter().zip(&out.x).map(|(&a, &b)| a + b).collect();
    VectorField::from_flat(grid, d, &flat)
}

fn adam_y_steps<T: Real>(
    v: &ScalarField<T>,
    y: &VectorField<T>,
    problem: &EllipticProblem<T>,
    beta: T,
    mode: ConstantMode,
    lr: f64,
    steps: usize,
) -> Result<VectorField<T>> {
    let grid = *problem.grid();
    let d = problem.dim();
    let mut theta = y.flatten();
    let mut m = vec![T::zero(); theta.len()];
    let mut s = vec![T::zero(); theta.len()];
    let (b1, b2, eps) = (T::lit(0.9), T::lit(0.999), T::lit(1e-12));
    let mut best = (T::infinity(), theta.clone());
    for t in 1..=steps {
        let cur = VectorField::from_flat(grid, d, &theta)?;
        let split = AstralSplit::new(v, &cur, problem, mode)?;
        let total = split.total(beta);
        if total < best.0 {
            best = (total, theta.clone());
        }
        let g: Vec<T> = split.grad_y(&grid, beta).into_iter().flatten().collect();
        let (bc1, bc2) = (T::one() - b1.powi(t as i32), T::one() - b2.powi(t as i32));
        for k in 0..theta.len() {
            m[k] = b1 * m[k] + (T::one() - b1) * g[k];
            s[k] = b2 * s[k] + (T::one() - b2) * g[k] * g[k];
            theta[k] -= T::lit(lr) * (m[k] / bc1) / ((s[k] / bc2).sqrt() + eps);
        }
    }
    let last = AstralSplit::new(v, &VectorField::from_flat(grid, d, &theta)?, problem, mode)?.total(beta);
    if last < best.0 {
        best = (last, theta);
    }
    VectorField::from_flat(grid, d, &best.1)
}

/// Alternating minimisation of the majorant over `(y, beta)` for fixed `v`,
/// starting from `y = a grad v`.
pub fn certify_direct<T: Real>(
    v: &ScalarField<T>,
    problem: &EllipticProblem<T>,
    config: &CertifyConfig,
) -> std::result::Result<CertifyOutcome<T>, CertifyFailure<T>> {
    config.validate()?;
    let mode = config.mode;
    let mut cert = Certificate::naive(v, problem, T::one())?;
    let mut split = AstralSplit::new(v, &cert.y, problem, mode)?;
    let mut total = split.total(cert.beta);
    let mut trace = vec![total];
    for _ in 0..config.max_outer_iters {
        let y_new = match config.y_solver {
            YSolver::Quadratic { tol, max_iter } => quadratic_y_step(&split, &cert.y, problem, cert.beta, tol, max_iter),
            YSolver::Adam { lr, steps } => adam_y_steps(v, &cert.y, problem, cert.beta, mode, lr, steps),
        };
        let y_new = y_new.map_err(|error| CertifyFailure { error, partial: Some(cert.clone()) })?;
        let split_new = AstralSplit::new(v, &y_new, problem, mode)?;
        let mut beta_new = tight_beta(&split_new, problem, config.beta_solver);
        if split_new.total(beta_new) > split_new.total(cert.beta) {
            beta_new = cert.beta;
        }
        let total_new = split_new.total(beta_new);
        if !(total_new <= total) {
            trace.push(total);
            break;
        }
        let decrease = (total - total_new) / total.max(T::min_positive_value());
        cert = Certificate { y: y_new, beta: beta_new };
        split = split_new;
        total = total_new;
        trace.push(total);
        if decrease < T::lit(config.rel_tol) {
            break;
        }
    }
    let report = split.report(cert.beta);
    Ok(CertifyOutcome { certificate: cert, report, trace })
}

/// Per-sample and dataset-level comparison of bounds with true errors.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundMetrics<T> {
    pub errors: Vec<T>,
    pub bounds: Vec<T>,
    /// `bound_i / error_i` (infinite when the error vanishes and the bound does not).
    pub ratios: Vec<T>,
    pub mean_ratio: T,
    pub median_ratio: T,
    /// Pearson correlation of `(error, bound)`; absent for constant inputs or one sample.
    pub correlation: Option<T>,
}

pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Option<T> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == T::zero() || syy == T::zero() {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).max(-T::one()).min(T::one()))
}

pub fn median<T: Real>(xs: &[T]) -> T {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let k = s.len();
    if k == 0 {
        T::nan()
    } else if k % 2 == 1 {
        s[k / 2]
    } else {
        (s[k / 2 - 1] + s[k / 2]) / T::lit(2.0)
    }
}

pub fn bound_metrics<T: Real>(errors: &[T], bounds: &[T]) -> Result<BoundMetrics<T>> {
    if errors.len() != bounds.len() || errors.is_empty() {
        return Err(Error::data("errors and bounds need equal, non-zero lengths"));
    }
    if errors.iter().chain(bounds).any(|&x| !(x >= T::zero())) {
        return Err(Error::data("errors and bounds must be non-negative"));
    }
    let ratios: Vec<T> = errors
        .iter()
        .zip(bounds)
        .map(|(&e, &b)| if e == T::zero() && b == T::zero() { T::one() } else { b / e })
        .collect();
    let mean_ratio = ratios.iter().copied().sum::<T>() / T::from_usize_lossy(ratios.len());
    Ok(BoundMetrics {
        errors: errors.to_vec(),
        bounds: bounds.to_vec(),
        median_ratio: median(&ratios),
        mean_ratio,
        correlation: pearson(errors, bounds),
        ratios,
    })
}
