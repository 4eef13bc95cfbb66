use super::CsrMatrix;
use crate::real::pairwise_sum;
use crate::{Error, Real, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Solution and convergence record of a CG run.
#[derive(Clone, Debug)]
pub struct CgOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// Final `||b - Ax|| / ||b||`.
    pub relative_residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let terms: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x * y).collect();
    pairwise_sum(&terms)
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive definite operator.
///
/// `apply` computes `out = A x`; `x0` is the starting guess.
pub fn pcg<T: Real>(
    apply: impl Fn(&[T], &mut [T]),
    diag: &[T],
    rhs: &[T],
    x0: Vec<T>,
    tol: T,
    max_iter: usize,
) -> Result<CgOutcome<T>> {
    let n = rhs.len();
    if diag.len() != n || x0.len() != n {
        return Err(Error::data("dimension mismatch in conjugate gradients"));
    }
    if diag.iter().any(|&d| !(d > T::zero())) {
        return Err(Error::Coercivity("non-positive diagonal entry".into()));
    }
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == T::zero() {
        return Ok(CgOutcome { x: vec![T::zero(); n], iterations: 0, relative_residual: T::zero() });
    }
    let mut x = x0;
    let mut ax = vec![T::zero(); n];
    apply(&x, &mut ax);
    let mut r: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let mut z: Vec<T> = r.iter().zip(diag).map(|(&r, &d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut res = dot(&r, &r).sqrt() / b_norm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(CgOutcome { x, iterations: it, relative_residual: res });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::Coercivity("operator is not positive definite".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / b_norm;
    }
    if res <= tol {
        return Ok(CgOutcome { x, iterations: max_iter, relative_residual: res });
    }
    Err(Error::Iteration { iterations: max_iter, residual: res.as_f64() })
}

/// Solves `A x = rhs` from a zero start.
pub fn solve_spd<T: Real>(a: &CsrMatrix<T>, rhs: &[T], tol: T, max_iter: usize) -> Result<CgOutcome<T>> {
    if a.dim() != rhs.len() {
        return Err(Error::data("matrix and right-hand side sizes differ"));
    }
    pcg(|x, out| a.matvec_into(x, out), &a.diagonal(), rhs, vec![T::zero(); rhs.len()], tol, max_iter)
}
