use rand_distr::{Distribution, StandardNormal};

use crate::field::{ScalarField, TensorGrid};
use crate::rng::{role, substream};
use crate::{Error, GridKind, Real, Result};

/// Default number of Fourier modes beyond the constant one.
pub const DEFAULT_MODES: usize = 150;

/// `u_t + a u_x = u_xx + f` on `[0, 1] x [0, T]`, `u(0, t) = u(1, t) = 0`, `u(x, 0) = phi(x)`,
/// with manufactured solution `u = u~(x, t) sin(pi x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvDiffProblem<T> {
    pub speed: T,
    pub f: ScalarField<T>,
    pub phi: ScalarField<T>,
    pub exact_solution: ScalarField<T>,
    /// `(Re c_k, Im c_k)` for `k = 0..=N`.
    coeffs: Vec<(T, T)>,
    seed: u64,
}

/// Values of `u~`, `u~_x`, `u~_t` at one point.
#[derive(Clone, Copy, Debug)]
struct Envelope<T> {
    v: T,
    dx: T,
    dt: T,
}

impl<T: Real> ConvDiffProblem<T> {
    /// Builds a problem from explicit coefficients `c_k` and speed.
    pub fn from_coefficients(grid: TensorGrid<T>, speed: T, coeffs: Vec<(T, T)>, seed: u64) -> Result<Self> {
        if grid.kind() != GridKind::SpaceTime {
            return Err(Error::param("convection-diffusion needs a space-time grid"));
        }
        if coeffs.is_empty() {
            return Err(Error::param("at least one Fourier mode is required"));
        }
        let mut p = Self {
            speed,
            f: ScalarField::zeros(grid),
            phi: ScalarField::zeros(TensorGrid::interval(grid.level())?),
            exact_solution: ScalarField::zeros(grid),
            coeffs,
            seed,
        };
        p.f = ScalarField::from_fn(grid, |q| p.source(q[0], q[1]));
        p.exact_solution = ScalarField::from_fn(grid, |q| p.u(q[0], q[1]));
        p.phi = ScalarField::from_fn(*p.phi.grid(), |q| p.u(q[0], T::zero()));
        Ok(p)
    }

    pub fn grid(&self) -> &TensorGrid<T> {
        self.f.grid()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn envelope(&self, x: T, t: T) -> Envelope<T> {
        let tau = T::TAU();
        let mut e = Envelope { v: T::zero(), dx: T::zero(), dt: T::zero() };
        for (k, &(cr, ci)) in self.coeffs.iter().enumerate() {
            let w = tau * T::from_usize_lossy(k);
            let decay = (-(w * w) * t).exp();
            if decay == T::zero() {
                break;
            }
            // Phase 2 pi k (x - a t), reduced before scaling.
            let kf = T::from_usize_lossy(k);
            let theta = tau * (kf * x).fract() - w * self.speed * t;
            let (s, c) = theta.sin_cos();
            let (re, im) = ((cr * c - ci * s) * decay, (cr * s + ci * c) * decay);
            e.v += re;
            e.dx += -w * im;
            e.dt += -(w * w) * re + w * self.speed * im;
        }
        e
    }

    pub fn u(&self, x: T, t: T) -> T {
        self.envelope(x, t).v * (T::PI() * x).sin()
    }

    pub fn u_x(&self, x: T, t: T) -> T {
        let e = self.envelope(x, t);
        let (s, c) = (T::PI() * x).sin_cos();
        e.dx * s + T::PI() * e.v * c
    }

    pub fn u_t(&self, x: T, t: T) -> T {
        self.envelope(x, t).dt * (T::PI() * x).sin()
    }

    /// `f = u~ (pi^2 sin(pi x) + a pi cos(pi x)) - 2 pi u~_x cos(pi x)`.
    pub fn source(&self, x: T, t: T) -> T {
        let e = self.envelope(x, t);
        let pi = T::PI();
        let (s, c) = (pi * x).sin_cos();
        e.v * (pi * pi * s + self.speed * pi * c) - T::lit(2.0) * pi * e.dx * c
    }
}

/// Samples `c_k = (x + i y) / (1 + (pi k / 5)^2)^2` and `a ~ 0.01 N(0, 1)`.
pub fn gen_convdiff<T: Real>(seed: u64, grid: TensorGrid<T>, modes: usize) -> Result<ConvDiffProblem<T>> {
    let mut rng = substream(&[seed, role::CONVDIFF]);
    let speed: f64 = StandardNormal.sample(&mut rng);
    let coeffs = (0..=modes)
        .map(|k| {
            let x: f64 = StandardNormal.sample(&mut rng);
            let y: f64 = StandardNormal.sample(&mut rng);
            let d = (1.0 + (std::f64::consts::PI * k as f64 / 5.0).powi(2)).powi(2);
            (T::lit(x / d), T::lit(y / d))
        })
        .collect();
    ConvDiffProblem::from_coefficients(grid, T::lit(0.01 * speed), coeffs, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid() -> TensorGrid<f64> {
        TensorGrid::space_time(5, 1.0).unwrap()
    }

    #[test]
    fn vanishes_on_spatial_boundary_and_matches_phi() {
        let p = gen_convdiff(3, grid(), DEFAULT_MODES).unwrap();
        let g = *p.grid();
        let m = g.nodes_per_axis();
        for j in 0..m {
            assert!(p.exact_solution.values()[g.flat([0, j])].abs() < 1e-15);
            assert!(p.exact_solution.values()[g.flat([m - 1, j])].abs() < 1e-12);
        }
        for i in 0..m {
            assert_eq!(p.phi.values()[i], p.exact_solution.values()[g.flat([i, 0])]);
        }
    }

    #[test]
    fn single_real_mode_is_stationary() {
        let a = 0.03;
        let p = ConvDiffProblem::from_coefficients(grid(), a, vec![(1.7, 0.0)], 0).unwrap();
        for &(x, t) in &[(0.2, 0.0), (0.5, 0.4), (0.9, 1.0)] {
            assert!((p.u(x, t) - 1.7 * (PI * x).sin()).abs() < 1e-15);
            let want = 1.7 * (PI * PI * (PI * x).sin() + a * PI * (PI * x).cos());
            assert!((p.source(x, t) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn manufactured_solution_satisfies_the_equation() {
        let p = gen_convdiff(11, grid(), 20).unwrap();
        let e = 1e-4;
        for &(x, t) in &[(0.3, 0.05), (0.71, 0.2), (0.5, 0.01)] {
            let uxx = (p.u_x(x + e, t) - p.u_x(x - e, t)) / (2.0 * e);
            let lhs = p.u_t(x, t) + p.speed * p.u_x(x, t) - uxx;
            assert!((lhs - p.source(x, t)).abs() < 1e-5 * (1.0 + lhs.abs()), "{lhs} vs {}", p.source(x, t));
            let et = 1e-6;
            let ut = (p.u(x, t + et) - p.u(x, t - et)) / (2.0 * et);
            assert!((ut - p.u_t(x, t)).abs() < 1e-5 * (1.0 + ut.abs()), "{x} {t}: {ut} vs {}", p.u_t(x, t));
        }
    }

    #[test]
    fn rejects_spatial_grid() {
        assert!(gen_convdiff(0, TensorGrid::<f64>::square(4).unwrap(), 3).is_err());
    }
}
