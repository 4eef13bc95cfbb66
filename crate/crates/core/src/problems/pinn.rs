use rand_distr::{Distribution, Exp, StandardNormal};

use super::elliptic::{EllipticProblem, Family, SampleKey};
use crate::field::{grad_fd, ScalarField, SpdTensorField, TensorGrid};
use crate::rng::{role, substream};
use crate::{Error, Real, Result};

/// Largest Fourier mode index of the random field, per axis and sign.
pub const GRF_MODES: i32 = 16;
/// Mean of the exponential divisor applied to the rescaled field.
pub const SCALE_MEAN: f64 = 100.0;
/// Lattice level used to bound `inf a` over the continuous domain.
const INF_LATTICE_LEVEL: u32 = 8;

/// Manufactured problem `-div(a grad u) = f` with `u = x1(1-x1)x2(1-x2)` and a
/// random smooth scalar diffusion, evaluable at arbitrary points.
#[derive(Clone, Debug)]
pub struct PinnProblem<T> {
    /// `(m, n, Re c, Im c)` of the periodic field `g`.
    modes: Vec<(T, T, T, T)>,
    g_min: T,
    g_max: T,
    divisor: T,
    inf_a: T,
    seed: u64,
}

impl<T: Real> PinnProblem<T> {
    /// Samples the coefficient and fixes its affine rescaling on the nodes of `grid`.
    pub fn sample(seed: u64, grid: &TensorGrid<T>) -> Result<Self> {
        if grid.kind() != crate::GridKind::Square {
            return Err(Error::param("the manufactured PiNN problem is two-dimensional"));
        }
        let mut rng = substream(&[seed, role::GRF]);
        let four_pi_sq = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        let mut modes = Vec::new();
        for m in -GRF_MODES..=GRF_MODES {
            for n in -GRF_MODES..=GRF_MODES {
                let xi: f64 = StandardNormal.sample(&mut rng);
                let eta: f64 = StandardNormal.sample(&mut rng);
                let decay = (1.0 + four_pi_sq * f64::from(m * m + n * n)).powi(-2);
                modes.push((T::lit(f64::from(m)), T::lit(f64::from(n)), T::lit(xi * decay), T::lit(eta * decay)));
            }
        }
        let mut scale_rng = substream(&[seed, role::SCALE]);
        let exp = Exp::new(1.0 / SCALE_MEAN).map_err(|e| Error::param(e.to_string()))?;
        let divisor = T::lit(exp.sample(&mut scale_rng).max(f64::MIN_POSITIVE));

        let mut p = Self { modes, g_min: T::zero(), g_max: T::one(), divisor, inf_a: T::zero(), seed };
        let g = p.g_lattice(grid.level());
        p.g_min = g.iter().copied().fold(T::infinity(), T::min);
        p.g_max = g.iter().copied().fold(T::neg_infinity(), T::max);
        if !(p.g_max > p.g_min) {
            return Err(Error::data("random field is constant on the grid"));
        }

        // Nodal minimum on a fine lattice, lowered by the worst-case curvature
        // dip inside a lattice cell, bounds the continuous infimum from below.
        let lattice = p.g_lattice(INF_LATTICE_LEVEL.max(grid.level()));
        let lat_min = lattice.iter().copied().fold(T::infinity(), T::min);
        let h = T::one() / T::lit(f64::from(1u32 << INF_LATTICE_LEVEL.max(grid.level())));
        let dip = p.hessian_bound() * h * h / T::lit(4.0);
        p.inf_a = p.rescale(lat_min - dip);
        Ok(p)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Exponential divisor `s`.
    pub fn divisor(&self) -> T {
        self.divisor
    }

    /// Lower bound on `inf a` over the closed unit square.
    pub fn inf_a(&self) -> T {
        self.inf_a
    }

    fn rescale(&self, g: T) -> T {
        (T::one() + T::lit(5.0) * (g - self.g_min) / (self.g_max - self.g_min)) / self.divisor
    }

    fn hessian_bound(&self) -> T {
        let tau_sq = T::TAU() * T::TAU();
        self.modes.iter().map(|&(m, n, re, im)| (re * re + im * im).sqrt() * tau_sq * (m * m + n * n)).sum()
    }

    /// `g` on all nodes of the square lattice of the given level, separably.
    fn g_lattice(&self, level: u32) -> Vec<T> {
        let k = (2 * GRF_MODES + 1) as usize;
        let nodes = (1usize << level) + 1;
        let h = 1.0 / (1u64 << level) as f64;
        // e[i][m] = exp(2 pi i m x_i), from exact phase reduction.
        let table: Vec<(T, T)> = (0..nodes)
            .flat_map(|i| {
                (-GRF_MODES..=GRF_MODES).map(move |m| {
                    let phase = (f64::from(m) * i as f64 * h).rem_euclid(1.0);
                    let th = std::f64::consts::TAU * phase;
                    (T::lit(th.cos()), T::lit(th.sin()))
                })
            })
            .collect();
        let mut out = vec![T::zero(); nodes * nodes];
        let mut inner = vec![(T::zero(), T::zero()); k];
        for j in 0..nodes {
            let ej = &table[j * k..(j + 1) * k];
            for (mi, slot) in inner.iter_mut().enumerate() {
                let (mut re, mut im) = (T::zero(), T::zero());
                for (ni, &(c, s)) in ej.iter().enumerate() {
                    let (_, _, cr, ci) = self.modes[mi * k + ni];
                    re += cr * c - ci * s;
                    im += cr * s + ci * c;
                }
                *slot = (re, im);
            }
            for i in 0..nodes {
                let ei = &table[i * k..(i + 1) * k];
                let mut acc = T::zero();
                for (&(c, s), &(re, im)) in ei.iter().zip(&inner) {
                    acc += re * c - im * s;
                }
                out[i * nodes + j] = acc;
            }
        }
        out
    }

    fn g_and_grad(&self, p: [T; 2]) -> (T, [T; 2]) {
        let tau = T::TAU();
        let (mut g, mut gx, mut gy) = (T::zero(), T::zero(), T::zero());
        for &(m, n, re, im) in &self.modes {
            let th = tau * (m * p[0] + n * p[1]).fract();
            let (s, c) = th.sin_cos();
            g += re * c - im * s;
            let d = -(re * s + im * c) * tau;
            gx += d * m;
            gy += d * n;
        }
        (g, [gx, gy])
    }

    pub fn a(&self, p: [T; 2]) -> T {
        self.rescale(self.g_and_grad(p).0)
    }

    pub fn grad_a(&self, p: [T; 2]) -> [T; 2] {
        let (_, [gx, gy]) = self.g_and_grad(p);
        let k = T::lit(5.0) / ((self.g_max - self.g_min) * self.divisor);
        [k * gx, k * gy]
    }

    pub fn u(&self, p: [T; 2]) -> T {
        bubble(p[0]) * bubble(p[1])
    }

    pub fn grad_u(&self, p: [T; 2]) -> [T; 2] {
        [dbubble(p[0]) * bubble(p[1]), bubble(p[0]) * dbubble(p[1])]
    }

    pub fn lap_u(&self, p: [T; 2]) -> T {
        let two = T::lit(2.0);
        -two * (bubble(p[0]) + bubble(p[1]))
    }

    /// Source with analytic `grad a`.
    pub fn f(&self, p: [T; 2]) -> T {
        let ga = self.grad_a(p);
        let gu = self.grad_u(p);
        -(ga[0] * gu[0] + ga[1] * gu[1]) - self.a(p) * self.lap_u(p)
    }

    /// Grid problem whose source uses the finite-difference gradient of the nodal `a`.
    pub fn discretize(&self, grid: TensorGrid<T>) -> Result<EllipticProblem<T>> {
        let g = self.g_lattice(grid.level());
        let a = ScalarField::new(grid, g.into_iter().map(|v| self.rescale(v)).collect())?;
        let ga = grad_fd(&a);
        let f_vals = (0..grid.len())
            .map(|n| {
                let p = grid.point(n);
                let gu = self.grad_u(p);
                let [ax, ay] = ga.at(n);
                -(ax * gu[0] + ay * gu[1]) - a.values()[n] * self.lap_u(p)
            })
            .collect();
        let f = ScalarField::new(grid, f_vals)?;
        let u = ScalarField::from_fn(grid, |p| self.u(p));
        EllipticProblem::new(
            SpdTensorField::scalar(a),
            ScalarField::zeros(grid),
            f,
            Some(u),
            Family::PinnManufactured,
            Some(SampleKey::new(self.seed, 0)),
        )
    }
}

fn bubble<T: Real>(x: T) -> T {
    x * (T::one() - x)
}

fn dbubble<T: Real>(x: T) -> T {
    T::one() - T::lit(2.0) * x
}

pub fn gen_pinn_problem<T: Real>(seed: u64, grid: TensorGrid<T>) -> Result<EllipticProblem<T>> {
    PinnProblem::sample(seed, &grid)?.discretize(grid)
}
