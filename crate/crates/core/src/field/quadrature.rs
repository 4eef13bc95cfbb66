//! Integration over the grid domain: trapezoid on nodes, tensor Gauss-Legendre,
//! and counter-based Monte Carlo.

use super::{interpolate, ScalarField, TensorGrid};
use crate::real::pairwise_sum;
use crate::rng::counter_uniform;
use crate::{Error, Real, Result};

pub const DEFAULT_GAUSS_POINTS: usize = 16;
pub const MAX_GAUSS_POINTS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    Trapezoid,
    /// Points per axis.
    Gauss(usize),
    MonteCarlo { points: usize, seed: u64 },
}

impl Default for Rule {
    fn default() -> Self {
        Rule::Gauss(DEFAULT_GAUSS_POINTS)
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=MAX_GAUSS_POINTS).contains(&n) {
        return Err(Error::param(format!("gauss order {n} outside [1, {MAX_GAUSS_POINTS}]")));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x) and P_n'(x).
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        // Map [-1, 1] -> [0, 1].
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    Ok((nodes, weights))
}

/// Points and weights approximating integration over the grid's domain.
#[derive(Clone, Debug)]
pub struct QuadratureSet<T> {
    pub points: Vec<[T; 2]>,
    pub weights: Vec<T>,
}

impl<T: Real> QuadratureSet<T> {
    pub fn new(grid: &TensorGrid<T>, rule: Rule) -> Result<Self> {
        let axes = grid.axes();
        match rule {
            Rule::Trapezoid => Ok(Self { points: grid.points().collect(), weights: grid.trapezoid_weights() }),
            Rule::Gauss(n) => {
                let (x, w) = gauss_legendre_unit(n)?;
                let mut points = Vec::with_capacity(n.pow(axes as u32));
                let mut weights = Vec::with_capacity(points.capacity());
                let (l0, l1) = (grid.extent(0), grid.extent(1));
                if axes == 1 {
                    for i in 0..n {
                        points.push([T::lit(x[i]) * l0, T::zero()]);
                        weights.push(T::lit(w[i]) * l0);
                    }
                } else {
                    for i in 0..n {
                        for j in 0..n {
                            points.push([T::lit(x[i]) * l0, T::lit(x[j]) * l1]);
                            weights.push(T::lit(w[i] * w[j]) * l0 * l1);
                        }
                    }
                }
                Ok(Self { points, weights })
            }
            Rule::MonteCarlo { points: m, seed } => {
                if m == 0 {
                    return Err(Error::param("monte carlo needs at least one point"));
                }
                let volume = (0..axes).fold(T::one(), |v, a| v * grid.extent(a));
                let w = volume / T::from_usize_lossy(m);
                let points = (0..m as u64)
                    .map(|i| {
                        let mut p = [T::zero(); 2];
                        for (a, c) in p.iter_mut().enumerate().take(axes) {
                            *c = T::lit(counter_uniform(seed, i, a as u64)) * grid.extent(a);
                        }
                        p
                    })
                    .collect();
                Ok(Self { points, weights: vec![w; m] })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `sum_q w_q g_q` with pairwise summation.
    pub fn weighted_sum(&self, values: &[T]) -> T {
        let terms: Vec<T> = self.weights.iter().zip(values).map(|(&w, &v)| w * v).collect();
        pairwise_sum(&terms)
    }
}

/// Integrates a nodal field. Gauss and Monte Carlo sample its multilinear interpolant.
pub fn integrate<T: Real>(field: &ScalarField<T>, rule: Rule) -> Result<T> {
    if field.is_empty() || !field.is_finite() {
        return Err(Error::data("cannot integrate an empty or non-finite field"));
    }
    if rule == Rule::Trapezoid {
        let grid = field.grid();
        let terms: Vec<T> = field.values().iter().enumerate().map(|(n, &v)| grid.trapezoid_weight(n) * v).collect();
        return Ok(pairwise_sum(&terms));
    }
    let q = QuadratureSet::new(field.grid(), rule)?;
    let values: Vec<T> = q.points.iter().map(|&p| interpolate(field, p)).collect();
    Ok(q.weighted_sum(&values))
}

/// Integrates an analytic integrand over the domain of `grid`.
///
/// With [`Rule::Trapezoid`] the integrand is sampled at the grid nodes.
pub fn integrate_fn<T: Real>(grid: &TensorGrid<T>, rule: Rule, f: impl Fn([T; 2]) -> T) -> Result<T> {
    let q = QuadratureSet::new(grid, rule)?;
    let values: Vec<T> = q.points.iter().map(|&p| f(p)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("integrand is not finite"));
    }
    Ok(q.weighted_sum(&values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_constant_and_linear() {
        let g = TensorGrid::<f64>::square(4).unwrap();
        assert_eq!(integrate(&ScalarField::constant(g, 1.0), Rule::Trapezoid).unwrap(), 1.0);
        let l = TensorGrid::<f64>::interval(6).unwrap();
        let x = ScalarField::from_fn(l, |p| p[0]);
        assert_eq!(integrate(&x, Rule::Trapezoid).unwrap(), 0.5);
    }

    #[test]
    fn trapezoid_quadratic_matches_direct_sum() {
        let l = TensorGrid::<f64>::interval(5).unwrap();
        let f = ScalarField::from_fn(l, |p| p[0] * p[0]);
        // Independent direct summation of the composite trapezoid rule.
        let h = 1.0 / 32.0;
        let mut direct = 0.0;
        for i in 0..32 {
            let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
            direct += 0.5 * h * (a * a + b * b);
        }
        let got = integrate(&f, Rule::Trapezoid).unwrap();
        assert!((got - direct).abs() < 1e-15);
        assert!((got - (1.0 / 3.0 + 1.0 / 6144.0)).abs() < 1e-15);
        assert!((got - 0.33349609).abs() < 1e-8);
    }

    #[test]
    fn gauss_two_point_nodes() {
        let (x, w) = gauss_legendre_unit(2).unwrap();
        let d = 0.5 / 3f64.sqrt();
        assert!((x[0] - (0.5 - d)).abs() < 1e-15 && (x[1] - (0.5 + d)).abs() < 1e-15);
        assert!((x[0] - 0.211325).abs() < 1e-6 && (x[1] - 0.788675).abs() < 1e-6);
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_is_exact_to_degree_2n_minus_1() {
        let g = TensorGrid::<f64>::square(3).unwrap();
        for n in 1..=4usize {
            for p in 0..=(2 * n - 1) {
                for q in 0..=(2 * n - 1) {
                    let got = integrate_fn(&g, Rule::Gauss(n), |x| x[0].powi(p as i32) * x[1].powi(q as i32)).unwrap();
                    let exact = 1.0 / ((p + 1) * (q + 1)) as f64;
                    assert!((got - exact).abs() < 1e-14, "n={n} p={p} q={q}");
                }
            }
        }
    }

    #[test]
    fn gauss_weights_sum_to_one_for_all_orders() {
        for n in 1..=MAX_GAUSS_POINTS {
            let (x, w) = gauss_legendre_unit(n).unwrap();
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-13, "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
        assert!(gauss_legendre_unit(0).is_err());
        assert!(gauss_legendre_unit(65).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible_and_converges() {
        let g = TensorGrid::<f64>::square(4).unwrap();
        let f = |x: [f64; 2]| x[0] * x[1];
        let a = integrate_fn(&g, Rule::MonteCarlo { points: 20_000, seed: 3 }, f).unwrap();
        let b = integrate_fn(&g, Rule::MonteCarlo { points: 20_000, seed: 3 }, f).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!((a - 0.25).abs() < 0.01);
        assert!(integrate_fn(&g, Rule::MonteCarlo { points: 0, seed: 3 }, f).is_err());
    }

    #[test]
    fn gauss_on_field_uses_interpolant() {
        let g = TensorGrid::<f64>::square(3).unwrap();
        // Bilinear fields are reproduced exactly by their interpolant.
        let u = ScalarField::from_fn(g, |p| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[1]);
        let got = integrate(&u, Rule::Gauss(3)).unwrap();
        assert!((got - (1.0 + 1.0 - 0.5 + 0.75)).abs() < 1e-14);
    }

    #[test]
    fn nan_field_is_rejected() {
        let g = TensorGrid::<f64>::interval(3).unwrap();
        let mut u = ScalarField::zeros(g);
        u.values_mut()[2] = f64::NAN;
        assert!(integrate(&u, Rule::Trapezoid).is_err());
    }
}
