//! Norms of nodal fields. Integrals use the trapezoid rule on the field's own grid unless stated.

use crate::field::{gauss_legendre_unit, grad_fd, partial_values, spatial_grad_fd, ScalarField, SpdTensorField, VectorField};
use crate::real::pairwise_sum;
use crate::{Error, GridKind, Real, Result};

fn trapezoid<T: Real>(field_grid: &crate::TensorGrid<T>, integrand: impl Fn(usize) -> T) -> T {
    let terms: Vec<T> = (0..field_grid.len()).map(|n| field_grid.trapezoid_weight(n) * integrand(n)).collect();
    pairwise_sum(&terms)
}

/// `||u||_2`.
pub fn l2_norm<T: Real>(u: &ScalarField<T>) -> T {
    let v = u.values();
    trapezoid(u.grid(), |n| v[n] * v[n]).sqrt()
}

/// `(int w^T a w)^{1/2}`, or with `a^{-1}` when `inverse` is set.
pub fn weighted_flux_norm<T: Real>(w: &VectorField<T>, a: &SpdTensorField<T>, inverse: bool) -> Result<T> {
    if w.grid() != a.grid() || w.dim() != a.dim() {
        return Err(Error::data("flux and coefficient live on different grids or dimensions"));
    }
    let grid = *w.grid();
    let mut q = vec![T::zero(); grid.len()];
    for (n, slot) in q.iter_mut().enumerate() {
        let wn = w.at(n);
        let aw = if inverse {
            if !(a.lambda_min_at(n) > T::zero()) {
                return Err(Error::Coercivity(format!("singular coefficient at node {n}")));
            }
            a.solve(n, wn)
        } else {
            a.apply(n, wn)
        };
        *slot = wn[0] * aw[0] + wn[1] * aw[1];
    }
    Ok(trapezoid(&grid, |n| q[n]).max(T::zero()).sqrt())
}

/// Energy norm `(int grad e^T a grad e + b^2 e^2)^{1/2}` with finite-difference gradients.
pub fn energy_norm<T: Real>(e: &ScalarField<T>, a: &SpdTensorField<T>, b_sq: &ScalarField<T>) -> Result<T> {
    e.check_grid(a.grid())?;
    b_sq.check_grid(a.grid())?;
    let g = spatial_grad_fd(e);
    let grid = *e.grid();
    let (ev, bv) = (e.values(), b_sq.values());
    let terms: Vec<T> = (0..grid.len())
        .map(|n| {
            let gn = g.at(n);
            let ag = a.apply(n, gn);
            grid.trapezoid_weight(n) * (gn[0] * ag[0] + gn[1] * ag[1] + bv[n] * ev[n] * ev[n])
        })
        .collect();
    Ok(pairwise_sum(&terms).max(T::zero()).sqrt())
}

/// `(int int (de/dx)^2 dx dt + 1/2 int e(x, T)^2 dx)^{1/2}` on a space-time grid.
pub fn cd_error_norm<T: Real>(e: &ScalarField<T>) -> Result<T> {
    let grid = *e.grid();
    if grid.kind() != GridKind::SpaceTime {
        return Err(Error::param("convection-diffusion error norm needs a space-time grid"));
    }
    let ex = partial_values(&grid, e.values(), 0);
    let volume = trapezoid(&grid, |n| ex[n] * ex[n]);
    let m = grid.nodes_per_axis();
    let h = grid.spacing(0);
    let last: Vec<T> = (0..m)
        .map(|i| {
            let w = if i == 0 || i == m - 1 { h * T::lit(0.5) } else { h };
            let v = e.values()[grid.flat([i, m - 1])];
            w * v * v
        })
        .collect();
    Ok((volume + T::lit(0.5) * pairwise_sum(&last)).sqrt())
}

/// `||e||_2 <= |||e||| / sqrt(lambda_min + inf b^2)`.
pub fn l2_from_energy<T: Real>(energy_err: T, lambda_min_op: T, inf_b_sq: T) -> Result<T> {
    if lambda_min_op < T::zero() || inf_b_sq < T::zero() {
        return Err(Error::param("eigenvalue and reaction bounds must be non-negative"));
    }
    let denom = lambda_min_op + inf_b_sq;
    if denom == T::zero() {
        return Err(Error::param("lambda_min and inf b^2 are both zero"));
    }
    Ok(energy_err / denom.sqrt())
}

/// Lower bound `D pi^2 inf lambda_min(a)` on the smallest Dirichlet eigenvalue of `-div(a grad .)`.
pub fn operator_lambda_min_lower<T: Real>(a: &SpdTensorField<T>) -> T {
    let d = T::from_usize_lossy(a.dim());
    d * T::PI() * T::PI() * a.inf_lambda_min()
}

/// `||I u_h - u||_2` where `I u_h` is the piecewise (bi)linear interpolant of the nodal values,
/// integrated cell by cell with an `order`-point Gauss rule per axis.
pub fn fe_l2_error<T: Real>(u_h: &ScalarField<T>, exact: impl Fn([T; 2]) -> T, order: usize) -> Result<T> {
    let grid = *u_h.grid();
    let (nodes, weights) = gauss_legendre_unit(order)?;
    let (nodes, weights): (Vec<T>, Vec<T>) =
        (nodes.iter().map(|&x| T::lit(x)).collect(), weights.iter().map(|&w| T::lit(w)).collect());
    let cells = grid.nodes_per_axis() - 1;
    let u = u_h.values();
    let mut terms = Vec::new();
    if grid.axes() == 1 {
        let h = grid.spacing(0);
        for c in 0..cells {
            let (u0, u1) = (u[c], u[c + 1]);
            for (s, w) in nodes.iter().zip(&weights) {
                let x = grid.coord(0, c) + *s * h;
                let d = u0 + (u1 - u0) * *s - exact([x, T::zero()]);
                terms.push(*w * h * d * d);
            }
        }
    } else {
        let (hx, hy) = (grid.spacing(0), grid.spacing(1));
        for ci in 0..cells {
            for cj in 0..cells {
                let c = [
                    u[grid.flat([ci, cj])],
                    u[grid.flat([ci + 1, cj])],
                    u[grid.flat([ci, cj + 1])],
                    u[grid.flat([ci + 1, cj + 1])],
                ];
                for (s, ws) in nodes.iter().zip(&weights) {
                    for (t, wt) in nodes.iter().zip(&weights) {
                        let (s, t) = (*s, *t);
                        let one = T::one();
                        let ih = c[0] * (one - s) * (one - t) + c[1] * s * (one - t) + c[2] * (one - s) * t + c[3] * s * t;
                        let p = [grid.coord(0, ci) + s * hx, grid.coord(1, cj) + t * hy];
                        let d = ih - exact(p);
                        terms.push(*ws * *wt * hx * hy * d * d);
                    }
                }
            }
        }
    }
    Ok(pairwise_sum(&terms).sqrt())
}

/// `|grad e|` composed through [`grad_fd`].
pub fn gradient_l2_norm<T: Real>(e: &ScalarField<T>) -> T {
    let g = grad_fd(e);
    let grid = *e.grid();
    trapezoid(&grid, |n| g.components().iter().map(|c| c.values()[n] * c.values()[n]).sum()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::TensorGrid;
    use crate::rng::counter_uniform;
    use proptest::prelude::*;

    fn sq(level: u32) -> TensorGrid<f64> {
        TensorGrid::square(level).unwrap()
    }

    #[test]
    fn fe_error_of_interpolant_is_second_order() {
        let exact = |p: [f64; 2]| (std::f64::consts::PI * p[0]).sin() * p[1] * p[1];
        let errs: Vec<f64> = (3..7)
            .map(|j| fe_l2_error(&ScalarField::from_fn(sq(j), exact), exact, 3).unwrap())
            .collect();
        for w in errs.windows(2) {
            let r = w[0] / w[1];
            assert!((3.8..4.2).contains(&r), "{r}");
        }
        let lin = |p: [f64; 2]| 1.0 + 2.0 * p[0] - p[1];
        assert!(fe_l2_error(&ScalarField::from_fn(sq(3), lin), lin, 2).unwrap() < 1e-14);
        let g1 = TensorGrid::<f64>::interval(3).unwrap();
        let quad = |p: [f64; 2]| p[0] * p[0];
        // Interpolation error of x^2 on a uniform mesh: h^2 / sqrt(30).
        let want = (1.0 / 64.0) / 30f64.sqrt();
        assert!((fe_l2_error(&ScalarField::from_fn(g1, quad), quad, 3).unwrap() - want).abs() < 1e-12);
    }

    fn bubble(p: [f64; 2]) -> f64 {
        p[0] * (1.0 - p[0]) * p[1] * (1.0 - p[1])
    }

    /// Composite Simpson on a fine lattice as an independent quadrature.
    fn simpson_2d(f: impl Fn(f64, f64) -> f64, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        let mut s = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                s += w(i) * w(j) * f(i as f64 * h, j as f64 * h);
            }
        }
        s * h * h / 9.0
    }

    #[test]
    fn l2_examples() {
        assert_eq!(l2_norm(&ScalarField::zeros(sq(4))), 0.0);
        assert!((l2_norm(&ScalarField::constant(sq(4), 2.0)) - 2.0).abs() < 1e-14);
        let oracle = simpson_2d(|x, y| bubble([x, y]).powi(2), 256);
        assert!((oracle - 1.0 / 900.0).abs() < 1e-9);
        let got = l2_norm(&ScalarField::from_fn(sq(7), bubble)).powi(2);
        assert!((got - 1.0 / 900.0).abs() < 1e-6);
    }

    #[test]
    fn flux_norm_examples() {
        let g = sq(3);
        let w = VectorField::new(vec![ScalarField::constant(g, 1.0), ScalarField::zeros(g)]).unwrap();
        let four = SpdTensorField::scalar(ScalarField::constant(g, 4.0));
        assert!((weighted_flux_norm(&w, &four, true).unwrap() - 0.5).abs() < 1e-14);
        let a = SpdTensorField::full(
            ScalarField::constant(g, 2.0),
            ScalarField::constant(g, 1.0),
            ScalarField::constant(g, 2.0),
        )
        .unwrap();
        let ones = VectorField::new(vec![ScalarField::constant(g, 1.0), ScalarField::constant(g, 1.0)]).unwrap();
        assert!((weighted_flux_norm(&ones, &a, true).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let id = SpdTensorField::identity(g);
        let euclid = (2.0f64).sqrt();
        assert!((weighted_flux_norm(&ones, &id, false).unwrap() - euclid).abs() < 1e-14);
    }

    #[test]
    fn energy_examples() {
        let g = sq(7);
        let id = SpdTensorField::identity(g);
        let zero = ScalarField::zeros(g);
        assert_eq!(energy_norm(&zero, &id, &zero).unwrap(), 0.0);
        let e = ScalarField::from_fn(g, bubble);
        let oracle = simpson_2d(
            |x, y| ((1.0 - 2.0 * x) * y * (1.0 - y)).powi(2) + (x * (1.0 - x) * (1.0 - 2.0 * y)).powi(2),
            256,
        );
        assert!((oracle - 1.0 / 45.0).abs() < 1e-9);
        assert!((energy_norm(&e, &id, &zero).unwrap().powi(2) - 1.0 / 45.0).abs() < 1e-4);
        let eps = SpdTensorField::scalar(ScalarField::constant(g, 1e-12));
        let one = ScalarField::constant(g, 1.0);
        assert!((energy_norm(&e, &eps, &one).unwrap() - l2_norm(&e)).abs() < 1e-9);
        assert_eq!(energy_norm(&e, &id, &zero).unwrap(), gradient_l2_norm(&e));
    }

    #[test]
    fn cd_norm_examples() {
        let g = TensorGrid::<f64>::space_time(7, 1.0).unwrap();
        assert_eq!(cd_error_norm(&ScalarField::zeros(g)).unwrap(), 0.0);
        let pi = std::f64::consts::PI;
        let s = ScalarField::from_fn(g, |p| (pi * p[0]).sin());
        let want = (pi * pi / 2.0 + 0.25).sqrt();
        assert!((cd_error_norm(&s).unwrap() - want).abs() < 1e-3);
        assert!((want - 2.277016).abs() < 1e-6);
        let gt = ScalarField::from_fn(g, |p| 1.0 + p[1] * p[1]);
        assert!((cd_error_norm(&gt).unwrap().powi(2) - 0.5 * 4.0).abs() < 1e-12);
        assert!(cd_error_norm(&ScalarField::zeros(sq(3))).is_err());
    }

    #[test]
    fn l2_from_energy_examples() {
        let two_pi_sq = 2.0 * std::f64::consts::PI.powi(2);
        assert!((l2_from_energy(1.0, two_pi_sq, 0.0).unwrap() - 1.0 / two_pi_sq.sqrt()).abs() < 1e-15);
        assert_eq!(l2_from_energy(0.3, 0.0, 1.0).unwrap(), 0.3);
        assert!(l2_from_energy(1.0, 0.0, 0.0).is_err());
        let id = SpdTensorField::identity(sq(3));
        assert!((operator_lambda_min_lower(&id) - two_pi_sq).abs() < 1e-12);
    }

    fn random_masked(seed: u64, level: u32) -> ScalarField<f64> {
        let spec = crate::problems::TrigPolySpec::new(4, 4, 1.0, seed);
        let g = sq(level);
        let p = crate::problems::sample_trig_poly(&spec, &g);
        let pi = std::f64::consts::PI;
        ScalarField::from_fn(g, |x| (pi * x[0]).sin() * (pi * x[1]).sin()).mul(&p)
    }

    #[test]
    fn l2_from_energy_is_never_violated() {
        let g = sq(6);
        let id = SpdTensorField::identity(g);
        let zero = ScalarField::zeros(g);
        let lam = operator_lambda_min_lower(&id);
        for seed in 0..100 {
            let e = random_masked(seed, 6);
            let bound = l2_from_energy(energy_norm(&e, &id, &zero).unwrap(), lam, 0.0).unwrap();
            assert!(l2_norm(&e) <= bound, "seed {seed}");
        }
    }

    proptest! {
        #[test]
        fn norms_are_homogeneous(seed in 0u64..500, si in 0usize..3) {
            let s = [-2.0, 0.5, 1e3][si];
            let g = sq(4);
            let e = ScalarField::from_fn(g, |p| counter_uniform(seed, (p[0] * 1e3 + p[1] * 1e6) as u64, 0) - 0.5)
                .with_zero_boundary();
            let a = SpdTensorField::identity(g);
            let b = ScalarField::constant(g, 0.7);
            let se = e.scale(s);
            let rel = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1e-300);
            prop_assert!(rel(l2_norm(&se), s.abs() * l2_norm(&e)));
            prop_assert!(rel(energy_norm(&se, &a, &b).unwrap(), s.abs() * energy_norm(&e, &a, &b).unwrap()));
        }

        #[test]
        fn triangle_inequality(s1 in 0u64..300, s2 in 300u64..600) {
            let (u, v) = (random_masked(s1, 4), random_masked(s2, 4));
            prop_assert!(l2_norm(&u.add(&v)) <= l2_norm(&u) + l2_norm(&v) + 1e-14);
            let a = SpdTensorField::identity(*u.grid());
            let z = ScalarField::zeros(*u.grid());
            let en = |w: &ScalarField<f64>| energy_norm(w, &a, &z).unwrap();
            prop_assert!(en(&u.add(&v)) <= en(&u) + en(&v) + 1e-12);
        }
    }
}
