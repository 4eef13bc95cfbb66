//! Finite-difference calculus on tensor grids.
//!
//! First derivatives use central differences in the interior and the
//! second-order one-sided three-point stencil at the two end nodes of each
//! axis, so every derivative is exact for quadratics along that axis.

use super::{ScalarField, TensorGrid, VectorField};
use crate::{Error, Real, Result};

/// Column offsets of the stencil of node `i` along an axis with `n` nodes.
#[inline]
fn stencil(i: usize, n: usize) -> ([usize; 3], usize) {
    if i == 0 {
        ([0, 1, 2], 3)
    } else if i == n - 1 {
        ([n - 3, n - 2, n - 1], 3)
    } else {
        ([i - 1, i + 1, 0], 2)
    }
}

/// Visits every nonzero `(row, col, coefficient)` of the derivative matrix along `axis`.
pub fn for_each_stencil_entry<T: Real>(grid: &TensorGrid<T>, axis: usize, mut f: impl FnMut(usize, usize, T)) {
    let m = grid.nodes_per_axis();
    let inv_2h = T::one() / (T::lit(2.0) * grid.spacing(axis));
    let coefs: [[T; 3]; 3] = [
        [T::lit(-3.0), T::lit(4.0), T::lit(-1.0)],
        [T::lit(1.0), T::lit(-4.0), T::lit(3.0)],
        [T::lit(-1.0), T::lit(1.0), T::zero()],
    ];
    for row in 0..grid.len() {
        let idx = grid.unflat(row);
        let i = idx[axis];
        let (cols, k) = stencil(i, m);
        let c = if i == 0 {
            &coefs[0]
        } else if i == m - 1 {
            &coefs[1]
        } else {
            &coefs[2]
        };
        for s in 0..k {
            let mut j = idx;
            j[axis] = cols[s];
            f(row, grid.flat(j), c[s] * inv_2h);
        }
    }
}

/// `d/dx_axis` of raw nodal values.
pub fn partial_values<T: Real>(grid: &TensorGrid<T>, values: &[T], axis: usize) -> Vec<T> {
    let mut out = vec![T::zero(); grid.len()];
    let m = grid.nodes_per_axis();
    let stride = grid.stride(axis);
    let inv_2h = T::one() / (T::lit(2.0) * grid.spacing(axis));
    let (three, four) = (T::lit(3.0), T::lit(4.0));
    for (row, o) in out.iter_mut().enumerate() {
        let i = grid.unflat(row)[axis];
        let base = row - i * stride;
        let at = |k: usize| values[base + k * stride];
        *o = if i == 0 {
            (-three * at(0) + four * at(1) - at(2)) * inv_2h
        } else if i == m - 1 {
            (at(m - 3) - four * at(m - 2) + three * at(m - 1)) * inv_2h
        } else {
            (at(i + 1) - at(i - 1)) * inv_2h
        };
    }
    out
}

/// Transpose of [`partial_values`]: `out = D^T w`.
pub fn partial_transpose_values<T: Real>(grid: &TensorGrid<T>, w: &[T], axis: usize) -> Vec<T> {
    let mut out = vec![T::zero(); grid.len()];
    for_each_stencil_entry(grid, axis, |row, col, c| out[col] += c * w[row]);
    out
}

/// Diagonal of `D^T M D` for a diagonal weight `M`.
pub fn weighted_normal_diagonal<T: Real>(grid: &TensorGrid<T>, axis: usize, weight: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); grid.len()];
    for_each_stencil_entry(grid, axis, |row, col, c| out[col] += weight[row] * c * c);
    out
}

pub fn partial<T: Real>(u: &ScalarField<T>, axis: usize) -> ScalarField<T> {
    ScalarField::from_vec_unchecked(*u.grid(), partial_values(u.grid(), u.values(), axis))
}

/// Gradient over all tensor axes (for a space-time grid: `(d/dx, d/dt)`).
pub fn grad_fd<T: Real>(u: &ScalarField<T>) -> VectorField<T> {
    let comps = (0..u.grid().axes()).map(|axis| partial(u, axis)).collect();
    VectorField::new(comps).expect("components share a grid")
}

/// Gradient over the spatial axes only.
pub fn spatial_grad_fd<T: Real>(u: &ScalarField<T>) -> VectorField<T> {
    let comps = (0..u.grid().spatial_dim()).map(|axis| partial(u, axis)).collect();
    VectorField::new(comps).expect("components share a grid")
}

/// `sum_i d y_i / d x_i`; component `i` is differentiated along axis `i`.
pub fn div_fd<T: Real>(y: &VectorField<T>) -> Result<ScalarField<T>> {
    let grid = *y.grid();
    if y.dim() > grid.axes() {
        return Err(Error::data("vector field has more components than grid axes"));
    }
    let mut acc = vec![T::zero(); grid.len()];
    for (axis, c) in y.components().iter().enumerate() {
        for (a, d) in acc.iter_mut().zip(partial_values(&grid, c.values(), axis)) {
            *a += d;
        }
    }
    Ok(ScalarField::from_vec_unchecked(grid, acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sq(level: u32) -> TensorGrid<f64> {
        TensorGrid::square(level).unwrap()
    }

    #[test]
    fn gradient_of_linear_is_exact() {
        let u = ScalarField::from_fn(sq(4), |p| 3.0 * p[0] + 2.0 * p[1]);
        let g = grad_fd(&u);
        for n in 0..u.len() {
            let [gx, gy] = g.at(n);
            assert!((gx - 3.0).abs() < 1e-12 && (gy - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_quadratic_is_exact_everywhere() {
        let u = ScalarField::from_fn(sq(4), |p| p[0] * p[0]);
        let g = grad_fd(&u);
        for n in 0..u.len() {
            let x = u.grid().point(n)[0];
            assert!((g.component(0).values()[n] - 2.0 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_gradient_converges_second_order() {
        let err = |level| {
            let g = TensorGrid::<f64>::interval(level).unwrap();
            let u = ScalarField::from_fn(g, |p| (std::f64::consts::PI * p[0]).sin());
            let d = partial(&u, 0);
            (1..g.nodes_per_axis() - 1)
                .map(|n| {
                    let x = g.point(n)[0];
                    (d.values()[n] - std::f64::consts::PI * (std::f64::consts::PI * x).cos()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(5) / err(6);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn divergence_examples() {
        let g = sq(4);
        let y = VectorField::new(vec![
            ScalarField::from_fn(g, |p| p[0]),
            ScalarField::from_fn(g, |p| p[1]),
        ])
        .unwrap();
        assert!(div_fd(&y).unwrap().values().iter().all(|v| (v - 2.0).abs() < 1e-12));
        let c = VectorField::new(vec![ScalarField::constant(g, 1.5), ScalarField::constant(g, -2.0)]).unwrap();
        assert!(div_fd(&c).unwrap().values().iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn nested_laplacian_of_biquadratic() {
        // x^2 y^2 is quadratic along each axis, so both nested differences are exact.
        let g = sq(5);
        let u = ScalarField::from_fn(g, |p| p[0] * p[0] * p[1] * p[1]);
        let lap = div_fd(&grad_fd(&u)).unwrap();
        for n in 0..g.len() {
            let [x, y] = g.point(n);
            assert!((lap.values()[n] - 2.0 * (x * x + y * y)).abs() < 1e-10);
        }
    }

    #[test]
    fn nested_laplacian_converges_second_order() {
        use std::f64::consts::PI;
        let err = |level| {
            let g = sq(level);
            let u = ScalarField::from_fn(g, |p| (PI * p[0]).sin() * (PI * p[1]).sin());
            let lap = div_fd(&grad_fd(&u)).unwrap();
            let m = g.nodes_per_axis();
            let mut e = 0.0f64;
            for n in 0..g.len() {
                let [i, j] = g.unflat(n);
                if i < 2 || j < 2 || i > m - 3 || j > m - 3 {
                    continue;
                }
                let [x, y] = g.point(n);
                e = e.max((lap.values()[n] + 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin()).abs());
            }
            e
        };
        let ratio = err(5) / err(6);
        assert!((ratio - 4.0).abs() < 0.3, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn transpose_is_adjoint(seed in 0u64..1000, axis in 0usize..2) {
            let g = sq(3);
            let u: Vec<f64> = (0..g.len()).map(|n| crate::rng::counter_uniform(seed, n as u64, 0) - 0.5).collect();
            let w: Vec<f64> = (0..g.len()).map(|n| crate::rng::counter_uniform(seed, n as u64, 1) - 0.5).collect();
            let du = partial_values(&g, &u, axis);
            let dtw = partial_transpose_values(&g, &w, axis);
            let lhs: f64 = du.iter().zip(&w).map(|(a, b)| a * b).sum();
            let rhs: f64 = u.iter().zip(&dtw).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
