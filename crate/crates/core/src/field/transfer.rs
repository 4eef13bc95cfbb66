use super::{ScalarField, TensorGrid};
use crate::{Error, Real, Result};

/// Injection onto a coarser nested level.
pub fn restrict<T: Real>(field: &ScalarField<T>, level: u32) -> Result<ScalarField<T>> {
    let fine = *field.grid();
    let coarse = fine.with_level(level)?;
    if !coarse.is_nested_in(&fine) {
        return Err(Error::param(format!(
            "cannot restrict level {} onto level {level}",
            fine.level()
        )));
    }
    let step = 1usize << (fine.level() - level);
    let values = (0..coarse.len())
        .map(|n| {
            let [i, j] = coarse.unflat(n);
            field.values()[fine.flat([i * step, j * step])]
        })
        .collect();
    Ok(ScalarField::from_vec_unchecked(coarse, values))
}

/// Multilinear interpolation of the nodal values at an arbitrary point of the domain.
pub fn interpolate<T: Real>(field: &ScalarField<T>, p: [T; 2]) -> T {
    let grid = field.grid();
    let m = grid.nodes_per_axis();
    let locate = |axis: usize| {
        let s = p[axis] / grid.spacing(axis);
        let cell = s.floor().to_usize().unwrap_or(0).min(m - 2);
        let t = s - T::from_usize_lossy(cell);
        (cell, t)
    };
    let v = field.values();
    if grid.axes() == 1 {
        let (i, t) = locate(0);
        v[i] * (T::one() - t) + v[i + 1] * t
    } else {
        let (i, s) = locate(0);
        let (j, t) = locate(1);
        let at = |a: usize, b: usize| v[grid.flat([a, b])];
        let (one_s, one_t) = (T::one() - s, T::one() - t);
        at(i, j) * one_s * one_t + at(i + 1, j) * s * one_t + at(i, j + 1) * one_s * t + at(i + 1, j + 1) * s * t
    }
}

/// Multilinear interpolation onto a finer nested level.
pub fn prolong<T: Real>(field: &ScalarField<T>, level: u32) -> Result<ScalarField<T>> {
    let coarse = *field.grid();
    let fine: TensorGrid<T> = coarse.with_level(level)?;
    if !coarse.is_nested_in(&fine) {
        return Err(Error::param(format!(
            "cannot prolong level {} onto level {level}",
            coarse.level()
        )));
    }
    Ok(ScalarField::from_fn(fine, |p| interpolate(field, p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn restrict_constant_and_linear() {
        let fine = TensorGrid::<f64>::interval(7).unwrap();
        let c = restrict(&ScalarField::constant(fine, 2.5), 5).unwrap();
        assert!(c.values().iter().all(|&v| v == 2.5));
        let x = restrict(&ScalarField::from_fn(fine, |p| p[0]), 5).unwrap();
        let direct = ScalarField::from_fn(TensorGrid::interval(5).unwrap(), |p| p[0]);
        assert_eq!(x, direct);
    }

    #[test]
    fn restrict_random_field_keeps_shared_nodes() {
        let fine = TensorGrid::<f64>::square(5).unwrap();
        let f = ScalarField::from_fn(fine, |p| (13.0 * p[0]).sin() * (7.0 * p[1]).cos());
        let c = restrict(&f, 3).unwrap();
        for n in 0..c.len() {
            let p = c.grid().point(n);
            let [i, j] = c.grid().unflat(n);
            assert_eq!(fine.point(fine.flat([4 * i, 4 * j])), p);
            assert_eq!(c.values()[n], f.values()[fine.flat([4 * i, 4 * j])]);
        }
    }

    #[test]
    fn restrict_rejects_finer_target() {
        let g = TensorGrid::<f64>::square(4).unwrap();
        assert!(restrict(&ScalarField::zeros(g), 5).is_err());
    }

    #[test]
    fn prolong_reproduces_bilinear_and_round_trips() {
        let g = TensorGrid::<f64>::square(3).unwrap();
        let f = ScalarField::from_fn(g, |p| 1.0 + p[0] - 2.0 * p[1] + p[0] * p[1]);
        let up = prolong(&f, 5).unwrap();
        let exact = ScalarField::from_fn(*up.grid(), |p| 1.0 + p[0] - 2.0 * p[1] + p[0] * p[1]);
        for (a, b) in up.values().iter().zip(exact.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(restrict(&up, 3).unwrap(), f);
    }
}
