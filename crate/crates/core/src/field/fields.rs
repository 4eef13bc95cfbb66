use super::TensorGrid;
use crate::{Error, Real, Result};

/// One value per grid node, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: TensorGrid<T>,
    values: Vec<T>,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: TensorGrid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::data(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("field contains non-finite values"));
        }
        Ok(Self { grid, values })
    }

    /// Skips the finiteness scan; for values computed from finite inputs.
    pub(crate) fn from_vec_unchecked(grid: TensorGrid<T>, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: TensorGrid<T>, c: T) -> Self {
        Self { values: vec![c; grid.len()], grid }
    }

    pub fn zeros(grid: TensorGrid<T>) -> Self {
        Self::constant(grid, T::zero())
    }

    /// Samples `f` at every node; `f` receives `[x1, x2]` (or `[x, t]`).
    pub fn from_fn(grid: TensorGrid<T>, f: impl Fn([T; 2]) -> T) -> Self {
        let values = grid.points().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TensorGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { grid: self.grid, values }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Copy with every spatial-boundary node set to zero.
    pub fn with_zero_boundary(&self) -> Self {
        let mut out = self.clone();
        for n in 0..self.grid.len() {
            if self.grid.is_boundary(n) {
                out.values[n] = T::zero();
            }
        }
        out
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        self.check_grid(&other.grid)
    }

    pub(crate) fn check_grid(&self, grid: &TensorGrid<T>) -> Result<()> {
        if self.grid != *grid {
            return Err(Error::data("fields live on different grids"));
        }
        Ok(())
    }
}

/// `D` scalar components on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<T> {
    components: Vec<ScalarField<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn new(components: Vec<ScalarField<T>>) -> Result<Self> {
        let first = components.first().ok_or_else(|| Error::data("vector field without components"))?;
        for c in &components[1..] {
            first.check_same_grid(c)?;
        }
        Ok(Self { components })
    }

    pub fn zeros(grid: TensorGrid<T>, dim: usize) -> Self {
        Self { components: vec![ScalarField::zeros(grid); dim] }
    }

    pub fn grid(&self) -> &TensorGrid<T> {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &ScalarField<T> {
        &self.components[i]
    }

    pub fn component_mut(&mut self, i: usize) -> &mut ScalarField<T> {
        &mut self.components[i]
    }

    pub fn components(&self) -> &[ScalarField<T>] {
        &self.components
    }

    pub fn into_components(self) -> Vec<ScalarField<T>> {
        self.components
    }

    /// Value of every component at node `n`.
    pub fn at(&self, n: usize) -> [T; 2] {
        let mut out = [T::zero(); 2];
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.values()[n];
        }
        out
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField<T>) -> ScalarField<T>) -> Self {
        Self { components: self.components.iter().map(f).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T + Copy) -> Self {
        Self {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a.zip_map(b, f)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map_components(|c| c.scale(s))
    }

    /// All components concatenated, component-major.
    pub fn flatten(&self) -> Vec<T> {
        self.components.iter().flat_map(|c| c.values().iter().copied()).collect()
    }

    pub fn from_flat(grid: TensorGrid<T>, dim: usize, flat: &[T]) -> Result<Self> {
        let n = grid.len();
        if flat.len() != n * dim {
            return Err(Error::data("flat vector field has the wrong length"));
        }
        let components =
            (0..dim).map(|i| ScalarField::new(grid, flat[i * n..(i + 1) * n].to_vec())).collect::<Result<_>>()?;
        Ok(Self { components })
    }
}

/// Symmetric coefficient tensor `a(x)`; `a12`/`a22` are absent in one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdTensorField<T> {
    a11: ScalarField<T>,
    off: Option<(ScalarField<T>, ScalarField<T>)>,
}

impl<T: Real> SpdTensorField<T> {
    pub fn full(a11: ScalarField<T>, a12: ScalarField<T>, a22: ScalarField<T>) -> Result<Self> {
        a11.check_same_grid(&a12)?;
        a11.check_same_grid(&a22)?;
        Ok(Self { a11, off: Some((a12, a22)) })
    }

    /// `a(x) I` with the dimension taken from the grid.
    pub fn scalar(a: ScalarField<T>) -> Self {
        if a.grid().spatial_dim() == 1 {
            Self { a11: a, off: None }
        } else {
            let zero = ScalarField::zeros(*a.grid());
            Self { a11: a.clone(), off: Some((zero, a)) }
        }
    }

    pub fn identity(grid: TensorGrid<T>) -> Self {
        Self::scalar(ScalarField::constant(grid, T::one()))
    }

    pub fn grid(&self) -> &TensorGrid<T> {
        self.a11.grid()
    }

    pub fn dim(&self) -> usize {
        if self.off.is_some() {
            2
        } else {
            1
        }
    }

    pub fn a11(&self) -> &ScalarField<T> {
        &self.a11
    }

    pub fn a12(&self) -> Option<&ScalarField<T>> {
        self.off.as_ref().map(|(a12, _)| a12)
    }

    pub fn a22(&self) -> Option<&ScalarField<T>> {
        self.off.as_ref().map(|(_, a22)| a22)
    }

    /// `(a11, a12, a22)` at node `n`; in 1D `a12 = 0`, `a22 = a11`.
    #[inline]
    pub fn at(&self, n: usize) -> (T, T, T) {
        let a11 = self.a11.values()[n];
        match &self.off {
            Some((a12, a22)) => (a11, a12.values()[n], a22.values()[n]),
            None => (a11, T::zero(), a11),
        }
    }

    /// `a(x) w` at node `n`.
    #[inline]
    pub fn apply(&self, n: usize, w: [T; 2]) -> [T; 2] {
        let (a11, a12, a22) = self.at(n);
        if self.off.is_none() {
            return [a11 * w[0], T::zero()];
        }
        [a11 * w[0] + a12 * w[1], a12 * w[0] + a22 * w[1]]
    }

    /// `a(x)^{-1} w` at node `n`.
    #[inline]
    pub fn solve(&self, n: usize, w: [T; 2]) -> [T; 2] {
        let (a11, a12, a22) = self.at(n);
        if self.off.is_none() {
            return [w[0] / a11, T::zero()];
        }
        let det = a11 * a22 - a12 * a12;
        [(a22 * w[0] - a12 * w[1]) / det, (a11 * w[1] - a12 * w[0]) / det]
    }

    /// Entries of `a(x)^{-1}` at node `n` as `(i11, i12, i22)`.
    #[inline]
    pub fn inverse_at(&self, n: usize) -> (T, T, T) {
        let (a11, a12, a22) = self.at(n);
        if self.off.is_none() {
            return (T::one() / a11, T::zero(), T::one() / a11);
        }
        let det = a11 * a22 - a12 * a12;
        (a22 / det, -a12 / det, a11 / det)
    }

    #[inline]
    pub fn lambda_min_at(&self, n: usize) -> T {
        let (a11, a12, a22) = self.at(n);
        if self.off.is_none() {
            return a11;
        }
        let tr = a11 + a22;
        let disc = ((a11 - a22) * (a11 - a22) + T::lit(4.0) * a12 * a12).sqrt();
        // (tr - sqrt(tr^2 - 4 det)) / 2, written to avoid cancellation in the discriminant.
        (tr - disc) * T::lit(0.5)
    }

    #[inline]
    pub fn lambda_max_at(&self, n: usize) -> T {
        let (a11, a12, a22) = self.at(n);
        if self.off.is_none() {
            return a11;
        }
        let disc = ((a11 - a22) * (a11 - a22) + T::lit(4.0) * a12 * a12).sqrt();
        (a11 + a22 + disc) * T::lit(0.5)
    }

    /// Smallest eigenvalue over the grid nodes.
    pub fn inf_lambda_min(&self) -> T {
        (0..self.grid().len()).map(|n| self.lambda_min_at(n)).fold(T::infinity(), T::min)
    }

    pub fn sup_lambda_max(&self) -> T {
        (0..self.grid().len()).map(|n| self.lambda_max_at(n)).fold(T::neg_infinity(), T::max)
    }

    pub fn map_entries(&self, f: impl Fn(&ScalarField<T>) -> ScalarField<T>) -> Self {
        Self { a11: f(&self.a11), off: self.off.as_ref().map(|(a12, a22)| (f(a12), f(a22))) }
    }

    /// True when `a12 = 0` and `a11 = a22` at every node.
    pub fn is_scalar(&self) -> bool {
        match &self.off {
            None => true,
            Some((a12, a22)) => {
                a12.values().iter().all(|v| *v == T::zero()) && a22.values() == self.a11.values()
            }
        }
    }
}

/// Pointwise smallest eigenvalue; errors if any node is not positive definite.
pub fn lambda_min_field<T: Real>(a: &SpdTensorField<T>) -> Result<ScalarField<T>> {
    let grid = *a.grid();
    let values: Vec<T> = (0..grid.len()).map(|n| a.lambda_min_at(n)).collect();
    if let Some(n) = values.iter().position(|&l| !(l > T::zero())) {
        return Err(Error::Coercivity(format!(
            "smallest eigenvalue {} at node {n}",
            values[n]
        )));
    }
    Ok(ScalarField::from_vec_unchecked(grid, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> TensorGrid<f64> {
        TensorGrid::square(3).unwrap()
    }

    #[test]
    fn rejects_nan_and_wrong_length() {
        assert!(ScalarField::new(g(), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; g().len()];
        v[4] = f64::NAN;
        assert!(ScalarField::new(g(), v).is_err());
    }

    #[test]
    fn lambda_min_examples() {
        let one = ScalarField::constant(g(), 1.0);
        let l = lambda_min_field(&SpdTensorField::identity(g())).unwrap();
        assert!(l.values().iter().all(|&v| v == 1.0));

        let diag = SpdTensorField::full(one.clone(), ScalarField::zeros(g()), one.scale(4.0)).unwrap();
        assert!(lambda_min_field(&diag).unwrap().values().iter().all(|&v| v == 1.0));

        let coupled = SpdTensorField::full(one.scale(2.0), one.clone(), one.scale(2.0)).unwrap();
        for v in lambda_min_field(&coupled).unwrap().values() {
            assert!((v - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn indefinite_is_rejected() {
        let one = ScalarField::constant(g(), 1.0);
        let bad = SpdTensorField::full(one.clone(), one.scale(2.0), one).unwrap();
        assert!(matches!(lambda_min_field(&bad), Err(Error::Coercivity(_))));
    }

    #[test]
    fn solve_inverts_apply() {
        let one = ScalarField::constant(g(), 1.0);
        let a = SpdTensorField::full(one.scale(2.0), one.scale(0.5), one.scale(3.0)).unwrap();
        let w = [0.3, -1.7];
        let back = a.solve(5, a.apply(5, w));
        assert!((back[0] - w[0]).abs() < 1e-15 && (back[1] - w[1]).abs() < 1e-15);
    }
}
