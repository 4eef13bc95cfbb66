use std::fmt;
use std::str::FromStr;

use rand::RngExt;

use super::pinn::gen_pinn_problem;
use super::trig::{sample_trig_poly, TrigPolySpec};
use crate::field::{lambda_min_field, ScalarField, SpdTensorField, TensorGrid};
use crate::rng::{role, stream_key, substream};
use crate::{Error, Real, Result};

/// Pointwise coercivity floor on `lambda_min(a)` below which a sample is redrawn.
pub const COERCIVITY_FLOOR: f64 = 1e-3;
/// Number of substreams tried before giving up on a coercive sample.
pub const MAX_RESAMPLES: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    SmoothB,
    DiscO,
    DiscB,
    SmoothO,
    PinnManufactured,
    OneD1,
    OneD2,
    OneD3,
    /// `a = 1`, `b = 0`, `u = x1(1-x1)x2(1-x2)` (or `x(1-x)` in 1D).
    Poisson,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::SmoothB,
        Family::DiscO,
        Family::DiscB,
        Family::SmoothO,
        Family::PinnManufactured,
        Family::OneD1,
        Family::OneD2,
        Family::OneD3,
        Family::Poisson,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Family::SmoothB => "smooth_b",
            Family::DiscO => "disc_o",
            Family::DiscB => "disc_b",
            Family::SmoothO => "smooth_o",
            Family::PinnManufactured => "pinn_manufactured",
            Family::OneD1 => "1d_1",
            Family::OneD2 => "1d_2",
            Family::OneD3 => "1d_3",
            Family::Poisson => "poisson",
        }
    }

    pub fn dim(self) -> Option<usize> {
        match self {
            Family::OneD1 | Family::OneD2 | Family::OneD3 => Some(1),
            Family::Poisson => None,
            _ => Some(2),
        }
    }

    pub fn is_random(self) -> bool {
        self != Family::Poisson
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.tag() == s)
            .ok_or_else(|| Error::param(format!("unknown problem family `{s}`")))
    }
}

/// Identifies a random sample: the dataset master seed and the sample index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SampleKey {
    pub master_seed: u64,
    pub index: u64,
}

impl SampleKey {
    pub fn new(master_seed: u64, index: u64) -> Self {
        Self { master_seed, index }
    }

    fn stream(&self, attempt: u64, role: u64) -> u64 {
        stream_key(&[self.master_seed, self.index, attempt, role])
    }
}

/// `-div(a grad u) + b^2 u = f` on the unit square or interval with `u = 0` on the boundary.
#[derive(Clone, Debug, PartialEq)]
pub struct EllipticProblem<T> {
    pub a: SpdTensorField<T>,
    pub b_sq: ScalarField<T>,
    pub f: ScalarField<T>,
    pub exact_solution: Option<ScalarField<T>>,
    pub family: Family,
    pub key: Option<SampleKey>,
}

impl<T: Real> EllipticProblem<T> {
    /// Validates shared grids, `b^2 >= 0` and positive definiteness of `a`.
    pub fn new(
        a: SpdTensorField<T>,
        b_sq: ScalarField<T>,
        f: ScalarField<T>,
        exact_solution: Option<ScalarField<T>>,
        family: Family,
        key: Option<SampleKey>,
    ) -> Result<Self> {
        let grid = *a.grid();
        if grid.kind() == crate::GridKind::SpaceTime {
            return Err(Error::param("elliptic problems live on spatial grids"));
        }
        b_sq.check_grid(&grid)?;
        f.check_grid(&grid)?;
        if let Some(u) = &exact_solution {
            u.check_grid(&grid)?;
        }
        if b_sq.values().iter().any(|&b| b < T::zero()) {
            return Err(Error::data("b^2 must be non-negative"));
        }
        lambda_min_field(&a)?;
        Ok(Self { a, b_sq, f, exact_solution, family, key })
    }

    pub fn grid(&self) -> &TensorGrid<T> {
        self.a.grid()
    }

    pub fn dim(&self) -> usize {
        self.grid().spatial_dim()
    }

    pub fn is_scalar(&self) -> bool {
        self.a.is_scalar()
    }

    pub fn has_reaction(&self) -> bool {
        self.b_sq.values().iter().any(|&b| b > T::zero())
    }

    /// The same problem with coefficients drawn on another level.
    pub fn regenerate(&self, level: u32) -> Result<Self> {
        let grid = self.grid().with_level(level)?;
        match (self.family, self.key) {
            (Family::Poisson, _) => manufactured_poisson(grid),
            (Family::PinnManufactured, Some(k)) => gen_pinn_problem(k.master_seed, grid),
            (fam, Some(k)) if fam.dim() == Some(1) => gen_elliptic_1d(fam, k, grid),
            (fam, Some(k)) => gen_elliptic_2d(fam, k, grid),
            (fam, None) => Err(Error::param(format!("{fam} problem without a sample key cannot be regenerated"))),
        }
    }
}

fn poly<T: Real>(spec: TrigPolySpec, grid: &TensorGrid<T>) -> ScalarField<T> {
    sample_trig_poly(&spec, grid)
}

/// Smooth and discontinuous two-dimensional families.
pub fn gen_elliptic_2d<T: Real>(family: Family, key: SampleKey, grid: TensorGrid<T>) -> Result<EllipticProblem<T>> {
    if grid.kind() != crate::GridKind::Square {
        return Err(Error::param("two-dimensional families need a square grid"));
    }
    let p552 = |attempt, role| TrigPolySpec::new(5, 5, 2.0, key.stream(attempt, role));
    for attempt in 0..MAX_RESAMPLES {
        let (a, b_sq, f) = match family {
            Family::SmoothB | Family::SmoothO => {
                let al = poly(p552(attempt, role::ALPHA), &grid).map(|x| T::lit(0.1) * x + T::one());
                let be = poly(p552(attempt, role::BETA), &grid).map(|x| T::lit(0.1) * x + T::one());
                let ga = poly(p552(attempt, role::GAMMA), &grid);
                let a11 = al.mul(&al);
                let a12 = al.mul(&ga);
                let a22 = ga.mul(&ga).add(&be.mul(&be));
                let a = SpdTensorField::full(a11, a12, a22)?;
                let f = poly(p552(attempt, role::F), &grid);
                let b_sq = if family == Family::SmoothB {
                    poly(p552(attempt, role::B), &grid).map(|b| b * b)
                } else {
                    ScalarField::zeros(grid)
                };
                (a, b_sq, f)
            }
            Family::DiscO | Family::DiscB => {
                let p1 = poly(p552(attempt, role::P1), &grid);
                let alpha = p1.map(|p| if p >= T::zero() { T::lit(10.0) } else { T::one() });
                let a = SpdTensorField::scalar(alpha);
                if family == Family::DiscO {
                    (a, ScalarField::zeros(grid), ScalarField::constant(grid, T::one()))
                } else {
                    let b_sq = poly(p552(attempt, role::B), &grid).map(|b| b * b);
                    (a, b_sq, poly(p552(attempt, role::F), &grid))
                }
            }
            other => return Err(Error::param(format!("{other} is not a two-dimensional sampled family"))),
        };
        if a.inf_lambda_min() >= T::lit(COERCIVITY_FLOOR) {
            return EllipticProblem::new(a, b_sq, f, None, family, Some(key));
        }
    }
    Err(Error::Coercivity(format!(
        "{family} sample {} stayed below the floor after {MAX_RESAMPLES} draws",
        key.index
    )))
}

/// One-dimensional families 1-3.
pub fn gen_elliptic_1d<T: Real>(family: Family, key: SampleKey, grid: TensorGrid<T>) -> Result<EllipticProblem<T>> {
    if grid.kind() != crate::GridKind::Interval {
        return Err(Error::param("one-dimensional families need an interval grid"));
    }
    let p5 = |role| TrigPolySpec::one_d(5, 0.0, key.stream(0, role));
    let smooth_a = || poly(p5(role::ALPHA), &grid).map(|x| T::lit(0.1) * x * x + T::one());
    let (a, b_sq, f) = match family {
        Family::OneD1 => {
            let b = poly(p5(role::B), &grid).map(|x| T::lit(0.2) * x);
            (smooth_a(), b.mul(&b), poly(p5(role::F), &grid))
        }
        Family::OneD2 => (smooth_a(), ScalarField::zeros(grid), poly(p5(role::F), &grid)),
        Family::OneD3 => {
            let mut rng = substream(&[key.master_seed, key.index, role::JUMP]);
            let (u, w): (f64, f64) = (rng.random(), rng.random());
            let (lo, hi) = (T::lit(u.min(w)), T::lit(u.max(w)));
            let a = ScalarField::from_fn(grid, |p| if p[0] >= lo && p[0] <= hi { T::lit(10.0) } else { T::one() });
            let shared = TrigPolySpec::one_d(5, 0.0, stream_key(&[key.master_seed, role::SHARED_F]));
            (a, ScalarField::zeros(grid), poly(shared, &grid))
        }
        other => return Err(Error::param(format!("{other} is not a one-dimensional family"))),
    };
    EllipticProblem::new(SpdTensorField::scalar(a), b_sq, f, None, family, Some(key))
}

/// `a = 1`, `b = 0` with a polynomial bubble as exact solution.
pub fn manufactured_poisson<T: Real>(grid: TensorGrid<T>) -> Result<EllipticProblem<T>> {
    let two = T::lit(2.0);
    let bubble = |x: T| x * (T::one() - x);
    let (u, f) = match grid.kind() {
        crate::GridKind::Interval => {
            (ScalarField::from_fn(grid, |p| bubble(p[0])), ScalarField::constant(grid, two))
        }
        crate::GridKind::Square => (
            ScalarField::from_fn(grid, |p| bubble(p[0]) * bubble(p[1])),
            ScalarField::from_fn(grid, |p| two * (bubble(p[0]) + bubble(p[1]))),
        ),
        crate::GridKind::SpaceTime => return Err(Error::param("elliptic problems live on spatial grids")),
    };
    let a = SpdTensorField::scalar(ScalarField::constant(grid, T::one()));
    EllipticProblem::new(a, ScalarField::zeros(grid), f, Some(u), Family::Poisson, None)
}

/// Generates `n` problems of a family with sample indices `0..n`.
pub fn gen_dataset<T: Real>(family: Family, master_seed: u64, n: usize, grid: TensorGrid<T>) -> Result<Vec<EllipticProblem<T>>> {
    (0..n as u64)
        .map(|i| {
            let key = SampleKey::new(master_seed, i);
            match family {
                Family::Poisson => manufactured_poisson(grid),
                Family::PinnManufactured => gen_pinn_problem(stream_key(&[master_seed, i]), grid),
                f if f.dim() == Some(1) => gen_elliptic_1d(f, key, grid),
                f => gen_elliptic_2d(f, key, grid),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq() -> TensorGrid<f64> {
        TensorGrid::square(4).unwrap()
    }

    #[test]
    fn family_tags_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.tag().parse::<Family>().unwrap(), f);
        }
        assert!("elliptic".parse::<Family>().is_err());
    }

    #[test]
    fn disc_o_has_unit_source_and_no_reaction() {
        let p = gen_elliptic_2d(Family::DiscO, SampleKey::new(1, 0), sq()).unwrap();
        assert!(p.b_sq.values().iter().all(|&b| b == 0.0));
        assert!(p.f.values().iter().all(|&f| f == 1.0));
    }

    #[test]
    fn disc_b_takes_two_values() {
        for i in 0..5 {
            let p = gen_elliptic_2d(Family::DiscB, SampleKey::new(2, i), sq()).unwrap();
            assert!(p.a.is_scalar());
            assert!(p.a.a11().values().iter().all(|&a| a == 1.0 || a == 10.0));
        }
    }

    #[test]
    fn smooth_families_are_cholesky_products() {
        let key = SampleKey::new(3, 4);
        let g = sq();
        let p = gen_elliptic_2d(Family::SmoothO, key, g).unwrap();
        let al = poly(TrigPolySpec::new(5, 5, 2.0, key.stream(0, role::ALPHA)), &g).map(|x| 0.1 * x + 1.0);
        let ga = poly(TrigPolySpec::new(5, 5, 2.0, key.stream(0, role::GAMMA)), &g);
        for n in 0..g.len() {
            let (a11, a12, a22) = p.a.at(n);
            assert_eq!(a12, al.values()[n] * ga.values()[n]);
            assert!(a11 >= 0.0 && a11 * a22 - a12 * a12 >= -1e-12);
        }
        assert!(p.b_sq.values().iter().all(|&b| b == 0.0));
        let pb = gen_elliptic_2d(Family::SmoothB, key, g).unwrap();
        assert!(pb.has_reaction());
    }

    #[test]
    fn one_d_families() {
        let g = TensorGrid::<f64>::interval(6).unwrap();
        let p1 = gen_elliptic_1d(Family::OneD1, SampleKey::new(5, 1), g).unwrap();
        assert!(p1.a.a11().values().iter().all(|&a| a >= 1.0));
        let p2 = gen_elliptic_1d(Family::OneD2, SampleKey::new(5, 1), g).unwrap();
        assert!(p2.b_sq.values().iter().all(|&b| b == 0.0));
        let p3 = gen_elliptic_1d(Family::OneD3, SampleKey::new(5, 1), g).unwrap();
        let mut vals: Vec<f64> = p3.a.a11().values().to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        assert!(vals.iter().all(|&a| a == 1.0 || a == 10.0));
        let other = gen_elliptic_1d(Family::OneD3, SampleKey::new(5, 7), g).unwrap();
        assert_eq!(p3.f, other.f);
    }

    #[test]
    fn generation_is_reproducible_and_regenerable() {
        let key = SampleKey::new(9, 2);
        let a = gen_elliptic_2d::<f64>(Family::SmoothB, key, sq()).unwrap();
        let b = gen_elliptic_2d::<f64>(Family::SmoothB, key, sq()).unwrap();
        assert_eq!(a, b);
        let fine = a.regenerate(6).unwrap();
        let back = crate::field::restrict(&fine.f, 4).unwrap();
        assert_eq!(back.values(), a.f.values());
    }

    #[test]
    fn wrong_grid_is_rejected() {
        let g = TensorGrid::<f64>::interval(4).unwrap();
        assert!(gen_elliptic_2d(Family::SmoothO, SampleKey::new(0, 0), g).is_err());
        assert!(gen_elliptic_1d(Family::OneD1, SampleKey::new(0, 0), sq()).is_err());
        assert!(gen_elliptic_1d(Family::SmoothO, SampleKey::new(0, 0), TensorGrid::<f64>::interval(4).unwrap()).is_err());
    }

    #[test]
    fn manufactured_source_matches_laplacian() {
        let p = manufactured_poisson(sq()).unwrap();
        let u = p.exact_solution.as_ref().unwrap();
        let centre = p.grid().flat([8, 8]);
        assert_eq!(u.values()[centre], 0.0625);
        assert_eq!(p.f.values()[centre], 1.0);
    }
}
