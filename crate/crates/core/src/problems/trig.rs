use rand_distr::{Distribution, StandardNormal};

use crate::field::{ScalarField, TensorGrid};
use crate::rng::substream;
use crate::Real;

/// Parameters of a random trigonometric polynomial
/// `Re(sum_{m<=N1, n<=N2} c_mn exp(2 pi i (m x1 + n x2)) / (1 + m + n)^alpha)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigPolySpec {
    pub n1: usize,
    pub n2: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl TrigPolySpec {
    pub fn new(n1: usize, n2: usize, alpha: f64, seed: u64) -> Self {
        Self { n1, n2, alpha, seed }
    }

    /// One-dimensional family `P(N, alpha)`.
    pub fn one_d(n: usize, alpha: f64, seed: u64) -> Self {
        Self { n1: n, n2: 0, alpha, seed }
    }
}

/// A sampled polynomial, evaluable anywhere.
#[derive(Clone, Debug)]
pub struct TrigPoly<T> {
    n2: usize,
    /// Decay-scaled `(Re c_mn, Im c_mn)`, `m`-major.
    coeffs: Vec<(T, T)>,
}

impl<T: Real> TrigPoly<T> {
    pub fn sample(spec: &TrigPolySpec) -> Self {
        let mut rng = substream(&[spec.seed]);
        let mut coeffs = Vec::with_capacity((spec.n1 + 1) * (spec.n2 + 1));
        for m in 0..=spec.n1 {
            for n in 0..=spec.n2 {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                let decay = (1.0 + (m + n) as f64).powf(-spec.alpha);
                coeffs.push((T::lit(re * decay), T::lit(im * decay)));
            }
        }
        Self { n2: spec.n2, coeffs }
    }

    /// Value at `p`; `p[1]` is ignored when `N2 = 0`.
    pub fn eval(&self, p: [T; 2]) -> T {
        let two_pi = T::TAU();
        let mut acc = T::zero();
        for (k, &(re, im)) in self.coeffs.iter().enumerate() {
            let m = T::from_usize_lossy(k / (self.n2 + 1));
            let n = T::from_usize_lossy(k % (self.n2 + 1));
            let mut phase = m * p[0];
            if self.n2 > 0 {
                phase += n * p[1];
            }
            // Reducing the phase first makes x = 0 and x = 1 bit-identical.
            let theta = two_pi * phase.fract();
            acc += re * theta.cos() - im * theta.sin();
        }
        acc
    }
}

pub fn sample_trig_poly<T: Real>(spec: &TrigPolySpec, grid: &TensorGrid<T>) -> ScalarField<T> {
    let poly = TrigPoly::<T>::sample(spec);
    let spatial_2d = grid.spatial_dim() == 2;
    ScalarField::from_fn(*grid, |p| poly.eval(if spatial_2d { p } else { [p[0], T::zero()] }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_is_constant() {
        let g = TensorGrid::<f64>::square(4).unwrap();
        let spec = TrigPolySpec::new(0, 0, 2.0, 11);
        let f = sample_trig_poly(&spec, &g);
        let c0 = TrigPoly::<f64>::sample(&spec).coeffs[0].0;
        assert!(f.values().iter().all(|&v| v == c0));
    }

    #[test]
    fn periodic_in_first_coordinate() {
        let g = TensorGrid::<f64>::square(5).unwrap();
        let f = sample_trig_poly(&TrigPolySpec::new(5, 5, 2.0, 3), &g);
        let last = g.nodes_per_axis() - 1;
        for j in 0..=last {
            assert_eq!(f.values()[g.flat([0, j])], f.values()[g.flat([last, j])]);
        }
    }

    #[test]
    fn variance_at_origin_matches_mode_sum() {
        let spec = |seed| TrigPolySpec::new(5, 5, 2.0, seed);
        let samples: Vec<f64> = (0..100_000u64).map(|s| TrigPoly::<f64>::sample(&spec(s)).eval([0.0, 0.0])).collect();
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let mut expected = 0.0;
        for m in 0..=5 {
            for k in 0..=5 {
                expected += (1.0 + (m + k) as f64).powf(-4.0);
            }
        }
        // Standard error of a Gaussian sample variance: sigma^2 sqrt(2 / (n - 1)).
        let se = expected * (2.0 / (n - 1.0)).sqrt();
        assert!((var - expected).abs() < 3.0 * se, "var {var} expected {expected}");
    }

    #[test]
    fn one_d_ignores_second_coordinate() {
        let p = TrigPoly::<f64>::sample(&TrigPolySpec::one_d(5, 0.0, 1));
        assert_eq!(p.eval([0.3, 0.0]), p.eval([0.3, 0.9]));
    }
}
