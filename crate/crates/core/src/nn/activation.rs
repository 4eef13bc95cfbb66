use crate::Real;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exact GELU `x Phi(x)` and its first three derivatives.
#[derive(Clone, Copy, Debug)]
pub struct GeluTaylor<T> {
    pub value: T,
    pub d1: T,
    pub d2: T,
    pub d3: T,
}

#[inline]
pub fn gelu_taylor<T: Real>(x: T) -> GeluTaylor<T> {
    let xf = x.as_f64();
    let cdf = 0.5 * (1.0 + libm::erf(xf * INV_SQRT2));
    let pdf = INV_SQRT_2PI * (-0.5 * xf * xf).exp();
    GeluTaylor {
        value: T::lit(xf * cdf),
        d1: T::lit(cdf + xf * pdf),
        d2: T::lit(pdf * (2.0 - xf * xf)),
        d3: T::lit(pdf * (xf * xf * xf - 4.0 * xf)),
    }
}
