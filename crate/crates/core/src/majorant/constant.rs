use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::field::SpdTensorField;
use crate::{Error, Real, Result};

/// Which Friedrichs constant the majorants use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantMode {
    /// `1 / (inf sqrt(lambda_min) pi D)` in 2D and `sup a / pi` in 1D, as printed.
    Paper,
    /// `1 / (inf sqrt(lambda_min) pi sqrt(D))`, from the first Dirichlet eigenvalue `D pi^2`.
    #[default]
    Safe,
}

impl ConstantMode {
    pub fn tag(self) -> &'static str {
        match self {
            ConstantMode::Paper => "paper",
            ConstantMode::Safe => "safe",
        }
    }
}

impl fmt::Display for ConstantMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ConstantMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(ConstantMode::Paper),
            "safe" => Ok(ConstantMode::Safe),
            _ => Err(Error::param(format!("unknown constant mode `{s}`"))),
        }
    }
}

/// Friedrichs constant from explicit coefficient bounds.
pub fn friedrichs_from_bounds<T: Real>(inf_lambda: T, sup_lambda: T, dim: usize, mode: ConstantMode) -> Result<T> {
    if !(inf_lambda > T::zero()) {
        return Err(Error::Coercivity(format!("inf lambda_min = {inf_lambda}")));
    }
    let pi = T::PI();
    let d = T::from_usize_lossy(dim);
    Ok(match (mode, dim) {
        (ConstantMode::Paper, 1) => sup_lambda / pi,
        (ConstantMode::Paper, _) => T::one() / (inf_lambda.sqrt() * pi * d),
        (ConstantMode::Safe, _) => T::one() / (inf_lambda.sqrt() * pi * d.sqrt()),
    })
}

pub fn friedrichs_constant<T: Real>(a: &SpdTensorField<T>, mode: ConstantMode) -> Result<T> {
    friedrichs_from_bounds(a.inf_lambda_min(), a.sup_lambda_max(), a.dim(), mode)
}
