use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam { lr: f64, beta1: f64, beta2: f64, eps: f64, weight_decay: f64 },
    Lion { lr: f64, beta1: f64, beta2: f64, weight_decay: f64 },
}

impl OptimizerConfig {
    pub fn adam(lr: f64, weight_decay: f64) -> Self {
        Self::Adam { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay }
    }

    pub fn lion(lr: f64, weight_decay: f64) -> Self {
        Self::Lion { lr, beta1: 0.9, beta2: 0.99, weight_decay }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            Self::Adam { lr, .. } | Self::Lion { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lr, b1, b2, wd) = match *self {
            Self::Adam { lr, beta1, beta2, eps, weight_decay } => {
                if !(eps > 0.0) {
                    return Err(Error::param("adam epsilon must be positive"));
                }
                (lr, beta1, beta2, weight_decay)
            }
            Self::Lion { lr, beta1, beta2, weight_decay } => (lr, beta1, beta2, weight_decay),
        };
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::param("learning rate must be positive"));
        }
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::param("momentum coefficients must lie in [0, 1)"));
        }
        if !(wd >= 0.0) {
            return Err(Error::param("weight decay must be non-negative"));
        }
        Ok(())
    }
}

/// Step decay: the rate is multiplied by `factor` every `period` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub factor: f64,
    pub period: usize,
}

impl Schedule {
    pub const CONSTANT: Self = Self { factor: 1.0, period: usize::MAX };

    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        if self.period == 0 {
            return base;
        }
        base * self.factor.powi((epoch / self.period).min(i32::MAX as usize) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor <= 1.0) {
            return Err(Error::param("schedule factor must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Moment buffers of one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T> {
    pub step: u64,
    pub m: Vec<T>,
    /// Second moments; unused by Lion.
    pub v: Vec<T>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(n: usize) -> Self {
        Self { step: 0, m: vec![T::zero(); n], v: vec![T::zero(); n] }
    }

    /// Applies one update with learning rate `lr`, overriding the configured base rate.
    pub fn step(&mut self, params: &mut [T], grads: &[T], config: &OptimizerConfig, lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::data("parameter, gradient and state lengths differ"));
        }
        self.step += 1;
        let lr_t = T::lit(lr);
        match *config {
            OptimizerConfig::Adam { beta1, beta2, eps, weight_decay, .. } => {
                let (b1, b2) = (T::lit(beta1), T::lit(beta2));
                let c1 = T::one() - T::lit(beta1.powf(self.step as f64));
                let c2 = T::one() - T::lit(beta2.powf(self.step as f64));
                let (eps, wd) = (T::lit(eps), T::lit(weight_decay));
                for i in 0..params.len() {
                    let g = grads[i];
                    self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
                    self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    params[i] -= lr_t * (mh / (vh.sqrt() + eps) + wd * params[i]);
                }
            }
            OptimizerConfig::Lion { beta1, beta2, weight_decay, .. } => {
                let (b1, b2, wd) = (T::lit(beta1), T::lit(beta2), T::lit(weight_decay));
                for i in 0..params.len() {
                    let g = grads[i];
                    let c = b1 * self.m[i] + (T::one() - b1) * g;
                    params[i] -= lr_t * (sign(c) + wd * params[i]);
                    self.m[i] = b2 * self.m[i] + (T::one() - b2) * g;
                }
            }
        }
        Ok(())
    }
}

fn sign<T: Real>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step() {
        let cfg = OptimizerConfig::adam(1e-3, 0.0);
        let mut st = OptimizerState::<f64>::new(1);
        let mut p = [0.5];
        st.step(&mut p, &[1.0], &cfg, 1e-3).unwrap();
        assert!((p[0] - 0.5 + 1e-3 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn lion_moves_by_the_rate() {
        let cfg = OptimizerConfig::lion(1e-4, 0.0);
        for g in [1e-12, 0.3, 7e5] {
            let mut st = OptimizerState::<f64>::new(1);
            let mut p = [2.0];
            st.step(&mut p, &[g], &cfg, 1e-4).unwrap();
            assert_eq!(p[0], 2.0 - 1e-4);
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        for cfg in [OptimizerConfig::adam(1e-2, 0.0), OptimizerConfig::lion(1e-2, 0.0)] {
            let mut st = OptimizerState::<f64>::new(3);
            let mut p = [1.0, -2.0, 0.0];
            for _ in 0..5 {
                st.step(&mut p, &[0.0; 3], &cfg, 1e-2).unwrap();
            }
            assert_eq!(p, [1.0, -2.0, 0.0]);
        }
    }

    #[test]
    fn decoupled_weight_decay() {
        let cfg = OptimizerConfig::adam(0.1, 0.5);
        let mut st = OptimizerState::<f64>::new(1);
        let mut p = [2.0];
        st.step(&mut p, &[0.0], &cfg, 0.1).unwrap();
        assert!((p[0] - (2.0 - 0.1 * 0.5 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn schedule_halves() {
        let s = Schedule { factor: 0.5, period: 200 };
        assert_eq!(s.rate(1e-3, 0), 1e-3);
        assert_eq!(s.rate(1e-3, 199), 1e-3);
        assert_eq!(s.rate(1e-3, 200), 5e-4);
        assert_eq!(s.rate(1e-3, 1000), 1e-3 / 32.0);
        assert_eq!(Schedule::CONSTANT.rate(0.1, 10_000), 0.1);
        assert!(OptimizerConfig::adam(0.0, 0.0).validate().is_err());
    }
}
