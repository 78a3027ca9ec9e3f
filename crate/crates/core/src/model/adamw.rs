//! AdamW with decoupled weight decay.

use serde::{Deserialize, Serialize};

use super::ModelError;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    #[default]
    Constant,
    /// Decays linearly from the base rate towards zero over the run.
    #[value(alias = "linear-decay")]
    #[serde(alias = "linear-decay")]
    Linear,
}

impl Schedule {
    /// Rate for the 0-based `step` of `total` steps.
    pub fn rate(self, base: f64, step: usize, total: usize) -> f64 {
        match self {
            Schedule::Constant => base,
            Schedule::Linear => base * (1.0 - step as f64 / total.max(1) as f64),
        }
    }
}

/// Optimizer state for a list of parameter groups. Moments are allocated on
/// the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        AdamW {
            beta1: BETA1,
            beta2: BETA2,
            epsilon: EPSILON,
            weight_decay,
            step: 0,
            moments: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.moments
    }

    /// Applies one update to every group. Nothing is modified when a gradient
    /// is non-finite or shapes disagree.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<(), ModelError> {
        if params.len() != grads.len() {
            return Err(ModelError::Dimension {
                what: "gradient groups",
                expected: params.len(),
                found: grads.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(ModelError::Dimension {
                    what: "gradient length",
                    expected: p.len(),
                    found: g.len(),
                });
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFiniteGradient);
            }
        }
        if self.moments.is_empty() {
            self.moments = params
                .iter()
                .map(|p| (vec![0.0; p.len()], vec![0.0; p.len()]))
                .collect();
        } else if self.moments.len() != params.len()
            || self
                .moments
                .iter()
                .zip(params.iter())
                .any(|(m, p)| m.0.len() != p.len())
        {
            return Err(ModelError::Dimension {
                what: "optimizer state",
                expected: self.moments.len(),
                found: params.len(),
            });
        }

        self.step += 1;
        let t = self.step as i32;
        let correction1 = 1.0 - self.beta1.powi(t);
        let correction2 = 1.0 - self.beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(&mut self.moments) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / correction1;
                let v_hat = v[i] / correction2;
                p[i] -= lr * (m_hat / (v_hat.sqrt() + self.epsilon) + self.weight_decay * p[i]);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_parameter_step() {
        let mut opt = AdamW::new(0.0);
        let mut theta = [1.0];
        opt.step(&mut [&mut theta], &[&[1.0]], 0.1).unwrap();
        assert!((theta[0] - (1.0 - 0.1 / (1.0 + 1e-8))).abs() < 1e-12);
        assert!((theta[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn decay_only_step() {
        let mut opt = AdamW::new(0.01);
        let mut theta = [1.0];
        opt.step(&mut [&mut theta], &[&[0.0]], 0.1).unwrap();
        assert!((theta[0] - 0.999).abs() < 1e-12);
    }

    #[test]
    fn null_step_is_identity() {
        let mut opt = AdamW::new(0.0);
        let mut theta = [0.3, -2.0, 5.0];
        opt.step(&mut [&mut theta], &[&[0.0; 3]], 0.1).unwrap();
        assert_eq!(theta, [0.3, -2.0, 5.0]);
    }

    #[test]
    fn rejects_bad_gradients_without_mutation() {
        let mut opt = AdamW::new(0.0);
        let mut theta = [1.0];
        assert!(matches!(
            opt.step(&mut [&mut theta], &[&[f64::NAN]], 0.1),
            Err(ModelError::NonFiniteGradient)
        ));
        assert_eq!(theta, [1.0]);
        assert_eq!(opt.steps(), 0);
        assert!(opt.step(&mut [&mut theta], &[&[1.0, 2.0]], 0.1).is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(Schedule::Constant.rate(0.1, 5, 10), 0.1);
        assert_eq!(Schedule::Linear.rate(0.2, 0, 4), 0.2);
        assert_eq!(Schedule::Linear.rate(0.2, 2, 4), 0.1);
    }
}
