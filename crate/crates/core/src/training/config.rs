//! Training hyperparameters.

use super::adam::AdamConfig;
use super::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::network::DROPOUT_P;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub dropout_p: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub augment: AugmentConfig,
    pub ensemble_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        TrainConfig {
            batch_size: 16,
            learning_rate: adam.learning_rate,
            epochs: 500,
            dropout_p: DROPOUT_P,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_epsilon: adam.epsilon,
            augment: AugmentConfig::default(),
            ensemble_size: 6,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }

    /// A zero learning rate is accepted so that a run can exercise the loop
    /// without moving the parameters.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Config(what));
        if self.batch_size < 2 {
            return bad(format!("batch_size must be at least 2, got {}", self.batch_size));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad(format!("dropout_p must lie in [0, 1), got {}", self.dropout_p));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(format!("{name} must lie in (0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0 && self.adam_epsilon.is_finite()) {
            return bad(format!("adam_epsilon must be positive, got {}", self.adam_epsilon));
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size must be positive".into());
        }
        self.augment.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.batch_size, c.epochs, c.ensemble_size), (16, 500, 6));
        assert_eq!(c.learning_rate, 0.003);
        assert_eq!(c.dropout_p, 0.5);
        assert_eq!((c.adam_beta1, c.adam_beta2, c.adam_epsilon), (0.9, 0.999, 1e-8));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        let base = TrainConfig::default();
        assert!(TrainConfig { batch_size: 1, ..base }.validate().is_err());
        assert!(TrainConfig {
            learning_rate: -1.0,
            ..base
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..base
        }
        .validate()
        .is_ok());
        assert!(TrainConfig {
            adam_beta2: 1.0,
            ..base
        }
        .validate()
        .is_err());
        assert!(TrainConfig { dropout_p: 1.0, ..base }.validate().is_err());
        assert!(TrainConfig { epochs: 0, ..base }.validate().is_err());
    }
}
