use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Hyperparameters shared by every trainer. Defaults follow the clinical
/// setup (20 hidden units); use [`TrainConfig::simulation`] for 5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub hidden_units: usize,
    pub adversary_steps_per_label_step: usize,
    /// Selection weights `α_i`; empty means 1.0 for every confounder.
    pub adversary_loss_weights: Vec<f64>,
    pub optimizer: AdamConfig,
    pub l2: f64,
    pub validation_fraction: f64,
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.005,
            batch_size: 64,
            iterations: 6000,
            hidden_units: 20,
            adversary_steps_per_label_step: 3,
            adversary_loss_weights: Vec::new(),
            optimizer: AdamConfig::default(),
            l2: 0.0,
            validation_fraction: 0.2,
            checkpoint_every: 100,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn simulation() -> Self {
        Self {
            hidden_units: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate > 0.0 && self.learning_rate.is_finite()),
            ("batch_size", self.batch_size > 0),
            ("iterations", self.iterations > 0),
            ("hidden_units", self.hidden_units > 0),
            ("adversary_steps_per_label_step", self.adversary_steps_per_label_step > 0),
            ("checkpoint_every", self.checkpoint_every > 0),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, ok)| !ok) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.adversary_loss_weights.iter().any(|a| !(*a >= 0.0)) {
            return Err(Error::Config("adversary_loss_weights must be non-negative".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config("validation_fraction must be in [0, 1)".into()));
        }
        if self.l2 < 0.0 {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        Ok(())
    }

    /// `α_i` for `count` confounders.
    pub fn selection_weights(&self, count: usize) -> Result<Vec<f64>> {
        if self.adversary_loss_weights.is_empty() {
            return Ok(vec![1.0; count]);
        }
        if self.adversary_loss_weights.len() != count {
            return Err(Error::Config(format!(
                "{} adversary loss weights for {count} confounders",
                self.adversary_loss_weights.len()
            )));
        }
        Ok(self.adversary_loss_weights.clone())
    }
}
