use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training hyperparameters. Defaults are the published settings: 7x7
/// patches, batches of 128, 40 epochs, lr 1e-3 dropping to 1e-4 after epoch
/// 20, lambda 1, blur on half the patches with sigma up to 0.5.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub patch_size: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Number of epochs trained at `lr_initial` before switching to `lr_final`.
    pub lr_drop_epoch: usize,
    pub lambda: f64,
    pub blur_probability: f64,
    pub sigma_max: f64,
    /// Use this sigma for every blurred patch instead of drawing one.
    pub fixed_sigma: Option<f64>,
    pub stride: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            patch_size: 7,
            batch_size: 128,
            epochs: 40,
            lr_initial: 1e-3,
            lr_final: 1e-4,
            lr_drop_epoch: 20,
            lambda: 1.0,
            blur_probability: 0.5,
            sigma_max: 0.5,
            fixed_sigma: None,
            stride: 3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Same schedule compressed to `epochs`, dropping lr at the halfway point.
    pub fn scaled_to_epochs(epochs: usize) -> Self {
        Self {
            epochs,
            lr_drop_epoch: epochs / 2,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("patch_size", self.patch_size),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("stride", self.stride),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("lr_initial", self.lr_initial), ("lr_final", self.lr_final), ("sigma_max", self.sigma_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.blur_probability) {
            return Err(Error::invalid(format!("blur_probability {} outside [0, 1]", self.blur_probability)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if let Some(s) = self.fixed_sigma {
            if !(s > 0.0) {
                return Err(Error::invalid(format!("fixed_sigma must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Learning rate for a zero-based epoch index.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if epoch < self.lr_drop_epoch {
            self.lr_initial
        } else {
            self.lr_final
        }
    }
}
