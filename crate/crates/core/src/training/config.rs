use crate::config::KvConfig;
use crate::error::{Error, Result};

/// Optimization settings for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Weight of the classification loss against the segmentation loss.
    pub loss_mix_lambda: f64,
    pub dropout_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 0.001,
            epochs: 30,
            loss_mix_lambda: 1.0,
            dropout_rate: 0.5,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config("dropout_rate must be in [0, 1)".into()));
        }
        if self.loss_mix_lambda < 0.0 {
            return Err(Error::Config("loss_mix_lambda must be >= 0".into()));
        }
        Ok(())
    }

    /// Reads the training keys out of `kv`, leaving the others for the
    /// architecture parser.
    pub fn from_kv(kv: &mut KvConfig) -> Result<Self> {
        let d = Self::default();
        let cfg = Self {
            batch_size: kv.take_or("batch_size", d.batch_size)?,
            learning_rate: kv.take_or("learning_rate", d.learning_rate)?,
            epochs: kv.take_or("epochs", d.epochs)?,
            loss_mix_lambda: kv.take_or("loss_mix_lambda", d.loss_mix_lambda)?,
            dropout_rate: kv.peek_or("dropout_rate", d.dropout_rate)?,
            seed: kv.take_or("seed", d.seed)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
