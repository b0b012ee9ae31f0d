//! Losses, parameters and their initialization, the Adam optimizer and the
//! weight-file format.

mod adam;
mod config;
mod loss;
mod param;
pub mod weights;

pub use adam::{adam_step, AdamConfig};
pub use config::TrainConfig;
pub use loss::{bce_loss, categorical_ce_loss, LossOutput, PROB_CLAMP};
pub use param::{init_he, ParamKind, ParamStore, Parameter};
pub use weights::{load_weights, save_weights, WeightMap};
