//! Dual-task lung segmentation and classification networks on a small
//! reverse-mode autograd engine, with infection localization, severity
//! reporting and a synthetic chest-phantom dataset.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`], [`ops`], [`autograd`]: dense f64 tensors, kernels and the tape.
//! - [`training`]: losses, Adam, parameter storage and the ILNW weight format.
//! - [`net`]: node grids for the `unet`, `unetpp` and `streamlined` topologies.
//! - [`metrics`]: masks, overlap scores, confusion matrices, curve CSVs.
//! - [`synth`]: phantom generation and PGM/PPM dataset I/O.
//! - [`pipeline`]: training both networks and turning predictions into reports.
//! - [`cli`]: the `lungnet` command-line front end.

pub mod autograd;
pub mod cli;
pub mod config;
pub mod error;
pub mod gradcheck;
pub mod image;
pub mod metrics;
pub mod net;
pub mod ops;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::Tensor;
