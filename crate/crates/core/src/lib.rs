//! Low-light image enhancement in a robust HVI color space with frequency-band experts.
//!
//! The forward path is deterministic and runs on CPU in `f32`:
//! [`color::rhvi_forward`] decouples illumination from chrominance,
//! [`fdd::fdd_apply`] refines the chrominance bottleneck per DCT band, and
//! [`pipeline::enhance`] wires both into a small encoder/decoder.

pub mod cli;
pub mod color;
pub mod config;
pub mod container;
pub mod degrade;
pub mod error;
pub mod fdd;
pub mod io;
pub mod irm;
pub mod loss;
pub mod metrics;
pub mod pipeline;
pub mod tensor;
pub mod weights;

pub use color::{HviImage, RgbImage};
pub use error::{Error, Result};
pub use pipeline::{enhance, EnhanceConfig};
pub use tensor::Tensor;
pub use weights::WeightStore;
