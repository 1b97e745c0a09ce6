//! Source-free domain adaptation with a concurrent sticker subsidiary task.
//!
//! The crate is generic over the floating-point type; `f32` is used for
//! training and `f64` for gradient checks. Aliases for both are below.

pub mod dataio;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod oos;
pub mod pretext;
pub mod rng;
pub mod scalar;
pub mod sticker;
pub mod trainer;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Image32 = dataio::Image<f32>;
pub type Image64 = dataio::Image<f64>;
pub type Dataset32 = dataio::Dataset<f32>;
pub type Dataset64 = dataio::Dataset<f64>;
pub type Model32 = model::ModelBundle<f32>;
pub type Model64 = model::ModelBundle<f64>;
pub type MemoryBank32 = losses::MemoryBank<f32>;
pub type MemoryBank64 = losses::MemoryBank<f64>;
