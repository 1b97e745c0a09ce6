//! Minimal neural-network building blocks with hand-written backward passes.

mod adam;
mod layers;
pub mod ops;

pub use adam::{AdamConfig, AdamState};
pub use layers::{BatchNorm, BnCache, BnStats, Conv3, ConvCache, Linear, ParamAlloc, WnLinear, BN_EPS, BN_MOMENTUM};
