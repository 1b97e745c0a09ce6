use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Desk-scale architecture. Inputs are mapped from `[0, 1]` to `[-1, 1]`.
/// Every backbone block but the last is conv-ReLU-maxpool; the last is
/// conv-ReLU-global-average-pool, followed by a linear layer and a batch norm
/// producing the feature vector. The subsidiary head taps the penultimate
/// block's activation before its pooling.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchConfig {
    pub image_size: usize,
    pub input_channels: usize,
    pub channels: Vec<usize>,
    pub feature_dim: usize,
    pub bottleneck: usize,
    pub subsidiary_channels: usize,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            image_size: 32,
            input_channels: 3,
            channels: vec![8, 16, 32, 64],
            feature_dim: 128,
            bottleneck: 64,
            subsidiary_channels: 64,
        }
    }
}

impl ArchConfig {
    /// A few hundred parameters; for gradient checks.
    pub fn tiny() -> Self {
        Self {
            image_size: 8,
            input_channels: 3,
            channels: vec![2, 3, 4, 4],
            feature_dim: 4,
            bottleneck: 4,
            subsidiary_channels: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 {
            return Err(Error::Config("backbone needs at least two blocks".into()));
        }
        if self.channels.iter().any(|&c| c == 0)
            || self.feature_dim == 0
            || self.bottleneck == 0
            || self.subsidiary_channels == 0
            || self.input_channels == 0
        {
            return Err(Error::Config("all widths must be positive".into()));
        }
        let downsample = 1usize << (self.channels.len() - 1);
        if self.image_size == 0 || self.image_size % downsample != 0 {
            return Err(Error::Config(format!(
                "image size {} must be a positive multiple of {downsample}",
                self.image_size
            )));
        }
        Ok(())
    }

    /// Side length of the tapped feature map.
    pub fn tap_side(&self) -> usize {
        self.image_size >> (self.channels.len() - 2)
    }

    pub fn tap_channels(&self) -> usize {
        self.channels[self.channels.len() - 2]
    }

    pub fn tap_len(&self) -> usize {
        self.tap_channels() * self.tap_side() * self.tap_side()
    }
}
