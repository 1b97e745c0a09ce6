use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use stickerda::dataio::ShiftSpec;
use stickerda::metrics::SuitabilityConfig;
use stickerda::model::ArchConfig;
use stickerda::trainer::TrainConfig;

/// Where the source and target domains come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Image-folder roots. When both are unset a synthetic pair is generated.
    pub source_dir: Option<PathBuf>,
    pub target_dir: Option<PathBuf>,
    pub classes: usize,
    pub per_class: usize,
    pub shift: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source_dir: None,
            target_dir: None,
            classes: 4,
            per_class: 100,
            shift: "noise:0.6".into(),
        }
    }
}

impl DataConfig {
    pub fn shift_spec(&self) -> Result<ShiftSpec> {
        Ok(self.shift.parse()?)
    }
}

/// Everything a run reads. Serialized as the run-directory snapshot.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub arch: ArchConfig,
    pub train: TrainConfig,
    pub suitability: SuitabilityConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self).context("serializing config")?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.arch.validate()?;
        self.data.shift_spec()?;
        if self.data.source_dir.is_some() != self.data.target_dir.is_some() {
            bail!("data.source_dir and data.target_dir must be set together");
        }
        Ok(())
    }

    /// Seeds every stage from one value.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.suitability.seed = seed;
    }
}
