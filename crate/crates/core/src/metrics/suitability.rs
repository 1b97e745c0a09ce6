use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::model::ModelBundle;
use crate::pretext::{build_pretext_dataset, Pretext};
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;
use crate::sticker::{build_sticker_dataset, StickerConfig, StickerTask};

use super::{a_distance, dataset_features, dsm_from, tsm_from_features, FormulaVariant, ProbeConfig};

pub const DEFAULT_ZETA_D: f64 = 0.5;
pub const DEFAULT_ZETA_N: f64 = 0.6;
pub const DEFAULT_ZETA: f64 = 1.1;

/// Candidate subsidiary tasks: the three sticker tasks and three
/// whole-image pretext tasks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubsidiaryTask {
    #[serde(rename = "sticker-loc")]
    StickerLoc,
    #[serde(rename = "sticker-rot")]
    StickerRot,
    #[serde(rename = "sticker-clsf")]
    StickerClsf,
    #[serde(rename = "image-rotation")]
    ImageRotation,
    #[serde(rename = "patch-location")]
    PatchLocation,
    #[serde(rename = "jigsaw")]
    Jigsaw,
}

impl SubsidiaryTask {
    pub const ALL: [SubsidiaryTask; 6] = [
        SubsidiaryTask::StickerLoc,
        SubsidiaryTask::StickerRot,
        SubsidiaryTask::StickerClsf,
        SubsidiaryTask::ImageRotation,
        SubsidiaryTask::PatchLocation,
        SubsidiaryTask::Jigsaw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SubsidiaryTask::StickerLoc => "sticker-loc",
            SubsidiaryTask::StickerRot => "sticker-rot",
            SubsidiaryTask::StickerClsf => "sticker-clsf",
            SubsidiaryTask::ImageRotation => "image-rotation",
            SubsidiaryTask::PatchLocation => "patch-location",
            SubsidiaryTask::Jigsaw => "jigsaw",
        }
    }

    pub fn sticker_task(self) -> Option<StickerTask> {
        match self {
            SubsidiaryTask::StickerLoc => Some(StickerTask::Location),
            SubsidiaryTask::StickerRot => Some(StickerTask::Rotation),
            SubsidiaryTask::StickerClsf => Some(StickerTask::Classification),
            _ => None,
        }
    }

    /// The intervened dataset `D_{s,n}` with subsidiary labels.
    pub fn build<T: Scalar>(self, d_s: &Dataset<T>, seed: u64, sticker: &StickerConfig) -> Result<Dataset<T>> {
        match self {
            SubsidiaryTask::ImageRotation => build_pretext_dataset(d_s, Pretext::ImageRotation, seed),
            SubsidiaryTask::PatchLocation => build_pretext_dataset(d_s, Pretext::PatchLocation, seed),
            SubsidiaryTask::Jigsaw => build_pretext_dataset(d_s, Pretext::Jigsaw, seed),
            sticker_task => Ok(build_sticker_dataset(d_s, sticker_task.sticker_task().unwrap(), seed, sticker)?.0),
        }
    }
}

impl fmt::Display for SubsidiaryTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SubsidiaryTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SubsidiaryTask::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subsidiary task `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuitabilityConfig {
    pub zeta_d: f64,
    pub zeta_n: f64,
    pub zeta: f64,
    pub formula_variant: FormulaVariant,
    /// Tasks with more classes are probed on this many seeded classes.
    pub tsm_classes: usize,
    pub probe: ProbeConfig,
    pub seed: u64,
}

impl Default for SuitabilityConfig {
    fn default() -> Self {
        Self {
            zeta_d: DEFAULT_ZETA_D,
            zeta_n: DEFAULT_ZETA_N,
            zeta: DEFAULT_ZETA,
            formula_variant: FormulaVariant::Standard,
            tsm_classes: 4,
            probe: ProbeConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuitabilityReport {
    pub task: SubsidiaryTask,
    pub dsm: f64,
    pub tsm: f64,
    pub zeta_d: f64,
    pub zeta_n: f64,
    pub zeta: f64,
    pub passes: bool,
    pub psi: f64,
    pub d_a: f64,
    pub formula_variant: FormulaVariant,
}

/// DSM and TSM of `task` on `d_s`, both measured on features of the frozen
/// goal-pretrained `backbone`.
pub fn suitability<T: Scalar>(
    d_s: &Dataset<T>,
    task: SubsidiaryTask,
    backbone: &ModelBundle<T>,
    sticker: &StickerConfig,
    cfg: &SuitabilityConfig,
) -> Result<SuitabilityReport> {
    let source = dataset_features(backbone, d_s)?;
    suitability_with_features(&source, d_s, task, backbone, sticker, cfg)
}

/// Same as [`suitability`] with the source features precomputed.
pub fn suitability_with_features<T: Scalar>(
    source_features: &[Vec<f64>],
    d_s: &Dataset<T>,
    task: SubsidiaryTask,
    backbone: &ModelBundle<T>,
    sticker: &StickerConfig,
    cfg: &SuitabilityConfig,
) -> Result<SuitabilityReport> {
    let d_sn = task.build(d_s, derive_seed(cfg.seed, stream::PRETEXT, 100), sticker)?;
    let feats = dataset_features(backbone, &d_sn)?;
    let d = a_distance(
        source_features,
        &feats,
        derive_seed(cfg.seed, stream::PROBE, 10),
        cfg.formula_variant,
        &cfg.probe,
    )?;
    let dsm = dsm_from(&d);
    let labels: Vec<usize> = d_sn.samples.iter().map(|s| s.subsidiary_label.unwrap()).collect();
    let tsm = tsm_from_features(
        &feats,
        &labels,
        d_sn.subsidiary_classes,
        Some(cfg.tsm_classes),
        derive_seed(cfg.seed, stream::PROBE, 11),
        &cfg.probe,
    )?;
    Ok(SuitabilityReport {
        task,
        dsm,
        tsm,
        zeta_d: cfg.zeta_d,
        zeta_n: cfg.zeta_n,
        zeta: cfg.zeta,
        passes: dsm + tsm > cfg.zeta,
        psi: d.psi,
        d_a: d.d_a,
        formula_variant: cfg.formula_variant,
    })
}
