use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::render::{SpecSampler, StickerSpec};
use super::{apply_intervention, glyphs::GlyphSet, render_sticker};
use crate::dataio::{Dataset, Image, Sample};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, stream};
use crate::scalar::Scalar;

/// Which sticker attribute the subsidiary head classifies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StickerTask {
    #[serde(rename = "sticker-loc")]
    Location,
    #[serde(rename = "sticker-rot")]
    Rotation,
    #[serde(rename = "sticker-clsf")]
    Classification,
}

impl StickerTask {
    pub fn name(self) -> &'static str {
        match self {
            StickerTask::Location => "sticker-loc",
            StickerTask::Rotation => "sticker-rot",
            StickerTask::Classification => "sticker-clsf",
        }
    }

    /// `|C_n|` for the task; classification uses the glyph-set size.
    pub fn classes(self, glyph_classes: usize) -> usize {
        match self {
            StickerTask::Location | StickerTask::Rotation => 4,
            StickerTask::Classification => glyph_classes,
        }
    }

    pub fn label(self, spec: &StickerSpec) -> usize {
        match self {
            StickerTask::Location => assign_location_label(spec),
            StickerTask::Rotation => assign_rotation_label(spec),
            StickerTask::Classification => assign_class_label(spec),
        }
    }
}

impl fmt::Display for StickerTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StickerTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sticker-loc" | "location" => Ok(StickerTask::Location),
            "sticker-rot" | "rotation" => Ok(StickerTask::Rotation),
            "sticker-clsf" | "classification" => Ok(StickerTask::Classification),
            other => Err(Error::Config(format!("unknown sticker task `{other}`"))),
        }
    }
}

/// Quadrant of the sticker center: 0 top-left, 1 top-right, 2 bottom-left,
/// 3 bottom-right. A center exactly on a midline goes right/down.
pub fn assign_location_label(spec: &StickerSpec) -> usize {
    let (cx, cy) = spec.center;
    2 * usize::from(cy >= 0.5) + usize::from(cx >= 0.5)
}

pub fn assign_rotation_label(spec: &StickerSpec) -> usize {
    spec.rotation_class as usize
}

pub fn assign_class_label(spec: &StickerSpec) -> usize {
    spec.glyph_index
}

/// Sticker configuration shared by the source and target sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StickerConfig {
    pub classes: usize,
    pub scale_range: (f64, f64),
    pub lambda: f64,
    pub glyph_seed: u64,
}

impl Default for StickerConfig {
    fn default() -> Self {
        Self {
            classes: 10,
            scale_range: (0.1, 0.4),
            lambda: 0.4,
            glyph_seed: 0,
        }
    }
}

impl StickerConfig {
    pub fn glyphs(&self) -> GlyphSet {
        GlyphSet::random(self.classes, self.glyph_seed)
    }

    pub fn sampler(&self) -> SpecSampler {
        SpecSampler {
            classes: self.classes,
            scale_range: self.scale_range,
        }
    }
}

/// Audit record for one stickered sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StickerRecord {
    pub id: String,
    pub task: StickerTask,
    pub subsidiary_label: usize,
    pub glyph: char,
    #[serde(flatten)]
    pub spec: StickerSpec,
}

/// Draws a spec for `task` and pastes it onto `image`.
pub fn sticker_one<T: Scalar>(
    image: &Image<T>,
    task: StickerTask,
    cfg: &StickerConfig,
    glyphs: &GlyphSet,
    seed: u64,
) -> Result<(Image<T>, StickerSpec)> {
    let (h, w, _) = image.dims();
    let mut rng = rng_for(seed, stream::STICKER_SPEC, 0);
    let spec = cfg
        .sampler()
        .sample(h, w, task == StickerTask::Rotation, &mut rng);
    let sticker = render_sticker(&spec, glyphs, h, w, seed)?;
    let out = apply_intervention(image, &sticker, T::c(cfg.lambda))?;
    Ok((out, spec))
}

/// One stickered copy per input sample. Goal labels carry over when present;
/// the subsidiary label follows `task`.
pub fn build_sticker_dataset<T: Scalar>(
    ds: &Dataset<T>,
    task: StickerTask,
    seed: u64,
    cfg: &StickerConfig,
) -> Result<(Dataset<T>, Vec<StickerRecord>)> {
    if ds.is_empty() {
        return Err(Error::InvalidArgument("cannot sticker an empty dataset".into()));
    }
    let glyphs = cfg.glyphs();
    let mut samples = Vec::with_capacity(ds.len());
    let mut records = Vec::with_capacity(ds.len());
    for (i, s) in ds.samples.iter().enumerate() {
        let (image, spec) = sticker_one(&s.image, task, cfg, &glyphs, derive_seed(seed, stream::STICKER_SPEC, i as u64))?;
        let label = task.label(&spec);
        let id = s.id.derive("stk");
        records.push(StickerRecord {
            id: id.0.clone(),
            task,
            subsidiary_label: label,
            glyph: glyphs.char_of(spec.glyph_index),
            spec,
        });
        samples.push(Sample {
            id,
            image,
            goal_label: s.goal_label,
            subsidiary_label: Some(label),
            is_oos: false,
            is_stickered: true,
        });
    }
    let ds = Dataset::new(samples, ds.goal_classes, task.classes(cfg.classes), format!("{}+{}", ds.domain_tag, task))?
        .with_class_names(ds.class_names.clone());
    Ok((ds, records))
}
