use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{fingerprint_of, ArchConfig, ComponentSet, ModelBundle};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;

/// Pipeline stage that produced a checkpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    SourceGoal,
    SourceSticker,
    Adapted,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::SourceGoal => "source_goal",
            Phase::SourceSticker => "source_sticker",
            Phase::Adapted => "adapted",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source_goal" => Ok(Phase::SourceGoal),
            "source_sticker" => Ok(Phase::SourceSticker),
            "adapted" => Ok(Phase::Adapted),
            other => Err(Error::InvalidArgument(format!("unknown phase `{other}`"))),
        }
    }
}

/// Serialized parameters. Values are widened to `f64`, which is exact for
/// both supported scalar types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub phase: Phase,
    pub fingerprint: String,
    /// Fingerprint of the run configuration that produced the weights.
    pub config_fingerprint: Option<String>,
    pub arch: ArchConfig,
    pub goal_classes: usize,
    pub sticker_classes: usize,
    pub frozen: ComponentSet,
    pub backbone: Vec<f64>,
    pub backbone_running_mean: Vec<f64>,
    pub backbone_running_var: Vec<f64>,
    pub goal: Vec<f64>,
    pub goal_running_mean: Vec<f64>,
    pub goal_running_var: Vec<f64>,
    pub subsidiary: Vec<f64>,
}

fn widen<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.f64()).collect()
}

fn narrow<T: Scalar>(dst: &mut [T], src: &[f64], what: &str) -> Result<()> {
    if dst.len() != src.len() {
        return Err(Error::Checkpoint(format!(
            "{what}: expected {} values, found {}",
            dst.len(),
            src.len()
        )));
    }
    for (d, s) in dst.iter_mut().zip(src) {
        *d = T::c(*s);
    }
    Ok(())
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(m: &ModelBundle<T>, phase: Phase, config_fingerprint: Option<String>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            phase,
            fingerprint: m.fingerprint(),
            config_fingerprint,
            arch: m.arch.clone(),
            goal_classes: m.goal_classes(),
            sticker_classes: m.sticker_classes(),
            frozen: m.frozen(),
            backbone: widen(&m.backbone.params),
            backbone_running_mean: widen(&m.backbone.running.mean),
            backbone_running_var: widen(&m.backbone.running.var),
            goal: widen(&m.goal.params),
            goal_running_mean: widen(&m.goal.running.mean),
            goal_running_var: widen(&m.goal.running.var),
            subsidiary: widen(&m.subsidiary.params),
        }
    }

    pub fn to_model<T: Scalar>(&self) -> Result<ModelBundle<T>> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        let expected = fingerprint_of(&self.arch, self.goal_classes, self.sticker_classes);
        if expected != self.fingerprint {
            return Err(Error::Checkpoint(format!(
                "fingerprint {} does not match its own architecture ({expected})",
                self.fingerprint
            )));
        }
        let mut m = ModelBundle::build(&self.arch, self.goal_classes, self.sticker_classes, 0)?;
        narrow(&mut m.backbone.params, &self.backbone, "backbone")?;
        narrow(&mut m.backbone.running.mean, &self.backbone_running_mean, "backbone running mean")?;
        narrow(&mut m.backbone.running.var, &self.backbone_running_var, "backbone running var")?;
        narrow(&mut m.goal.params, &self.goal, "goal head")?;
        narrow(&mut m.goal.running.mean, &self.goal_running_mean, "goal running mean")?;
        narrow(&mut m.goal.running.var, &self.goal_running_var, "goal running var")?;
        narrow(&mut m.subsidiary.params, &self.subsidiary, "subsidiary head")?;
        m.set_frozen(self.frozen);
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let json = serde_json::to_vec(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Loads and rejects checkpoints produced under a different configuration.
    pub fn load_expecting(path: &Path, config_fingerprint: &str) -> Result<Self> {
        let ck = Self::load(path)?;
        match &ck.config_fingerprint {
            Some(fp) if fp == config_fingerprint => Ok(ck),
            other => Err(Error::Checkpoint(format!(
                "{} was written under config {:?}, current config is {config_fingerprint}",
                path.display(),
                other
            ))),
        }
    }
}
