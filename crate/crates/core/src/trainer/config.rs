use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Component, ComponentSet};
use crate::nn::AdamConfig;
use crate::sticker::{StickerConfig, StickerTask};

/// The six objectives. Each has its own optimizer and a fixed set of
/// components it is allowed to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LossKind {
    #[serde(rename = "L_sg")]
    GoalCe,
    #[serde(rename = "L_sn")]
    Subsidiary,
    #[serde(rename = "L_od")]
    Oos,
    #[serde(rename = "L_tn")]
    TargetSubsidiary,
    #[serde(rename = "L_st")]
    SelfTraining,
    #[serde(rename = "L_div")]
    Diversity,
}

impl LossKind {
    pub const ALL: [LossKind; 6] = [
        LossKind::GoalCe,
        LossKind::Subsidiary,
        LossKind::Oos,
        LossKind::TargetSubsidiary,
        LossKind::SelfTraining,
        LossKind::Diversity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::GoalCe => "L_sg",
            LossKind::Subsidiary => "L_sn",
            LossKind::Oos => "L_od",
            LossKind::TargetSubsidiary => "L_tn",
            LossKind::SelfTraining => "L_st",
            LossKind::Diversity => "L_div",
        }
    }

    pub fn components(self) -> ComponentSet {
        use Component::*;
        match self {
            LossKind::GoalCe => ComponentSet::of(&[Backbone, Goal]),
            LossKind::Subsidiary | LossKind::Oos => ComponentSet::of(&[Subsidiary]),
            LossKind::TargetSubsidiary => ComponentSet::of(&[Backbone, Subsidiary]),
            LossKind::SelfTraining | LossKind::Diversity => ComponentSet::of(&[Backbone]),
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown loss `{s}`")))
    }
}

/// Feature space stored in the memory bank.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BankSpace {
    #[default]
    Backbone,
    GoalLogits,
}

impl FromStr for BankSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backbone" => Ok(BankSpace::Backbone),
            "goal_logits" => Ok(BankSpace::GoalLogits),
            other => Err(Error::Config(format!("unknown bank space `{other}`"))),
        }
    }
}

/// Loss toggles for ablation runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Ablation {
    pub no_subsidiary: bool,
    pub no_oos: bool,
    pub no_st: bool,
    pub no_div: bool,
}

impl Ablation {
    /// `L_st + L_div` only.
    pub fn adaptation_baseline() -> Self {
        Self {
            no_subsidiary: true,
            ..Self::default()
        }
    }

    pub fn disables(&self, kind: LossKind) -> bool {
        match kind {
            LossKind::TargetSubsidiary => self.no_subsidiary,
            LossKind::Oos => self.no_oos,
            LossKind::SelfTraining => self.no_st,
            LossKind::Diversity => self.no_div,
            LossKind::GoalCe | LossKind::Subsidiary => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Adam step size for goal and sticker pretraining.
    pub lr: f64,
    /// Adam step size for target adaptation.
    pub adapt_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs_goal: usize,
    pub epochs_sticker: usize,
    pub epochs_adapt: usize,
    pub task: StickerTask,
    pub sticker: StickerConfig,
    pub oos_grid: usize,
    pub sticker_prob: f64,
    pub temperature: f64,
    pub smoothing: f64,
    pub bank_space: BankSpace,
    pub adapt_order: Vec<LossKind>,
    pub ablation: Ablation,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            adapt_lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 64,
            epochs_goal: 20,
            epochs_sticker: 10,
            epochs_adapt: 15,
            task: StickerTask::Classification,
            sticker: StickerConfig::default(),
            oos_grid: crate::oos::DEFAULT_GRID,
            sticker_prob: crate::oos::DEFAULT_STICKER_PROB,
            temperature: 0.05,
            smoothing: 0.1,
            bank_space: BankSpace::Backbone,
            adapt_order: vec![LossKind::TargetSubsidiary, LossKind::SelfTraining, LossKind::Diversity],
            ablation: Ablation::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Epoch caps used at full benchmark scale.
    pub fn paper_scale() -> Self {
        Self {
            epochs_goal: 100,
            epochs_sticker: 30,
            epochs_adapt: 30,
            adapt_lr: 1e-3,
            ..Self::default()
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn adapt_adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.adapt_lr,
            ..self.adam()
        }
    }

    /// `|C_n|` for the configured task.
    pub fn sticker_classes(&self) -> usize {
        self.task.classes(self.sticker.classes)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.lr, self.adapt_lr, self.adam_eps, self.temperature];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config("lr, adapt_lr, adam_eps and temperature must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 || self.epochs_goal == 0 || self.epochs_sticker == 0 || self.epochs_adapt == 0 {
            return Err(Error::Config("batch size and epoch caps must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(Error::Config(format!("smoothing {} outside [0, 1)", self.smoothing)));
        }
        if !(0.0..=1.0).contains(&self.sticker.lambda) {
            return Err(Error::Config(format!("mixup lambda {} outside [0, 1]", self.sticker.lambda)));
        }
        let (lo, hi) = self.sticker.scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::Config(format!("bad sticker scale range ({lo}, {hi})")));
        }
        if self.sticker.classes < 2 || self.sticker.classes > crate::sticker::ALPHABET_SIZE {
            return Err(Error::Config(format!("sticker classes {} outside [2, 26]", self.sticker.classes)));
        }
        if self.oos_grid < 2 {
            return Err(Error::Config("OOS grid must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.sticker_prob) {
            return Err(Error::Config(format!("sticker_prob {} outside [0, 1]", self.sticker_prob)));
        }
        let allowed = [LossKind::TargetSubsidiary, LossKind::SelfTraining, LossKind::Diversity];
        for (i, k) in self.adapt_order.iter().enumerate() {
            if !allowed.contains(k) {
                return Err(Error::Config(format!("{k} is not an adaptation loss")));
            }
            if self.adapt_order[..i].contains(k) {
                return Err(Error::Config(format!("{k} listed twice in adapt_order")));
            }
        }
        Ok(())
    }

    /// Short hash of the full configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .take(8)
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
