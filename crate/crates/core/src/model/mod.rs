//! The model bundle: backbone `h`, goal head `f_g`, subsidiary head `f_n`
//! (with the out-of-source node), freezing, and checkpoints.

mod arch;
mod checkpoint;
mod components;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use arch::ArchConfig;
pub use checkpoint::{Checkpoint, Phase, CHECKPOINT_VERSION};
pub use components::{Backbone, BackboneCache, BackboneOut, GoalCache, GoalHead, SubsidiaryCache, SubsidiaryHead};

use crate::dataio::Image;
use crate::nn::BnCache;
use crate::error::{Error, Result};
use crate::rng::{rng_for, stream};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "h")]
    Backbone,
    #[serde(rename = "f_g")]
    Goal,
    #[serde(rename = "f_n")]
    Subsidiary,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::Backbone, Component::Goal, Component::Subsidiary];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::Backbone => "h",
            Component::Goal => "f_g",
            Component::Subsidiary => "f_n",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "h" | "backbone" => Ok(Component::Backbone),
            "f_g" | "goal" => Ok(Component::Goal),
            "f_n" | "subsidiary" => Ok(Component::Subsidiary),
            other => Err(Error::InvalidArgument(format!("unknown component `{other}`"))),
        }
    }
}

/// Small set of components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComponentSet([bool; 3]);

impl ComponentSet {
    pub const NONE: ComponentSet = ComponentSet([false; 3]);

    pub fn of(components: &[Component]) -> Self {
        let mut s = Self::NONE;
        for &c in components {
            s.0[c.index()] = true;
        }
        s
    }

    pub fn contains(&self, c: Component) -> bool {
        self.0[c.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = Component> + '_ {
        Component::ALL.into_iter().filter(|c| self.contains(*c))
    }
}

/// Gradient buffers, one flat vector per component.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads<T> {
    parts: [Vec<T>; 3],
}

impl<T: Scalar> Grads<T> {
    pub fn zeros_like(model: &ModelBundle<T>) -> Self {
        Self {
            parts: [
                vec![T::zero(); model.backbone.params.len()],
                vec![T::zero(); model.goal.params.len()],
                vec![T::zero(); model.subsidiary.params.len()],
            ],
        }
    }

    pub fn get(&self, c: Component) -> &[T] {
        &self.parts[c.index()]
    }

    pub fn get_mut(&mut self, c: Component) -> &mut [T] {
        &mut self.parts[c.index()]
    }

    pub fn scale(&mut self, s: T) {
        for p in &mut self.parts {
            p.iter_mut().for_each(|g| *g *= s);
        }
    }

    pub fn is_zero(&self, c: Component) -> bool {
        self.get(c).iter().all(|g| *g == T::zero())
    }
}

/// Backbone outputs for a batch, kept for the backward pass.
pub struct BackboneTrace<T> {
    pub z: Vec<Vec<T>>,
    pub tap: Vec<Vec<T>>,
    caches: Vec<BackboneCache<T>>,
    /// Feature batch-norm state; commit with [`ModelBundle::commit_backbone_stats`].
    pub bn: BnCache<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle<T> {
    pub arch: ArchConfig,
    pub backbone: Backbone<T>,
    pub goal: GoalHead<T>,
    pub subsidiary: SubsidiaryHead<T>,
    frozen: ComponentSet,
    goal_classes: usize,
    sticker_classes: usize,
}

pub(crate) fn check_finite<T: Scalar>(rows: &[Vec<T>], batch: usize) -> Result<()> {
    if rows.iter().flatten().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { batch })
    }
}

impl<T: Scalar> ModelBundle<T> {
    /// Deterministic initialization from `seed`. The subsidiary head emits
    /// `sticker_classes + 1` logits; the last is the out-of-source node.
    pub fn build(arch: &ArchConfig, goal_classes: usize, sticker_classes: usize, seed: u64) -> Result<Self> {
        arch.validate()?;
        if goal_classes < 2 || sticker_classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 goal and sticker classes, got {goal_classes} and {sticker_classes}"
            )));
        }
        let backbone = Backbone::new(arch, &mut rng_for(seed, stream::MODEL_INIT, 0));
        let goal = GoalHead::new(arch, goal_classes, &mut rng_for(seed, stream::MODEL_INIT, 1));
        let subsidiary = SubsidiaryHead::new(arch, sticker_classes, &mut rng_for(seed, stream::MODEL_INIT, 2));
        Ok(Self {
            arch: arch.clone(),
            backbone,
            goal,
            subsidiary,
            frozen: ComponentSet::NONE,
            goal_classes,
            sticker_classes,
        })
    }

    pub fn goal_classes(&self) -> usize {
        self.goal_classes
    }

    pub fn sticker_classes(&self) -> usize {
        self.sticker_classes
    }

    /// Index of the out-of-source logit.
    pub fn oos_index(&self) -> usize {
        self.sticker_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.arch.feature_dim
    }

    pub fn set_frozen(&mut self, components: ComponentSet) {
        self.frozen = components;
    }

    pub fn frozen(&self) -> ComponentSet {
        self.frozen
    }

    pub fn is_frozen(&self, c: Component) -> bool {
        self.frozen.contains(c)
    }

    pub fn params(&self, c: Component) -> &[T] {
        match c {
            Component::Backbone => &self.backbone.params,
            Component::Goal => &self.goal.params,
            Component::Subsidiary => &self.subsidiary.params,
        }
    }

    pub fn params_mut(&mut self, c: Component) -> &mut [T] {
        match c {
            Component::Backbone => &mut self.backbone.params,
            Component::Goal => &mut self.goal.params,
            Component::Subsidiary => &mut self.subsidiary.params,
        }
    }

    pub fn param_count(&self) -> usize {
        Component::ALL.iter().map(|&c| self.params(c).len()).sum()
    }

    /// SHA-256 over the parameter bits and batch-norm buffers of `c`.
    pub fn checksum(&self, c: Component) -> String {
        let mut hasher = Sha256::new();
        for v in self.params(c) {
            hasher.update(v.bits().to_le_bytes());
        }
        let running = match c {
            Component::Backbone => Some(&self.backbone.running),
            Component::Goal => Some(&self.goal.running),
            Component::Subsidiary => None,
        };
        if let Some(r) = running {
            for v in r.mean.iter().chain(&r.var) {
                hasher.update(v.bits().to_le_bytes());
            }
        }
        hex(&hasher.finalize())
    }

    pub fn checksums(&self) -> [String; 3] {
        Component::ALL.map(|c| self.checksum(c))
    }

    /// Identifies the parameter layout: architecture and label-space sizes.
    pub fn fingerprint(&self) -> String {
        fingerprint_of(&self.arch, self.goal_classes, self.sticker_classes)
    }

    fn input_of(&self, img: &Image<T>) -> Result<Vec<T>> {
        let s = self.arch.image_size;
        if img.dims() != (s, s, self.arch.input_channels) {
            return Err(Error::Shape(format!(
                "model expects {s}x{s}x{} input, got {:?}",
                self.arch.input_channels,
                img.dims()
            )));
        }
        Ok(img.to_chw().into_iter().map(|v| (v - T::c(0.5)) * T::c(2.0)).collect())
    }

    /// Backbone pass that keeps caches for backpropagation. The feature batch
    /// norm uses batch statistics only while `h` is trainable.
    pub fn backbone_forward(&self, batch: &[&Image<T>]) -> Result<BackboneTrace<T>> {
        let mut pre = Vec::with_capacity(batch.len());
        let mut tap = Vec::with_capacity(batch.len());
        let mut caches = Vec::with_capacity(batch.len());
        for img in batch {
            let out = self.backbone.forward(&self.input_of(img)?, true);
            pre.push(out.pre);
            tap.push(out.tap);
            caches.push(out.cache.unwrap());
        }
        let (z, bn) = self.backbone.normalize(&pre, !self.is_frozen(Component::Backbone));
        Ok(BackboneTrace { z, tap, caches, bn })
    }

    pub fn backbone_backward(
        &self,
        trace: &BackboneTrace<T>,
        dz: Option<&[Vec<T>]>,
        dtap: Option<&[Vec<T>]>,
        grads: &mut Grads<T>,
    ) {
        let g = grads.get_mut(Component::Backbone);
        let dpre = dz.map(|d| self.backbone.normalize_backward(&trace.bn, d, g));
        for (i, cache) in trace.caches.iter().enumerate() {
            self.backbone
                .backward(cache, dpre.as_ref().map(|d| d[i].as_slice()), dtap.map(|d| d[i].as_slice()), g);
        }
    }

    pub fn commit_backbone_stats(&mut self, cache: &BnCache<T>) {
        if !self.is_frozen(Component::Backbone) {
            self.backbone.update_running(cache);
        }
    }

    /// Batch norm in `f_g` uses batch statistics only while `f_g` is trainable.
    pub fn goal_forward(&self, z: &[Vec<T>]) -> (Vec<Vec<T>>, GoalCache<T>) {
        self.goal.forward(z, !self.is_frozen(Component::Goal))
    }

    pub fn goal_backward(&self, cache: &GoalCache<T>, dlogits: &[Vec<T>], grads: &mut Grads<T>) -> Vec<Vec<T>> {
        self.goal.backward(cache, dlogits, grads.get_mut(Component::Goal))
    }

    pub fn commit_goal_stats(&mut self, cache: &GoalCache<T>) {
        if !self.is_frozen(Component::Goal) {
            self.goal.update_running(cache);
        }
    }

    pub fn subsidiary_forward(&self, tap: &[Vec<T>]) -> (Vec<Vec<T>>, Vec<SubsidiaryCache<T>>) {
        tap.iter().map(|t| self.subsidiary.forward(t)).unzip()
    }

    pub fn subsidiary_backward(
        &self,
        caches: &[SubsidiaryCache<T>],
        dlogits: &[Vec<T>],
        grads: &mut Grads<T>,
        need_tap_grad: bool,
    ) -> Option<Vec<Vec<T>>> {
        let g = grads.get_mut(Component::Subsidiary);
        let out: Vec<Option<Vec<T>>> = caches
            .iter()
            .zip(dlogits)
            .map(|(c, d)| self.subsidiary.backward(c, d, g, need_tap_grad))
            .collect();
        need_tap_grad.then(|| out.into_iter().map(Option::unwrap).collect())
    }

    /// Inference-mode backbone outputs `(z, tap)` per image.
    pub fn embed(&self, batch: &[&Image<T>]) -> Result<(Vec<Vec<T>>, Vec<Vec<T>>)> {
        let mut pre = Vec::with_capacity(batch.len());
        let mut taps = Vec::with_capacity(batch.len());
        for img in batch {
            let out = self.backbone.forward(&self.input_of(img)?, false);
            pre.push(out.pre);
            taps.push(out.tap);
        }
        Ok((self.backbone.normalize(&pre, false).0, taps))
    }

    pub fn features(&self, batch: &[&Image<T>]) -> Result<Vec<Vec<T>>> {
        let z = self.embed(batch)?.0;
        check_finite(&z, 0)?;
        Ok(z)
    }

    /// Goal logits with batch norm in inference mode.
    pub fn forward_goal(&self, batch: &[&Image<T>]) -> Result<Vec<Vec<T>>> {
        let z = self.embed(batch)?.0;
        let logits = self.goal.forward(&z, false).0;
        check_finite(&logits, 0)?;
        Ok(logits)
    }

    pub fn forward_subsidiary(&self, batch: &[&Image<T>]) -> Result<Vec<Vec<T>>> {
        let tap = self.embed(batch)?.1;
        let logits = self.subsidiary_forward(&tap).0;
        check_finite(&logits, 0)?;
        Ok(logits)
    }

    /// Plain SGD update `p -= lr * g` on every trainable component.
    pub fn sgd_step(&mut self, grads: &Grads<T>, lr: T) {
        for c in Component::ALL {
            if self.is_frozen(c) {
                continue;
            }
            for (p, g) in self.params_mut(c).iter_mut().zip(grads.get(c)) {
                *p -= lr * *g;
            }
        }
    }
}

pub(crate) fn fingerprint_of(arch: &ArchConfig, goal_classes: usize, sticker_classes: usize) -> String {
    let json = serde_json::to_string(&(arch, goal_classes, sticker_classes)).expect("arch serializes");
    hex(&Sha256::digest(json.as_bytes()))[..16].to_string()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
