use crate::error::{Error, Result};
use crate::model::{Component, Grads, ModelBundle};
use crate::nn::{AdamConfig, AdamState};
use crate::scalar::Scalar;

use super::LossKind;

/// Adam moments owned by a single loss, one state per component the loss may move.
#[derive(Clone, Debug, PartialEq)]
pub struct LossOptimizer<T> {
    pub kind: LossKind,
    pub steps: u64,
    states: [Option<AdamState<T>>; 3],
}

impl<T: Scalar> LossOptimizer<T> {
    fn new(kind: LossKind, model: &ModelBundle<T>) -> Self {
        let comps = kind.components();
        let states = Component::ALL.map(|c| comps.contains(c).then(|| AdamState::new(model.params(c).len())));
        Self { kind, steps: 0, states }
    }

    pub fn moments(&self, c: Component) -> Option<&AdamState<T>> {
        self.states[c.index()].as_ref()
    }
}

/// One optimizer per loss; exactly one loss is applied per micro-step, cycling
/// through `schedule`.
#[derive(Clone, Debug)]
pub struct RoundRobin<T> {
    adam: AdamConfig,
    optimizers: Vec<LossOptimizer<T>>,
    schedule: Vec<LossKind>,
    cursor: usize,
    applied: Vec<LossKind>,
}

impl<T: Scalar> RoundRobin<T> {
    pub fn new(adam: AdamConfig, schedule: &[LossKind], model: &ModelBundle<T>) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::Config("round-robin schedule is empty".into()));
        }
        let mut optimizers: Vec<LossOptimizer<T>> = Vec::new();
        for &k in schedule {
            if !optimizers.iter().any(|o| o.kind == k) {
                optimizers.push(LossOptimizer::new(k, model));
            }
        }
        Ok(Self {
            adam,
            optimizers,
            schedule: schedule.to_vec(),
            cursor: 0,
            applied: Vec::new(),
        })
    }

    pub fn schedule(&self) -> &[LossKind] {
        &self.schedule
    }

    /// The loss whose turn it is.
    pub fn next_kind(&self) -> LossKind {
        self.schedule[self.cursor]
    }

    pub fn optimizer(&self, kind: LossKind) -> Option<&LossOptimizer<T>> {
        self.optimizers.iter().find(|o| o.kind == kind)
    }

    /// Losses applied so far, in order.
    pub fn applied(&self) -> &[LossKind] {
        &self.applied
    }

    /// Applies `grads` for `kind` to the components that loss owns and that
    /// are not frozen. `kind` must be the loss whose turn it is.
    pub fn step(&mut self, model: &mut ModelBundle<T>, kind: LossKind, grads: &Grads<T>) -> Result<()> {
        let Some(pos) = self.optimizers.iter().position(|o| o.kind == kind) else {
            return Err(Error::Config(format!("loss {kind} is not in the round-robin schedule")));
        };
        if kind != self.next_kind() {
            return Err(Error::InvalidArgument(format!(
                "out-of-order step: expected {}, got {kind}",
                self.next_kind()
            )));
        }
        let opt = &mut self.optimizers[pos];
        opt.steps += 1;
        for c in Component::ALL {
            if model.is_frozen(c) {
                continue;
            }
            if let Some(state) = opt.states[c.index()].as_mut() {
                state.update(&self.adam, opt.steps, model.params_mut(c), grads.get(c));
            }
        }
        self.applied.push(kind);
        self.cursor = (self.cursor + 1) % self.schedule.len();
        Ok(())
    }
}
