//! Loss evaluation on a batch: value plus parameter gradients, without
//! mutating the model.

use crate::dataio::{Sample, SampleId};
use crate::error::{Error, Result};
use crate::losses::{batch_ce, diversity_grad, l2_normalize, l2_normalize_backward, self_training_grad, MemoryBank};
use crate::model::{check_finite, BackboneTrace, Component, GoalCache, Grads, ModelBundle};
use crate::nn::BnCache;
use crate::scalar::Scalar;

use super::BankSpace;

pub struct Eval<T> {
    pub loss: T,
    pub grads: Grads<T>,
    /// Feature batch-norm statistics to commit after the step, when `h` trained.
    pub backbone_stats: Option<BnCache<T>>,
    /// Batch-norm statistics to commit after the step, when `f_g` trained.
    pub goal_cache: Option<GoalCache<T>>,
    /// Raw bank-space features of the batch, for the post-step bank write.
    pub bank_features: Option<Vec<Vec<T>>>,
}

fn backbone_stats<T: Scalar>(m: &ModelBundle<T>, trace: BackboneTrace<T>) -> Option<BnCache<T>> {
    (!m.is_frozen(Component::Backbone)).then_some(trace.bn)
}

fn images<'a, T>(batch: &[&'a Sample<T>]) -> Vec<&'a crate::dataio::Image<T>> {
    batch.iter().map(|s| &s.image).collect()
}

fn goal_labels<T>(batch: &[&Sample<T>]) -> Result<Vec<usize>> {
    batch
        .iter()
        .map(|s| {
            s.goal_label
                .ok_or_else(|| Error::InvalidArgument(format!("sample {} has no goal label", s.id)))
        })
        .collect()
}

fn subsidiary_labels<T>(batch: &[&Sample<T>]) -> Result<Vec<usize>> {
    batch
        .iter()
        .map(|s| {
            s.subsidiary_label
                .ok_or_else(|| Error::InvalidArgument(format!("sample {} has no subsidiary label", s.id)))
        })
        .collect()
}

/// Label-smoothed goal cross-entropy `L_sg`.
pub fn eval_goal_ce<T: Scalar>(m: &ModelBundle<T>, batch: &[&Sample<T>], smoothing: T, batch_id: usize) -> Result<Eval<T>> {
    let labels = goal_labels(batch)?;
    let trace = m.backbone_forward(&images(batch))?;
    let (logits, cache) = m.goal_forward(&trace.z);
    check_finite(&logits, batch_id)?;
    let (loss, dlogits) = batch_ce(&logits, &labels, smoothing)?;
    let mut grads = Grads::zeros_like(m);
    let dz = m.goal_backward(&cache, &dlogits, &mut grads);
    if !m.is_frozen(Component::Backbone) {
        m.backbone_backward(&trace, Some(&dz), None, &mut grads);
    }
    Ok(Eval {
        loss,
        grads,
        backbone_stats: backbone_stats(m, trace),
        goal_cache: Some(cache),
        bank_features: None,
    })
}

/// Cross-entropy over the `|C_n| + 1` subsidiary outputs; covers `L_sn`,
/// `L_od` and `L_tn` since the labels come from the samples.
pub fn eval_subsidiary<T: Scalar>(m: &ModelBundle<T>, batch: &[&Sample<T>], batch_id: usize) -> Result<Eval<T>> {
    let labels = subsidiary_labels(batch)?;
    let imgs = images(batch);
    if m.is_frozen(Component::Backbone) {
        let taps = m.embed(&imgs)?.1;
        return eval_subsidiary_taps(m, &taps, &labels, batch_id);
    }
    let trace = m.backbone_forward(&imgs)?;
    let (logits, caches) = m.subsidiary_forward(&trace.tap);
    check_finite(&logits, batch_id)?;
    let (loss, dlogits) = batch_ce(&logits, &labels, T::zero())?;
    let mut grads = Grads::zeros_like(m);
    let dtap = m.subsidiary_backward(&caches, &dlogits, &mut grads, true).unwrap();
    m.backbone_backward(&trace, None, Some(&dtap), &mut grads);
    Ok(Eval {
        loss,
        grads,
        backbone_stats: backbone_stats(m, trace),
        goal_cache: None,
        bank_features: None,
    })
}

/// Subsidiary cross-entropy on precomputed taps (backbone frozen).
pub fn eval_subsidiary_taps<T: Scalar>(
    m: &ModelBundle<T>,
    taps: &[Vec<T>],
    labels: &[usize],
    batch_id: usize,
) -> Result<Eval<T>> {
    let (logits, caches) = m.subsidiary_forward(taps);
    check_finite(&logits, batch_id)?;
    let (loss, dlogits) = batch_ce(&logits, labels, T::zero())?;
    let mut grads = Grads::zeros_like(m);
    m.subsidiary_backward(&caches, &dlogits, &mut grads, false);
    Ok(Eval {
        loss,
        grads,
        backbone_stats: None,
        goal_cache: None,
        bank_features: None,
    })
}

/// Bank-space features of a batch, normalized exactly as a training forward
/// pass would (batch statistics in `h` while it is trainable).
pub fn bank_features<T: Scalar>(m: &ModelBundle<T>, batch: &[&Sample<T>], space: BankSpace) -> Result<Vec<Vec<T>>> {
    let z = m.backbone_forward(&images(batch))?.z;
    check_finite(&z, 0)?;
    Ok(match space {
        BankSpace::Backbone => z,
        BankSpace::GoalLogits => m.goal_forward(&z).0,
    })
}

/// Neighborhood-entropy loss `L_st` against a fixed bank.
pub fn eval_self_training<T: Scalar>(
    m: &ModelBundle<T>,
    bank: &MemoryBank<T>,
    batch: &[&Sample<T>],
    space: BankSpace,
    batch_id: usize,
) -> Result<Eval<T>> {
    if !bank.is_initialized() {
        return Err(Error::Bank("memory bank has rows that were never written".into()));
    }
    let ids: Vec<SampleId> = batch.iter().map(|s| s.id.clone()).collect();
    let trace = m.backbone_forward(&images(batch))?;
    let mut grads = Grads::zeros_like(m);
    let (raw, goal) = match space {
        BankSpace::Backbone => (trace.z.clone(), None),
        BankSpace::GoalLogits => {
            let (logits, cache) = m.goal_forward(&trace.z);
            (logits, Some(cache))
        }
    };
    check_finite(&raw, batch_id)?;
    let (unit, norms): (Vec<Vec<T>>, Vec<T>) = raw.iter().map(|f| l2_normalize(f)).unzip();
    let (loss, dunit) = self_training_grad(bank, &unit, &ids)?;
    let dfeat: Vec<Vec<T>> = unit
        .iter()
        .zip(&norms)
        .zip(&dunit)
        .map(|((u, &n), d)| l2_normalize_backward(u, n, d))
        .collect();
    let dz = match &goal {
        None => dfeat,
        Some(cache) => m.goal_backward(cache, &dfeat, &mut grads),
    };
    m.backbone_backward(&trace, Some(&dz), None, &mut grads);
    Ok(Eval {
        loss,
        grads,
        backbone_stats: backbone_stats(m, trace),
        goal_cache: goal.filter(|_| !m.is_frozen(Component::Goal)),
        bank_features: Some(raw),
    })
}

/// Diversity loss `L_div` on the batch-mean goal prediction.
pub fn eval_diversity<T: Scalar>(m: &ModelBundle<T>, batch: &[&Sample<T>], batch_id: usize) -> Result<Eval<T>> {
    let trace = m.backbone_forward(&images(batch))?;
    let (logits, cache) = m.goal_forward(&trace.z);
    check_finite(&logits, batch_id)?;
    let (loss, dlogits) = diversity_grad(&logits)?;
    let mut grads = Grads::zeros_like(m);
    let dz = m.goal_backward(&cache, &dlogits, &mut grads);
    m.backbone_backward(&trace, Some(&dz), None, &mut grads);
    let frozen = m.is_frozen(Component::Goal);
    Ok(Eval {
        loss,
        grads,
        backbone_stats: backbone_stats(m, trace),
        goal_cache: (!frozen).then_some(cache),
        bank_features: None,
    })
}
