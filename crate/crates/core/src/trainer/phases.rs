use std::collections::BTreeMap;

use crate::dataio::{epoch_batches, Dataset, Sample};
use crate::error::{Error, Result};
use crate::losses::{update_bank, MemoryBank};
use crate::metrics::accuracy;
use crate::model::{Component, ComponentSet, ModelBundle, Phase};
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;

use super::objectives::{bank_features, eval_diversity, eval_goal_ce, eval_self_training, eval_subsidiary, eval_subsidiary_taps, Eval};
use super::{LossKind, MetricsLog, RoundRobin, TrainConfig};

/// Summary of one training phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseReport {
    pub phase: Phase,
    pub micro_steps: u64,
    /// Mean loss per epoch, keyed by loss name.
    pub epoch_losses: BTreeMap<String, Vec<f64>>,
    pub checksums_before: [String; 3],
    pub checksums_after: [String; 3],
}

impl PhaseReport {
    pub fn mutated(&self) -> ComponentSet {
        let changed: Vec<Component> = Component::ALL
            .into_iter()
            .filter(|c| self.checksums_before[c.index()] != self.checksums_after[c.index()])
            .collect();
        ComponentSet::of(&changed)
    }

    pub fn losses(&self, kind: LossKind) -> &[f64] {
        self.epoch_losses.get(kind.name()).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Infinite sequence of index batches, reshuffled every epoch.
fn index_stream(len: usize, batch_size: usize, seed: u64) -> impl Iterator<Item = Vec<usize>> {
    (0u64..).flat_map(move |e| epoch_batches(len, batch_size, derive_seed(seed, stream::BATCHES, e)))
}

fn pick<'a, T>(ds: &'a Dataset<T>, idx: &[usize]) -> Vec<&'a Sample<T>> {
    idx.iter().map(|&i| &ds.samples[i]).collect()
}

struct Tracker<'a> {
    phase: Phase,
    step: u64,
    log: &'a mut MetricsLog,
    sums: BTreeMap<&'static str, (f64, usize)>,
    epochs: BTreeMap<String, Vec<f64>>,
}

impl<'a> Tracker<'a> {
    fn new(phase: Phase, log: &'a mut MetricsLog) -> Self {
        Self {
            phase,
            step: 0,
            log,
            sums: BTreeMap::new(),
            epochs: BTreeMap::new(),
        }
    }

    fn record<T: Scalar>(&mut self, kind: LossKind, eval: &Eval<T>) -> Result<()> {
        let v = eval.loss.f64();
        self.step += 1;
        self.log.log(self.step, self.phase.name(), kind.name(), v)?;
        let e = self.sums.entry(kind.name()).or_insert((0.0, 0));
        e.0 += v;
        e.1 += 1;
        Ok(())
    }

    fn end_epoch<T: Scalar>(&mut self, epoch: usize, m: &ModelBundle<T>, monitor: Option<&Dataset<T>>) -> Result<()> {
        for (name, (sum, n)) in std::mem::take(&mut self.sums) {
            let mean = sum / n as f64;
            self.epochs.entry(name.to_string()).or_default().push(mean);
            self.log.log(epoch as u64 + 1, self.phase.name(), &format!("{name}_epoch"), mean)?;
        }
        if let Some(ds) = monitor {
            let acc = accuracy(m, ds, crate::metrics::Head::Goal)?;
            self.log.log(epoch as u64 + 1, self.phase.name(), "monitor_goal_acc", acc)?;
        }
        Ok(())
    }
}

fn begin<T: Scalar>(m: &mut ModelBundle<T>, frozen: &[Component]) -> [String; 3] {
    m.set_frozen(ComponentSet::of(frozen));
    m.checksums()
}

fn finish<T: Scalar>(
    m: &ModelBundle<T>,
    phase: Phase,
    before: [String; 3],
    tracker: Tracker<'_>,
) -> Result<PhaseReport> {
    let after = m.checksums();
    for c in m.frozen().iter() {
        if before[c.index()] != after[c.index()] {
            return Err(Error::PhaseContract(format!("frozen component {c} changed during {}", phase.name())));
        }
    }
    tracker.log.flush()?;
    Ok(PhaseReport {
        phase,
        micro_steps: tracker.step,
        epoch_losses: tracker.epochs,
        checksums_before: before,
        checksums_after: after,
    })
}

/// Source training of `h` and `f_g` on `D_s ∪ D_{s,n}` with label-smoothed
/// cross-entropy; `f_n` stays frozen. An empty `d_sn` trains on `D_s` alone.
pub fn pretrain_goal<T: Scalar>(
    m: &mut ModelBundle<T>,
    d_s: &Dataset<T>,
    d_sn: &Dataset<T>,
    cfg: &TrainConfig,
    log: &mut MetricsLog,
    monitor: Option<&Dataset<T>>,
) -> Result<PhaseReport> {
    cfg.validate()?;
    for ds in [d_s, d_sn] {
        if ds.is_empty() && !std::ptr::eq(ds, d_s) {
            continue;
        }
        if ds.goal_classes != m.goal_classes() || !ds.is_labeled() {
            return Err(Error::Config(format!(
                "dataset `{}` does not carry goal labels over the model's {} classes",
                ds.domain_tag,
                m.goal_classes()
            )));
        }
    }
    let union = d_s.union(d_sn, "source+stickered")?;
    let before = begin(m, &[Component::Subsidiary]);
    let mut rr = RoundRobin::new(cfg.adam(), &[LossKind::GoalCe], m)?;
    let mut tracker = Tracker::new(Phase::SourceGoal, log);
    let smoothing = T::c(cfg.smoothing);
    for epoch in 0..cfg.epochs_goal {
        let seed = derive_seed(cfg.seed, stream::TRAIN, 1000 + epoch as u64);
        for (b, idx) in epoch_batches(union.len(), cfg.batch_size, seed).iter().enumerate() {
            let eval = eval_goal_ce(m, &pick(&union, idx), smoothing, b)?;
            rr.step(m, LossKind::GoalCe, &eval.grads)?;
            commit_stats(m, &eval);
            tracker.record(LossKind::GoalCe, &eval)?;
        }
        tracker.end_epoch(epoch, m, monitor)?;
    }
    finish(m, Phase::SourceGoal, before, tracker)
}

/// Trains only `f_n` on stickered source (`L_sn`) and pseudo-OOS (`L_od`)
/// with one optimizer each, alternating. An epoch is one pass over `D_{s,n}`.
pub fn pretrain_sticker<T: Scalar>(
    m: &mut ModelBundle<T>,
    d_sn: &Dataset<T>,
    d_od: &Dataset<T>,
    cfg: &TrainConfig,
    log: &mut MetricsLog,
) -> Result<PhaseReport> {
    cfg.validate()?;
    let before = begin(m, &[Component::Backbone, Component::Goal]);
    let mut schedule = vec![LossKind::Subsidiary];
    if !cfg.ablation.disables(LossKind::Oos) {
        if d_od.is_empty() {
            return Err(Error::InvalidArgument("pseudo-OOS dataset is empty".into()));
        }
        schedule.push(LossKind::Oos);
    }
    let mut rr = RoundRobin::new(cfg.adam(), &schedule, m)?;
    // The backbone is frozen, so the tapped maps never change.
    let taps = |ds: &Dataset<T>| -> Result<(Vec<Vec<T>>, Vec<usize>)> {
        let mut out = Vec::with_capacity(ds.len());
        for chunk in ds.samples.chunks(cfg.batch_size.max(1)) {
            let imgs: Vec<_> = chunk.iter().map(|s| &s.image).collect();
            out.extend(m.embed(&imgs)?.1);
        }
        let labels = ds
            .samples
            .iter()
            .map(|s| {
                s.subsidiary_label
                    .ok_or_else(|| Error::InvalidArgument(format!("sample {} has no subsidiary label", s.id)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((out, labels))
    };
    let (sn_taps, sn_labels) = taps(d_sn)?;
    let (od_taps, od_labels) = if schedule.contains(&LossKind::Oos) { taps(d_od)? } else { (Vec::new(), Vec::new()) };
    let mut sn_stream = index_stream(d_sn.len(), cfg.batch_size, derive_seed(cfg.seed, stream::TRAIN, 2));
    let mut od_stream = index_stream(od_taps.len().max(1), cfg.batch_size, derive_seed(cfg.seed, stream::TRAIN, 3));
    let steps = d_sn.len().div_ceil(cfg.batch_size);
    let mut tracker = Tracker::new(Phase::SourceSticker, log);
    for epoch in 0..cfg.epochs_sticker {
        for b in 0..steps {
            for &kind in &schedule {
                let (t, l, idx) = match kind {
                    LossKind::Subsidiary => (&sn_taps, &sn_labels, sn_stream.next().unwrap()),
                    _ => (&od_taps, &od_labels, od_stream.next().unwrap()),
                };
                let bt: Vec<Vec<T>> = idx.iter().map(|&i| t[i].clone()).collect();
                let bl: Vec<usize> = idx.iter().map(|&i| l[i]).collect();
                let eval = eval_subsidiary_taps(m, &bt, &bl, b)?;
                rr.step(m, kind, &eval.grads)?;
                tracker.record(kind, &eval)?;
            }
        }
        tracker.end_epoch(epoch, m, None)?;
    }
    finish(m, Phase::SourceSticker, before, tracker)
}

/// Batch-norm running statistics from the forward pass of a step.
fn commit_stats<T: Scalar>(m: &mut ModelBundle<T>, eval: &Eval<T>) {
    if let Some(c) = &eval.backbone_stats {
        m.commit_backbone_stats(c);
    }
    if let Some(c) = &eval.goal_cache {
        m.commit_goal_stats(c);
    }
}

/// Bank over every sample of `ds`, filled by one forward pass in batches.
pub fn init_bank<T: Scalar>(m: &ModelBundle<T>, ds: &Dataset<T>, cfg: &TrainConfig) -> Result<MemoryBank<T>> {
    let dim = match cfg.bank_space {
        super::BankSpace::Backbone => m.feature_dim(),
        super::BankSpace::GoalLogits => m.goal_classes(),
    };
    let ids = ds.samples.iter().map(|s| s.id.clone()).collect();
    let mut bank = MemoryBank::new(ids, dim, T::c(cfg.temperature))?;
    for chunk in ds.samples.chunks(cfg.batch_size) {
        let batch: Vec<_> = chunk.iter().collect();
        let f = bank_features(m, &batch, cfg.bank_space)?;
        let ids: Vec<_> = chunk.iter().map(|s| s.id.clone()).collect();
        update_bank(&mut bank, &f, &ids)?;
    }
    Ok(bank)
}

/// Target adaptation with `f_g` frozen. Per step, each enabled loss of
/// `cfg.adapt_order` takes one micro-step with its own optimizer: `L_tn` on a
/// stickered-target batch, `L_st` and `L_div` on a batch of the union
/// `D_t ∪ D_{t,n}`. With `L_tn` disabled the stickered target is not used at
/// all. An epoch is `ceil(|D_t| / B)` steps. Bank rows are rewritten from each
/// `L_st` batch right after its step.
pub fn adapt_target<T: Scalar>(
    m: &mut ModelBundle<T>,
    d_t: &Dataset<T>,
    d_tn: &Dataset<T>,
    cfg: &TrainConfig,
    log: &mut MetricsLog,
    monitor: Option<&Dataset<T>>,
) -> Result<PhaseReport> {
    cfg.validate()?;
    let schedule: Vec<LossKind> = cfg
        .adapt_order
        .iter()
        .copied()
        .filter(|k| !cfg.ablation.disables(*k))
        .collect();
    if schedule.is_empty() {
        return Err(Error::Config("every adaptation loss is disabled".into()));
    }
    let with_stickers = schedule.contains(&LossKind::TargetSubsidiary);
    let pool = if with_stickers {
        d_t.union(d_tn, "target+stickered")?
    } else {
        d_t.clone()
    };
    let before = begin(m, &[Component::Goal]);
    let mut bank = if schedule.contains(&LossKind::SelfTraining) {
        Some(init_bank(m, &pool, cfg)?)
    } else {
        None
    };
    let mut rr = RoundRobin::new(cfg.adapt_adam(), &schedule, m)?;
    let mut tn_stream = index_stream(d_tn.len().max(1), cfg.batch_size, derive_seed(cfg.seed, stream::TRAIN, 4));
    let mut pool_stream = index_stream(pool.len(), cfg.batch_size, derive_seed(cfg.seed, stream::TRAIN, 5));
    let steps = d_t.len().div_ceil(cfg.batch_size);
    let mut tracker = Tracker::new(Phase::Adapted, log);
    for epoch in 0..cfg.epochs_adapt {
        for b in 0..steps {
            let pool_batch = pick(&pool, &pool_stream.next().unwrap());
            for &kind in &schedule {
                let eval = match kind {
                    LossKind::TargetSubsidiary => {
                        let idx = tn_stream.next().unwrap();
                        eval_subsidiary(m, &pick(d_tn, &idx), b)?
                    }
                    LossKind::SelfTraining => {
                        eval_self_training(m, bank.as_ref().unwrap(), &pool_batch, cfg.bank_space, b)?
                    }
                    LossKind::Diversity => eval_diversity(m, &pool_batch, b)?,
                    other => return Err(Error::Config(format!("{other} is not an adaptation loss"))),
                };
                rr.step(m, kind, &eval.grads)?;
                commit_stats(m, &eval);
                if let (Some(bank), Some(f)) = (bank.as_mut(), &eval.bank_features) {
                    let ids: Vec<_> = pool_batch.iter().map(|s| s.id.clone()).collect();
                    update_bank(bank, f, &ids)?;
                }
                tracker.record(kind, &eval)?;
            }
        }
        tracker.end_epoch(epoch, m, monitor)?;
    }
    finish(m, Phase::Adapted, before, tracker)
}
