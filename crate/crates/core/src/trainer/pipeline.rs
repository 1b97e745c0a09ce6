use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{accuracy, Head};
use crate::model::{ArchConfig, ModelBundle};
use crate::oos::build_pseudo_oos_dataset;
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;
use crate::sticker::build_sticker_dataset;

use super::{adapt_target, pretrain_goal, pretrain_sticker, MetricsLog, PhaseReport, TrainConfig};

/// Every dataset the three phases read.
#[derive(Clone, Debug)]
pub struct PipelineData<T> {
    pub d_s: Dataset<T>,
    pub d_sn: Dataset<T>,
    pub d_od: Dataset<T>,
    /// Target without goal labels.
    pub d_t: Dataset<T>,
    pub d_tn: Dataset<T>,
    /// Labeled target, only for scoring.
    pub target_eval: Option<Dataset<T>>,
}

/// Builds the stickered, pseudo-OOS and unlabeled-target datasets from a
/// labeled source and a target (whose labels, if any, are kept for scoring only).
pub fn prepare_data<T: Scalar>(source: &Dataset<T>, target: &Dataset<T>, cfg: &TrainConfig) -> Result<PipelineData<T>> {
    cfg.validate()?;
    if !source.is_labeled() {
        return Err(Error::InvalidArgument("source dataset must carry goal labels".into()));
    }
    if source.goal_classes != target.goal_classes {
        return Err(Error::Config(format!(
            "source has {} goal classes, target {}",
            source.goal_classes, target.goal_classes
        )));
    }
    let seed = |i| derive_seed(cfg.seed, stream::STICKER_SPEC, i);
    let (d_sn, _) = build_sticker_dataset(source, cfg.task, seed(1), &cfg.sticker)?;
    let d_od = build_pseudo_oos_dataset(source, cfg.oos_grid, cfg.sticker_prob, seed(2), cfg.task, &cfg.sticker)?;
    let d_t = target.without_goal_labels();
    let (d_tn, _) = build_sticker_dataset(&d_t, cfg.task, seed(3), &cfg.sticker)?;
    Ok(PipelineData {
        d_s: source.clone(),
        d_sn,
        d_od,
        d_t,
        d_tn,
        target_eval: target.is_labeled().then(|| target.clone()),
    })
}

pub struct PipelineOutcome<T> {
    pub source_model: ModelBundle<T>,
    pub sticker_model: ModelBundle<T>,
    pub adapted_model: ModelBundle<T>,
    pub reports: Vec<PhaseReport>,
    /// Goal accuracy on the labeled target before and after adaptation.
    pub source_only_target_acc: Option<f64>,
    pub adapted_target_acc: Option<f64>,
}

/// Goal pretraining, sticker pretraining and target adaptation in sequence.
pub fn run_pipeline<T: Scalar>(
    data: &PipelineData<T>,
    arch: &ArchConfig,
    cfg: &TrainConfig,
    log: &mut MetricsLog,
) -> Result<PipelineOutcome<T>> {
    let mut m = ModelBundle::build(arch, data.d_s.goal_classes, cfg.sticker_classes(), cfg.seed)?;
    let monitor = data.target_eval.as_ref();
    let r1 = pretrain_goal(&mut m, &data.d_s, &data.d_sn, cfg, log, monitor)?;
    let source_model = m.clone();
    let r2 = pretrain_sticker(&mut m, &data.d_sn, &data.d_od, cfg, log)?;
    let sticker_model = m.clone();
    let r3 = adapt_target(&mut m, &data.d_t, &data.d_tn, cfg, log, monitor)?;
    let score = |model: &ModelBundle<T>| monitor.map(|ds| accuracy(model, ds, Head::Goal)).transpose();
    let source_only_target_acc = score(&source_model)?;
    let adapted_target_acc = score(&m)?;
    if let (Some(before), Some(after)) = (source_only_target_acc, adapted_target_acc) {
        log.log(0, "eval", "source_only_target_acc", before)?;
        log.log(0, "eval", "adapted_target_acc", after)?;
    }
    log.flush()?;
    Ok(PipelineOutcome {
        source_model,
        sticker_model,
        adapted_model: m,
        reports: vec![r1, r2, r3],
        source_only_target_acc,
        adapted_target_acc,
    })
}
