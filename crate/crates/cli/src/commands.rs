use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::Serialize;
use stickerda::dataio::{export_image_folder, load_image_folder, make_synthetic_domain_pair_sized};
use stickerda::metrics::{
    accuracy, dataset_features, feature_a_distance_report, mean_subsidiary_mass, suitability_with_features, Head,
    SubsidiaryTask, SuitabilityReport,
};
use stickerda::model::{Checkpoint, Phase};
use stickerda::trainer::{
    adapt_target, prepare_data, pretrain_goal, pretrain_sticker, read_metrics, MetricsLog, PipelineData,
};
use stickerda::{Dataset32, Model32};

use crate::config::RunConfig;
use crate::plot;

/// Command-line settings layered over the config file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub no_subsidiary: bool,
    pub no_oos: bool,
    pub no_st: bool,
    pub no_div: bool,
    pub task: Option<String>,
    pub formula_variant: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(seed) = self.seed {
            cfg.set_seed(seed);
        }
        let ab = &mut cfg.train.ablation;
        ab.no_subsidiary |= self.no_subsidiary;
        ab.no_oos |= self.no_oos;
        ab.no_st |= self.no_st;
        ab.no_div |= self.no_div;
        if let Some(task) = &self.task {
            let subsidiary: SubsidiaryTask = task.parse()?;
            if let Some(t) = subsidiary.sticker_task() {
                cfg.train.task = t;
            }
        }
        if let Some(v) = &self.formula_variant {
            cfg.suitability.formula_variant = v.parse()?;
        }
        Ok(())
    }

    /// `--task` as a subsidiary task for `suitability`; `None` scores all of them.
    pub fn suitability_task(&self) -> Result<Option<SubsidiaryTask>> {
        Ok(self.task.as_deref().map(str::parse).transpose()?)
    }

    fn training_task(&self) -> Result<()> {
        if let Some(task) = &self.task {
            let t: SubsidiaryTask = task.parse()?;
            if t.sticker_task().is_none() {
                bail!("`{task}` is not a sticker task; only `suitability` accepts whole-image tasks");
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct SubsidiaryRecord<'a> {
    id: &'a str,
    subsidiary_label: Option<usize>,
    is_oos: bool,
    is_stickered: bool,
}

#[derive(Serialize)]
struct EvalReport {
    phase: Phase,
    checkpoint: PathBuf,
    source_acc: f64,
    target_acc: f64,
}

/// A run directory: config snapshot, metrics log, data, checkpoints, reports and plots.
pub struct RunDir {
    root: PathBuf,
    cfg: RunConfig,
    /// Set when `--task` names a task the training commands cannot run.
    task_error: Option<String>,
}

impl RunDir {
    pub fn open(root: &Path, overrides: &Overrides) -> Result<Self> {
        let snapshot = root.join("config.toml");
        let mut cfg = match &overrides.config {
            Some(path) => RunConfig::load(path)?,
            None if snapshot.exists() => RunConfig::load(&snapshot)?,
            None => RunConfig::default(),
        };
        overrides.apply(&mut cfg)?;
        cfg.validate()?;
        for dir in ["checkpoints", "plots", "reports"] {
            fs::create_dir_all(root.join(dir)).with_context(|| format!("creating {}", root.join(dir).display()))?;
        }
        cfg.save(&snapshot)?;
        let metrics = root.join("metrics.jsonl");
        if !metrics.exists() {
            fs::write(&metrics, "").with_context(|| format!("creating {}", metrics.display()))?;
        }
        info!("run directory {} (config {})", root.display(), cfg.train.fingerprint());
        Ok(Self {
            root: root.to_path_buf(),
            cfg,
            task_error: overrides.training_task().err().map(|e| e.to_string()),
        })
    }

    fn require_sticker_task(&self) -> Result<()> {
        match &self.task_error {
            Some(e) => bail!("{e}"),
            None => Ok(()),
        }
    }

    fn data_dir(&self, name: &str) -> PathBuf {
        self.root.join("data").join(name)
    }

    fn checkpoint_path(&self, phase: Phase) -> PathBuf {
        self.root.join("checkpoints").join(format!("{}.ckpt", phase.name()))
    }

    fn log(&self) -> Result<MetricsLog> {
        Ok(MetricsLog::to_file(&self.root.join("metrics.jsonl"))?)
    }

    fn image_size(&self) -> (usize, usize) {
        (self.cfg.arch.image_size, self.cfg.arch.image_size)
    }

    fn load_domains(&self) -> Result<(Dataset32, Dataset32)> {
        let (src, tgt) = (self.data_dir("source"), self.data_dir("target"));
        for dir in [&src, &tgt] {
            if !dir.is_dir() {
                bail!("missing dependency: {} not found; run `make-data` first", dir.display());
            }
        }
        Ok((load_image_folder(&src, self.image_size())?, load_image_folder(&tgt, self.image_size())?))
    }

    fn pipeline_data(&self) -> Result<PipelineData<f32>> {
        let (source, target) = self.load_domains()?;
        Ok(prepare_data(&source, &target, &self.cfg.train)?)
    }

    fn load_checkpoint(&self, phase: Phase, produced_by: &str) -> Result<Model32> {
        let path = self.checkpoint_path(phase);
        if !path.exists() {
            bail!(
                "missing dependency: {phase} checkpoint {} not found; run `{produced_by}` first",
                path.display()
            );
        }
        Ok(Checkpoint::load(&path)?.to_model()?)
    }

    fn save_checkpoint(&self, m: &Model32, phase: Phase) -> Result<PathBuf> {
        let path = self.checkpoint_path(phase);
        Checkpoint::from_model(m, phase, Some(self.cfg.train.fingerprint())).save(&path)?;
        info!("wrote {}", path.display());
        Ok(path)
    }

    fn write_json<S: Serialize + ?Sized>(&self, name: &str, value: &S) -> Result<PathBuf> {
        let path = self.root.join("reports").join(name);
        fs::write(&path, serde_json::to_string_pretty(value)?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    fn export(&self, ds: &Dataset32, name: &str, manifest: bool) -> Result<()> {
        let dir = self.data_dir(name);
        if dir.exists() {
            fs::remove_dir_all(&dir).with_context(|| format!("clearing {}", dir.display()))?;
        }
        let records: Vec<SubsidiaryRecord> = ds
            .samples
            .iter()
            .map(|s| SubsidiaryRecord {
                id: &s.id.0,
                subsidiary_label: s.subsidiary_label,
                is_oos: s.is_oos,
                is_stickered: s.is_stickered,
            })
            .collect();
        export_image_folder(ds, &dir, manifest.then_some(records.as_slice()))?;
        println!("{name}: {} images -> {}", ds.len(), dir.display());
        Ok(())
    }

    pub fn make_data(&self) -> Result<()> {
        let d = &self.cfg.data;
        let (source, target) = match (&d.source_dir, &d.target_dir) {
            (Some(s), Some(t)) => (load_image_folder(s, self.image_size())?, load_image_folder(t, self.image_size())?),
            _ => make_synthetic_domain_pair_sized(
                d.classes,
                d.per_class,
                &d.shift_spec()?,
                self.cfg.train.seed,
                self.cfg.arch.image_size,
            )?,
        };
        if source.goal_classes != target.goal_classes {
            bail!("source has {} classes, target {}", source.goal_classes, target.goal_classes);
        }
        self.export(&source, "source", false)?;
        self.export(&target, "target", false)
    }

    pub fn prepare_stickers(&self) -> Result<()> {
        self.require_sticker_task()?;
        let data = self.pipeline_data()?;
        self.export(&data.d_sn, "stickered_source", true)?;
        self.export(&data.d_tn, "stickered_target", true)
    }

    pub fn make_oos(&self) -> Result<()> {
        let data = self.pipeline_data()?;
        self.export(&data.d_od, "oos", true)
    }

    pub fn pretrain_goal(&self) -> Result<()> {
        self.require_sticker_task()?;
        let data = self.pipeline_data()?;
        let t = &self.cfg.train;
        let mut m = Model32::build(&self.cfg.arch, data.d_s.goal_classes, t.sticker_classes(), t.seed)?;
        let mut log = self.log()?;
        pretrain_goal(&mut m, &data.d_s, &data.d_sn, t, &mut log, data.target_eval.as_ref())?;
        log.flush()?;
        self.save_checkpoint(&m, Phase::SourceGoal)?;
        println!("source accuracy {:.4}", accuracy(&m, &data.d_s, Head::Goal)?);
        if let Some(tgt) = &data.target_eval {
            println!("source-only target accuracy {:.4}", accuracy(&m, tgt, Head::Goal)?);
        }
        Ok(())
    }

    pub fn pretrain_sticker(&self) -> Result<()> {
        self.require_sticker_task()?;
        let mut m = self.load_checkpoint(Phase::SourceGoal, "pretrain-goal")?;
        let data = self.pipeline_data()?;
        if m.sticker_classes() != self.cfg.train.sticker_classes() {
            bail!(
                "goal checkpoint has {} subsidiary classes but task {} needs {}; rerun `pretrain-goal`",
                m.sticker_classes(),
                self.cfg.train.task,
                self.cfg.train.sticker_classes()
            );
        }
        let mut log = self.log()?;
        pretrain_sticker(&mut m, &data.d_sn, &data.d_od, &self.cfg.train, &mut log)?;
        log.flush()?;
        self.save_checkpoint(&m, Phase::SourceSticker)?;
        let oos = m.oos_index();
        println!("sticker accuracy {:.4}", accuracy(&m, &data.d_sn, Head::Subsidiary)?);
        println!("OOS mass: pseudo-OOS {:.4}", mean_subsidiary_mass(&m, &data.d_od, oos)?);
        println!("OOS mass: stickered source {:.4}", mean_subsidiary_mass(&m, &data.d_sn, oos)?);
        Ok(())
    }

    pub fn adapt(&self) -> Result<()> {
        self.require_sticker_task()?;
        let before = self.load_checkpoint(Phase::SourceSticker, "pretrain-sticker")?;
        let data = self.pipeline_data()?;
        let mut m = before.clone();
        let mut log = self.log()?;
        adapt_target(&mut m, &data.d_t, &data.d_tn, &self.cfg.train, &mut log, data.target_eval.as_ref())?;
        log.flush()?;
        self.save_checkpoint(&m, Phase::Adapted)?;
        let s = &self.cfg.suitability;
        let report = feature_a_distance_report(&before, &m, &data.d_s, &data.d_t, s.seed, s.formula_variant, &s.probe)?;
        self.write_json("adaptation_a_distance.json", &report)?;
        println!("source-target d_A {:.4} -> {:.4}", report.before.d_a, report.after.d_a);
        if let Some(tgt) = &data.target_eval {
            println!(
                "target accuracy {:.4} -> {:.4}",
                accuracy(&before, tgt, Head::Goal)?,
                accuracy(&m, tgt, Head::Goal)?
            );
        }
        self.plot_convergence()
    }

    pub fn eval(&self) -> Result<()> {
        let phase = [Phase::Adapted, Phase::SourceSticker, Phase::SourceGoal]
            .into_iter()
            .find(|p| self.checkpoint_path(*p).exists())
            .ok_or_else(|| anyhow::anyhow!("missing dependency: no checkpoint found; run `pretrain-goal` first"))?;
        let m = self.load_checkpoint(phase, "pretrain-goal")?;
        let (source, target) = self.load_domains()?;
        let report = EvalReport {
            phase,
            checkpoint: self.checkpoint_path(phase),
            source_acc: accuracy(&m, &source, Head::Goal)?,
            target_acc: accuracy(&m, &target, Head::Goal)?,
        };
        self.write_json(&format!("eval_{}.json", phase.name()), &report)?;
        println!("checkpoint {phase}");
        println!("source accuracy {:.4}", report.source_acc);
        println!("target accuracy {:.4}", report.target_acc);
        Ok(())
    }

    /// Goal-pretrained backbone trained on the clean source alone, cached
    /// across `suitability` calls while the config fingerprint matches.
    fn suitability_backbone(&self, source: &Dataset32) -> Result<Model32> {
        let path = self.root.join("checkpoints").join("suitability_backbone.ckpt");
        let fingerprint = self.cfg.train.fingerprint();
        if path.exists() {
            let ckpt = Checkpoint::load(&path)?;
            if ckpt.config_fingerprint.as_deref() == Some(fingerprint.as_str()) {
                return Ok(ckpt.to_model()?);
            }
        }
        let t = &self.cfg.train;
        let mut m = Model32::build(&self.cfg.arch, source.goal_classes, t.sticker_classes(), t.seed)?;
        let mut clean_only = source.clone();
        clean_only.samples.clear();
        pretrain_goal(&mut m, source, &clean_only, t, &mut MetricsLog::in_memory(), None)?;
        Checkpoint::from_model(&m, Phase::SourceGoal, Some(fingerprint)).save(&path)?;
        info!("wrote {}", path.display());
        Ok(m)
    }

    pub fn suitability(&self, task: Option<SubsidiaryTask>) -> Result<()> {
        let (source, _) = self.load_domains()?;
        let m = self.suitability_backbone(&source)?;
        let features = dataset_features(&m, &source)?;
        let tasks = task.map_or(SubsidiaryTask::ALL.to_vec(), |t| vec![t]);
        let path = self.root.join("reports").join("suitability.json");
        let mut reports: Vec<SuitabilityReport> = match fs::read(&path) {
            Ok(bytes) => serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?,
            Err(_) => Vec::new(),
        };
        for t in tasks {
            let r = suitability_with_features(&features, &source, t, &m, &self.cfg.train.sticker, &self.cfg.suitability)?;
            println!(
                "{:<15} DSM {:.4}  TSM {:.4}  sum {:.4}  {}",
                t.name(),
                r.dsm,
                r.tsm,
                r.dsm + r.tsm,
                if r.passes { "suitable" } else { "not suitable" }
            );
            reports.retain(|old| old.task != t);
            reports.push(r);
        }
        reports.sort_by_key(|r| SubsidiaryTask::ALL.iter().position(|t| *t == r.task));
        self.write_json("suitability.json", &reports)?;
        let svg = self.root.join("plots").join("suitability.svg");
        plot::suitability_scatter(&reports, &svg)?;
        println!("wrote {} and {}", path.display(), svg.display());
        Ok(())
    }

    pub fn plot_convergence(&self) -> Result<()> {
        let records = read_metrics(&self.root.join("metrics.jsonl"))?;
        let svg = self.root.join("plots").join("convergence.svg");
        let n = plot::convergence(&records, &svg)?;
        println!("wrote {} ({n} series)", svg.display());
        Ok(())
    }
}
