//! The three training phases, each loss driven by its own Adam optimizer in
//! round-robin order.

mod config;
mod log;
pub mod objectives;
mod optim;
mod phases;
mod pipeline;

pub use config::{Ablation, BankSpace, LossKind, TrainConfig};
pub use log::{read_metrics, MetricRecord, MetricsLog};
pub use optim::{LossOptimizer, RoundRobin};
pub use phases::{adapt_target, init_bank, pretrain_goal, pretrain_sticker, PhaseReport};
pub use pipeline::{prepare_data, run_pipeline, PipelineData, PipelineOutcome};
