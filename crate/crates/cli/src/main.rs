mod commands;
mod config;
mod plot;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Overrides, RunDir};

#[derive(Parser, Debug)]
#[command(name = "stickerda", version, about = "Source-free domain adaptation with sticker subsidiary tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML config. Defaults to the run directory's snapshot, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Run directory.
    #[arg(long, global = true, default_value = "runs/default")]
    out: PathBuf,

    /// Drop the target subsidiary loss during adaptation.
    #[arg(long, global = true)]
    no_subsidiary: bool,

    /// Drop the OOS loss during sticker pretraining.
    #[arg(long, global = true)]
    no_oos: bool,

    #[arg(long, global = true)]
    no_st: bool,

    #[arg(long, global = true)]
    no_div: bool,

    /// Sticker task for training, or the subsidiary task to score for `suitability`.
    #[arg(long, global = true)]
    task: Option<String>,

    /// `standard` or `paper_verbatim`.
    #[arg(long, global = true)]
    formula_variant: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate (or import) the source and target domains.
    MakeData,
    /// Export stickered source and target sets with subsidiary labels.
    PrepareStickers,
    /// Export the pseudo-OOS set.
    MakeOos,
    /// Train backbone and goal head on labeled source.
    PretrainGoal,
    /// Train the subsidiary head with its OOS node on a frozen backbone.
    PretrainSticker,
    /// Adapt the backbone to the unlabeled target.
    Adapt,
    /// Score the latest checkpoint.
    Eval,
    /// DSM/TSM suitability of one or all subsidiary tasks.
    Suitability,
    /// Plot per-epoch losses from the metrics log.
    PlotConvergence,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let overrides = Overrides {
        config: cli.config,
        seed: cli.seed,
        no_subsidiary: cli.no_subsidiary,
        no_oos: cli.no_oos,
        no_st: cli.no_st,
        no_div: cli.no_div,
        task: cli.task,
        formula_variant: cli.formula_variant,
    };
    let result = RunDir::open(&cli.out, &overrides).and_then(|run| match cli.command {
        Command::MakeData => run.make_data(),
        Command::PrepareStickers => run.prepare_stickers(),
        Command::MakeOos => run.make_oos(),
        Command::PretrainGoal => run.pretrain_goal(),
        Command::PretrainSticker => run.pretrain_sticker(),
        Command::Adapt => run.adapt(),
        Command::Eval => run.eval(),
        Command::Suitability => run.suitability(overrides.suitability_task()?),
        Command::PlotConvergence => run.plot_convergence(),
    });
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
