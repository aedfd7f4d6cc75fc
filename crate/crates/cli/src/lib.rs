//! Command-line pipeline and rating-service front end.

pub mod commands;
pub mod config;
pub mod error;
pub mod server;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tractvar_core::Target;

pub use config::{Format, Overrides, PipelineConfig};
pub use error::{CliError, ErrorRecord};

#[derive(Debug, Parser)]
#[command(
    name = "tractvar",
    version,
    about = "Articulatory tract-variable pipeline"
)]
pub struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true, env = "VTV_CONFIG")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, env = "VTV_SEED")]
    pub seed: Option<u64>,
    /// Target phoneme, `r` or `s`.
    #[arg(long, global = true, env = "VTV_TARGET", value_parser = parse_target)]
    pub target: Option<Target>,
    /// Output directory; nothing is written outside it.
    #[arg(long, global = true, env = "VTV_OUT")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, env = "VTV_FORMAT", value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_target(s: &str) -> Result<Target, String> {
    s.parse()
        .map_err(|_| format!("unknown target `{s}`, expected r or s"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write synthetic pellets, palate, corpus, training pairs and a demo service config.
    Synth,
    /// Pellet and palate CSVs to a tract-variable CSV.
    TvCompute,
    /// Per-speaker min-max normalization of tract-variable CSVs.
    Normalize,
    /// Train the inversion network from a manifest.
    Train,
    /// Run a trained network on embeddings.
    Infer,
    /// Per-phone tract-variable means from alignments and consensus labels.
    Extract,
    /// Per-file consensus labels from a rating log.
    Consensus,
    /// Mixed-model contrasts for one target.
    AnalyzeCategorical,
    /// Mixed model of articulatory distance against rating score.
    AnalyzeGradient,
    /// Both analyses plus a markdown summary.
    Report,
    /// Run the rating HTTP service.
    Serve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::TvCompute => "tv-compute",
            Command::Normalize => "normalize",
            Command::Train => "train",
            Command::Infer => "infer",
            Command::Extract => "extract",
            Command::Consensus => "consensus",
            Command::AnalyzeCategorical => "analyze-categorical",
            Command::AnalyzeGradient => "analyze-gradient",
            Command::Report => "report",
            Command::Serve => "serve",
        }
    }
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            target: self.target,
            out: self.out.clone(),
            format: self.format,
        }
    }
}

/// Runs a batch subcommand. `serve` is handled by the binary.
pub fn run(command: Command, cfg: &PipelineConfig) -> Result<commands::Outputs, CliError> {
    match command {
        Command::Synth => commands::synth(cfg),
        Command::TvCompute => commands::tv_compute(cfg),
        Command::Normalize => commands::normalize_cmd(cfg),
        Command::Train => commands::train_cmd(cfg),
        Command::Infer => commands::infer(cfg),
        Command::Extract => commands::extract(cfg),
        Command::Consensus => commands::consensus_cmd(cfg),
        Command::AnalyzeCategorical => commands::analyze_categorical_cmd(cfg),
        Command::AnalyzeGradient => commands::analyze_gradient_cmd(cfg),
        Command::Report => commands::report(cfg),
        Command::Serve => Err(CliError::Usage("serve runs only from the binary".into())),
    }
}

/// Builds the rating service from `paths.service`, logging to
/// `<out>/ratings_log.jsonl`.
pub fn build_service(
    cfg: &PipelineConfig,
) -> Result<tractvar_core::service::RatingService, CliError> {
    let path = config::require(&cfg.paths.service, "service")?;
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut scfg: tractvar_core::service::ServiceConfig =
        serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?;
    if cfg.seeds.service.is_some() {
        scfg.seed = cfg.service_seed();
    }
    std::fs::create_dir_all(&cfg.out).map_err(|e| CliError::io(&cfg.out, e))?;
    let log = cfg.out.join("ratings_log.jsonl");
    tractvar_core::service::RatingService::open(scfg, &log).map_err(|e| CliError::input(&log, e))
}
