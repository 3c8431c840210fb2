//! Command-line surface binding ingestion, training, evaluation, ranking,
//! cancellation prediction, tuning, and report emission into reproducible
//! runs. Every output directory carries a run manifest; identical commands
//! over identical data produce byte-identical artifacts.

mod commands;
mod manifest;
mod tables;

pub use manifest::{hex_digest, RunManifest, MANIFEST_FILE};

use std::path::PathBuf;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use taskcast::features::PipelineConfig;
use taskcast::learn::{ForestParams, LearnerKind, ModelParams, TreeParams};
use taskcast::market::ReviewScore;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
}

#[derive(Debug, Parser)]
#[command(
    name = "taskcast",
    version,
    about = "Decision support for crowdsourced development marketplaces: daily classifiers over worker-task history, task and worker ranking, and cancellation early warning"
)]
pub struct Cli {
    /// Worker threads for model training; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic marketplace data directory.
    Simulate(commands::SimulateArgs),
    /// Validate a data directory and persist the canonical event log.
    Ingest(commands::IngestArgs),
    /// Train one model on a day's training set and save it.
    Train(commands::TrainArgs),
    /// Walk the model forward day by day and write the evaluation report.
    Evaluate(commands::EvaluateArgs),
    /// Rank open tasks for one worker on one day.
    RankTasks(commands::RankTasksArgs),
    /// Rank the registered workers of one task on one day.
    RankWorkers(commands::RankWorkersArgs),
    /// Run the daily loop and list tasks predicted to be cancelled.
    PredictCancel(commands::PredictCancelArgs),
    /// Grid-search hyperparameters over a range of days.
    Tune(commands::TuneArgs),
    /// Emit plot-ready tables from saved evaluation reports.
    Report(commands::ReportArgs),
}

/// Options selecting and parameterizing a learner.
#[derive(Debug, Clone, Args)]
pub struct LearnerOpts {
    /// Learner: rf (random forest), dt (decision tree), or nb (naive Bayes).
    #[arg(long, default_value = "rf")]
    pub learner: String,
    /// Trees in the forest.
    #[arg(long)]
    pub trees: Option<usize>,
    /// Candidate features per split (forest).
    #[arg(long)]
    pub features: Option<usize>,
    /// Minimum samples per leaf.
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Maximum tree depth.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Cost-complexity pruning strength (decision tree).
    #[arg(long)]
    pub pruning: Option<f64>,
    /// Root seed for all randomized training.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl LearnerOpts {
    pub fn kind(&self) -> Result<LearnerKind, CliError> {
        self.learner
            .parse()
            .map_err(|e: taskcast::learn::LearnError| CliError::Validation(e.to_string()))
    }

    pub fn params(&self) -> Result<ModelParams, CliError> {
        Ok(match self.kind()? {
            LearnerKind::RandomForest => {
                let defaults = ForestParams::default();
                ModelParams::RandomForest(ForestParams {
                    num_trees: self.trees.unwrap_or(defaults.num_trees),
                    num_features: self.features.unwrap_or(defaults.num_features),
                    min_leaf: self.min_leaf.unwrap_or(defaults.min_leaf),
                    max_depth: self.max_depth,
                    bootstrap: true,
                    seed: self.seed,
                })
            }
            LearnerKind::DecisionTree => {
                let defaults = TreeParams::default();
                ModelParams::DecisionTree(TreeParams {
                    min_leaf: self.min_leaf.unwrap_or(defaults.min_leaf),
                    pruning_strength: self.pruning.unwrap_or(defaults.pruning_strength),
                    max_depth: self.max_depth,
                    seed: self.seed,
                })
            }
            LearnerKind::NaiveBayes => ModelParams::NaiveBayes,
        })
    }
}

/// Options of the daily feature pipeline.
#[derive(Debug, Clone, Args)]
pub struct PipelineOpts {
    /// Dynamic-feature window length in days.
    #[arg(long, default_value_t = 90)]
    pub window: i64,
    /// Maximum training-sample age in days (unbounded when omitted).
    #[arg(long)]
    pub history_cap: Option<i64>,
    /// Consecutive empty-recommendation days before predicting cancellation.
    #[arg(long, default_value_t = 3)]
    pub monitor_days: u32,
    /// Probability filter for ranking.
    #[arg(long, default_value_t = 0.33)]
    pub threshold: f64,
    /// Successful submissions above which a worker counts as experienced.
    #[arg(long, default_value_t = 10)]
    pub experienced_cutoff: usize,
    /// Review score that counts a submission as successful.
    #[arg(long, default_value = "75.00")]
    pub passing_score: String,
}

impl PipelineOpts {
    pub fn config(&self) -> Result<PipelineConfig, CliError> {
        let passing_score: ReviewScore = self
            .passing_score
            .parse()
            .map_err(|e: taskcast::market::MarketError| CliError::Validation(e.to_string()))?;
        let config = PipelineConfig {
            window_days: self.window,
            history_cap_days: self.history_cap,
            monitor_days: self.monitor_days,
            probability_threshold: self.threshold,
            experienced_cutoff: self.experienced_cutoff,
            experience_window_days: 90,
            passing_score,
        };
        config
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(config)
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate, String> {
    s.parse().map_err(|_| format!("`{s}` is not an ISO-8601 date (YYYY-MM-DD)"))
}

/// Runs a parsed command; maps domain failures to exit status 1.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        // Thread count only affects wall-clock time; results are
        // schedule-independent.
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .ok();
    }
    match cli.command {
        Command::Simulate(args) => commands::simulate(args),
        Command::Ingest(args) => commands::ingest(args),
        Command::Train(args) => commands::train(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::RankTasks(args) => commands::rank_tasks(args),
        Command::RankWorkers(args) => commands::rank_workers(args),
        Command::PredictCancel(args) => commands::predict_cancel(args),
        Command::Tune(args) => commands::tune(args),
        Command::Report(args) => commands::report(args),
    }
}

pub(crate) fn ensure_out_dir(path: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", path.display())))
}
