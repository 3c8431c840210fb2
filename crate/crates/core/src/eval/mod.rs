//! Evaluation: accuracy and ranking metrics, effort-savings accounting,
//! and the daily walk-forward harness tying the whole pipeline together.

pub mod metrics;
pub mod ranking;
pub mod savings;
mod walk;

pub use metrics::{
    auc_one_vs_rest, auc_ovr, confusion_metrics, f_measure, metrics_from_counts, vargha_delaney,
    ClassPrf, ClassificationMetrics, ConfusionCounts,
};
pub use ranking::{
    centi_to_string, mean_score_centi, recall_at_k, score_gap, RecallAtK, ScoreGapSummary,
    TaskScoreGap, WinnerSets,
};
pub use savings::{
    cancellation_metrics, effort_savings, CancellationOutcome, CancellationReport,
    DailyPredictions, EffortSavings, PairSavings, SavingsByClass,
};
pub use walk::{
    walk_forward, DailyRecord, DayRecommendations, EvaluationReport, GapInstance, RunMeta, Totals,
    WalkOutputs, REPORT_FORMAT_VERSION,
};

use chrono::NaiveDate;
use thiserror::Error;

use crate::engine::EngineError;
use crate::features::FeatureError;
use crate::learn::LearnError;
use crate::market::MarketError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("aligned sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("no evaluated task has an actual winner")]
    NoWinners,
    #[error("no task has enough ranked entries to score a gap")]
    NotEnoughRanked,
    #[error("missing prediction for pair ({worker_id}, {task_id}) on {day}")]
    IncompleteCoverage {
        day: NaiveDate,
        worker_id: String,
        task_id: String,
    },
    #[error("no monitored task has a decided outcome")]
    NoMonitoredTasks,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed report file: {0}")]
    Malformed(String),
    #[error("unsupported report format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
}
