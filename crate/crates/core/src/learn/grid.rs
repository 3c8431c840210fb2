//! Hyperparameter grid search over daily snapshots: every configuration is
//! trained on each day's TR, scored on that day's labeled TS, and ranked by
//! mean winner-class F-measure.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::eval::metrics::{auc_one_vs_rest, confusion_metrics};
use crate::features::DailySnapshot;
use crate::market::OutcomeLabel;
use crate::rng::sub_seed;

use super::{train, ForestParams, LearnError, ModelParams, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    RandomForest,
    DecisionTree,
    NaiveBayes,
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::RandomForest => "rf",
            LearnerKind::DecisionTree => "dt",
            LearnerKind::NaiveBayes => "nb",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = LearnError;

    fn from_str(s: &str) -> Result<Self, LearnError> {
        match s {
            "rf" | "random_forest" => Ok(LearnerKind::RandomForest),
            "dt" | "decision_tree" => Ok(LearnerKind::DecisionTree),
            "nb" | "naive_bayes" => Ok(LearnerKind::NaiveBayes),
            other => Err(LearnError::InvalidParams(format!(
                "unknown learner `{other}` (expected rf, dt, or nb)"
            ))),
        }
    }
}

/// Forest grid: 5 tree counts x 4 feature counts = 20 configurations.
pub const FOREST_TREE_GRID: [usize; 5] = [10, 25, 50, 75, 100];
pub const FOREST_FEATURE_GRID: [usize; 4] = [10, 30, 50, 75];

/// Tree grid: 6 pruning strengths x 3 leaf minimums = 18 configurations.
pub const TREE_PRUNING_GRID: [f64; 6] = [0.0, 0.0001, 0.001, 0.01, 0.1, 1.0];
pub const TREE_MIN_LEAF_GRID: [usize; 3] = [2, 5, 10];

/// The default enumeration for a learner, in canonical order.
pub fn default_grid(kind: LearnerKind, seed: u64) -> Vec<ModelParams> {
    match kind {
        LearnerKind::RandomForest => {
            let mut grid = Vec::new();
            for &num_trees in &FOREST_TREE_GRID {
                for &num_features in &FOREST_FEATURE_GRID {
                    grid.push(ModelParams::RandomForest(ForestParams {
                        num_trees,
                        num_features,
                        seed,
                        ..ForestParams::default()
                    }));
                }
            }
            grid
        }
        LearnerKind::DecisionTree => {
            let mut grid = Vec::new();
            for &pruning_strength in &TREE_PRUNING_GRID {
                for &min_leaf in &TREE_MIN_LEAF_GRID {
                    grid.push(ModelParams::DecisionTree(TreeParams {
                        min_leaf,
                        pruning_strength,
                        max_depth: None,
                        seed,
                    }));
                }
            }
            grid
        }
        LearnerKind::NaiveBayes => vec![ModelParams::NaiveBayes],
    }
}

/// Mean daily scores for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigScore {
    pub params: ModelParams,
    pub mean_winner_f: f64,
    pub mean_quitter_f: f64,
    pub mean_winner_auc: Option<f64>,
    pub mean_quitter_auc: Option<f64>,
    pub days_scored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    /// All configurations, best first.
    pub ranked: Vec<ConfigScore>,
}

impl GridSearchResult {
    pub fn best(&self) -> &ConfigScore {
        &self.ranked[0]
    }
}

/// Lower complexity loses ties last: fewer trees then fewer features for a
/// forest; stronger pruning then larger leaves for a tree.
fn complexity(params: &ModelParams) -> (f64, f64) {
    match params {
        ModelParams::RandomForest(p) => (p.num_trees as f64, p.num_features as f64),
        ModelParams::DecisionTree(p) => (-p.pruning_strength, -(p.min_leaf as f64)),
        ModelParams::NaiveBayes => (0.0, 0.0),
    }
}

fn round9(v: f64) -> i64 {
    (v * 1e9).round() as i64
}

/// Ranking order for configurations: highest mean winner-F (compared at 9
/// decimals), then highest mean quitter-F, then lower complexity.
pub fn selection_order(a: &ConfigScore, b: &ConfigScore) -> Ordering {
    round9(b.mean_winner_f)
        .cmp(&round9(a.mean_winner_f))
        .then_with(|| round9(b.mean_quitter_f).cmp(&round9(a.mean_quitter_f)))
        .then_with(|| {
            let (a1, a2) = complexity(&a.params);
            let (b1, b2) = complexity(&b.params);
            a1.total_cmp(&b1).then(a2.total_cmp(&b2))
        })
}

/// Evaluates every configuration across the snapshots and ranks them.
///
/// Each day trains on that day's TR with a day-specific sub-seed and is
/// scored on the day's labeled TS samples; days without labeled TS are
/// skipped.
pub fn grid_search(
    snapshots: &[DailySnapshot],
    grid: &[ModelParams],
) -> Result<GridSearchResult, LearnError> {
    if grid.is_empty() {
        return Err(LearnError::EmptyGrid);
    }

    let mut ranked = Vec::with_capacity(grid.len());
    for params in grid {
        let mut winner_f = Vec::new();
        let mut quitter_f = Vec::new();
        let mut winner_auc = Vec::new();
        let mut quitter_auc = Vec::new();

        for (day_idx, snapshot) in snapshots.iter().enumerate() {
            let labeled: Vec<_> = snapshot
                .ts
                .iter()
                .filter(|s| s.label.is_some())
                .collect();
            if snapshot.tr.is_empty() || labeled.is_empty() {
                continue;
            }
            let day_params = params.reseeded(sub_seed(params.seed(), day_idx as u64));
            let model = train(&snapshot.tr, &day_params)?;

            let mut predictions = Vec::with_capacity(labeled.len());
            let mut scores = Vec::with_capacity(labeled.len());
            let mut actuals = Vec::with_capacity(labeled.len());
            for sample in &labeled {
                let probs = model.predict_proba(&sample.features)?;
                predictions.push(probs.argmax());
                scores.push(probs);
                actuals.push(sample.label.unwrap());
            }

            let metrics = confusion_metrics(&predictions, &actuals)
                .map_err(|e| LearnError::NotEnoughData(e.to_string()))?;
            winner_f.push(metrics.class(OutcomeLabel::Winner).f_measure);
            quitter_f.push(metrics.class(OutcomeLabel::Quitter).f_measure);
            if let Some(auc) = auc_one_vs_rest(&scores, &actuals, OutcomeLabel::Winner) {
                winner_auc.push(auc);
            }
            if let Some(auc) = auc_one_vs_rest(&scores, &actuals, OutcomeLabel::Quitter) {
                quitter_auc.push(auc);
            }
        }

        if winner_f.is_empty() {
            return Err(LearnError::NotEnoughData(
                "no snapshot day with a nonempty TR and labeled TS".into(),
            ));
        }
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
        let mean_opt = |xs: &[f64]| if xs.is_empty() { None } else { Some(mean(xs)) };
        ranked.push(ConfigScore {
            params: params.clone(),
            mean_winner_f: mean(&winner_f),
            mean_quitter_f: mean(&quitter_f),
            mean_winner_auc: mean_opt(&winner_auc),
            mean_quitter_auc: mean_opt(&quitter_auc),
            days_scored: winner_f.len(),
        });
    }

    ranked.sort_by(selection_order);
    Ok(GridSearchResult { ranked })
}
