//! From-scratch three-class learners: CART decision tree, random forest,
//! and naive Bayes, all emitting winner/quitter/submitter probabilities,
//! plus grid-search tuning.

mod bayes;
mod dataset;
mod forest;
pub mod grid;
mod tree;

pub use bayes::NaiveBayesModel;
pub use grid::{default_grid, grid_search, selection_order, ConfigScore, GridSearchResult, LearnerKind};
pub use tree::{DecisionTree, TreeNode};

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, LabeledSample};
use crate::market::OutcomeLabel;

use dataset::TrainView;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("invalid params: {0}")]
    InvalidParams(String),
    #[error("feature vector has {found} entries, model expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("training sample ({worker_id}, {task_id}) has no label")]
    UnlabeledSample { worker_id: String, task_id: String },
    #[error("empty parameter grid")]
    EmptyGrid,
    #[error("not enough data: {0}")]
    NotEnoughData(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported model format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("malformed model file: {0}")]
    Malformed(String),
}

/// Class probabilities for one sample. Components are in [0, 1] and sum
/// to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTriple {
    pub winner: f64,
    pub quitter: f64,
    pub submitter: f64,
}

impl ProbabilityTriple {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    pub fn new(winner: f64, quitter: f64, submitter: f64) -> Result<Self, LearnError> {
        let triple = ProbabilityTriple {
            winner,
            quitter,
            submitter,
        };
        let sum = winner + quitter + submitter;
        let in_range = |p: f64| (0.0..=1.0).contains(&p);
        if !(in_range(winner) && in_range(quitter) && in_range(submitter))
            || (sum - 1.0).abs() > Self::SUM_TOLERANCE
        {
            return Err(LearnError::InvalidParams(format!(
                "({winner}, {quitter}, {submitter}) is not a probability triple"
            )));
        }
        Ok(triple)
    }

    /// Normalizes vote or frequency counts indexed by [`OutcomeLabel::index`].
    pub fn from_counts(counts: &[u32; 3]) -> Self {
        Self::from_weights(&counts.map(f64::from))
    }

    /// Normalizes non-negative weights indexed by [`OutcomeLabel::index`].
    pub fn from_weights(weights: &[f64; 3]) -> Self {
        let sum: f64 = weights.iter().sum();
        debug_assert!(sum > 0.0, "weights must not all be zero");
        ProbabilityTriple {
            winner: weights[OutcomeLabel::Winner.index()] / sum,
            quitter: weights[OutcomeLabel::Quitter.index()] / sum,
            submitter: weights[OutcomeLabel::Submitter.index()] / sum,
        }
    }

    pub fn get(&self, label: OutcomeLabel) -> f64 {
        match label {
            OutcomeLabel::Winner => self.winner,
            OutcomeLabel::Quitter => self.quitter,
            OutcomeLabel::Submitter => self.submitter,
        }
    }

    /// Most probable class; exact ties break by label priority.
    pub fn argmax(&self) -> OutcomeLabel {
        let mut best = OutcomeLabel::Winner;
        for label in OutcomeLabel::ALL {
            let p = self.get(label);
            let b = self.get(best);
            if p > b || (p == b && label.priority() < best.priority()) {
                best = label;
            }
        }
        best
    }
}

/// CART tree hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub min_leaf: usize,
    /// Cost-complexity pruning strength; 0 disables pruning.
    pub pruning_strength: f64,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 5,
            pruning_strength: 0.001,
            max_depth: None,
            seed: 0,
        }
    }
}

impl TreeParams {
    fn validate(&self) -> Result<(), LearnError> {
        if self.min_leaf == 0 {
            return Err(LearnError::InvalidParams("min_leaf must be positive".into()));
        }
        if !self.pruning_strength.is_finite() || self.pruning_strength < 0.0 {
            return Err(LearnError::InvalidParams(
                "pruning_strength must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Random forest hyperparameters. Defaults are the selected production
/// configuration: 100 trees, 50 candidate features per split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    /// Features sampled per split.
    pub num_features: usize,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    /// Train each tree on a same-size resample drawn with replacement.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 100,
            num_features: 50,
            min_leaf: 2,
            max_depth: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    fn validate(&self, width: usize) -> Result<(), LearnError> {
        if self.num_trees == 0 || self.min_leaf == 0 {
            return Err(LearnError::InvalidParams(
                "num_trees and min_leaf must be positive".into(),
            ));
        }
        if self.num_features == 0 || self.num_features > width {
            return Err(LearnError::InvalidParams(format!(
                "num_features {} must be in [1, {width}]",
                self.num_features
            )));
        }
        Ok(())
    }
}

/// Parameters for any supported learner; the uniform handle grid search
/// and the walk-forward harness train through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum ModelParams {
    RandomForest(ForestParams),
    DecisionTree(TreeParams),
    NaiveBayes,
}

impl ModelParams {
    pub fn kind(&self) -> LearnerKind {
        match self {
            ModelParams::RandomForest(_) => LearnerKind::RandomForest,
            ModelParams::DecisionTree(_) => LearnerKind::DecisionTree,
            ModelParams::NaiveBayes => LearnerKind::NaiveBayes,
        }
    }

    /// Same parameters with the seed replaced; gives every walk-forward
    /// day its own stream.
    pub fn reseeded(&self, seed: u64) -> ModelParams {
        match self {
            ModelParams::RandomForest(p) => {
                ModelParams::RandomForest(ForestParams { seed, ..p.clone() })
            }
            ModelParams::DecisionTree(p) => {
                ModelParams::DecisionTree(TreeParams { seed, ..p.clone() })
            }
            ModelParams::NaiveBayes => ModelParams::NaiveBayes,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelParams::RandomForest(p) => p.seed,
            ModelParams::DecisionTree(p) => p.seed,
            ModelParams::NaiveBayes => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FittedState {
    Tree {
        params: TreeParams,
        tree: DecisionTree,
    },
    Forest {
        params: ForestParams,
        trees: Vec<DecisionTree>,
    },
    NaiveBayes {
        model: NaiveBayesModel,
    },
}

/// A fitted model plus the params, seed, and training-set fingerprint
/// that produced it. Identical (samples, params, seed) yield identical
/// predictions on any input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    state: FittedState,
    width: usize,
    training_fingerprint: String,
    training_size: usize,
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    model: TrainedModel,
}

impl TrainedModel {
    pub fn params(&self) -> ModelParams {
        match &self.state {
            FittedState::Tree { params, .. } => ModelParams::DecisionTree(params.clone()),
            FittedState::Forest { params, .. } => ModelParams::RandomForest(params.clone()),
            FittedState::NaiveBayes { .. } => ModelParams::NaiveBayes,
        }
    }

    pub fn training_fingerprint(&self) -> &str {
        &self.training_fingerprint
    }

    pub fn training_size(&self) -> usize {
        self.training_size
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Per-tree structures when the model is a forest.
    pub fn forest_trees(&self) -> Option<&[DecisionTree]> {
        match &self.state {
            FittedState::Forest { trees, .. } => Some(trees),
            _ => None,
        }
    }

    pub fn predict_proba(&self, features: &FeatureVector) -> Result<ProbabilityTriple, LearnError> {
        self.predict_proba_raw(features.values())
    }

    pub fn predict_proba_raw(&self, x: &[f64]) -> Result<ProbabilityTriple, LearnError> {
        if x.len() != self.width {
            return Err(LearnError::ShapeMismatch {
                expected: self.width,
                found: x.len(),
            });
        }
        Ok(match &self.state {
            FittedState::Tree { tree, .. } => tree.predict_proba(x),
            FittedState::Forest { trees, .. } => forest::forest_proba(trees, x),
            FittedState::NaiveBayes { model } => model.predict_proba(x),
        })
    }

    pub fn predict_label(&self, features: &FeatureVector) -> Result<OutcomeLabel, LearnError> {
        self.predict_label_raw(features.values())
    }

    pub fn predict_label_raw(&self, x: &[f64]) -> Result<OutcomeLabel, LearnError> {
        if x.len() != self.width {
            return Err(LearnError::ShapeMismatch {
                expected: self.width,
                found: x.len(),
            });
        }
        Ok(match &self.state {
            FittedState::Tree { tree, .. } => tree.predict_label(x),
            FittedState::Forest { trees, .. } => forest::forest_label(trees, x),
            FittedState::NaiveBayes { model } => model.predict_proba(x).argmax(),
        })
    }

    /// Writes the model as self-describing versioned JSON.
    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        let mut bytes =
            serde_json::to_vec(&file).map_err(|e| LearnError::Malformed(e.to_string()))?;
        bytes.push(b'\n');
        fs::write(path, bytes)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel, LearnError> {
        let bytes = fs::read(path)?;
        #[derive(Deserialize)]
        struct VersionOnly {
            format_version: u32,
        }
        let version: VersionOnly =
            serde_json::from_slice(&bytes).map_err(|e| LearnError::Malformed(e.to_string()))?;
        if version.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::FormatVersionMismatch {
                found: version.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        let file: ModelFile =
            serde_json::from_slice(&bytes).map_err(|e| LearnError::Malformed(e.to_string()))?;
        Ok(file.model)
    }
}

/// FNV-1a hash over the canonicalized training set: ids, labels, days, and
/// raw feature bits.
fn fingerprint(view: &TrainView<'_>, samples: &[LabeledSample]) -> String {
    let mut order: Vec<&LabeledSample> = samples.iter().collect();
    order.sort_by(|a, b| {
        (&a.task_id, &a.worker_id, a.as_of_day).cmp(&(&b.task_id, &b.worker_id, b.as_of_day))
    });
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    eat(&(view.width as u64).to_le_bytes());
    for sample in order {
        eat(sample.task_id.as_bytes());
        eat(&[0xff]);
        eat(sample.worker_id.as_bytes());
        eat(&[0xff]);
        eat(&sample.as_of_day.to_string().into_bytes());
        eat(&[sample.label.map_or(0xfe, |l| l.index() as u8)]);
        for v in sample.features.values() {
            eat(&v.to_bits().to_le_bytes());
        }
    }
    format!("{hash:016x}")
}

/// Grows a CART tree by best Gini split with midpoint thresholds, then
/// applies cost-complexity pruning at the configured strength.
pub fn train_tree(
    samples: &[LabeledSample],
    params: &TreeParams,
) -> Result<TrainedModel, LearnError> {
    params.validate()?;
    let view = TrainView::new(samples)?;
    let grown = tree::grow(
        &view,
        (0..view.len()).collect(),
        tree::GrowControl {
            min_leaf: params.min_leaf,
            max_depth: params.max_depth,
            features_per_split: None,
        },
        None,
    );
    let pruned = tree::prune(grown, params.pruning_strength);
    Ok(TrainedModel {
        width: view.width,
        training_fingerprint: fingerprint(&view, samples),
        training_size: view.len(),
        state: FittedState::Tree {
            params: params.clone(),
            tree: pruned,
        },
    })
}

/// Trains `num_trees` trees, each on a bootstrap resample with a fresh
/// random feature subset per split.
pub fn train_forest(
    samples: &[LabeledSample],
    params: &ForestParams,
) -> Result<TrainedModel, LearnError> {
    let view = TrainView::new(samples)?;
    params.validate(view.width)?;
    let trees = forest::fit_forest(&view, params);
    Ok(TrainedModel {
        width: view.width,
        training_fingerprint: fingerprint(&view, samples),
        training_size: view.len(),
        state: FittedState::Forest {
            params: params.clone(),
            trees,
        },
    })
}

/// Fits class priors plus per-column Gaussian or Bernoulli likelihoods.
pub fn train_naive_bayes(samples: &[LabeledSample]) -> Result<TrainedModel, LearnError> {
    let view = TrainView::new(samples)?;
    let model = bayes::fit_naive_bayes(&view);
    Ok(TrainedModel {
        width: view.width,
        training_fingerprint: fingerprint(&view, samples),
        training_size: view.len(),
        state: FittedState::NaiveBayes { model },
    })
}

/// Trains whichever learner the params select.
pub fn train(samples: &[LabeledSample], params: &ModelParams) -> Result<TrainedModel, LearnError> {
    match params {
        ModelParams::RandomForest(p) => train_forest(samples, p),
        ModelParams::DecisionTree(p) => train_tree(samples, p),
        ModelParams::NaiveBayes => train_naive_bayes(samples),
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use chrono::NaiveDate;

    use crate::features::{FeatureVector, LabeledSample, VECTOR_WIDTH};
    use crate::market::OutcomeLabel;

    /// Builds a 124-wide sample with the given leading values; the rest of
    /// the vector is zero.
    pub fn sample(id: usize, leading: &[f64], label: OutcomeLabel) -> LabeledSample {
        let mut values = vec![0.0; VECTOR_WIDTH];
        values[..leading.len()].copy_from_slice(leading);
        LabeledSample {
            worker_id: format!("w{id:04}"),
            task_id: format!("t{:04}", id / 7),
            as_of_day: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
            features: FeatureVector::new(values),
            label: Some(label),
        }
    }
}
