//! Random forest: bootstrap-resampled CART trees with per-split random
//! feature subsets, combined by majority vote.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::market::OutcomeLabel;
use crate::rng::{sub_seed, Rng};

use super::dataset::TrainView;
use super::tree::{grow, majority, DecisionTree, GrowControl};
use super::{ForestParams, ProbabilityTriple};

/// Builds the forest. Tree `t` draws everything from a sub-seed of
/// `(params.seed, t)`, so the fitted forest does not depend on how tree
/// training is scheduled.
pub(crate) fn fit_forest(view: &TrainView<'_>, params: &ForestParams) -> Vec<DecisionTree> {
    let build_one = |t: usize| -> DecisionTree {
        let mut rng = Rng::from_seed(sub_seed(params.seed, t as u64));
        let n = view.len();
        let members: Vec<usize> = if params.bootstrap {
            (0..n).map(|_| rng.below(n)).collect()
        } else {
            (0..n).collect()
        };
        grow(
            view,
            members,
            GrowControl {
                min_leaf: params.min_leaf,
                max_depth: params.max_depth,
                features_per_split: Some(params.num_features),
            },
            Some(rng),
        )
    };

    #[cfg(feature = "parallel")]
    {
        (0..params.num_trees)
            .into_par_iter()
            .map(build_one)
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..params.num_trees).map(build_one).collect()
    }
}

/// Fraction of trees whose leaf-majority class is each label.
pub(crate) fn forest_proba(trees: &[DecisionTree], x: &[f64]) -> ProbabilityTriple {
    let mut votes = [0u32; 3];
    for tree in trees {
        votes[tree.predict_label(x).index()] += 1;
    }
    ProbabilityTriple::from_counts(&votes)
}

pub(crate) fn forest_label(trees: &[DecisionTree], x: &[f64]) -> OutcomeLabel {
    let mut votes = [0u32; 3];
    for tree in trees {
        votes[tree.predict_label(x).index()] += 1;
    }
    majority(&votes)
}
