//! Naive Bayes with Gaussian likelihoods for continuous columns and
//! add-one-smoothed Bernoulli likelihoods for binary ones.

use serde::{Deserialize, Serialize};

use super::dataset::TrainView;
use super::ProbabilityTriple;

/// Floor applied to per-class variances so constant columns stay finite.
const VARIANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "likelihood", rename_all = "snake_case")]
enum ColumnModel {
    Gaussian { mean: [f64; 3], variance: [f64; 3] },
    Bernoulli { p_one: [f64; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    class_counts: [u32; 3],
    priors: [f64; 3],
    columns: Vec<ColumnModel>,
}

pub(crate) fn fit_naive_bayes(view: &TrainView<'_>) -> NaiveBayesModel {
    let class_counts = view.class_counts();
    let n = view.len() as f64;
    let priors = class_counts.map(|c| f64::from(c) / n);

    let mut columns = Vec::with_capacity(view.width);
    for col in 0..view.width {
        if view.binary[col] {
            let mut ones = [0u32; 3];
            for (row, &label) in view.rows.iter().zip(&view.labels) {
                if row[col] == 1.0 {
                    ones[label as usize] += 1;
                }
            }
            let mut p_one = [0.0; 3];
            for c in 0..3 {
                p_one[c] = f64::from(ones[c] + 1) / f64::from(class_counts[c] + 2);
            }
            columns.push(ColumnModel::Bernoulli { p_one });
        } else {
            let mut sum = [0.0f64; 3];
            let mut sum_sq = [0.0f64; 3];
            for (row, &label) in view.rows.iter().zip(&view.labels) {
                sum[label as usize] += row[col];
                sum_sq[label as usize] += row[col] * row[col];
            }
            let mut mean = [0.0; 3];
            let mut variance = [VARIANCE_FLOOR; 3];
            for c in 0..3 {
                let nc = f64::from(class_counts[c]);
                if nc > 0.0 {
                    mean[c] = sum[c] / nc;
                    variance[c] = (sum_sq[c] / nc - mean[c] * mean[c]).max(VARIANCE_FLOOR);
                }
            }
            columns.push(ColumnModel::Gaussian { mean, variance });
        }
    }

    NaiveBayesModel {
        class_counts,
        priors,
        columns,
    }
}

impl NaiveBayesModel {
    /// Normalized posteriors. Classes absent from training keep
    /// probability zero.
    pub fn predict_proba(&self, x: &[f64]) -> ProbabilityTriple {
        let mut log_post = [f64::NEG_INFINITY; 3];
        for c in 0..3 {
            if self.class_counts[c] == 0 {
                continue;
            }
            let mut lp = self.priors[c].ln();
            for (column, &value) in self.columns.iter().zip(x) {
                lp += match column {
                    ColumnModel::Gaussian { mean, variance } => {
                        let d = value - mean[c];
                        -0.5 * (std::f64::consts::TAU * variance[c]).ln()
                            - d * d / (2.0 * variance[c])
                    }
                    ColumnModel::Bernoulli { p_one } => {
                        if value >= 0.5 {
                            p_one[c].ln()
                        } else {
                            (1.0 - p_one[c]).ln()
                        }
                    }
                };
            }
            log_post[c] = lp;
        }

        let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights = log_post.map(|lp| {
            if lp.is_finite() {
                (lp - max).exp()
            } else {
                0.0
            }
        });
        ProbabilityTriple::from_weights(&weights)
    }
}
