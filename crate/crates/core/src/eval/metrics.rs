//! Classification metrics: per-class precision/recall/F over the 3x3
//! confusion matrix, tie-aware one-vs-rest AUC, and the Vargha-Delaney
//! effect size.

use serde::{Deserialize, Serialize};

use crate::learn::ProbabilityTriple;
use crate::market::OutcomeLabel;

use super::EvalError;

/// 3x3 confusion matrix indexed `[actual][predicted]` by
/// [`OutcomeLabel::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts(pub [[u64; 3]; 3]);

impl ConfusionCounts {
    pub fn record(&mut self, actual: OutcomeLabel, predicted: OutcomeLabel) {
        self.0[actual.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn actual_count(&self, label: OutcomeLabel) -> u64 {
        self.0[label.index()].iter().sum()
    }

    pub fn predicted_count(&self, label: OutcomeLabel) -> u64 {
        self.0.iter().map(|row| row[label.index()]).sum()
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for (row, other_row) in self.0.iter_mut().zip(&other.0) {
            for (cell, v) in row.iter_mut().zip(other_row) {
                *cell += v;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassPrf {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub counts: ConfusionCounts,
    pub classes: [ClassPrf; 3],
}

impl ClassificationMetrics {
    pub fn class(&self, label: OutcomeLabel) -> &ClassPrf {
        &self.classes[label.index()]
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Per-class precision, recall, and F from a filled confusion matrix. Any
/// 0/0 ratio reports as 0.
pub fn metrics_from_counts(counts: &ConfusionCounts) -> ClassificationMetrics {
    let mut classes = [ClassPrf::default(); 3];
    for label in OutcomeLabel::ALL {
        let tp = counts.0[label.index()][label.index()];
        let precision = ratio(tp, counts.predicted_count(label));
        let recall = ratio(tp, counts.actual_count(label));
        classes[label.index()] = ClassPrf {
            precision,
            recall,
            f_measure: f_measure(precision, recall),
        };
    }
    ClassificationMetrics {
        counts: *counts,
        classes,
    }
}

/// Tallies aligned predicted/actual label sequences.
pub fn confusion_metrics(
    predictions: &[OutcomeLabel],
    actuals: &[OutcomeLabel],
) -> Result<ClassificationMetrics, EvalError> {
    if predictions.len() != actuals.len() {
        return Err(EvalError::LengthMismatch {
            left: predictions.len(),
            right: actuals.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut counts = ConfusionCounts::default();
    for (&predicted, &actual) in predictions.iter().zip(actuals) {
        counts.record(actual, predicted);
    }
    Ok(metrics_from_counts(&counts))
}

/// P(a > b) + 0.5 P(a = b) over all cross pairs, computed via average
/// ranks so ties cost O(n log n) instead of O(n^2).
fn rank_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = a
        .iter()
        .map(|&v| (v, true))
        .chain(b.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sum_a = 0.0;
    let mut start = 0;
    while start < all.len() {
        let mut end = start + 1;
        while end < all.len() && all[end].0 == all[start].0 {
            end += 1;
        }
        // Average 1-based rank of the tied block [start, end).
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        for item in &all[start..end] {
            if item.1 {
                rank_sum_a += avg_rank;
            }
        }
        start = end;
    }

    let m = a.len() as f64;
    let n = b.len() as f64;
    (rank_sum_a - m * (m + 1.0) / 2.0) / (m * n)
}

/// One-vs-rest AUC for a single class: the probability that a random
/// positive's class score outranks a random negative's, ties counted half.
/// `None` when the class has no positives or no negatives.
pub fn auc_one_vs_rest(
    scores: &[ProbabilityTriple],
    actuals: &[OutcomeLabel],
    class: OutcomeLabel,
) -> Option<f64> {
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for (probs, &actual) in scores.iter().zip(actuals) {
        if actual == class {
            positives.push(probs.get(class));
        } else {
            negatives.push(probs.get(class));
        }
    }
    if positives.is_empty() || negatives.is_empty() {
        return None;
    }
    Some(rank_statistic(&positives, &negatives))
}

/// One-vs-rest AUC per class; degenerate classes report as absent.
pub fn auc_ovr(
    scores: &[ProbabilityTriple],
    actuals: &[OutcomeLabel],
) -> Result<[Option<f64>; 3], EvalError> {
    if scores.len() != actuals.len() {
        return Err(EvalError::LengthMismatch {
            left: scores.len(),
            right: actuals.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok([
        auc_one_vs_rest(scores, actuals, OutcomeLabel::Winner),
        auc_one_vs_rest(scores, actuals, OutcomeLabel::Quitter),
        auc_one_vs_rest(scores, actuals, OutcomeLabel::Submitter),
    ])
}

/// Vargha-Delaney A12 effect size between two samples.
pub fn vargha_delaney(sample_a: &[f64], sample_b: &[f64]) -> Result<f64, EvalError> {
    if sample_a.is_empty() || sample_b.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    Ok(rank_statistic(sample_a, sample_b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::OutcomeLabel::{Quitter, Submitter, Winner};
    use crate::rng::Rng;

    #[test]
    fn f_measure_matches_reported_roundings() {
        let f = f_measure(0.85, 0.80);
        assert!((f - 0.8242).abs() < 1e-4, "{f}");
        let f = f_measure(0.87, 0.77);
        assert!((f - 0.8169).abs() < 1e-4, "{f}");
    }

    #[test]
    fn perfect_predictions_score_one() {
        let labels = [Winner, Quitter, Submitter, Quitter, Winner];
        let metrics = confusion_metrics(&labels, &labels).unwrap();
        for label in OutcomeLabel::ALL {
            let prf = metrics.class(label);
            assert_eq!(
                (prf.precision, prf.recall, prf.f_measure),
                (1.0, 1.0, 1.0)
            );
        }
    }

    #[test]
    fn zero_over_zero_reports_zero() {
        // Nothing predicted Winner and nothing actually Winner.
        let predictions = [Quitter, Quitter];
        let actuals = [Quitter, Submitter];
        let metrics = confusion_metrics(&predictions, &actuals).unwrap();
        let winner = metrics.class(Winner);
        assert_eq!((winner.precision, winner.recall, winner.f_measure), (0.0, 0.0, 0.0));
        // Submitter was never predicted: precision 0/0 -> 0, recall 0/1 -> 0.
        assert_eq!(metrics.class(Submitter).precision, 0.0);
    }

    #[test]
    fn confusion_matches_brute_force_tally() {
        let mut rng = Rng::from_seed(77);
        for _ in 0..20 {
            let n = 50;
            let draw = |rng: &mut Rng| OutcomeLabel::from_index(rng.below(3));
            let predictions: Vec<_> = (0..n).map(|_| draw(&mut rng)).collect();
            let actuals: Vec<_> = (0..n).map(|_| draw(&mut rng)).collect();
            let metrics = confusion_metrics(&predictions, &actuals).unwrap();
            for label in OutcomeLabel::ALL {
                let tp = predictions
                    .iter()
                    .zip(&actuals)
                    .filter(|(p, a)| **p == label && **a == label)
                    .count() as f64;
                let fp = predictions
                    .iter()
                    .zip(&actuals)
                    .filter(|(p, a)| **p == label && **a != label)
                    .count() as f64;
                let fn_ = predictions
                    .iter()
                    .zip(&actuals)
                    .filter(|(p, a)| **p != label && **a == label)
                    .count() as f64;
                let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
                let recall = if tp + fn_ == 0.0 { 0.0 } else { tp / (tp + fn_) };
                let prf = metrics.class(label);
                assert_eq!(prf.precision, precision);
                assert_eq!(prf.recall, recall);
            }
            assert_eq!(metrics.counts.total(), n as u64);
        }
    }

    fn triple_for(score: f64) -> ProbabilityTriple {
        ProbabilityTriple::new(score, 1.0 - score, 0.0).unwrap()
    }

    #[test]
    fn separable_scores_have_auc_one() {
        let scores: Vec<_> = [0.9, 0.8, 0.2, 0.1].iter().map(|&s| triple_for(s)).collect();
        let actuals = [Winner, Winner, Quitter, Quitter];
        let auc = auc_one_vs_rest(&scores, &actuals, Winner).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn constant_scores_have_auc_half() {
        let scores: Vec<_> = (0..6).map(|_| triple_for(0.5)).collect();
        let actuals = [Winner, Quitter, Winner, Quitter, Quitter, Winner];
        let auc = auc_one_vs_rest(&scores, &actuals, Winner).unwrap();
        assert_eq!(auc, 0.5);
    }

    #[test]
    fn degenerate_class_is_absent() {
        let scores: Vec<_> = [0.9, 0.8].iter().map(|&s| triple_for(s)).collect();
        let actuals = [Winner, Winner];
        assert_eq!(auc_one_vs_rest(&scores, &actuals, Winner), None);
        let per_class = auc_ovr(&scores, &actuals).unwrap();
        assert_eq!(per_class[Winner.index()], None);
    }

    #[test]
    fn auc_matches_pair_enumeration() {
        let mut rng = Rng::from_seed(12);
        for _ in 0..30 {
            let n = 6 + rng.below(10);
            let scores: Vec<_> = (0..n).map(|_| triple_for(rng.below(5) as f64 * 0.2)).collect();
            let actuals: Vec<_> = (0..n)
                .map(|_| if rng.chance(0.5) { Winner } else { Quitter })
                .collect();
            let Some(auc) = auc_one_vs_rest(&scores, &actuals, Winner) else {
                continue;
            };
            let mut wins = 0.0;
            let mut pairs = 0.0;
            for (sp, ap) in scores.iter().zip(&actuals) {
                if *ap != Winner {
                    continue;
                }
                for (sn, an) in scores.iter().zip(&actuals) {
                    if *an == Winner {
                        continue;
                    }
                    pairs += 1.0;
                    if sp.winner > sn.winner {
                        wins += 1.0;
                    } else if sp.winner == sn.winner {
                        wins += 0.5;
                    }
                }
            }
            assert!((auc - wins / pairs).abs() < 1e-12);
        }
    }

    #[test]
    fn vargha_delaney_reference_points() {
        assert_eq!(vargha_delaney(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        assert_eq!(vargha_delaney(&[5.0, 6.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(vargha_delaney(&[1.0, 2.0], &[0.0, 3.0]).unwrap(), 0.5);
        assert!(matches!(
            vargha_delaney(&[], &[1.0]),
            Err(EvalError::EmptyInput)
        ));
    }
}
