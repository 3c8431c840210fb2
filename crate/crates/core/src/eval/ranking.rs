//! Ranking-quality metrics: Recall@K over recommended workers and the
//! review-score gap between actual winners and the top-2 recommendations.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{RankedList, Subject};
use crate::market::ReviewScore;

use super::EvalError;

/// Map from task id to its actual winners.
pub type WinnerSets = BTreeMap<String, BTreeSet<String>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecallAtK {
    pub k: usize,
    pub fraction: f64,
    pub hits: usize,
    pub evaluated: usize,
    pub skipped_no_winner: usize,
}

/// Fraction of task rankings whose top-K entries contain at least one
/// actual winner. Rankings shorter than K use their whole list; tasks
/// without winners are skipped and counted.
pub fn recall_at_k(
    rankings: &[RankedList],
    actual_winners: &WinnerSets,
    k: usize,
) -> Result<RecallAtK, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidArgument("recall@k needs k >= 1"));
    }
    if rankings.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut hits = 0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for list in rankings {
        let Subject::Task(task_id) = &list.subject else {
            return Err(EvalError::InvalidArgument(
                "recall@k expects task-subject rankings",
            ));
        };
        let winners = actual_winners.get(task_id).filter(|w| !w.is_empty());
        let Some(winners) = winners else {
            skipped += 1;
            continue;
        };
        evaluated += 1;
        let top_hit = list
            .entries
            .iter()
            .take(k)
            .any(|pair| winners.contains(&pair.worker_id));
        if top_hit {
            hits += 1;
        }
    }
    if evaluated == 0 {
        return Err(EvalError::NoWinners);
    }
    Ok(RecallAtK {
        k,
        fraction: hits as f64 / evaluated as f64,
        hits,
        evaluated,
        skipped_no_winner: skipped,
    })
}

/// Mean of review scores in exact hundredths, rounded half away from zero
/// to two decimals, matching how displayed scores are averaged.
pub fn mean_score_centi(scores: &[ReviewScore]) -> i64 {
    debug_assert!(!scores.is_empty());
    let sum: i64 = scores.iter().map(|s| i64::from(s.centi())).sum();
    let n = scores.len() as i64;
    round_half_away(sum, n)
}

fn round_half_away(numerator: i64, denominator: i64) -> i64 {
    debug_assert!(denominator > 0);
    if numerator >= 0 {
        (2 * numerator + denominator) / (2 * denominator)
    } else {
        -((-2 * numerator + denominator) / (2 * denominator))
    }
}

/// Renders hundredths as a fixed two-decimal string.
pub fn centi_to_string(centi: i64) -> String {
    let sign = if centi < 0 { "-" } else { "" };
    let abs = centi.abs();
    format!("{sign}{}.{:02}", abs / 100, abs % 100)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskScoreGap {
    pub task_id: String,
    /// (mean winner score - mean top-2 recommended score), in hundredths.
    pub gap_centi: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreGapSummary {
    pub per_task: Vec<TaskScoreGap>,
    /// Mean per-task gap in hundredths, rounded half away from zero.
    pub mean_gap_centi: i64,
    pub excluded_short_list: usize,
    pub excluded_missing_score: usize,
    pub excluded_no_winner: usize,
}

/// Per task: mean review score of the actual winners minus the mean review
/// score of the top-2 recommended workers, averaged over evaluable tasks.
///
/// Tasks are excluded (and counted) when the ranking has fewer than two
/// entries, when no winner has a review score, or when a top-2 worker has
/// none.
pub fn score_gap(
    rankings: &[RankedList],
    actual_winners: &WinnerSets,
    review_score: impl Fn(&str, &str) -> Option<ReviewScore>,
) -> Result<ScoreGapSummary, EvalError> {
    if rankings.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let mut per_task = Vec::new();
    let mut excluded_short_list = 0;
    let mut excluded_missing_score = 0;
    let mut excluded_no_winner = 0;

    for list in rankings {
        let Subject::Task(task_id) = &list.subject else {
            return Err(EvalError::InvalidArgument(
                "score gap expects task-subject rankings",
            ));
        };
        let winner_scores: Vec<ReviewScore> = actual_winners
            .get(task_id)
            .into_iter()
            .flatten()
            .filter_map(|w| review_score(task_id, w))
            .collect();
        if winner_scores.is_empty() {
            excluded_no_winner += 1;
            continue;
        }
        if list.entries.len() < 2 {
            excluded_short_list += 1;
            continue;
        }
        let top2: Option<Vec<ReviewScore>> = list
            .entries
            .iter()
            .take(2)
            .map(|p| review_score(task_id, &p.worker_id))
            .collect();
        let Some(top2_scores) = top2 else {
            excluded_missing_score += 1;
            continue;
        };
        per_task.push(TaskScoreGap {
            task_id: task_id.clone(),
            gap_centi: mean_score_centi(&winner_scores) - mean_score_centi(&top2_scores),
        });
    }

    if per_task.is_empty() {
        return Err(EvalError::NotEnoughRanked);
    }
    let sum: i64 = per_task.iter().map(|t| t.gap_centi).sum();
    Ok(ScoreGapSummary {
        mean_gap_centi: round_half_away(sum, per_task.len() as i64),
        per_task,
        excluded_short_list,
        excluded_missing_score,
        excluded_no_winner,
    })
}
