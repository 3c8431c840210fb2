//! Decision products derived from daily class probabilities: ranked tasks
//! per worker, ranked registered workers per task, and task-cancellation
//! prediction.

mod cancel;

pub use cancel::{
    mark_potential_cancellation, predict_cancellation, CancellationState,
    MIN_MONITORED_DURATION_DAYS,
};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learn::ProbabilityTriple;
use crate::market::EventLog;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("scored pair ({worker_id}, {task_id}) does not belong to subject `{subject}`")]
    MixedSubjects {
        subject: String,
        worker_id: String,
        task_id: String,
    },
    #[error("worker `{worker_id}` is not registered on task `{task_id}` by {day}")]
    UnregisteredWorker {
        worker_id: String,
        task_id: String,
        day: NaiveDate,
    },
    #[error("task `{task_id}` lasts {duration} days; only tasks of at least {} days are monitored", cancel::MIN_MONITORED_DURATION_DAYS)]
    TaskTooShort { task_id: String, duration: i64 },
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("cancellation state for `{task_id}` already advanced past {day}")]
    NonMonotonicDay { task_id: String, day: NaiveDate },
}

/// One (worker, task) pair with its class probabilities for a day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub worker_id: String,
    pub task_id: String,
    pub day: NaiveDate,
    pub probs: ProbabilityTriple,
}

/// What a ranked list is about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "subject", content = "id", rename_all = "snake_case")]
pub enum Subject {
    Worker(String),
    Task(String),
}

impl std::fmt::Display for Subject {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Subject::Worker(id) => write!(f, "worker {id}"),
            Subject::Task(id) => write!(f, "task {id}"),
        }
    }
}

/// Two-segment recommendation list: a winner-probability segment followed
/// by an appended submitter-probability segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub subject: Subject,
    pub day: NaiveDate,
    pub entries: Vec<ScoredPair>,
    /// Index of the first submitter-segment entry.
    pub boundary: usize,
}

impl RankedList {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn winner_segment(&self) -> &[ScoredPair] {
        &self.entries[..self.boundary]
    }

    pub fn submitter_segment(&self) -> &[ScoredPair] {
        &self.entries[self.boundary..]
    }

    /// Ids of the ranked counterparts (task ids for a worker subject,
    /// worker ids for a task subject), best first.
    pub fn counterpart_ids(&self) -> Vec<&str> {
        self.entries
            .iter()
            .map(|p| match self.subject {
                Subject::Worker(_) => p.task_id.as_str(),
                Subject::Task(_) => p.worker_id.as_str(),
            })
            .collect()
    }
}

fn descending(a: f64, b: f64) -> std::cmp::Ordering {
    b.total_cmp(&a)
}

/// Splits scored pairs into the two filtered segments shared by both
/// ranking directions. `sort_winner` and `sort_submitter` order each
/// segment (descending primary score plus deterministic tie-breaks).
fn two_segment_rank<K1, K2>(
    mut pairs: Vec<ScoredPair>,
    threshold: f64,
    sort_winner: K1,
    sort_submitter: K2,
) -> (Vec<ScoredPair>, usize)
where
    K1: Fn(&ScoredPair, &ScoredPair) -> std::cmp::Ordering,
    K2: Fn(&ScoredPair, &ScoredPair) -> std::cmp::Ordering,
{
    // Deterministic base order regardless of caller ordering.
    pairs.sort_by(|a, b| (&a.task_id, &a.worker_id).cmp(&(&b.task_id, &b.worker_id)));

    let mut winner_segment: Vec<ScoredPair> = Vec::new();
    let mut submitter_segment: Vec<ScoredPair> = Vec::new();
    for pair in pairs {
        let p = &pair.probs;
        if p.winner >= threshold && p.winner >= p.submitter {
            winner_segment.push(pair);
        } else if p.submitter >= threshold && p.submitter >= p.winner {
            submitter_segment.push(pair);
        }
    }
    winner_segment.sort_by(&sort_winner);
    submitter_segment.sort_by(&sort_submitter);

    let boundary = winner_segment.len();
    winner_segment.extend(submitter_segment);
    (winner_segment, boundary)
}

/// Ranks a worker's scored tasks: tasks with winner probability at or
/// above the threshold (and at least the submitter probability) ordered by
/// winner probability, then the remaining submitter-qualified tasks
/// appended in submitter-probability order. Ties break by earlier task
/// deadline, then task id.
pub fn rank_tasks_for_worker(
    log: &EventLog,
    worker_id: &str,
    scored: &[ScoredPair],
    threshold: f64,
) -> Result<RankedList, EngineError> {
    let day = scored.first().map(|p| p.day);
    for pair in scored {
        if pair.worker_id != worker_id || Some(pair.day) != day {
            return Err(EngineError::MixedSubjects {
                subject: format!("worker {worker_id}"),
                worker_id: pair.worker_id.clone(),
                task_id: pair.task_id.clone(),
            });
        }
        if log.task(&pair.task_id).is_none() {
            return Err(EngineError::UnknownTask(pair.task_id.clone()));
        }
    }

    let deadline = |p: &ScoredPair| log.task(&p.task_id).expect("checked above").submission_deadline;
    let tie = |a: &ScoredPair, b: &ScoredPair| {
        deadline(a)
            .cmp(&deadline(b))
            .then_with(|| a.task_id.cmp(&b.task_id))
    };
    let (entries, boundary) = two_segment_rank(
        scored.to_vec(),
        threshold,
        |a, b| descending(a.probs.winner, b.probs.winner).then_with(|| tie(a, b)),
        |a, b| descending(a.probs.submitter, b.probs.submitter).then_with(|| tie(a, b)),
    );
    Ok(RankedList {
        subject: Subject::Worker(worker_id.to_string()),
        day: day.unwrap_or_default(),
        entries,
        boundary,
    })
}

/// Ranks the registered workers of a task with the same two-segment
/// procedure. Ties break by higher submitter probability, then worker id.
pub fn rank_workers_for_task(
    log: &EventLog,
    task_id: &str,
    scored: &[ScoredPair],
    threshold: f64,
) -> Result<RankedList, EngineError> {
    let day = scored.first().map(|p| p.day);
    for pair in scored {
        if pair.task_id != task_id || Some(pair.day) != day {
            return Err(EngineError::MixedSubjects {
                subject: format!("task {task_id}"),
                worker_id: pair.worker_id.clone(),
                task_id: pair.task_id.clone(),
            });
        }
        let registered = log
            .registration_date(&pair.worker_id, task_id)
            .is_some_and(|r| r <= pair.day);
        if !registered {
            return Err(EngineError::UnregisteredWorker {
                worker_id: pair.worker_id.clone(),
                task_id: task_id.to_string(),
                day: pair.day,
            });
        }
    }

    let (entries, boundary) = two_segment_rank(
        scored.to_vec(),
        threshold,
        |a, b| {
            descending(a.probs.winner, b.probs.winner)
                .then_with(|| descending(a.probs.submitter, b.probs.submitter))
                .then_with(|| a.worker_id.cmp(&b.worker_id))
        },
        |a, b| {
            descending(a.probs.submitter, b.probs.submitter)
                .then_with(|| a.worker_id.cmp(&b.worker_id))
        },
    );
    Ok(RankedList {
        subject: Subject::Task(task_id.to_string()),
        day: day.unwrap_or_default(),
        entries,
        boundary,
    })
}
