//! Daily cancellation monitoring: count consecutive days on which a task's
//! recommendation list is empty and flag the task once the streak reaches
//! the configured length.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::market::TaskRecord;

use super::{EngineError, RankedList, Subject};

/// Tasks shorter than this are never monitored.
pub const MIN_MONITORED_DURATION_DAYS: i64 = 3;

/// Per-task monitoring state. Days must be fed in increasing order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationState {
    pub task_id: String,
    /// Consecutive potentially-cancelled days ending at `last_day`.
    pub consecutive: u32,
    pub last_day: Option<NaiveDate>,
    /// Day the cancellation prediction first fired; predictions are sticky.
    pub fired_on: Option<NaiveDate>,
}

impl CancellationState {
    pub fn new(task_id: &str) -> Self {
        CancellationState {
            task_id: task_id.to_string(),
            consecutive: 0,
            last_day: None,
            fired_on: None,
        }
    }

    pub fn predicted_cancelled(&self) -> bool {
        self.fired_on.is_some()
    }
}

/// Observes one monitoring day: an empty recommendation list extends the
/// potentially-cancelled streak, a nonempty one resets it. A gap in the
/// observed days also breaks the streak.
pub fn mark_potential_cancellation(
    task: &TaskRecord,
    day: NaiveDate,
    recommendations: &RankedList,
    state: &mut CancellationState,
) -> Result<(), EngineError> {
    if task.duration_days() < MIN_MONITORED_DURATION_DAYS {
        return Err(EngineError::TaskTooShort {
            task_id: task.task_id.clone(),
            duration: task.duration_days(),
        });
    }
    if recommendations.subject != Subject::Task(task.task_id.clone())
        || state.task_id != task.task_id
    {
        return Err(EngineError::MixedSubjects {
            subject: format!("task {}", task.task_id),
            worker_id: String::new(),
            task_id: state.task_id.clone(),
        });
    }
    if let Some(last) = state.last_day {
        if day <= last {
            return Err(EngineError::NonMonotonicDay {
                task_id: task.task_id.clone(),
                day,
            });
        }
        let contiguous = (day - last).num_days() == 1;
        if !contiguous {
            state.consecutive = 0;
        }
    }
    if recommendations.is_empty() {
        state.consecutive += 1;
    } else {
        state.consecutive = 0;
    }
    state.last_day = Some(day);
    Ok(())
}

/// True once the task has been potentially cancelled on `n` consecutive
/// days ending at `day`. The first firing day is recorded and the
/// prediction stays on afterwards.
pub fn predict_cancellation(state: &mut CancellationState, day: NaiveDate, n: u32) -> bool {
    if state.fired_on.is_some() {
        return true;
    }
    if state.last_day == Some(day) && state.consecutive >= n {
        state.fired_on = Some(day);
        return true;
    }
    false
}
