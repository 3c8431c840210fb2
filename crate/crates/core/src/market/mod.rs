//! Domain model for a crowdsourced development marketplace: tasks, workers,
//! registration/submission/review events, outcome labeling, and the
//! validated, immutable [`EventLog`] every other module reads from.

mod files;
mod persist;

pub use files::{read_data_dir, write_data_dir, DATA_EVENTS, DATA_TASKS, DATA_VOCABULARY};
pub use persist::{load_log, persist_log, LOG_FORMAT_VERSION};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("unknown {entity} id `{id}`")]
    ReferentialIntegrity { entity: &'static str, id: String },
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("duplicate registration for worker `{worker_id}` on task `{task_id}`")]
    DuplicateRegistration { worker_id: String, task_id: String },
    #[error("technology `{0}` is not in the vocabulary")]
    UnknownTechnology(String),
    #[error("worker `{worker_id}` has no registration on task `{task_id}`")]
    NotRegistered { worker_id: String, task_id: String },
    #[error("task `{0}` is still open at the log horizon")]
    TaskStillOpen(String),
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("io failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("unsupported format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("malformed {what}: {detail}")]
    Malformed { what: &'static str, detail: String },
}

/// Review score with exactly two fractional decimal digits, stored in
/// hundredths of a point so score-gap arithmetic stays exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReviewScore(i32);

impl ReviewScore {
    pub const MAX_CENTI: i32 = 10_000;

    pub fn from_centi(centi: i32) -> Result<Self, MarketError> {
        if !(0..=Self::MAX_CENTI).contains(&centi) {
            return Err(MarketError::Malformed {
                what: "review score",
                detail: format!("{centi} hundredths is outside [0, 100.00]"),
            });
        }
        Ok(ReviewScore(centi))
    }

    pub fn centi(self) -> i32 {
        self.0
    }

    pub fn points(self) -> f64 {
        f64::from(self.0) / 100.0
    }
}

impl FromStr for ReviewScore {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, MarketError> {
        let malformed = |detail: String| MarketError::Malformed {
            what: "review score",
            detail,
        };
        let (int_part, frac_part) = match s.split_once('.') {
            Some((i, f)) => (i, f),
            None => (s, ""),
        };
        if int_part.is_empty()
            || frac_part.len() > 2
            || !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(malformed(format!(
                "`{s}` is not a non-negative decimal with at most 2 fractional digits"
            )));
        }
        let whole: i32 = int_part
            .parse()
            .map_err(|_| malformed(format!("`{s}` is out of range")))?;
        let frac: i32 = match frac_part.len() {
            0 => 0,
            1 => frac_part.parse::<i32>().unwrap() * 10,
            _ => frac_part.parse().unwrap(),
        };
        let centi = whole
            .checked_mul(100)
            .and_then(|w| w.checked_add(frac))
            .ok_or_else(|| malformed(format!("`{s}` is out of range")))?;
        ReviewScore::from_centi(centi)
    }
}

impl fmt::Display for ReviewScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for ReviewScore {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ReviewScore {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskType {
    Assembly,
    Code,
    UiPrototype,
    Other(String),
}

impl fmt::Display for TaskType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskType::Assembly => f.write_str("assembly"),
            TaskType::Code => f.write_str("code"),
            TaskType::UiPrototype => f.write_str("ui_prototype"),
            TaskType::Other(name) => f.write_str(name),
        }
    }
}

impl FromStr for TaskType {
    type Err = MarketError;

    fn from_str(s: &str) -> Result<Self, MarketError> {
        match s.to_ascii_lowercase().as_str() {
            "assembly" => Ok(TaskType::Assembly),
            "code" => Ok(TaskType::Code),
            "ui_prototype" | "uiprototype" => Ok(TaskType::UiPrototype),
            _ if s.is_empty() => Err(MarketError::Malformed {
                what: "task type",
                detail: "empty".into(),
            }),
            _ => Ok(TaskType::Other(s.to_string())),
        }
    }
}

impl Serialize for TaskType {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TaskType {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task_id: String,
    pub task_type: TaskType,
    pub registration_open: NaiveDate,
    pub submission_deadline: NaiveDate,
    pub total_prize: f64,
    pub required_technologies: BTreeSet<String>,
}

impl TaskRecord {
    pub fn duration_days(&self) -> i64 {
        (self.submission_deadline - self.registration_open).num_days()
    }

    fn validate(&self, vocab: &BTreeMap<String, usize>) -> Result<(), MarketError> {
        if self.submission_deadline <= self.registration_open {
            return Err(MarketError::InvariantViolation(format!(
                "task `{}`: submission_deadline {} is not after registration_open {}",
                self.task_id, self.submission_deadline, self.registration_open
            )));
        }
        if !self.total_prize.is_finite() || self.total_prize < 0.0 {
            return Err(MarketError::InvariantViolation(format!(
                "task `{}`: total_prize {} must be a non-negative amount",
                self.task_id, self.total_prize
            )));
        }
        for tech in &self.required_technologies {
            if !vocab.contains_key(tech) {
                return Err(MarketError::UnknownTechnology(tech.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Registration,
    Submission,
    Review { score: ReviewScore, rewarded: bool },
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::Registration => 0,
            EventKind::Submission => 1,
            EventKind::Review { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub worker_id: String,
    pub task_id: String,
    pub date: NaiveDate,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl EventRecord {
    pub fn registration(worker_id: &str, task_id: &str, date: NaiveDate) -> Self {
        EventRecord {
            worker_id: worker_id.into(),
            task_id: task_id.into(),
            date,
            kind: EventKind::Registration,
        }
    }

    pub fn submission(worker_id: &str, task_id: &str, date: NaiveDate) -> Self {
        EventRecord {
            worker_id: worker_id.into(),
            task_id: task_id.into(),
            date,
            kind: EventKind::Submission,
        }
    }

    pub fn review(
        worker_id: &str,
        task_id: &str,
        date: NaiveDate,
        score: ReviewScore,
        rewarded: bool,
    ) -> Self {
        EventRecord {
            worker_id: worker_id.into(),
            task_id: task_id.into(),
            date,
            kind: EventKind::Review { score, rewarded },
        }
    }

    /// Content-derived ordering key. Sorting events by this key makes the
    /// log independent of input record order within a date.
    fn canonical_key(&self) -> (NaiveDate, u8, &str, &str, i32, bool) {
        let (score, rewarded) = match &self.kind {
            EventKind::Review { score, rewarded } => (score.centi(), *rewarded),
            _ => (0, false),
        };
        (
            self.date,
            self.kind.rank(),
            self.worker_id.as_str(),
            self.task_id.as_str(),
            score,
            rewarded,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeLabel {
    Winner,
    Quitter,
    Submitter,
}

impl OutcomeLabel {
    pub const ALL: [OutcomeLabel; 3] = [
        OutcomeLabel::Winner,
        OutcomeLabel::Quitter,
        OutcomeLabel::Submitter,
    ];

    /// Dense index used by learners and confusion matrices.
    pub fn index(self) -> usize {
        match self {
            OutcomeLabel::Winner => 0,
            OutcomeLabel::Quitter => 1,
            OutcomeLabel::Submitter => 2,
        }
    }

    pub fn from_index(i: usize) -> OutcomeLabel {
        Self::ALL[i]
    }

    /// Tie-break priority for argmax decisions: Winner, then Submitter,
    /// then Quitter.
    pub fn priority(self) -> u8 {
        match self {
            OutcomeLabel::Winner => 0,
            OutcomeLabel::Submitter => 1,
            OutcomeLabel::Quitter => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutcomeLabel::Winner => "winner",
            OutcomeLabel::Quitter => "quitter",
            OutcomeLabel::Submitter => "submitter",
        }
    }
}

impl fmt::Display for OutcomeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Final review facts for one (worker, task) pair. When a pair has several
/// reviews the latest by date wins; same-date ties resolve to the higher
/// score, then to rewarded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinalReview {
    pub date: NaiveDate,
    pub score: ReviewScore,
    pub rewarded: bool,
}

type PairKey = (String, String);

/// Validated, time-ordered marketplace history. Immutable after ingestion
/// and safe to share read-only across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    tasks: BTreeMap<String, TaskRecord>,
    events: Vec<EventRecord>,
    vocabulary: Vec<String>,
    vocab_index: BTreeMap<String, usize>,
    by_worker: BTreeMap<String, Vec<usize>>,
    by_task: BTreeMap<String, Vec<usize>>,
    registration_dates: BTreeMap<PairKey, NaiveDate>,
    submission_dates: BTreeMap<PairKey, NaiveDate>,
    final_reviews: BTreeMap<PairKey, FinalReview>,
    horizon: Option<NaiveDate>,
}

/// Validates raw records and builds the [`EventLog`].
///
/// Events are reordered into a canonical content-derived order, so the
/// result is invariant under permutation of input records within a date.
/// When a pair carries multiple submissions only the latest-dated one is
/// kept.
pub fn ingest_events(
    task_records: Vec<TaskRecord>,
    event_records: Vec<EventRecord>,
    vocabulary: Vec<String>,
) -> Result<EventLog, MarketError> {
    let mut vocab_index = BTreeMap::new();
    for (i, name) in vocabulary.iter().enumerate() {
        if vocab_index.insert(name.clone(), i).is_some() {
            return Err(MarketError::InvariantViolation(format!(
                "duplicate vocabulary entry `{name}`"
            )));
        }
    }

    let mut tasks = BTreeMap::new();
    for task in task_records {
        task.validate(&vocab_index)?;
        let id = task.task_id.clone();
        if tasks.insert(id.clone(), task).is_some() {
            return Err(MarketError::InvariantViolation(format!(
                "duplicate task id `{id}`"
            )));
        }
    }

    let mut events = event_records;
    events.sort_by(|a, b| a.canonical_key().cmp(&b.canonical_key()));

    // Keep only the latest submission per pair (earlier attempts are
    // superseded); events are already date-ordered, so the last index wins.
    let mut last_submission: BTreeMap<PairKey, usize> = BTreeMap::new();
    for (i, ev) in events.iter().enumerate() {
        if matches!(ev.kind, EventKind::Submission) {
            last_submission.insert((ev.worker_id.clone(), ev.task_id.clone()), i);
        }
    }
    let mut idx = 0;
    events.retain(|ev| {
        let keep = match ev.kind {
            EventKind::Submission => {
                last_submission[&(ev.worker_id.clone(), ev.task_id.clone())] == idx
            }
            _ => true,
        };
        idx += 1;
        keep
    });

    let mut log = EventLog {
        tasks,
        events: Vec::with_capacity(events.len()),
        vocabulary,
        vocab_index,
        by_worker: BTreeMap::new(),
        by_task: BTreeMap::new(),
        registration_dates: BTreeMap::new(),
        submission_dates: BTreeMap::new(),
        final_reviews: BTreeMap::new(),
        horizon: None,
    };

    for ev in events {
        let task = log
            .tasks
            .get(&ev.task_id)
            .ok_or_else(|| MarketError::ReferentialIntegrity {
                entity: "task",
                id: ev.task_id.clone(),
            })?;
        if ev.worker_id.is_empty() {
            return Err(MarketError::ReferentialIntegrity {
                entity: "worker",
                id: ev.worker_id.clone(),
            });
        }
        let pair = (ev.worker_id.clone(), ev.task_id.clone());
        match &ev.kind {
            EventKind::Registration => {
                if ev.date < task.registration_open || ev.date > task.submission_deadline {
                    return Err(MarketError::InvariantViolation(format!(
                        "registration of `{}` on `{}` dated {} outside [{}, {}]",
                        ev.worker_id,
                        ev.task_id,
                        ev.date,
                        task.registration_open,
                        task.submission_deadline
                    )));
                }
                if log.registration_dates.insert(pair, ev.date).is_some() {
                    return Err(MarketError::DuplicateRegistration {
                        worker_id: ev.worker_id.clone(),
                        task_id: ev.task_id.clone(),
                    });
                }
            }
            EventKind::Submission => {
                match log.registration_dates.get(&pair) {
                    Some(reg) if *reg <= ev.date => {}
                    _ => {
                        return Err(MarketError::InvariantViolation(format!(
                            "submission of `{}` on `{}` has no prior registration",
                            ev.worker_id, ev.task_id
                        )))
                    }
                }
                log.submission_dates.insert(pair, ev.date);
            }
            EventKind::Review { score, rewarded } => {
                match log.submission_dates.get(&pair) {
                    Some(sub) if *sub <= ev.date => {}
                    _ => {
                        return Err(MarketError::InvariantViolation(format!(
                            "review of `{}` on `{}` has no prior submission",
                            ev.worker_id, ev.task_id
                        )))
                    }
                }
                // Canonical order sorts same-pair reviews by (date, score,
                // rewarded), so a plain overwrite keeps the winning one.
                log.final_reviews.insert(
                    pair,
                    FinalReview {
                        date: ev.date,
                        score: *score,
                        rewarded: *rewarded,
                    },
                );
            }
        }
        let index = log.events.len();
        log.by_worker
            .entry(ev.worker_id.clone())
            .or_default()
            .push(index);
        log.by_task
            .entry(ev.task_id.clone())
            .or_default()
            .push(index);
        log.horizon = Some(log.horizon.map_or(ev.date, |h| h.max(ev.date)));
        log.events.push(ev);
    }

    Ok(log)
}

impl EventLog {
    pub fn tasks(&self) -> impl Iterator<Item = &TaskRecord> {
        self.tasks.values()
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn task(&self, task_id: &str) -> Option<&TaskRecord> {
        self.tasks.get(task_id)
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.events
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn vocab_position(&self, technology: &str) -> Option<usize> {
        self.vocab_index.get(technology).copied()
    }

    /// Latest event date in the log; the "as of" point of the data.
    pub fn horizon(&self) -> Option<NaiveDate> {
        self.horizon
    }

    pub fn workers(&self) -> impl Iterator<Item = &str> {
        self.by_worker.keys().map(String::as_str)
    }

    /// Event indices for one worker, in canonical (date) order.
    pub fn worker_event_indices(&self, worker_id: &str) -> &[usize] {
        self.by_worker.get(worker_id).map_or(&[], Vec::as_slice)
    }

    pub fn task_event_indices(&self, task_id: &str) -> &[usize] {
        self.by_task.get(task_id).map_or(&[], Vec::as_slice)
    }

    pub fn event(&self, index: usize) -> &EventRecord {
        &self.events[index]
    }

    pub fn registration_date(&self, worker_id: &str, task_id: &str) -> Option<NaiveDate> {
        self.registration_dates
            .get(&(worker_id.to_string(), task_id.to_string()))
            .copied()
    }

    pub fn submission_date(&self, worker_id: &str, task_id: &str) -> Option<NaiveDate> {
        self.submission_dates
            .get(&(worker_id.to_string(), task_id.to_string()))
            .copied()
    }

    pub fn final_review(&self, worker_id: &str, task_id: &str) -> Option<FinalReview> {
        self.final_reviews
            .get(&(worker_id.to_string(), task_id.to_string()))
            .copied()
    }

    /// All registered (worker, task) pairs with their registration dates.
    pub fn registered_pairs(&self) -> impl Iterator<Item = (&str, &str, NaiveDate)> {
        self.registration_dates
            .iter()
            .map(|((w, t), d)| (w.as_str(), t.as_str(), *d))
    }

    pub fn num_registrations(&self) -> usize {
        self.registration_dates.len()
    }

    /// Workers registered on a task, with registration dates, ordered by id.
    pub fn registrants_of(&self, task_id: &str) -> Vec<(&str, NaiveDate)> {
        let mut out = Vec::new();
        for &i in self.task_event_indices(task_id) {
            let ev = &self.events[i];
            if matches!(ev.kind, EventKind::Registration) {
                out.push((ev.worker_id.as_str(), ev.date));
            }
        }
        out.sort_by(|a, b| a.0.cmp(b.0));
        out
    }

    /// Whether the task's submission deadline has passed relative to the
    /// log horizon, i.e. its outcome is decided by the data we hold.
    pub fn task_completed(&self, task: &TaskRecord) -> bool {
        self.horizon
            .is_some_and(|h| task.submission_deadline <= h)
    }

    /// Outcome label for a registered pair on a completed task.
    pub fn derive_outcome(
        &self,
        worker_id: &str,
        task_id: &str,
    ) -> Result<OutcomeLabel, MarketError> {
        let task = self
            .task(task_id)
            .ok_or_else(|| MarketError::UnknownTask(task_id.to_string()))?;
        let pair = (worker_id.to_string(), task_id.to_string());
        if !self.registration_dates.contains_key(&pair) {
            return Err(MarketError::NotRegistered {
                worker_id: worker_id.to_string(),
                task_id: task_id.to_string(),
            });
        }
        if !self.task_completed(task) {
            return Err(MarketError::TaskStillOpen(task_id.to_string()));
        }
        match (
            self.submission_dates.contains_key(&pair),
            self.final_reviews.get(&pair),
        ) {
            (false, _) => Ok(OutcomeLabel::Quitter),
            (true, Some(review)) if review.rewarded => Ok(OutcomeLabel::Winner),
            (true, _) => Ok(OutcomeLabel::Submitter),
        }
    }

    /// Actual winners of a task: registrants whose final review was rewarded.
    pub fn winners_of(&self, task_id: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .final_reviews
            .iter()
            .filter(|((_, t), review)| t == task_id && review.rewarded)
            .map(|((w, _), _)| w.as_str())
            .collect();
        out.sort_unstable();
        out
    }

    /// A completed task that rewarded nobody counts as cancelled.
    pub fn actually_cancelled(&self, task: &TaskRecord) -> bool {
        self.task_completed(task) && self.winners_of(&task.task_id).is_empty()
    }
}
