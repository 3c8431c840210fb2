//! Per-pair feature extraction and the daily training/testing snapshot.
//!
//! A sample describes one (worker, task) pair as of a day `d`. Everything
//! in the vector is computed from events *strictly before* `d`: a model
//! built from these vectors is deployable at the start of day `d` without
//! peeking at same-day activity. Labels, by contrast, come from final
//! competition results, matching retrospective evaluation.

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{EventKind, EventLog, MarketError, OutcomeLabel, ReviewScore, TaskRecord};

/// Total feature vector width.
pub const VECTOR_WIDTH: usize = 124;
/// Number of one-hot technology flag slots.
pub const TECH_FLAGS: usize = 107;
/// Width of the static prefix (duration, prize, lifetime rate, tech flags).
pub const STATIC_WIDTH: usize = 3 + TECH_FLAGS;
/// Number of trailing dynamic (windowed history) features.
pub const DYNAMIC_WIDTH: usize = VECTOR_WIDTH - STATIC_WIDTH;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error("not enough data: no completed, registered task before {day}")]
    NotEnoughData { day: NaiveDate },
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("vocabulary has {size} technologies but only {TECH_FLAGS} flag slots exist")]
    VocabularyTooLarge { size: usize },
    #[error(transparent)]
    Market(#[from] MarketError),
}

/// Knobs of the daily pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Dynamic-feature window length T in days.
    pub window_days: i64,
    /// Maximum age in days (day minus task deadline) of a training sample;
    /// unbounded when absent.
    pub history_cap_days: Option<i64>,
    /// Consecutive zero-recommendation days before a task is predicted
    /// cancelled.
    pub monitor_days: u32,
    /// Probability filter applied when ranking.
    pub probability_threshold: f64,
    /// A worker with at most this many successful submissions in the
    /// trailing experience window counts as unexperienced.
    pub experienced_cutoff: usize,
    /// Window for the experience split.
    pub experience_window_days: i64,
    /// A non-rewarded review at or above this score still counts as a
    /// successful submission for the experience split.
    pub passing_score: ReviewScore,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window_days: 90,
            history_cap_days: None,
            monitor_days: 3,
            probability_threshold: 0.33,
            experienced_cutoff: 10,
            experience_window_days: 90,
            passing_score: ReviewScore::from_centi(7500).unwrap(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.window_days < 1 {
            return Err(FeatureError::InvalidConfig(format!(
                "window_days {} must be at least 1",
                self.window_days
            )));
        }
        if self.monitor_days < 1 {
            return Err(FeatureError::InvalidConfig(
                "monitor_days must be at least 1".into(),
            ));
        }
        if !(self.probability_threshold > 0.0 && self.probability_threshold < 1.0) {
            return Err(FeatureError::InvalidConfig(format!(
                "probability_threshold {} must be in (0, 1)",
                self.probability_threshold
            )));
        }
        if self.experience_window_days < 1 {
            return Err(FeatureError::InvalidConfig(
                "experience_window_days must be at least 1".into(),
            ));
        }
        if let Some(cap) = self.history_cap_days {
            if cap < 1 {
                return Err(FeatureError::InvalidConfig(
                    "history_cap_days must be at least 1 when set".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Fixed-width numeric description of one (worker, task, day) sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        assert_eq!(values.len(), VECTOR_WIDTH, "feature vector width");
        debug_assert!(values.iter().all(|v| v.is_finite()));
        FeatureVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub worker_id: String,
    pub task_id: String,
    pub as_of_day: NaiveDate,
    pub features: FeatureVector,
    /// Present for training samples; present for testing samples only once
    /// the task has completed inside the log horizon.
    pub label: Option<OutcomeLabel>,
}

/// Training set TR and testing set TS for one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailySnapshot {
    pub day: NaiveDate,
    /// Registered pairs on tasks whose deadline already passed.
    pub tr: Vec<LabeledSample>,
    /// Registered pairs on tasks still open at `day`.
    pub ts: Vec<LabeledSample>,
    /// Unregistered (active worker x open task) pairs, when requested.
    pub candidates: Option<Vec<LabeledSample>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperienceClass {
    Experienced,
    Unexperienced,
}

fn minus_days(day: NaiveDate, days: i64) -> NaiveDate {
    day.checked_sub_days(Days::new(days as u64))
        .expect("date arithmetic underflow")
}

/// Worker events (by index into the log) with dates in [from, to).
fn worker_events_between<'a>(
    log: &'a EventLog,
    worker_id: &str,
    from: Option<NaiveDate>,
    to: NaiveDate,
) -> &'a [usize] {
    let indices = log.worker_event_indices(worker_id);
    let lo = match from {
        Some(f) => indices.partition_point(|&i| log.event(i).date < f),
        None => 0,
    };
    let hi = indices.partition_point(|&i| log.event(i).date < to);
    &indices[lo.min(hi)..hi]
}

/// Static features (indices 0..=109): task duration and prize, the
/// worker's lifetime submission rate over events before `day`, and the
/// one-hot technology flags in vocabulary order.
///
/// History features always exclude the focal task's own events: a
/// completed training pair would otherwise carry its own submission and
/// review in the window, a signature no open testing pair can have.
pub fn extract_static_features(
    task: &TaskRecord,
    worker_id: &str,
    log: &EventLog,
    day: NaiveDate,
) -> Vec<f64> {
    let mut out = vec![0.0; STATIC_WIDTH];
    out[0] = task.duration_days() as f64;
    out[1] = task.total_prize;

    let mut registrations = 0u64;
    let mut submissions = 0u64;
    for &i in worker_events_between(log, worker_id, None, day) {
        let ev = log.event(i);
        if ev.task_id == task.task_id {
            continue;
        }
        match ev.kind {
            EventKind::Registration => registrations += 1,
            EventKind::Submission => submissions += 1,
            EventKind::Review { .. } => {}
        }
    }
    out[2] = if registrations == 0 {
        0.0
    } else {
        (submissions.min(registrations)) as f64 / registrations as f64
    };

    for tech in &task.required_technologies {
        if let Some(pos) = log.vocab_position(tech) {
            if pos < TECH_FLAGS {
                out[3 + pos] = 1.0;
            }
        }
    }
    out
}

/// Dynamic features (indices 110..=123) over the half-open window
/// [day - T, day), excluding the focal task's own events. Absent history
/// yields zero counts and rates, and recency capped at T.
pub fn extract_dynamic_features(
    worker_id: &str,
    task: &TaskRecord,
    log: &EventLog,
    day: NaiveDate,
    window_days: i64,
) -> [f64; DYNAMIC_WIDTH] {
    let window_start = minus_days(day, window_days);

    let mut registrations = 0u64;
    let mut submissions = 0u64;
    let mut wins = 0u64;
    let mut type_registrations = 0u64;
    let mut type_wins = 0u64;
    let mut score_sum_centi = 0i64;
    let mut reviews = 0u64;
    let mut prize_earned = 0.0f64;
    let mut techs_seen: BTreeSet<&str> = BTreeSet::new();

    for &i in worker_events_between(log, worker_id, Some(window_start), day) {
        let ev = log.event(i);
        if ev.task_id == task.task_id {
            continue;
        }
        let ev_task = log.task(&ev.task_id).expect("validated log");
        match &ev.kind {
            EventKind::Registration => {
                registrations += 1;
                if ev_task.task_type == task.task_type {
                    type_registrations += 1;
                }
                for tech in &ev_task.required_technologies {
                    techs_seen.insert(tech.as_str());
                }
            }
            EventKind::Submission => submissions += 1,
            EventKind::Review { score, rewarded } => {
                reviews += 1;
                score_sum_centi += i64::from(score.centi());
                if *rewarded {
                    wins += 1;
                    if ev_task.task_type == task.task_type {
                        type_wins += 1;
                    }
                    prize_earned += ev_task.total_prize;
                }
            }
        }
    }

    // Quits, completed-task registrations, open registrations, and recency
    // need the worker's whole visible history, not just the window.
    let mut quits = 0u64;
    let mut completed_regs = 0u64;
    let mut open_regs = 0u64;
    let mut last_submission: Option<NaiveDate> = None;
    for &i in worker_events_between(log, worker_id, None, day) {
        let ev = log.event(i);
        if ev.task_id == task.task_id {
            continue;
        }
        match ev.kind {
            EventKind::Registration => {
                let ev_task = log.task(&ev.task_id).expect("validated log");
                let deadline = ev_task.submission_deadline;
                if deadline >= window_start && deadline < day {
                    completed_regs += 1;
                    let submitted_before_day = log
                        .submission_date(worker_id, &ev.task_id)
                        .is_some_and(|d| d < day);
                    if !submitted_before_day {
                        quits += 1;
                    }
                } else if deadline >= day {
                    open_regs += 1;
                }
            }
            EventKind::Submission => {
                last_submission = Some(last_submission.map_or(ev.date, |d| d.max(ev.date)));
            }
            EventKind::Review { .. } => {}
        }
    }

    // A window can see a review of a pre-window submission, so ratio
    // features clamp to keep every rate inside [0, 1].
    let rate = |num: u64, den: u64| {
        if den == 0 {
            0.0
        } else {
            (num.min(den)) as f64 / den as f64
        }
    };

    let overlap = if task.required_technologies.is_empty() {
        0.0
    } else {
        let shared = task
            .required_technologies
            .iter()
            .filter(|t| techs_seen.contains(t.as_str()))
            .count();
        shared as f64 / task.required_technologies.len() as f64
    };

    let days_since_submission = match last_submission {
        Some(date) => ((day - date).num_days()).min(window_days) as f64,
        None => window_days as f64,
    };

    [
        registrations as f64,
        submissions as f64,
        wins as f64,
        quits as f64,
        rate(submissions, registrations),
        rate(wins, submissions),
        rate(quits, completed_regs),
        if reviews == 0 {
            0.0
        } else {
            score_sum_centi as f64 / reviews as f64 / 100.0
        },
        prize_earned,
        open_regs as f64,
        type_registrations as f64,
        type_wins as f64,
        overlap,
        days_since_submission,
    ]
}

/// Full 124-entry vector for one (worker, task) pair as of `day`.
pub fn feature_vector(
    log: &EventLog,
    worker_id: &str,
    task_id: &str,
    day: NaiveDate,
    config: &PipelineConfig,
) -> Result<FeatureVector, FeatureError> {
    let task = log
        .task(task_id)
        .ok_or_else(|| FeatureError::UnknownTask(task_id.to_string()))?;
    let mut values = extract_static_features(task, worker_id, log, day);
    values.extend(extract_dynamic_features(
        worker_id,
        task,
        log,
        day,
        config.window_days,
    ));
    Ok(FeatureVector::new(values))
}

/// Experience split per trailing-window successful submissions: a
/// submission counts as successful when its final review was rewarded or
/// scored at least the passing score.
pub fn experience_class(
    worker_id: &str,
    log: &EventLog,
    day: NaiveDate,
    config: &PipelineConfig,
) -> ExperienceClass {
    let window_start = minus_days(day, config.experience_window_days);
    let mut successful: BTreeSet<&str> = BTreeSet::new();
    for &i in worker_events_between(log, worker_id, Some(window_start), day) {
        let ev = log.event(i);
        if matches!(ev.kind, EventKind::Submission) {
            if let Some(review) = log.final_review(worker_id, &ev.task_id) {
                if review.rewarded || review.score >= config.passing_score {
                    successful.insert(ev.task_id.as_str());
                }
            }
        }
    }
    if successful.len() <= config.experienced_cutoff {
        ExperienceClass::Unexperienced
    } else {
        ExperienceClass::Experienced
    }
}

/// Builds the day's snapshot.
///
/// TR holds every registered pair on tasks with deadline strictly before
/// `day` (subject to the history cap), labeled from final results. TS
/// holds registered pairs (registration dated on or before `day`) on tasks
/// with deadline strictly after `day` that already opened. Tasks whose
/// deadline falls exactly on `day` join neither set. TR pairs whose task
/// never completes inside the log horizon are skipped: they have no
/// derivable label.
pub fn build_snapshot(
    log: &EventLog,
    day: NaiveDate,
    config: &PipelineConfig,
    include_candidates: bool,
) -> Result<DailySnapshot, FeatureError> {
    config.validate()?;
    if log.vocabulary().len() > TECH_FLAGS {
        return Err(FeatureError::VocabularyTooLarge {
            size: log.vocabulary().len(),
        });
    }

    let mut tr = Vec::new();
    let mut ts = Vec::new();
    for (worker_id, task_id, reg_date) in log.registered_pairs() {
        let task = log.task(task_id).expect("validated log");
        let deadline = task.submission_deadline;
        if deadline < day {
            if let Some(cap) = config.history_cap_days {
                if (day - deadline).num_days() > cap {
                    continue;
                }
            }
            if !log.task_completed(task) {
                continue;
            }
            let label = log.derive_outcome(worker_id, task_id)?;
            tr.push(LabeledSample {
                worker_id: worker_id.to_string(),
                task_id: task_id.to_string(),
                as_of_day: day,
                features: feature_vector(log, worker_id, task_id, day, config)?,
                label: Some(label),
            });
        } else if deadline > day && task.registration_open <= day && reg_date <= day {
            let label = log.derive_outcome(worker_id, task_id).ok();
            ts.push(LabeledSample {
                worker_id: worker_id.to_string(),
                task_id: task_id.to_string(),
                as_of_day: day,
                features: feature_vector(log, worker_id, task_id, day, config)?,
                label,
            });
        }
    }
    if tr.is_empty() {
        return Err(FeatureError::NotEnoughData { day });
    }

    let sort_key = |s: &LabeledSample| (s.task_id.clone(), s.worker_id.clone());
    tr.sort_by_key(sort_key);
    ts.sort_by_key(sort_key);

    let candidates = if include_candidates {
        let window_start = minus_days(day, config.window_days);
        let active: Vec<&str> = log
            .workers()
            .filter(|w| !worker_events_between(log, w, Some(window_start), day).is_empty())
            .collect();
        let open_tasks: Vec<&TaskRecord> = log
            .tasks()
            .filter(|t| t.registration_open <= day && t.submission_deadline > day)
            .collect();
        let mut out = Vec::new();
        for task in &open_tasks {
            for worker in &active {
                let registered = log
                    .registration_date(worker, &task.task_id)
                    .is_some_and(|r| r <= day);
                if !registered {
                    out.push(LabeledSample {
                        worker_id: worker.to_string(),
                        task_id: task.task_id.clone(),
                        as_of_day: day,
                        features: feature_vector(log, worker, &task.task_id, day, config)?,
                        label: None,
                    });
                }
            }
        }
        out.sort_by_key(sort_key);
        Some(out)
    } else {
        None
    };

    Ok(DailySnapshot {
        day,
        tr,
        ts,
        candidates,
    })
}

/// Column names for the feature-matrix export: 124 feature names plus the
/// trailing label column.
pub fn column_names(vocabulary: &[String]) -> Vec<String> {
    let mut names = vec![
        "task_duration_days".to_string(),
        "task_total_prize".to_string(),
        "lifetime_submission_rate".to_string(),
    ];
    for slot in 0..TECH_FLAGS {
        match vocabulary.get(slot) {
            Some(tech) => names.push(format!("tech_{tech}")),
            None => names.push(format!("tech_unused_{slot}")),
        }
    }
    names.extend(
        [
            "window_registrations",
            "window_submissions",
            "window_wins",
            "window_quits",
            "window_submission_rate",
            "window_win_rate",
            "window_quit_rate",
            "window_mean_review_score",
            "window_prize_earned",
            "open_registrations",
            "window_type_registrations",
            "window_type_wins",
            "technology_overlap",
            "days_since_last_submission",
        ]
        .map(String::from),
    );
    names.push("label".to_string());
    names
}

/// Writes samples as a decimal matrix with a 125-column header, ordered by
/// (task_id, worker_id). Unlabeled samples get an empty label cell.
pub fn write_feature_matrix<W: std::io::Write>(
    writer: W,
    vocabulary: &[String],
    samples: &[LabeledSample],
) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(writer);
    let to_market = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => FeatureError::Market(MarketError::Io(io)),
        other => FeatureError::Market(MarketError::Malformed {
            what: "feature matrix",
            detail: format!("{other:?}"),
        }),
    };
    w.write_record(column_names(vocabulary)).map_err(to_market)?;
    let mut ordered: Vec<&LabeledSample> = samples.iter().collect();
    ordered.sort_by_key(|s| (s.task_id.clone(), s.worker_id.clone()));
    for sample in ordered {
        let mut row: Vec<String> = sample
            .features
            .values()
            .iter()
            .map(|v| v.to_string())
            .collect();
        row.push(sample.label.map(|l| l.name().to_string()).unwrap_or_default());
        w.write_record(&row).map_err(to_market)?;
    }
    w.flush().map_err(|e| FeatureError::Market(e.into()))?;
    Ok(())
}
