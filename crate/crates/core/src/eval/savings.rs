//! Effort-savings accounting: person-days saved by correct quitter
//! predictions, split by worker experience, and duration savings from
//! early cancellation predictions.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::features::{experience_class, ExperienceClass, PipelineConfig};
use crate::market::{EventLog, OutcomeLabel, TaskType};

use super::metrics::f_measure;
use super::EvalError;

/// Predicted label per (worker, task) pair for each processed day.
pub type DailyPredictions = BTreeMap<NaiveDate, BTreeMap<(String, String), OutcomeLabel>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSavings {
    pub worker_id: String,
    pub task_id: String,
    pub experience: ExperienceClass,
    pub task_type: TaskType,
    /// Days in the period, inside [registration, deadline], on which the
    /// model predicted this actual quitter as quitter.
    pub days_saved: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SavingsByClass {
    pub pairs: usize,
    pub total_days: u64,
    pub mean_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffortSavings {
    pub per_pair: Vec<PairSavings>,
    pub experienced: SavingsByClass,
    pub unexperienced: SavingsByClass,
}

/// Recomputes a class summary from the pair table; also used to check
/// report aggregates.
pub(crate) fn resummarize(per_pair: &[PairSavings], class: ExperienceClass) -> SavingsByClass {
    let days: Vec<u64> = per_pair
        .iter()
        .filter(|p| p.experience == class)
        .map(|p| u64::from(p.days_saved))
        .collect();
    let total: u64 = days.iter().sum();
    SavingsByClass {
        pairs: days.len(),
        total_days: total,
        mean_days: if days.is_empty() {
            0.0
        } else {
            total as f64 / days.len() as f64
        },
    }
}

/// Person-days of non-succeeding effort avoided over the period.
///
/// An actual quitter is assumed to keep working from registration to the
/// deadline; each period day on which the model already said "quitter"
/// is one person-day saved. Pairs are classified by experience at their
/// registration date; pairs on excluded task types are skipped entirely.
/// Every TS pair of every period day must have a prediction.
pub fn effort_savings(
    log: &EventLog,
    predictions: &DailyPredictions,
    start_day: NaiveDate,
    num_days: u32,
    config: &PipelineConfig,
    exclude_types: &BTreeSet<TaskType>,
) -> Result<EffortSavings, EvalError> {
    let period: Vec<NaiveDate> = (0..num_days)
        .map(|i| start_day + Days::new(u64::from(i)))
        .collect();

    // Coverage: every registered pair visible in TS on a period day needs
    // a prediction for that day.
    for &day in &period {
        let daily = predictions.get(&day);
        for (worker_id, task_id, reg_date) in log.registered_pairs() {
            let task = log.task(task_id).expect("validated log");
            let in_ts = reg_date <= day
                && task.registration_open <= day
                && task.submission_deadline > day;
            if !in_ts {
                continue;
            }
            let covered = daily
                .is_some_and(|m| m.contains_key(&(worker_id.to_string(), task_id.to_string())));
            if !covered {
                return Err(EvalError::IncompleteCoverage {
                    day,
                    worker_id: worker_id.to_string(),
                    task_id: task_id.to_string(),
                });
            }
        }
    }

    // Distinct pairs observed in the period's predictions.
    let mut observed: BTreeSet<(String, String)> = BTreeSet::new();
    for &day in &period {
        if let Some(daily) = predictions.get(&day) {
            observed.extend(daily.keys().cloned());
        }
    }

    let mut per_pair = Vec::new();
    for (worker_id, task_id) in observed {
        let task = log.task(&task_id).expect("validated log");
        if exclude_types.contains(&task.task_type) {
            continue;
        }
        let actual = match log.derive_outcome(&worker_id, &task_id) {
            Ok(label) => label,
            Err(_) => continue, // never completed inside the horizon
        };
        if actual != OutcomeLabel::Quitter {
            continue;
        }
        let reg_date = log
            .registration_date(&worker_id, &task_id)
            .expect("labeled pair is registered");
        let key = (worker_id.clone(), task_id.clone());
        let days_saved = period
            .iter()
            .filter(|&&day| {
                day >= reg_date
                    && day <= task.submission_deadline
                    && predictions
                        .get(&day)
                        .and_then(|m| m.get(&key))
                        .is_some_and(|&p| p == OutcomeLabel::Quitter)
            })
            .count() as u32;
        per_pair.push(PairSavings {
            experience: experience_class(&worker_id, log, reg_date, config),
            task_type: task.task_type.clone(),
            worker_id,
            task_id,
            days_saved,
        });
    }

    Ok(EffortSavings {
        experienced: resummarize(&per_pair, ExperienceClass::Experienced),
        unexperienced: resummarize(&per_pair, ExperienceClass::Unexperienced),
        per_pair,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationOutcome {
    pub task_id: String,
    pub duration_days: i64,
    pub predicted: bool,
    pub prediction_day: Option<NaiveDate>,
    pub actually_cancelled: bool,
    /// (deadline - prediction day) / duration, as a percentage; present
    /// for true positives.
    pub savings_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancellationReport {
    pub outcomes: Vec<CancellationOutcome>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub mean_savings_pct: Option<f64>,
}

/// Binary accuracy of cancellation predictions over monitored, completed
/// tasks, plus the duration-savings distribution for true positives. A
/// completed task that rewarded no submission counts as actually
/// cancelled.
pub fn cancellation_metrics(
    log: &EventLog,
    predictions: &BTreeMap<String, Option<NaiveDate>>,
) -> Result<CancellationReport, EvalError> {
    let mut outcomes = Vec::new();
    let (mut tp, mut fp, mut fn_, mut tn) = (0usize, 0usize, 0usize, 0usize);
    let mut savings = Vec::new();

    for (task_id, fired) in predictions {
        let task = log
            .task(task_id)
            .ok_or(EvalError::InvalidArgument("prediction for unknown task"))?;
        if !log.task_completed(task) {
            continue; // no ground truth yet
        }
        let actual = log.actually_cancelled(task);
        let predicted = fired.is_some();
        let savings_pct = match (predicted, actual, fired) {
            (true, true, Some(day)) => {
                let pct = (task.submission_deadline - *day).num_days() as f64
                    / task.duration_days() as f64
                    * 100.0;
                savings.push(pct);
                Some(pct)
            }
            _ => None,
        };
        match (predicted, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
        outcomes.push(CancellationOutcome {
            task_id: task_id.clone(),
            duration_days: task.duration_days(),
            predicted,
            prediction_day: *fired,
            actually_cancelled: actual,
            savings_pct,
        });
    }

    if outcomes.is_empty() {
        return Err(EvalError::NoMonitoredTasks);
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    Ok(CancellationReport {
        outcomes,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        true_negatives: tn,
        precision,
        recall,
        f_measure: f_measure(precision, recall),
        mean_savings_pct: if savings.is_empty() {
            None
        } else {
            Some(savings.iter().sum::<f64>() / savings.len() as f64)
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{ingest_events, EventRecord, TaskRecord};

    fn d(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn task(id: &str, task_type: TaskType, open: &str, deadline: &str) -> TaskRecord {
        TaskRecord {
            task_id: id.into(),
            task_type,
            registration_open: d(open),
            submission_deadline: d(deadline),
            total_prize: 100.0,
            required_technologies: BTreeSet::new(),
        }
    }

    /// Two quitters (one on an assembly task) and one winner, all
    /// registered on day 2 of tasks running 2015-01-01 to 2015-01-10.
    fn savings_fixture() -> EventLog {
        let tasks = vec![
            task("code_task", TaskType::Code, "2015-01-01", "2015-01-10"),
            task("asm_task", TaskType::Assembly, "2015-01-01", "2015-01-10"),
        ];
        let events = vec![
            EventRecord::registration("quitter", "code_task", d("2015-01-02")),
            EventRecord::registration("winner", "code_task", d("2015-01-02")),
            EventRecord::registration("asm_quitter", "asm_task", d("2015-01-02")),
            EventRecord::submission("winner", "code_task", d("2015-01-09")),
            EventRecord::review("winner", "code_task", d("2015-01-11"), "90.00".parse().unwrap(), true),
        ];
        ingest_events(tasks, events, vec![]).unwrap()
    }

    fn predict_all(
        log: &EventLog,
        start: &str,
        days: u32,
        label_for: impl Fn(&str, NaiveDate) -> OutcomeLabel,
    ) -> DailyPredictions {
        let mut out = DailyPredictions::new();
        for i in 0..days {
            let day = d(start) + Days::new(u64::from(i));
            let mut daily = BTreeMap::new();
            for (w, t, reg) in log.registered_pairs() {
                let task = log.task(t).unwrap();
                if reg <= day && task.submission_deadline > day {
                    daily.insert((w.to_string(), t.to_string()), label_for(w, day));
                }
            }
            out.insert(day, daily);
        }
        out
    }

    #[test]
    fn four_correct_days_save_four_person_days() {
        let log = savings_fixture();
        let config = PipelineConfig::default();
        // Predict quitter for the quitter on exactly 4 days.
        let predictions = predict_all(&log, "2015-01-03", 6, |w, day| {
            if w == "quitter" && day <= d("2015-01-06") {
                OutcomeLabel::Quitter
            } else {
                OutcomeLabel::Submitter
            }
        });
        let savings = effort_savings(
            &log,
            &predictions,
            d("2015-01-03"),
            6,
            &config,
            &BTreeSet::new(),
        )
        .unwrap();
        let quitter_pair = savings
            .per_pair
            .iter()
            .find(|p| p.worker_id == "quitter")
            .unwrap();
        assert_eq!(quitter_pair.days_saved, 4);
        assert_eq!(quitter_pair.experience, ExperienceClass::Unexperienced);
    }

    #[test]
    fn mispredicted_winner_contributes_nothing() {
        let log = savings_fixture();
        let config = PipelineConfig::default();
        // Everything predicted quitter, including the actual winner.
        let predictions = predict_all(&log, "2015-01-03", 3, |_, _| OutcomeLabel::Quitter);
        let savings = effort_savings(
            &log,
            &predictions,
            d("2015-01-03"),
            3,
            &config,
            &BTreeSet::new(),
        )
        .unwrap();
        assert!(savings.per_pair.iter().all(|p| p.worker_id != "winner"));
        let total: u64 = savings.per_pair.iter().map(|p| u64::from(p.days_saved)).sum();
        assert_eq!(total, 6); // 3 days x 2 actual quitters
    }

    #[test]
    fn excluded_task_types_vanish_from_totals() {
        let log = savings_fixture();
        let config = PipelineConfig::default();
        let predictions = predict_all(&log, "2015-01-03", 3, |_, _| OutcomeLabel::Quitter);
        let savings = effort_savings(
            &log,
            &predictions,
            d("2015-01-03"),
            3,
            &config,
            &BTreeSet::from([TaskType::Assembly]),
        )
        .unwrap();
        assert!(savings.per_pair.iter().all(|p| p.task_type != TaskType::Assembly));
        assert_eq!(savings.unexperienced.pairs, 1);
        assert_eq!(savings.unexperienced.total_days, 3);
    }

    #[test]
    fn missing_prediction_is_incomplete_coverage() {
        let log = savings_fixture();
        let config = PipelineConfig::default();
        let mut predictions = predict_all(&log, "2015-01-03", 2, |_, _| OutcomeLabel::Quitter);
        predictions
            .get_mut(&d("2015-01-04"))
            .unwrap()
            .remove(&("quitter".to_string(), "code_task".to_string()));
        assert!(matches!(
            effort_savings(&log, &predictions, d("2015-01-03"), 2, &config, &BTreeSet::new()),
            Err(EvalError::IncompleteCoverage { .. })
        ));
    }

    #[test]
    fn savings_bounded_by_registration_to_deadline_span() {
        let log = savings_fixture();
        let config = PipelineConfig::default();
        // 30-day period dwarfs the task span.
        let predictions = predict_all(&log, "2015-01-01", 30, |_, _| OutcomeLabel::Quitter);
        let savings = effort_savings(
            &log,
            &predictions,
            d("2015-01-01"),
            30,
            &config,
            &BTreeSet::new(),
        )
        .unwrap();
        for pair in &savings.per_pair {
            let task = log.task(&pair.task_id).unwrap();
            let reg = log.registration_date(&pair.worker_id, &pair.task_id).unwrap();
            let span = (task.submission_deadline - reg).num_days() + 1;
            assert!(i64::from(pair.days_saved) <= span.min(30));
        }
    }

    fn cancellation_fixture() -> EventLog {
        // cancelled_30 gets no submissions; saved task gets a rewarded one.
        let tasks = vec![
            task("cancelled_30", TaskType::Code, "2015-01-01", "2015-01-31"),
            task("healthy", TaskType::Code, "2015-01-01", "2015-01-31"),
            task("cancelled_7", TaskType::Code, "2015-01-01", "2015-01-08"),
        ];
        let events = vec![
            EventRecord::registration("w1", "cancelled_30", d("2015-01-02")),
            EventRecord::registration("w2", "healthy", d("2015-01-02")),
            EventRecord::registration("w3", "cancelled_7", d("2015-01-02")),
            EventRecord::submission("w2", "healthy", d("2015-01-30")),
            EventRecord::review("w2", "healthy", d("2015-02-02"), "88.00".parse().unwrap(), true),
        ];
        ingest_events(tasks, events, vec![]).unwrap()
    }

    #[test]
    fn thirty_day_task_flagged_after_three_days_saves_ninety_percent() {
        let log = cancellation_fixture();
        let predictions = BTreeMap::from([
            ("cancelled_30".to_string(), Some(d("2015-01-04"))),
            ("healthy".to_string(), None),
            ("cancelled_7".to_string(), Some(d("2015-01-04"))),
        ]);
        let report = cancellation_metrics(&log, &predictions).unwrap();
        assert_eq!(report.true_positives, 2);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);

        let by_id = |id: &str| {
            report
                .outcomes
                .iter()
                .find(|o| o.task_id == id)
                .unwrap()
                .clone()
        };
        // (31 - 4) days remaining on 2015-01-04... the task opened
        // 2015-01-01 and runs 30 days, so prediction at open+3 saves 27/30.
        assert!((by_id("cancelled_30").savings_pct.unwrap() - 90.0).abs() < 1e-12);
        // Duration 7, predicted at open+3: 4/7.
        let pct = by_id("cancelled_7").savings_pct.unwrap();
        assert!((pct - 400.0 / 7.0).abs() < 1e-12, "{pct}");
    }

    #[test]
    fn unflagged_cancelled_task_counts_as_false_negative() {
        let log = cancellation_fixture();
        let predictions = BTreeMap::from([
            ("cancelled_30".to_string(), None),
            ("healthy".to_string(), None),
        ]);
        let report = cancellation_metrics(&log, &predictions).unwrap();
        assert_eq!(report.false_negatives, 1);
        assert_eq!(report.true_negatives, 1);
        assert_eq!(report.mean_savings_pct, None);
        assert_eq!(report.recall, 0.0);
    }

    #[test]
    fn f_measure_identity_holds() {
        let log = cancellation_fixture();
        let predictions = BTreeMap::from([
            ("cancelled_30".to_string(), Some(d("2015-01-10"))),
            ("healthy".to_string(), Some(d("2015-01-10"))),
            ("cancelled_7".to_string(), None),
        ]);
        let report = cancellation_metrics(&log, &predictions).unwrap();
        let expected =
            2.0 * report.precision * report.recall / (report.precision + report.recall);
        assert!((report.f_measure - expected).abs() < 1e-12);
    }

    #[test]
    fn no_monitored_tasks_is_an_error() {
        let log = cancellation_fixture();
        assert!(matches!(
            cancellation_metrics(&log, &BTreeMap::new()),
            Err(EvalError::NoMonitoredTasks)
        ));
    }
}
