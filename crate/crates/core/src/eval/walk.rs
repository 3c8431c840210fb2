//! Daily walk-forward evaluation: rebuild the snapshot, retrain, predict
//! the open pairs, rank, feed the cancellation monitor, and accumulate
//! every metric into a reproducible report.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::engine::{
    mark_potential_cancellation, predict_cancellation, rank_tasks_for_worker,
    rank_workers_for_task, CancellationState, RankedList, ScoredPair,
    MIN_MONITORED_DURATION_DAYS,
};
use crate::features::{build_snapshot, PipelineConfig};
use crate::learn::{train, ModelParams};
use crate::market::{EventLog, TaskType};
use crate::rng::sub_seed;

use super::metrics::{auc_ovr, metrics_from_counts, ClassPrf, ConfusionCounts};
use super::ranking::{recall_at_k, score_gap, RecallAtK, WinnerSets};
use super::savings::{
    cancellation_metrics, effort_savings, CancellationReport, DailyPredictions, EffortSavings,
};
use super::EvalError;

pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Highest K reported in the recall curve.
const MAX_RECALL_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub start_day: NaiveDate,
    pub num_days: u32,
    pub params: ModelParams,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub day: NaiveDate,
    pub tr_size: usize,
    pub ts_size: usize,
    pub labeled_ts: usize,
    pub confusion: ConfusionCounts,
    pub classes: [ClassPrf; 3],
    pub auc: [Option<f64>; 3],
    /// Task rankings whose task has at least one actual winner.
    pub recall_evaluated: usize,
    /// Hits among the top K = 1..=5 for those rankings.
    pub recall_hits: [usize; MAX_RECALL_K],
    pub gap_sum_centi: i64,
    pub gap_instances: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapInstance {
    pub day: NaiveDate,
    pub task_id: String,
    pub gap_centi: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub confusion: ConfusionCounts,
    pub classes: [ClassPrf; 3],
    /// Per-class AUC averaged over days where it was defined.
    pub mean_auc: [Option<f64>; 3],
    /// Pooled recall over all evaluated (day, task) ranking instances.
    pub recall_curve: Vec<RecallAtK>,
    pub score_gap_instances: usize,
    pub mean_score_gap_centi: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub meta: RunMeta,
    pub daily: Vec<DailyRecord>,
    pub totals: Totals,
    pub score_gaps: Vec<GapInstance>,
    pub savings_all: EffortSavings,
    pub savings_excluding_assembly: EffortSavings,
    pub cancellation: Option<CancellationReport>,
}

/// Per-day recommendation lists, kept out of the report file.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecommendations {
    pub day: NaiveDate,
    pub task_lists: Vec<RankedList>,
    pub worker_lists: Vec<RankedList>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkOutputs {
    pub report: EvaluationReport,
    pub recommendations: Vec<DayRecommendations>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), EvalError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, EvalError> {
        let bytes = std::fs::read(path)?;
        #[derive(Deserialize)]
        struct VersionOnly {
            format_version: u32,
        }
        let version: VersionOnly =
            serde_json::from_slice(&bytes).map_err(|e| EvalError::Malformed(e.to_string()))?;
        if version.format_version != REPORT_FORMAT_VERSION {
            return Err(EvalError::FormatVersionMismatch {
                found: version.format_version,
                expected: REPORT_FORMAT_VERSION,
            });
        }
        serde_json::from_slice(&bytes).map_err(|e| EvalError::Malformed(e.to_string()))
    }

    /// Recomputes every aggregate from the per-day records and detail
    /// tables and compares; returns the first discrepancy.
    pub fn verify_aggregates(&self) -> Result<(), String> {
        let totals = aggregate(&self.daily);
        if totals != self.totals {
            return Err("totals do not match re-aggregation of daily records".into());
        }
        let gap_sum: i64 = self.score_gaps.iter().map(|g| g.gap_centi).sum();
        let daily_gap_sum: i64 = self.daily.iter().map(|d| d.gap_sum_centi).sum();
        if gap_sum != daily_gap_sum {
            return Err("gap instances do not match daily gap sums".into());
        }
        for (savings, name) in [
            (&self.savings_all, "all"),
            (&self.savings_excluding_assembly, "excluding-assembly"),
        ] {
            let recomputed = EffortSavings {
                per_pair: savings.per_pair.clone(),
                experienced: super::savings::resummarize(
                    &savings.per_pair,
                    crate::features::ExperienceClass::Experienced,
                ),
                unexperienced: super::savings::resummarize(
                    &savings.per_pair,
                    crate::features::ExperienceClass::Unexperienced,
                ),
            };
            if recomputed != *savings {
                return Err(format!("savings ({name}) do not match their pair table"));
            }
        }
        if let Some(cancel) = &self.cancellation {
            let tp = cancel
                .outcomes
                .iter()
                .filter(|o| o.predicted && o.actually_cancelled)
                .count();
            if tp != cancel.true_positives {
                return Err("cancellation counts do not match outcome table".into());
            }
        }
        Ok(())
    }
}

fn aggregate(daily: &[DailyRecord]) -> Totals {
    let mut confusion = ConfusionCounts::default();
    for record in daily {
        confusion.merge(&record.confusion);
    }
    let classes = metrics_from_counts(&confusion).classes;

    let mut mean_auc = [None; 3];
    for class in 0..3 {
        let defined: Vec<f64> = daily.iter().filter_map(|d| d.auc[class]).collect();
        if !defined.is_empty() {
            mean_auc[class] = Some(defined.iter().sum::<f64>() / defined.len() as f64);
        }
    }

    let evaluated: usize = daily.iter().map(|d| d.recall_evaluated).sum();
    let recall_curve = (1..=MAX_RECALL_K)
        .map(|k| {
            let hits: usize = daily.iter().map(|d| d.recall_hits[k - 1]).sum();
            RecallAtK {
                k,
                fraction: if evaluated == 0 {
                    0.0
                } else {
                    hits as f64 / evaluated as f64
                },
                hits,
                evaluated,
                skipped_no_winner: 0,
            }
        })
        .collect();

    let gap_instances: usize = daily.iter().map(|d| d.gap_instances).sum();
    let gap_sum: i64 = daily.iter().map(|d| d.gap_sum_centi).sum();
    Totals {
        confusion,
        classes,
        mean_auc,
        recall_curve,
        score_gap_instances: gap_instances,
        mean_score_gap_centi: if gap_instances == 0 {
            0
        } else {
            // Same half-away-from-zero rounding as the per-task means.
            let n = gap_instances as i64;
            if gap_sum >= 0 {
                (2 * gap_sum + n) / (2 * n)
            } else {
                -((-2 * gap_sum + n) / (2 * n))
            }
        },
    }
}

/// Actual winners of every task completed inside the log horizon.
fn winner_sets(log: &EventLog) -> WinnerSets {
    let mut out = WinnerSets::new();
    for task in log.tasks() {
        if log.task_completed(task) {
            let winners: BTreeSet<String> = log
                .winners_of(&task.task_id)
                .into_iter()
                .map(str::to_string)
                .collect();
            out.insert(task.task_id.clone(), winners);
        }
    }
    out
}

/// Runs the daily loop over `num_days` days starting at `start_day`.
///
/// Each day trains a fresh model on that day's TR (with a day-derived
/// sub-seed), predicts every TS pair, ranks tasks per worker and
/// registered workers per task, and feeds every open task of monitorable
/// duration to the cancellation monitor. Ranking metrics score only tasks
/// that complete inside the log horizon.
pub fn walk_forward(
    log: &EventLog,
    start_day: NaiveDate,
    num_days: u32,
    config: &PipelineConfig,
    params: &ModelParams,
) -> Result<WalkOutputs, EvalError> {
    config.validate()?;
    let winners = winner_sets(log);
    let threshold = config.probability_threshold;

    let mut daily_records = Vec::with_capacity(num_days as usize);
    let mut gap_table = Vec::new();
    let mut predictions = DailyPredictions::new();
    let mut states: BTreeMap<String, CancellationState> = BTreeMap::new();
    let mut recommendations = Vec::with_capacity(num_days as usize);

    for day_idx in 0..num_days {
        let day = start_day + Days::new(u64::from(day_idx));
        let snapshot = build_snapshot(log, day, config, false)?;
        let day_params = params.reseeded(sub_seed(params.seed(), u64::from(day_idx)));
        let model = train(&snapshot.tr, &day_params)?;

        let mut scored: Vec<ScoredPair> = Vec::with_capacity(snapshot.ts.len());
        let mut day_predictions = BTreeMap::new();
        let mut labeled_scores = Vec::new();
        let mut labeled_predictions = Vec::new();
        let mut labeled_actuals = Vec::new();
        for sample in &snapshot.ts {
            let probs = model.predict_proba(&sample.features)?;
            scored.push(ScoredPair {
                worker_id: sample.worker_id.clone(),
                task_id: sample.task_id.clone(),
                day,
                probs,
            });
            day_predictions.insert(
                (sample.worker_id.clone(), sample.task_id.clone()),
                probs.argmax(),
            );
            if let Some(actual) = sample.label {
                labeled_scores.push(probs);
                labeled_predictions.push(probs.argmax());
                labeled_actuals.push(actual);
            }
        }

        // Rank registered workers per task.
        let mut by_task: BTreeMap<&str, Vec<ScoredPair>> = BTreeMap::new();
        for pair in &scored {
            by_task.entry(&pair.task_id).or_default().push(pair.clone());
        }
        let mut task_lists = Vec::new();
        for (task_id, pairs) in &by_task {
            task_lists.push(rank_workers_for_task(log, task_id, pairs, threshold)?);
        }

        // Rank tasks per worker.
        let mut by_worker: BTreeMap<&str, Vec<ScoredPair>> = BTreeMap::new();
        for pair in &scored {
            by_worker
                .entry(&pair.worker_id)
                .or_default()
                .push(pair.clone());
        }
        let mut worker_lists = Vec::new();
        for (worker_id, pairs) in &by_worker {
            worker_lists.push(rank_tasks_for_worker(log, worker_id, pairs, threshold)?);
        }

        // Cancellation monitoring covers the day's test-set tasks of
        // monitorable duration.
        for list in &task_lists {
            let crate::engine::Subject::Task(task_id) = &list.subject else {
                continue;
            };
            let task = log.task(task_id).expect("validated log");
            if task.duration_days() < MIN_MONITORED_DURATION_DAYS {
                continue;
            }
            let state = states
                .entry(task.task_id.clone())
                .or_insert_with(|| CancellationState::new(&task.task_id));
            mark_potential_cancellation(task, day, list, state)?;
            predict_cancellation(state, day, config.monitor_days);
        }

        // Ranking metrics for the day.
        let evaluable: Vec<RankedList> = task_lists
            .iter()
            .filter(|l| match &l.subject {
                crate::engine::Subject::Task(id) =>

                    winners.get(id).is_some_and(|w| !w.is_empty()),
                _ => false,
            })
            .cloned()
            .collect();
        let mut recall_hits = [0usize; MAX_RECALL_K];
        let mut recall_evaluated = 0;
        for k in 1..=MAX_RECALL_K {
            match recall_at_k(&evaluable, &winners, k) {
                Ok(r) => {
                    recall_hits[k - 1] = r.hits;
                    recall_evaluated = r.evaluated;
                }
                Err(EvalError::NoWinners | EvalError::EmptyInput) => {}
                Err(e) => return Err(e),
            }
        }
        let (gap_sum_centi, gap_instances) = match score_gap(&evaluable, &winners, |t, w| {
            log.final_review(w, t).map(|r| r.score)
        }) {
            Ok(summary) => {
                let sum = summary.per_task.iter().map(|t| t.gap_centi).sum();
                for t in &summary.per_task {
                    gap_table.push(GapInstance {
                        day,
                        task_id: t.task_id.clone(),
                        gap_centi: t.gap_centi,
                    });
                }
                (sum, summary.per_task.len())
            }
            Err(EvalError::NotEnoughRanked | EvalError::EmptyInput | EvalError::NoWinners) => {
                (0, 0)
            }
            Err(e) => return Err(e),
        };

        let (confusion, classes) = if labeled_actuals.is_empty() {
            (ConfusionCounts::default(), [ClassPrf::default(); 3])
        } else {
            let m = super::metrics::confusion_metrics(&labeled_predictions, &labeled_actuals)?;
            (m.counts, m.classes)
        };
        let auc = if labeled_actuals.is_empty() {
            [None; 3]
        } else {
            auc_ovr(&labeled_scores, &labeled_actuals)?
        };

        daily_records.push(DailyRecord {
            day,
            tr_size: snapshot.tr.len(),
            ts_size: snapshot.ts.len(),
            labeled_ts: labeled_actuals.len(),
            confusion,
            classes,
            auc,
            recall_evaluated,
            recall_hits,
            gap_sum_centi,
            gap_instances,
        });
        predictions.insert(day, day_predictions);
        recommendations.push(DayRecommendations {
            day,
            task_lists,
            worker_lists,
        });
    }

    let savings_all = effort_savings(
        log,
        &predictions,
        start_day,
        num_days,
        config,
        &BTreeSet::new(),
    )?;
    let savings_excluding_assembly = effort_savings(
        log,
        &predictions,
        start_day,
        num_days,
        config,
        &BTreeSet::from([TaskType::Assembly]),
    )?;

    let fired: BTreeMap<String, Option<NaiveDate>> = states
        .iter()
        .map(|(id, s)| (id.clone(), s.fired_on))
        .collect();
    let cancellation = if fired.is_empty() {
        None
    } else {
        match cancellation_metrics(log, &fired) {
            Ok(report) => Some(report),
            Err(EvalError::NoMonitoredTasks) => None,
            Err(e) => return Err(e),
        }
    };

    let totals = aggregate(&daily_records);
    let report = EvaluationReport {
        format_version: REPORT_FORMAT_VERSION,
        meta: RunMeta {
            start_day,
            num_days,
            params: params.clone(),
            config: config.clone(),
        },
        daily: daily_records,
        totals,
        score_gaps: gap_table,
        savings_all,
        savings_excluding_assembly,
        cancellation,
    };
    debug_assert_eq!(report.verify_aggregates(), Ok(()));
    Ok(WalkOutputs {
        report,
        recommendations,
    })
}
