//! Flat tabular exports of an evaluation report, written as CSV for
//! direct plotting. Metrics print at 6 decimals, percentages at 4, and
//! score gaps at the exact 2-decimal precision they are computed in.

use std::fs;
use std::path::Path;

use taskcast::eval::{centi_to_string, DayRecommendations, EvaluationReport};
use taskcast::features::ExperienceClass;
use taskcast::market::OutcomeLabel;

use crate::CliError;

fn to_cli(e: csv::Error) -> CliError {
    CliError::Validation(format!("csv write failed: {e}"))
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, CliError> {
    csv::Writer::from_path(path)
        .map_err(|e| CliError::Validation(format!("cannot create {}: {e}", path.display())))
}

fn metric(v: f64) -> String {
    format!("{v:.6}")
}

fn opt_metric(v: Option<f64>) -> String {
    v.map(metric).unwrap_or_default()
}

fn pct(v: f64) -> String {
    format!("{v:.4}")
}

fn class_name(c: ExperienceClass) -> &'static str {
    match c {
        ExperienceClass::Experienced => "experienced",
        ExperienceClass::Unexperienced => "unexperienced",
    }
}

pub fn write_daily_metrics(path: &Path, report: &EvaluationReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    let mut header = vec![
        "day".to_string(),
        "tr_size".into(),
        "ts_size".into(),
        "labeled_ts".into(),
    ];
    for label in OutcomeLabel::ALL {
        for metric_name in ["precision", "recall", "f_measure", "auc"] {
            header.push(format!("{label}_{metric_name}"));
        }
    }
    header.extend(
        [
            "recall_evaluated",
            "recall_hits_1",
            "recall_hits_2",
            "recall_hits_3",
            "recall_hits_4",
            "recall_hits_5",
            "gap_sum",
            "gap_instances",
        ]
        .map(String::from),
    );
    w.write_record(&header).map_err(to_cli)?;
    for d in &report.daily {
        let mut row = vec![
            d.day.to_string(),
            d.tr_size.to_string(),
            d.ts_size.to_string(),
            d.labeled_ts.to_string(),
        ];
        for label in OutcomeLabel::ALL {
            let c = &d.classes[label.index()];
            row.push(metric(c.precision));
            row.push(metric(c.recall));
            row.push(metric(c.f_measure));
            row.push(opt_metric(d.auc[label.index()]));
        }
        row.push(d.recall_evaluated.to_string());
        for k in 0..5 {
            row.push(d.recall_hits[k].to_string());
        }
        row.push(centi_to_string(d.gap_sum_centi));
        row.push(d.gap_instances.to_string());
        w.write_record(&row).map_err(to_cli)?;
    }
    w.flush().map_err(|e| CliError::Validation(e.to_string()))
}

pub fn write_recall_curve(path: &Path, report: &EvaluationReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["k", "recall", "hits", "evaluated"]).map_err(to_cli)?;
    for r in &report.totals.recall_curve {
        w.write_record([
            r.k.to_string(),
            metric(r.fraction),
            r.hits.to_string(),
            r.evaluated.to_string(),
        ])
        .map_err(to_cli)?;
    }
    w.flush().map_err(|e| CliError::Validation(e.to_string()))
}

pub fn write_score_gaps(path: &Path, report: &EvaluationReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["day", "task_id", "gap"]).map_err(to_cli)?;
    for g in &report.score_gaps {
        w.write_record([
            g.day.to_string(),
            g.task_id.clone(),
            centi_to_string(g.gap_centi),
        ])
        .map_err(to_cli)?;
    }
    w.flush().map_err(|e| CliError::Validation(e.to_string()))
}

pub fn write_savings_pairs(path: &Path, report: &EvaluationReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["scope", "worker_id", "task_id", "experience", "task_type", "days_saved"])
        .map_err(to_cli)?;
    for (scope, savings) in [
        ("all", &report.savings_all),
        ("excluding_assembly", &report.savings_excluding_assembly),
    ] {
        for pair in &savings.per_pair {
            w.write_record([
                scope.to_string(),
                pair.worker_id.clone(),
                pair.task_id.clone(),
                class_name(pair.experience).to_string(),
                pair.task_type.to_string(),
                pair.days_saved.to_string(),
            ])
            .map_err(to_cli)?;
        }
    }
    w.flush().map_err(|e| CliError::Validation(e.to_string()))
}

pub fn write_savings_summary(path: &Path, report: &EvaluationReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["scope", "experience", "pairs", "total_days", "mean_days"])
        .map_err(to_cli)?;
    for (scope, savings) in [
        ("all", &report.savings_all),
        ("excluding_assembly", &report.savings_excluding_assembly),
    ] {
        for (class, by_class) in [
            ("experienced", &savings.experienced),
            ("unexperienced", &savings.unexperienced),
        ] {
            w.write_record([
                scope.to_string(),
                class.to_string(),
                by_class.pairs.to_string(),
                by_class.total_days.to_string(),
                pct(by_class.mean_days),
            ])
            .map_err(to_cli)?;
        }
    }
    w.flush().map_err(|e| CliError::Validation(e.to_string()))
}

pub fn write_cancellations(path: &Path, report: &EvaluationReport) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "task_id",
        "duration_days",
        "predicted",
        "prediction_day",
        "actually_cancelled",
        "savings_pct",
    ])
    .map_err(to_cli)?;
    if let Some(cancel) = &report.cancellation {
        for o in &cancel.outcomes {
            w.write_record([
                o.task_id.clone(),
                o.duration_days.to_string(),
                o.predicted.to_string(),
                o.prediction_day.map(|d| d.to_string()).unwrap_or_default(),
                o.actually_cancelled.to_string(),
                o.savings_pct.map(pct).unwrap_or_default(),
            ])
            .map_err(to_cli)?;
        }
    }
    w.flush().map_err(|e| CliError::Validation(e.to_string()))
}

pub fn write_recommendations(
    path: &Path,
    recommendations: &[DayRecommendations],
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record([
        "day",
        "subject_kind",
        "subject_id",
        "rank",
        "counterpart_id",
        "p_winner",
        "p_quitter",
        "p_submitter",
        "segment",
    ])
    .map_err(to_cli)?;
    for day in recommendations {
        for list in day.worker_lists.iter().chain(&day.task_lists) {
            let (kind, subject_id) = match &list.subject {
                taskcast::engine::Subject::Worker(id) => ("worker", id.clone()),
                taskcast::engine::Subject::Task(id) => ("task", id.clone()),
            };
            for (rank, pair) in list.entries.iter().enumerate() {
                let counterpart = match kind {
                    "worker" => pair.task_id.clone(),
                    _ => pair.worker_id.clone(),
                };
                let segment = if rank < list.boundary { "winner" } else { "submitter" };
                w.write_record([
                    day.day.to_string(),
                    kind.to_string(),
                    subject_id.clone(),
                    (rank + 1).to_string(),
                    counterpart,
                    metric(pair.probs.winner),
                    metric(pair.probs.quitter),
                    metric(pair.probs.submitter),
                    segment.to_string(),
                ])
                .map_err(to_cli)?;
            }
        }
    }
    w.flush().map_err(|e| CliError::Validation(e.to_string()))
}

/// Plot-data tables for the report command.
pub mod figures {
    use super::*;

    /// Per-run algorithm comparison rows (mean precision/recall/F and AUC
    /// per class).
    pub fn write_algorithms(
        path: &Path,
        runs: &[(String, EvaluationReport)],
    ) -> Result<(), CliError> {
        let mut w = writer(path)?;
        w.write_record(["run", "learner", "class", "precision", "recall", "f_measure", "mean_auc"])
            .map_err(to_cli)?;
        for (label, report) in runs {
            let learner = report.meta.params.kind().to_string();
            for class in OutcomeLabel::ALL {
                let c = &report.totals.classes[class.index()];
                w.write_record([
                    label.clone(),
                    learner.clone(),
                    class.to_string(),
                    metric(c.precision),
                    metric(c.recall),
                    metric(c.f_measure),
                    opt_metric(report.totals.mean_auc[class.index()]),
                ])
                .map_err(to_cli)?;
            }
        }
        w.flush().map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn write_recall_per_day(path: &Path, report: &EvaluationReport) -> Result<(), CliError> {
        let mut w = writer(path)?;
        w.write_record(["day", "recall_at_1", "recall_at_2", "evaluated"]).map_err(to_cli)?;
        for d in &report.daily {
            let frac = |hits: usize| {
                if d.recall_evaluated == 0 {
                    String::new()
                } else {
                    metric(hits as f64 / d.recall_evaluated as f64)
                }
            };
            w.write_record([
                d.day.to_string(),
                frac(d.recall_hits[0]),
                frac(d.recall_hits[1]),
                d.recall_evaluated.to_string(),
            ])
            .map_err(to_cli)?;
        }
        w.flush().map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn write_score_gap_per_day(
        path: &Path,
        report: &EvaluationReport,
    ) -> Result<(), CliError> {
        let mut w = writer(path)?;
        w.write_record(["day", "mean_gap", "instances"]).map_err(to_cli)?;
        for d in &report.daily {
            let mean = if d.gap_instances == 0 {
                String::new()
            } else {
                // Exact division is fine for display: round half away.
                let n = d.gap_instances as i64;
                let sum = d.gap_sum_centi;
                let rounded = if sum >= 0 {
                    (2 * sum + n) / (2 * n)
                } else {
                    -((-2 * sum + n) / (2 * n))
                };
                centi_to_string(rounded)
            };
            w.write_record([d.day.to_string(), mean, d.gap_instances.to_string()])
                .map_err(to_cli)?;
        }
        w.flush().map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn write_savings_distribution(
        path: &Path,
        report: &EvaluationReport,
    ) -> Result<(), CliError> {
        let mut w = writer(path)?;
        w.write_record(["task_id", "duration_days", "savings_pct"]).map_err(to_cli)?;
        if let Some(cancel) = &report.cancellation {
            for o in &cancel.outcomes {
                if let Some(savings) = o.savings_pct {
                    w.write_record([
                        o.task_id.clone(),
                        o.duration_days.to_string(),
                        pct(savings),
                    ])
                    .map_err(to_cli)?;
                }
            }
        }
        w.flush().map_err(|e| CliError::Validation(e.to_string()))
    }
}
