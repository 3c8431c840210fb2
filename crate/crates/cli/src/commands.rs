//! Implementations of the nine subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use clap::Args;
use serde_json::json;

use taskcast::engine::{rank_tasks_for_worker, rank_workers_for_task, RankedList, ScoredPair};
use taskcast::eval::{walk_forward, EvaluationReport};
use taskcast::features::{build_snapshot, DailySnapshot, LabeledSample};
use taskcast::learn::{default_grid, grid_search, train as train_model, ModelParams, TrainedModel};
use taskcast::market::{
    persist_log, read_data_dir, write_data_dir, EventLog, OutcomeLabel, DATA_EVENTS, DATA_TASKS,
    DATA_VOCABULARY,
};
use taskcast::synth::{generate_marketplace, GeneratorConfig};

use crate::manifest::RunManifest;
use crate::tables;
use crate::{ensure_out_dir, parse_date, CliError, LearnerOpts, PipelineOpts};

fn read_log(data: &Path) -> Result<EventLog, CliError> {
    read_data_dir(data).map_err(|e| CliError::Validation(e.to_string()))
}

fn digest_data_dir(manifest: &mut RunManifest, data: &Path) -> Result<(), CliError> {
    for name in [DATA_TASKS, DATA_EVENTS, DATA_VOCABULARY] {
        manifest.digest_input(&data.join(name))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Generator config file (TOML); defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output data directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<GeneratorConfig>(&text)
                .map_err(|e| CliError::Validation(format!("bad generator config: {e}")))?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let log = generate_marketplace(&config).map_err(|e| CliError::Validation(e.to_string()))?;
    ensure_out_dir(&args.out)?;
    write_data_dir(&args.out, &log).map_err(|e| CliError::Validation(e.to_string()))?;

    let mut manifest = RunManifest::new(
        "simulate",
        serde_json::to_value(&config).expect("config serializes"),
        Some(config.seed),
    );
    if let Some(path) = &args.config {
        manifest.digest_input(path)?;
    }
    for name in [DATA_TASKS, DATA_EVENTS, DATA_VOCABULARY] {
        manifest.record_output(name);
    }
    manifest.write(&args.out)?;

    println!(
        "simulated {} tasks, {} events, {} workers -> {}",
        log.num_tasks(),
        log.events().len(),
        log.workers().count(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Data directory with tasks.csv, events.csv, vocabulary.txt.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for the canonical log.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let log = read_log(&args.data)?;
    ensure_out_dir(&args.out)?;
    persist_log(&log, &args.out.join("log.json"))
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let mut counts = [0usize; 3];
    let mut open_pairs = 0usize;
    for (w, t, _) in log.registered_pairs() {
        match log.derive_outcome(w, t) {
            Ok(label) => counts[label.index()] += 1,
            Err(_) => open_pairs += 1,
        }
    }

    let mut manifest = RunManifest::new("ingest", json!({}), None);
    digest_data_dir(&mut manifest, &args.data)?;
    manifest.record_output("log.json");
    manifest.write(&args.out)?;

    println!(
        "ingested {} tasks, {} events, {} workers",
        log.num_tasks(),
        log.events().len(),
        log.workers().count()
    );
    println!(
        "registrations: {} (winners {}, quitters {}, submitters {}, undecided {})",
        log.num_registrations(),
        counts[OutcomeLabel::Winner.index()],
        counts[OutcomeLabel::Quitter.index()],
        counts[OutcomeLabel::Submitter.index()],
        open_pairs
    );
    Ok(())
}

// ---------------------------------------------------------------------
// train
// ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model-building day (trains on everything completed before it).
    #[arg(long, value_parser = parse_date)]
    pub day: NaiveDate,
    #[command(flatten)]
    pub learner: LearnerOpts,
    #[command(flatten)]
    pub pipeline: PipelineOpts,
    /// Also export the day's training matrix as features.csv.
    #[arg(long)]
    pub export_matrix: bool,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn train(args: TrainArgs) -> Result<(), CliError> {
    let log = read_log(&args.data)?;
    let config = args.pipeline.config()?;
    let params = args.learner.params()?;
    let snapshot = build_snapshot(&log, args.day, &config, false)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let model =
        train_model(&snapshot.tr, &params).map_err(|e| CliError::Validation(e.to_string()))?;

    ensure_out_dir(&args.out)?;
    model
        .save(&args.out.join("model.json"))
        .map_err(|e| CliError::Validation(e.to_string()))?;

    let mut manifest = RunManifest::new(
        "train",
        json!({
            "day": args.day,
            "model": params,
            "pipeline": config,
        }),
        Some(args.learner.seed),
    );
    digest_data_dir(&mut manifest, &args.data)?;
    manifest.record_output("model.json");
    if args.export_matrix {
        let file = fs::File::create(args.out.join("features.csv"))
            .map_err(|e| CliError::Validation(e.to_string()))?;
        taskcast::features::write_feature_matrix(file, log.vocabulary(), &snapshot.tr)
            .map_err(|e| CliError::Validation(e.to_string()))?;
        manifest.record_output("features.csv");
    }
    manifest.write(&args.out)?;

    println!(
        "trained {} on {} samples (TS that day: {}); fingerprint {}",
        params.kind(),
        model.training_size(),
        snapshot.ts.len(),
        model.training_fingerprint()
    );
    Ok(())
}

// ---------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// First evaluated day.
    #[arg(long, value_parser = parse_date)]
    pub start: NaiveDate,
    /// Number of consecutive days to evaluate.
    #[arg(long)]
    pub days: u32,
    #[command(flatten)]
    pub learner: LearnerOpts,
    #[command(flatten)]
    pub pipeline: PipelineOpts,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let log = read_log(&args.data)?;
    let config = args.pipeline.config()?;
    let params = args.learner.params()?;
    let outputs = walk_forward(&log, args.start, args.days, &config, &params)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let report = &outputs.report;

    ensure_out_dir(&args.out)?;
    report
        .save(&args.out.join("report.json"))
        .map_err(|e| CliError::Validation(e.to_string()))?;
    tables::write_daily_metrics(&args.out.join("daily_metrics.csv"), report)?;
    tables::write_recall_curve(&args.out.join("recall_curve.csv"), report)?;
    tables::write_score_gaps(&args.out.join("score_gaps.csv"), report)?;
    tables::write_savings_pairs(&args.out.join("savings_pairs.csv"), report)?;
    tables::write_savings_summary(&args.out.join("savings_summary.csv"), report)?;
    tables::write_cancellations(&args.out.join("cancellations.csv"), report)?;
    tables::write_recommendations(
        &args.out.join("recommendations.csv"),
        &outputs.recommendations,
    )?;

    let mut manifest = RunManifest::new(
        "evaluate",
        json!({
            "start": args.start,
            "days": args.days,
            "model": params,
            "pipeline": config,
        }),
        Some(args.learner.seed),
    );
    digest_data_dir(&mut manifest, &args.data)?;
    for name in [
        "report.json",
        "daily_metrics.csv",
        "recall_curve.csv",
        "score_gaps.csv",
        "savings_pairs.csv",
        "savings_summary.csv",
        "cancellations.csv",
        "recommendations.csv",
    ] {
        manifest.record_output(name);
    }
    manifest.write(&args.out)?;

    let totals = &report.totals;
    println!("evaluated {} days starting {}", args.days, args.start);
    for label in OutcomeLabel::ALL {
        let c = &totals.classes[label.index()];
        println!(
            "  {label}: precision {:.4}  recall {:.4}  f {:.4}",
            c.precision, c.recall, c.f_measure
        );
    }
    for r in totals.recall_curve.iter().take(2) {
        println!("  recall@{}: {:.4} ({}/{})", r.k, r.fraction, r.hits, r.evaluated);
    }
    println!(
        "  mean score gap: {} over {} task-days",
        taskcast::eval::centi_to_string(totals.mean_score_gap_centi),
        totals.score_gap_instances
    );
    println!(
        "  savings (all tasks): experienced {:.2} days/pair over {} pairs, unexperienced {:.2} over {}",
        report.savings_all.experienced.mean_days,
        report.savings_all.experienced.pairs,
        report.savings_all.unexperienced.mean_days,
        report.savings_all.unexperienced.pairs
    );
    if let Some(c) = &report.cancellation {
        println!(
            "  cancellation: precision {:.4} recall {:.4} f {:.4}; mean duration saved {}",
            c.precision,
            c.recall,
            c.f_measure,
            c.mean_savings_pct.map(|p| format!("{p:.2}%")).unwrap_or_else(|| "n/a".into())
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------
// rank-tasks / rank-workers
// ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct RankTasksArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_date)]
    pub day: NaiveDate,
    /// Worker to recommend tasks for.
    #[arg(long)]
    pub worker: String,
    /// Also rank open tasks the worker has not registered for.
    #[arg(long)]
    pub candidates: bool,
    /// Load a saved model instead of training one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerOpts,
    #[command(flatten)]
    pub pipeline: PipelineOpts,
}

fn model_for_day(
    log: &EventLog,
    day: NaiveDate,
    snapshot: &DailySnapshot,
    model_path: &Option<PathBuf>,
    learner: &LearnerOpts,
) -> Result<TrainedModel, CliError> {
    let _ = (log, day);
    match model_path {
        Some(path) => TrainedModel::load(path).map_err(|e| CliError::Validation(e.to_string())),
        None => {
            let params = learner.params()?;
            train_model(&snapshot.tr, &params).map_err(|e| CliError::Validation(e.to_string()))
        }
    }
}

fn score_samples(
    model: &TrainedModel,
    samples: &[LabeledSample],
    day: NaiveDate,
) -> Result<Vec<ScoredPair>, CliError> {
    samples
        .iter()
        .map(|s| {
            let probs = model
                .predict_proba(&s.features)
                .map_err(|e| CliError::Validation(e.to_string()))?;
            Ok(ScoredPair {
                worker_id: s.worker_id.clone(),
                task_id: s.task_id.clone(),
                day,
                probs,
            })
        })
        .collect()
}

fn print_ranking(list: &RankedList, counterpart_header: &str) {
    println!("rank  {counterpart_header:<16} segment    p_winner  p_quitter  p_submitter");
    for (i, pair) in list.entries.iter().enumerate() {
        let counterpart = match &list.subject {
            taskcast::engine::Subject::Worker(_) => &pair.task_id,
            taskcast::engine::Subject::Task(_) => &pair.worker_id,
        };
        let segment = if i < list.boundary { "winner" } else { "submitter" };
        println!(
            "{:>4}  {counterpart:<16} {segment:<10} {:>8.4}  {:>9.4}  {:>11.4}",
            i + 1,
            pair.probs.winner,
            pair.probs.quitter,
            pair.probs.submitter
        );
    }
    if list.is_empty() {
        println!("(no recommendation clears the probability filter)");
    }
}

pub fn rank_tasks(args: RankTasksArgs) -> Result<(), CliError> {
    let log = read_log(&args.data)?;
    let config = args.pipeline.config()?;
    let snapshot = build_snapshot(&log, args.day, &config, args.candidates)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let model = model_for_day(&log, args.day, &snapshot, &args.model, &args.learner)?;

    let mut mine: Vec<LabeledSample> = snapshot
        .ts
        .iter()
        .filter(|s| s.worker_id == args.worker)
        .cloned()
        .collect();
    if let Some(candidates) = &snapshot.candidates {
        mine.extend(candidates.iter().filter(|s| s.worker_id == args.worker).cloned());
    }
    let scored = score_samples(&model, &mine, args.day)?;
    let list = rank_tasks_for_worker(&log, &args.worker, &scored, config.probability_threshold)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    println!("tasks for worker {} on {}:", args.worker, args.day);
    print_ranking(&list, "task");
    Ok(())
}

#[derive(Debug, Args)]
pub struct RankWorkersArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_date)]
    pub day: NaiveDate,
    /// Task whose registered workers are ranked.
    #[arg(long)]
    pub task: String,
    /// Load a saved model instead of training one.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerOpts,
    #[command(flatten)]
    pub pipeline: PipelineOpts,
}

pub fn rank_workers(args: RankWorkersArgs) -> Result<(), CliError> {
    let log = read_log(&args.data)?;
    if log.task(&args.task).is_none() {
        return Err(CliError::Validation(format!("unknown task `{}`", args.task)));
    }
    let config = args.pipeline.config()?;
    let snapshot = build_snapshot(&log, args.day, &config, false)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let model = model_for_day(&log, args.day, &snapshot, &args.model, &args.learner)?;

    let registered: Vec<LabeledSample> = snapshot
        .ts
        .iter()
        .filter(|s| s.task_id == args.task)
        .cloned()
        .collect();
    let scored = score_samples(&model, &registered, args.day)?;
    let list = rank_workers_for_task(&log, &args.task, &scored, config.probability_threshold)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    println!("registered workers for task {} on {}:", args.task, args.day);
    print_ranking(&list, "worker");
    Ok(())
}

// ---------------------------------------------------------------------
// predict-cancel
// ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct PredictCancelArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_date)]
    pub start: NaiveDate,
    #[arg(long)]
    pub days: u32,
    #[command(flatten)]
    pub learner: LearnerOpts,
    #[command(flatten)]
    pub pipeline: PipelineOpts,
    /// Optional output directory for the cancellation table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn predict_cancel(args: PredictCancelArgs) -> Result<(), CliError> {
    let log = read_log(&args.data)?;
    let config = args.pipeline.config()?;
    let params = args.learner.params()?;
    let outputs = walk_forward(&log, args.start, args.days, &config, &params)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let report = &outputs.report;

    match &report.cancellation {
        None => println!("no monitorable task completed in the horizon"),
        Some(cancel) => {
            let flagged: Vec<_> = cancel.outcomes.iter().filter(|o| o.predicted).collect();
            println!(
                "{} of {} monitored tasks predicted cancelled over {} days:",
                flagged.len(),
                cancel.outcomes.len(),
                args.days
            );
            for o in &flagged {
                println!(
                    "  {}  predicted {}  duration {:>2}d  actual: {}{}",
                    o.task_id,
                    o.prediction_day.expect("flagged tasks carry a day"),
                    o.duration_days,
                    if o.actually_cancelled { "cancelled" } else { "completed" },
                    o.savings_pct
                        .map(|p| format!("  saved {p:.2}% of duration"))
                        .unwrap_or_default()
                );
            }
            println!(
                "precision {:.4}  recall {:.4}  f {:.4}",
                cancel.precision, cancel.recall, cancel.f_measure
            );
        }
    }

    if let Some(out) = &args.out {
        ensure_out_dir(out)?;
        tables::write_cancellations(&out.join("cancellations.csv"), report)?;
        let mut manifest = RunManifest::new(
            "predict-cancel",
            json!({
                "start": args.start,
                "days": args.days,
                "model": params,
                "pipeline": config,
            }),
            Some(args.learner.seed),
        );
        digest_data_dir(&mut manifest, &args.data)?;
        manifest.record_output("cancellations.csv");
        manifest.write(out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = parse_date)]
    pub start: NaiveDate,
    #[arg(long)]
    pub days: u32,
    #[command(flatten)]
    pub learner: LearnerOpts,
    #[command(flatten)]
    pub pipeline: PipelineOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn describe_params(params: &ModelParams) -> String {
    match params {
        ModelParams::RandomForest(p) => format!("trees={} features={}", p.num_trees, p.num_features),
        ModelParams::DecisionTree(p) => {
            format!("pruning={} min_leaf={}", p.pruning_strength, p.min_leaf)
        }
        ModelParams::NaiveBayes => "-".into(),
    }
}

pub fn tune(args: TuneArgs) -> Result<(), CliError> {
    let log = read_log(&args.data)?;
    let config = args.pipeline.config()?;
    let kind = args.learner.kind()?;
    let grid = default_grid(kind, args.learner.seed);

    let mut snapshots = Vec::with_capacity(args.days as usize);
    for i in 0..args.days {
        let day = args.start + Days::new(u64::from(i));
        snapshots.push(
            build_snapshot(&log, day, &config, false)
                .map_err(|e| CliError::Validation(e.to_string()))?,
        );
    }
    let result =
        grid_search(&snapshots, &grid).map_err(|e| CliError::Validation(e.to_string()))?;

    println!(
        "{} configurations over {} days; ranked by mean winner F:",
        result.ranked.len(),
        args.days
    );
    println!("rank  params                         winner_f  quitter_f  winner_auc");
    for (i, score) in result.ranked.iter().enumerate() {
        println!(
            "{:>4}  {:<30} {:>8.4}  {:>9.4}  {}",
            i + 1,
            describe_params(&score.params),
            score.mean_winner_f,
            score.mean_quitter_f,
            score
                .mean_winner_auc
                .map(|a| format!("{a:>10.4}"))
                .unwrap_or_else(|| "         -".into()),
        );
    }
    println!("best: {}", describe_params(&result.best().params));

    if let Some(out) = &args.out {
        ensure_out_dir(out)?;
        let mut w = csv::Writer::from_path(out.join("grid_results.csv"))
            .map_err(|e| CliError::Validation(e.to_string()))?;
        w.write_record(["rank", "learner", "params", "winner_f", "quitter_f", "winner_auc", "quitter_auc", "days"])
            .map_err(|e| CliError::Validation(e.to_string()))?;
        for (i, score) in result.ranked.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                score.params.kind().to_string(),
                describe_params(&score.params),
                format!("{:.6}", score.mean_winner_f),
                format!("{:.6}", score.mean_quitter_f),
                score.mean_winner_auc.map(|a| format!("{a:.6}")).unwrap_or_default(),
                score.mean_quitter_auc.map(|a| format!("{a:.6}")).unwrap_or_default(),
                score.days_scored.to_string(),
            ])
            .map_err(|e| CliError::Validation(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Validation(e.to_string()))?;

        let mut best = serde_json::to_vec_pretty(&json!({
            "best": result.best().params,
            "mean_winner_f": result.best().mean_winner_f,
            "mean_quitter_f": result.best().mean_quitter_f,
        }))
        .expect("serializes");
        best.push(b'\n');
        fs::write(out.join("best.json"), best)
            .map_err(|e| CliError::Validation(e.to_string()))?;

        let mut manifest = RunManifest::new(
            "tune",
            json!({
                "start": args.start,
                "days": args.days,
                "learner": kind.to_string(),
                "pipeline": config,
            }),
            Some(args.learner.seed),
        );
        digest_data_dir(&mut manifest, &args.data)?;
        manifest.record_output("grid_results.csv");
        manifest.record_output("best.json");
        manifest.write(out)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// report
// ---------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Evaluation run directories (each holding a report.json); repeatable.
    #[arg(long, required = true)]
    pub run: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn report(args: ReportArgs) -> Result<(), CliError> {
    let mut runs: Vec<(String, EvaluationReport)> = Vec::new();
    for dir in &args.run {
        let path = dir.join("report.json");
        let report =
            EvaluationReport::load(&path).map_err(|e| CliError::Validation(e.to_string()))?;
        let label = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        runs.push((label, report));
    }

    ensure_out_dir(&args.out)?;
    let mut manifest = RunManifest::new(
        "report",
        json!({ "runs": runs.iter().map(|(l, _)| l).collect::<Vec<_>>() }),
        None,
    );
    for dir in &args.run {
        manifest.digest_input(&dir.join("report.json"))?;
    }

    tables::figures::write_algorithms(&args.out.join("algorithms.csv"), &runs)?;
    manifest.record_output("algorithms.csv");

    let single = runs.len() == 1;
    for (label, report) in &runs {
        let prefix = if single { String::new() } else { format!("{label}_") };
        let recall = format!("{prefix}recall_per_day.csv");
        let gaps = format!("{prefix}score_gap_per_day.csv");
        let savings = format!("{prefix}savings_distribution.csv");
        tables::figures::write_recall_per_day(&args.out.join(&recall), report)?;
        tables::figures::write_score_gap_per_day(&args.out.join(&gaps), report)?;
        tables::figures::write_savings_distribution(&args.out.join(&savings), report)?;
        manifest.record_output(&recall);
        manifest.record_output(&gaps);
        manifest.record_output(&savings);
    }
    manifest.write(&args.out)?;
    println!(
        "wrote plot tables for {} run(s) to {}",
        runs.len(),
        args.out.display()
    );
    Ok(())
}
