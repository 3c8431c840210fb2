//! Acceptance suite. Each test covers one numbered criterion and prints a
//! PASS line with the observed values (run with `-- --nocapture` to see
//! them). Criterion 9 (manifest re-run determinism) lives in the CLI
//! crate's acceptance suite.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};

use taskcast::engine::{
    mark_potential_cancellation, predict_cancellation, CancellationState, RankedList, ScoredPair,
    Subject,
};
use taskcast::eval::{
    auc_one_vs_rest, cancellation_metrics, centi_to_string, confusion_metrics, f_measure,
    recall_at_k, score_gap, vargha_delaney, walk_forward, WinnerSets,
};
use taskcast::features::{build_snapshot, FeatureVector, LabeledSample, PipelineConfig, VECTOR_WIDTH};
use taskcast::learn::{
    default_grid, selection_order, train_forest, train_tree, ConfigScore, ForestParams,
    LearnerKind, ModelParams, ProbabilityTriple, TreeNode, TreeParams,
};
use taskcast::market::{
    ingest_events, EventLog, EventRecord, OutcomeLabel, ReviewScore, TaskRecord, TaskType,
};
use taskcast::rng::Rng;
use taskcast::synth::{generate_marketplace, GeneratorConfig};

fn date(s: &str) -> NaiveDate {
    s.parse().unwrap()
}

fn triple(w: f64, q: f64, s: f64) -> ProbabilityTriple {
    ProbabilityTriple::new(w, q, s).unwrap()
}

// ---------------------------------------------------------------------
// Criterion 1: the two-task worked example, bit-exact.
// ---------------------------------------------------------------------

#[test]
fn criterion_1_worked_example_bit_exact() {
    let day = date("2015-01-01");
    let ranking = |task_id: &str, workers: &[&str]| {
        let entries: Vec<ScoredPair> = workers
            .iter()
            .enumerate()
            .map(|(i, w)| ScoredPair {
                worker_id: w.to_string(),
                task_id: task_id.to_string(),
                day,
                probs: triple(0.8 - 0.1 * i as f64, 0.1, 0.1 + 0.1 * i as f64),
            })
            .collect();
        let boundary = entries.len();
        RankedList {
            subject: Subject::Task(task_id.to_string()),
            day,
            entries,
            boundary,
        }
    };
    let rankings = vec![
        ranking("30047945", &["GreatKevin", "suno1234"]),
        ranking("30048207", &["albertwang", "seriyvolk83", "mohamede1945"]),
    ];
    let mut winners = WinnerSets::new();
    winners.insert(
        "30047945".into(),
        ["GreatKevin", "suno1234"].iter().map(|s| s.to_string()).collect(),
    );
    winners.insert(
        "30048207".into(),
        ["mohamede1945", "seriyvolk83"].iter().map(|s| s.to_string()).collect(),
    );
    let scores: BTreeMap<(&str, &str), &str> = BTreeMap::from([
        (("30047945", "GreatKevin"), "98.75"),
        (("30047945", "suno1234"), "95.63"),
        (("30048207", "albertwang"), "95.01"),
        (("30048207", "seriyvolk83"), "98.78"),
        (("30048207", "mohamede1945"), "99.82"),
    ]);
    let lookup = |task: &str, worker: &str| -> Option<ReviewScore> {
        scores.get(&(task, worker)).map(|s| s.parse().unwrap())
    };

    let summary = score_gap(&rankings, &winners, lookup).unwrap();
    assert_eq!(summary.per_task.len(), 2);
    assert_eq!(summary.per_task[0].gap_centi, 0, "first task gap must be exactly 0");
    assert_eq!(summary.per_task[1].gap_centi, 240, "second task gap must be exactly 2.40");
    assert_eq!(summary.mean_gap_centi, 120, "mean gap must be exactly 1.20");

    let r1 = recall_at_k(&rankings, &winners, 1).unwrap();
    let r2 = recall_at_k(&rankings, &winners, 2).unwrap();
    assert_eq!(r1.fraction, 0.5);
    assert_eq!(r2.fraction, 1.0);

    println!(
        "PASS criterion 1: worked example gaps [{}, {}], mean {}, recall@1 {}, recall@2 {}",
        centi_to_string(summary.per_task[0].gap_centi),
        centi_to_string(summary.per_task[1].gap_centi),
        centi_to_string(summary.mean_gap_centi),
        r1.fraction,
        r2.fraction
    );
}

// ---------------------------------------------------------------------
// Criterion 2: F-measure arithmetic consistency.
// ---------------------------------------------------------------------

#[test]
fn criterion_2_f_measure_arithmetic() {
    let f1 = f_measure(0.85, 0.80);
    let f2 = f_measure(0.87, 0.77);
    assert!((f1 - 0.8242).abs() <= 0.0001, "F(0.85, 0.80) = {f1}");
    assert!((f2 - 0.8169).abs() <= 0.0001, "F(0.87, 0.77) = {f2}");
    println!("PASS criterion 2: F(0.85,0.80)={f1:.4}, F(0.87,0.77)={f2:.4}");
}

// ---------------------------------------------------------------------
// Criterion 3: forest probabilities equal independent per-tree votes;
// a single-tree forest matches the plain tree.
// ---------------------------------------------------------------------

/// Test-local tree walker, independent of the library's traversal.
fn oracle_leaf_counts(nodes: &[TreeNode], x: &[f64]) -> [u32; 3] {
    let mut at = 0usize;
    loop {
        match &nodes[at] {
            TreeNode::Leaf { counts } => return *counts,
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => at = if x[*feature] <= *threshold { *left } else { *right },
        }
    }
}

fn oracle_majority(counts: &[u32; 3]) -> OutcomeLabel {
    // Priority on exact ties: Winner, then Submitter, then Quitter.
    let priority = [OutcomeLabel::Winner, OutcomeLabel::Submitter, OutcomeLabel::Quitter];
    let mut best = priority[0];
    for &label in &priority[1..] {
        if counts[label.index()] > counts[best.index()] {
            best = label;
        }
    }
    best
}

fn random_sample(rng: &mut Rng, id: usize) -> LabeledSample {
    let mut values = vec![0.0f64; VECTOR_WIDTH];
    for slot in values.iter_mut().take(12) {
        *slot = (rng.below(50) as f64) / 5.0;
    }
    for f in 12..20 {
        values[f] = rng.below(2) as f64;
    }
    let label = OutcomeLabel::from_index(rng.below(3));
    LabeledSample {
        worker_id: format!("w{id:04}"),
        task_id: format!("t{:04}", id % 37),
        as_of_day: date("2015-01-01"),
        features: FeatureVector::new(values),
        label: Some(label),
    }
}

#[test]
fn criterion_3_forest_vote_oracle() {
    let mut rng = Rng::from_seed(0xF0DE);
    let mut checked = 0usize;
    for set in 0..20 {
        let samples: Vec<LabeledSample> =
            (0..200).map(|i| random_sample(&mut rng, set * 1000 + i)).collect();
        let params = ForestParams {
            num_trees: 25,
            num_features: 50,
            seed: 1000 + set as u64,
            ..ForestParams::default()
        };
        let model = train_forest(&samples, &params).unwrap();
        let trees = model.forest_trees().unwrap();
        assert_eq!(trees.len(), 25);
        for probe in samples.iter().take(50) {
            let x = probe.features.values();
            let mut votes = [0u32; 3];
            for tree in trees {
                let counts = oracle_leaf_counts(&tree.nodes, x);
                votes[oracle_majority(&counts).index()] += 1;
            }
            let expected = [
                f64::from(votes[OutcomeLabel::Winner.index()]) / 25.0,
                f64::from(votes[OutcomeLabel::Quitter.index()]) / 25.0,
                f64::from(votes[OutcomeLabel::Submitter.index()]) / 25.0,
            ];
            let got = model.predict_proba(&probe.features).unwrap();
            assert_eq!(
                (got.winner, got.quitter, got.submitter),
                (expected[0], expected[1], expected[2]),
                "vote fractions must match the oracle exactly"
            );
            checked += 1;
        }
    }

    // Single-tree forest, all features, no bootstrap == plain tree.
    let samples: Vec<LabeledSample> = (0..300).map(|i| random_sample(&mut rng, i)).collect();
    let forest = train_forest(
        &samples,
        &ForestParams {
            num_trees: 1,
            num_features: VECTOR_WIDTH,
            min_leaf: 2,
            bootstrap: false,
            seed: 9,
            ..ForestParams::default()
        },
    )
    .unwrap();
    let tree = train_tree(
        &samples,
        &TreeParams {
            min_leaf: 2,
            pruning_strength: 0.0,
            max_depth: None,
            seed: 9,
        },
    )
    .unwrap();
    let mut agreements = 0usize;
    for i in 0..1000 {
        let probe = random_sample(&mut rng, 50_000 + i);
        let a = forest.predict_label(&probe.features).unwrap();
        let b = tree.predict_label(&probe.features).unwrap();
        assert_eq!(a, b, "single-tree forest must match the plain tree");
        agreements += 1;
    }
    println!(
        "PASS criterion 3: {checked} vote-fraction checks exact; single-tree forest matched the plain tree on {agreements}/1000 vectors"
    );
}

// ---------------------------------------------------------------------
// Criterion 4: temporal hygiene.
// ---------------------------------------------------------------------

type PairKey = (String, String);

fn feature_map(samples: &[LabeledSample]) -> BTreeMap<PairKey, Vec<f64>> {
    samples
        .iter()
        .map(|s| {
            (
                (s.worker_id.clone(), s.task_id.clone()),
                s.features.values().to_vec(),
            )
        })
        .collect()
}

/// Future events that are valid extensions of the log: registrations,
/// submissions, and reviews dated `at_or_after` or later.
fn future_events(
    log: &EventLog,
    at_or_after: NaiveDate,
    include_same_day: bool,
    rng: &mut Rng,
) -> Vec<EventRecord> {
    let earliest = if include_same_day {
        at_or_after
    } else {
        at_or_after + Days::new(1)
    };
    let mut extra = Vec::new();
    let workers: Vec<String> = log.workers().map(str::to_string).collect();
    for task in log.tasks() {
        if task.submission_deadline < earliest {
            continue;
        }
        let open_from = task.registration_open.max(earliest);
        let span = (task.submission_deadline - open_from).num_days();
        if span < 0 {
            continue;
        }
        for _ in 0..2 {
            let worker = &workers[rng.below(workers.len())];
            if log.registration_date(worker, &task.task_id).is_some() {
                continue;
            }
            let offset = rng.below(span as usize + 1) as u64;
            extra.push(EventRecord::registration(
                worker,
                &task.task_id,
                open_from + Days::new(offset),
            ));
            break;
        }
    }
    // Submissions for already-registered pairs, dated in the future.
    for (worker, task_id, reg) in log.registered_pairs() {
        if log.submission_date(worker, task_id).is_some() {
            continue;
        }
        if rng.chance(0.8) {
            continue;
        }
        let at = reg.max(earliest);
        extra.push(EventRecord::submission(worker, task_id, at + Days::new(1)));
    }
    extra
}

#[test]
fn criterion_4_temporal_hygiene() {
    let mut checked_pairs = 0usize;
    for seed in 0..10u64 {
        let config = GeneratorConfig {
            num_workers: 60,
            num_tasks: 30,
            horizon_days: 60,
            duration_max_days: 18,
            activity_rate: 1.0,
            task_arrival_rate: 1.0,
            seed: 400 + seed,
            ..GeneratorConfig::default()
        };
        let log = generate_marketplace(&config).unwrap();
        let day = config.start_date + Days::new(30);
        let pipeline = PipelineConfig::default();
        let before = build_snapshot(&log, day, &pipeline, false).unwrap();

        let mut rng = Rng::from_seed(9000 + seed);
        for include_same_day in [false, true] {
            let extra = future_events(&log, day, include_same_day, &mut rng);
            assert!(!extra.is_empty(), "fixture must append something");
            let tasks: Vec<TaskRecord> = log.tasks().cloned().collect();
            let mut events = log.events().to_vec();
            events.extend(extra);
            let extended = ingest_events(tasks, events, log.vocabulary().to_vec()).unwrap();
            let after = build_snapshot(&extended, day, &pipeline, false).unwrap();

            // TR pairs and features are untouched by future events.
            let tr_before = feature_map(&before.tr);
            let tr_after = feature_map(&after.tr);
            assert_eq!(
                tr_before.keys().collect::<Vec<_>>(),
                tr_after.keys().collect::<Vec<_>>()
            );
            for (key, values) in &tr_before {
                assert_eq!(values, &tr_after[key], "TR features changed for {key:?}");
            }

            // TS features are untouched; same-day registrations may add
            // pairs but never alter existing ones.
            let ts_before = feature_map(&before.ts);
            let ts_after = feature_map(&after.ts);
            if !include_same_day {
                assert_eq!(
                    ts_before.keys().collect::<Vec<_>>(),
                    ts_after.keys().collect::<Vec<_>>()
                );
            }
            for (key, values) in &ts_before {
                let after_values = ts_after
                    .get(key)
                    .unwrap_or_else(|| panic!("TS pair {key:?} disappeared"));
                assert_eq!(values, after_values, "TS features changed for {key:?}");
                checked_pairs += 1;
            }
        }
    }
    println!("PASS criterion 4: {checked_pairs} TS feature vectors field-exact under future-event appends (10 logs)");
}

// ---------------------------------------------------------------------
// Criterion 5: scripted cancellation scenario.
// ---------------------------------------------------------------------

struct Scripted {
    task_id: &'static str,
    duration: i64,
    /// Offsets (days after open) with an empty recommendation list; other
    /// offsets in the monitoring range have a nonempty list.
    empty_offsets: &'static [i64],
    healthy: bool,
}

#[test]
fn criterion_5_cancellation_exactness() {
    let open = date("2015-03-01");
    let scripted: Vec<Scripted> = vec![
        // Flagged on open+3 after empties on days 1..=3; savings 27/30.
        Scripted { task_id: "c30", duration: 30, empty_offsets: &[1, 2, 3], healthy: false },
        // Duration 7 flagged at open+3: savings 4/7.
        Scripted { task_id: "c07", duration: 7, empty_offsets: &[1, 2, 3], healthy: false },
        // Broken streak: never flagged, actually cancelled.
        Scripted { task_id: "miss", duration: 10, empty_offsets: &[1, 3, 4], healthy: false },
        // Healthy with constant recommendations.
        Scripted { task_id: "ok1", duration: 12, empty_offsets: &[], healthy: true },
        // Healthy but looks dead for 3 days: false positive.
        Scripted { task_id: "fp1", duration: 12, empty_offsets: &[2, 3, 4], healthy: true },
        // Cancelled, flagged late (days 5..=7): savings (10-7)/10.
        Scripted { task_id: "late", duration: 10, empty_offsets: &[5, 6, 7], healthy: false },
        // Cancelled with two-day streaks only: never flagged.
        Scripted { task_id: "two", duration: 9, empty_offsets: &[1, 2, 4, 5, 7, 8], healthy: false },
        // Healthy, one isolated empty day.
        Scripted { task_id: "ok2", duration: 8, empty_offsets: &[4], healthy: true },
        // Minimum monitorable duration, empty throughout: flag at open+3.
        Scripted { task_id: "c03", duration: 3, empty_offsets: &[1, 2, 3], healthy: false },
        // Cancelled but always recommended: false negative.
        Scripted { task_id: "fn1", duration: 14, empty_offsets: &[], healthy: false },
    ];

    // Build the log: every task gets one registrant; healthy tasks get a
    // rewarded submission, the rest end with zero rewarded submissions.
    let mut tasks = Vec::new();
    let mut events = Vec::new();
    for s in &scripted {
        tasks.push(TaskRecord {
            task_id: s.task_id.to_string(),
            task_type: TaskType::Code,
            registration_open: open,
            submission_deadline: open + Days::new(s.duration as u64),
            total_prize: 500.0,
            required_technologies: BTreeSet::new(),
        });
        events.push(EventRecord::registration("w1", s.task_id, open));
        if s.healthy {
            events.push(EventRecord::submission("w1", s.task_id, open + Days::new(1)));
            events.push(EventRecord::review(
                "w1",
                s.task_id,
                open + Days::new(s.duration as u64 + 1),
                "88.00".parse().unwrap(),
                true,
            ));
        }
    }
    // Horizon marker so every deadline has passed.
    tasks.push(TaskRecord {
        task_id: "horizon".into(),
        task_type: TaskType::Code,
        registration_open: open,
        submission_deadline: open + Days::new(60),
        total_prize: 1.0,
        required_technologies: BTreeSet::new(),
    });
    events.push(EventRecord::registration("w1", "horizon", open + Days::new(46)));
    let log = ingest_events(tasks, events, vec![]).unwrap();

    let mut fired: BTreeMap<String, Option<NaiveDate>> = BTreeMap::new();
    for s in &scripted {
        let task = log.task(s.task_id).unwrap();
        let mut state = CancellationState::new(s.task_id);
        for offset in 1..s.duration {
            let day = open + Days::new(offset as u64);
            let entries = if s.empty_offsets.contains(&offset) {
                vec![]
            } else {
                vec![ScoredPair {
                    worker_id: "w1".into(),
                    task_id: s.task_id.to_string(),
                    day,
                    probs: triple(0.5, 0.2, 0.3),
                }]
            };
            let boundary = entries.len();
            let list = RankedList {
                subject: Subject::Task(s.task_id.to_string()),
                day,
                entries,
                boundary,
            };
            mark_potential_cancellation(task, day, &list, &mut state).unwrap();
            predict_cancellation(&mut state, day, 3);
        }
        fired.insert(s.task_id.to_string(), state.fired_on);
    }

    // Exactly the 3-consecutive-empty tasks fire, on the third empty day.
    let expected_fired: BTreeMap<&str, Option<i64>> = BTreeMap::from([
        ("c30", Some(3)),
        ("c07", Some(3)),
        ("miss", None),
        ("ok1", None),
        ("fp1", Some(4)),
        ("late", Some(7)),
        ("two", None),
        ("ok2", None),
        ("c03", None), // only offsets 1 and 2 are monitorable (< deadline)
        ("fn1", None),
    ]);
    for (task_id, expected_offset) in &expected_fired {
        let got = fired[*task_id];
        let expected = expected_offset.map(|o| open + Days::new(o as u64));
        assert_eq!(got, expected, "firing day mismatch for {task_id}");
    }

    // Too-short tasks are rejected outright.
    let short_task = TaskRecord {
        task_id: "short".into(),
        task_type: TaskType::Code,
        registration_open: open,
        submission_deadline: open + Days::new(2),
        total_prize: 1.0,
        required_technologies: BTreeSet::new(),
    };
    let empty = RankedList {
        subject: Subject::Task("short".into()),
        day: open,
        entries: vec![],
        boundary: 0,
    };
    assert!(mark_potential_cancellation(
        &short_task,
        open,
        &empty,
        &mut CancellationState::new("short")
    )
    .is_err());

    let report = cancellation_metrics(&log, &fired).unwrap();
    let outcome = |id: &str| report.outcomes.iter().find(|o| o.task_id == id).unwrap();

    let c30 = outcome("c30");
    assert!(
        (c30.savings_pct.unwrap() - 90.0).abs() < 1e-12,
        "duration-30 savings {}",
        c30.savings_pct.unwrap()
    );
    let c07 = outcome("c07");
    assert!((c07.savings_pct.unwrap() - 400.0 / 7.0).abs() < 1e-12);
    let late = outcome("late");
    assert!((late.savings_pct.unwrap() - 30.0).abs() < 1e-12);

    for o in &report.outcomes {
        if let Some(pct) = o.savings_pct {
            let task = log.task(&o.task_id).unwrap();
            let expected = (task.submission_deadline - o.prediction_day.unwrap()).num_days()
                as f64
                / task.duration_days() as f64
                * 100.0;
            assert!((pct - expected).abs() < 1e-12);
        }
    }
    // miss/two/fn1/c03 are cancelled but unflagged; fp1 flagged but healthy.
    assert_eq!(report.true_positives, 3);
    assert_eq!(report.false_positives, 1);
    assert_eq!(report.false_negatives, 4);
    assert_eq!(report.true_negatives, 2);

    println!(
        "PASS criterion 5: flags exact; savings 90.00% (d30), {:.2}% (d7); all savings match the formula to 1e-12",
        400.0 / 7.0
    );
}

// ---------------------------------------------------------------------
// Criterion 6: metric oracles on randomized small instances.
// ---------------------------------------------------------------------

#[test]
fn criterion_6_metric_oracles() {
    let mut rng = Rng::from_seed(0x0A11CE);
    let mut cases = 0usize;

    // Precision/recall/F against a brute-force tally.
    for _ in 0..50 {
        let n = 2 + rng.below(29);
        let predictions: Vec<OutcomeLabel> =
            (0..n).map(|_| OutcomeLabel::from_index(rng.below(3))).collect();
        let actuals: Vec<OutcomeLabel> =
            (0..n).map(|_| OutcomeLabel::from_index(rng.below(3))).collect();
        let metrics = confusion_metrics(&predictions, &actuals).unwrap();
        for label in OutcomeLabel::ALL {
            let tp = predictions.iter().zip(&actuals).filter(|(p, a)| **p == label && **a == label).count();
            let fp = predictions.iter().zip(&actuals).filter(|(p, a)| **p == label && **a != label).count();
            let fn_ = predictions.iter().zip(&actuals).filter(|(p, a)| **p != label && **a == label).count();
            let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
            let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
            let f = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            let got = metrics.class(label);
            assert!((got.precision - precision).abs() <= 1e-12);
            assert!((got.recall - recall).abs() <= 1e-12);
            assert!((got.f_measure - f).abs() <= 1e-12);
        }
        cases += 1;
    }

    // AUC against full pair enumeration.
    for _ in 0..50 {
        let n = 4 + rng.below(27);
        let scores: Vec<ProbabilityTriple> = (0..n)
            .map(|_| {
                let w = rng.below(6) as f64 / 5.0;
                ProbabilityTriple::from_weights(&[w.max(0.01), (1.0 - w).max(0.01), 0.2])
            })
            .collect();
        let actuals: Vec<OutcomeLabel> =
            (0..n).map(|_| OutcomeLabel::from_index(rng.below(3))).collect();
        for label in OutcomeLabel::ALL {
            let auc = auc_one_vs_rest(&scores, &actuals, label);
            let positives: Vec<f64> = scores
                .iter()
                .zip(&actuals)
                .filter(|(_, a)| **a == label)
                .map(|(s, _)| s.get(label))
                .collect();
            let negatives: Vec<f64> = scores
                .iter()
                .zip(&actuals)
                .filter(|(_, a)| **a != label)
                .map(|(s, _)| s.get(label))
                .collect();
            if positives.is_empty() || negatives.is_empty() {
                assert_eq!(auc, None);
                continue;
            }
            let mut wins = 0.0;
            for p in &positives {
                for q in &negatives {
                    if p > q {
                        wins += 1.0;
                    } else if p == q {
                        wins += 0.5;
                    }
                }
            }
            let expected = wins / (positives.len() * negatives.len()) as f64;
            assert!((auc.unwrap() - expected).abs() <= 1e-12);
        }
        cases += 1;
    }

    // Recall@K against direct counting.
    for _ in 0..50 {
        let n_tasks = 1 + rng.below(8);
        let mut rankings = Vec::new();
        let mut winners = WinnerSets::new();
        for t in 0..n_tasks {
            let task_id = format!("t{t}");
            let n_entries = rng.below(5);
            let entries: Vec<ScoredPair> = (0..n_entries)
                .map(|i| ScoredPair {
                    worker_id: format!("w{}", rng.below(9)),
                    task_id: task_id.clone(),
                    day: date("2015-01-01"),
                    probs: triple(0.9 - 0.05 * i as f64, 0.05, 0.05 + 0.05 * i as f64),
                })
                .collect();
            let boundary = entries.len();
            rankings.push(RankedList {
                subject: Subject::Task(task_id.clone()),
                day: date("2015-01-01"),
                entries,
                boundary,
            });
            if rng.chance(0.8) {
                let ws: BTreeSet<String> =
                    (0..1 + rng.below(2)).map(|_| format!("w{}", rng.below(9))).collect();
                winners.insert(task_id, ws);
            }
        }
        let k = 1 + rng.below(4);
        match recall_at_k(&rankings, &winners, k) {
            Ok(r) => {
                let mut hits = 0usize;
                let mut evaluated = 0usize;
                for list in &rankings {
                    let Subject::Task(tid) = &list.subject else { unreachable!() };
                    let Some(ws) = winners.get(tid).filter(|w| !w.is_empty()) else {
                        continue;
                    };
                    evaluated += 1;
                    if list.entries.iter().take(k).any(|p| ws.contains(&p.worker_id)) {
                        hits += 1;
                    }
                }
                assert_eq!((r.hits, r.evaluated), (hits, evaluated));
                assert!((r.fraction - hits as f64 / evaluated as f64).abs() <= 1e-12);
            }
            Err(_) => {
                let evaluable = rankings.iter().any(|l| {
                    let Subject::Task(tid) = &l.subject else { return false };
                    winners.get(tid).is_some_and(|w| !w.is_empty())
                });
                assert!(!evaluable || rankings.is_empty());
            }
        }
        cases += 1;
    }

    // Vargha-Delaney against pair enumeration.
    for _ in 0..50 {
        let n = 1 + rng.below(30);
        let m = 1 + rng.below(30);
        let a: Vec<f64> = (0..n).map(|_| rng.below(8) as f64).collect();
        let b: Vec<f64> = (0..m).map(|_| rng.below(8) as f64).collect();
        let got = vargha_delaney(&a, &b).unwrap();
        let mut wins = 0.0;
        for x in &a {
            for y in &b {
                if x > y {
                    wins += 1.0;
                } else if x == y {
                    wins += 0.5;
                }
            }
        }
        let expected = wins / (n * m) as f64;
        assert!((got - expected).abs() <= 1e-12);
        cases += 1;
    }

    // Fixed reference points.
    assert_eq!(vargha_delaney(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), 0.5);
    assert_eq!(vargha_delaney(&[1.0, 2.0], &[0.0, 3.0]).unwrap(), 0.5);
    assert_eq!(vargha_delaney(&[5.0], &[1.0]).unwrap(), 1.0);

    println!("PASS criterion 6: {cases} randomized instances matched brute-force oracles within 1e-12");
}

// ---------------------------------------------------------------------
// Criterion 7: planted-structure end-to-end run.
// ---------------------------------------------------------------------

#[test]
fn criterion_7_planted_structure_end_to_end() {
    let config = GeneratorConfig::default();
    assert!(config.num_workers >= 500);
    assert!(config.num_tasks >= 300);
    assert_eq!(config.horizon_days, 120);
    assert_eq!(config.seed, 7);
    let log = generate_marketplace(&config).unwrap();
    let start = config.start_date + Days::new(61);
    let pipeline = PipelineConfig::default();

    let mut recall1 = Vec::new();
    let mut quitter_f = Vec::new();
    let mut majority_f = Vec::new();
    let mut baseline = None;
    for seed in 1..=5u64 {
        let params = ModelParams::RandomForest(ForestParams {
            num_trees: 100,
            num_features: 50,
            seed,
            ..ForestParams::default()
        });
        let outputs = walk_forward(&log, start, 30, &pipeline, &params).unwrap();
        let report = &outputs.report;
        assert_eq!(report.daily.len(), 30);
        recall1.push(report.totals.recall_curve[0].fraction);
        quitter_f.push(report.totals.classes[OutcomeLabel::Quitter.index()].f_measure);

        // Majority baseline: predict quitter everywhere. Its F depends
        // only on the label mix, identical across learner seeds.
        let total = report.totals.confusion.total() as f64;
        let quitter_share =
            report.totals.confusion.actual_count(OutcomeLabel::Quitter) as f64 / total;
        majority_f.push(2.0 * quitter_share / (1.0 + quitter_share));

        // Uniform-random ranking baseline: expected recall@1 when the
        // registered workers of each evaluated instance are shuffled
        // uniformly, i.e. mean of winners/registered.
        if baseline.is_none() {
            let mut sum = 0.0;
            let mut n = 0usize;
            for day_rec in &outputs.recommendations {
                for list in &day_rec.task_lists {
                    let Subject::Task(task_id) = &list.subject else { continue };
                    let task = log.task(task_id).unwrap();
                    if !log.task_completed(task) {
                        continue;
                    }
                    let winners = log.winners_of(task_id);
                    if winners.is_empty() {
                        continue;
                    }
                    let registered: Vec<&str> = log
                        .registrants_of(task_id)
                        .into_iter()
                        .filter(|(_, reg)| *reg <= day_rec.day)
                        .map(|(id, _)| id)
                        .collect();
                    if registered.is_empty() {
                        continue;
                    }
                    let winners_present =
                        registered.iter().filter(|id| winners.contains(id)).count();
                    sum += winners_present as f64 / registered.len() as f64;
                    n += 1;
                }
            }
            baseline = Some(sum / n as f64);
        }
    }

    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let mean_recall1 = mean(&recall1);
    let mean_quitter_f = mean(&quitter_f);
    let mean_majority_f = mean(&majority_f);
    let baseline = baseline.unwrap();

    assert!(
        mean_recall1 >= 2.0 * baseline,
        "recall@1 {mean_recall1:.4} < 2x uniform baseline {baseline:.4}"
    );
    assert!(
        mean_quitter_f >= mean_majority_f,
        "quitter F {mean_quitter_f:.4} below majority baseline {mean_majority_f:.4}"
    );
    println!(
        "PASS criterion 7: recall@1 {mean_recall1:.4} vs 2x baseline {:.4}; quitter F {mean_quitter_f:.4} vs majority {mean_majority_f:.4} (5 seeds)",
        2.0 * baseline
    );
}

// ---------------------------------------------------------------------
// Criterion 8: grid shapes and deterministic tie-breaking.
// ---------------------------------------------------------------------

#[test]
fn criterion_8_grid_shape_and_tiebreaks() {
    let rf = default_grid(LearnerKind::RandomForest, 0);
    let dt = default_grid(LearnerKind::DecisionTree, 0);
    assert_eq!(rf.len(), 20, "forest grid must enumerate 20 configs");
    assert_eq!(dt.len(), 18, "tree grid must enumerate 18 configs");

    // Inject fully tied scores: the ranking must come out in complexity
    // order regardless of input order.
    let tied = |params: &ModelParams| ConfigScore {
        params: params.clone(),
        mean_winner_f: 0.7777777777,
        mean_quitter_f: 0.888,
        mean_winner_auc: None,
        mean_quitter_auc: None,
        days_scored: 3,
    };
    let mut scores: Vec<ConfigScore> = rf.iter().map(tied).collect();
    scores.rotate_left(7);
    scores.sort_by(selection_order);
    let picks: Vec<(usize, usize)> = scores
        .iter()
        .map(|s| match &s.params {
            ModelParams::RandomForest(p) => (p.num_trees, p.num_features),
            _ => unreachable!(),
        })
        .collect();
    let mut expected = picks.clone();
    expected.sort();
    assert_eq!(picks, expected, "ties must resolve to ascending complexity");
    assert_eq!(picks[0], (10, 10));

    let mut dt_scores: Vec<ConfigScore> = dt.iter().map(tied).collect();
    dt_scores.rotate_left(5);
    dt_scores.sort_by(selection_order);
    match &dt_scores[0].params {
        ModelParams::DecisionTree(p) => {
            assert_eq!(p.pruning_strength, 1.0, "strongest pruning wins DT ties");
            assert_eq!(p.min_leaf, 10);
        }
        _ => unreachable!(),
    }

    println!("PASS criterion 8: 20 forest configs, 18 tree configs, complexity tie-breaks deterministic");
}
