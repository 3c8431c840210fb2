use std::time::Instant;

use taskcast::eval::walk_forward;
use taskcast::features::PipelineConfig;
use taskcast::learn::{ForestParams, ModelParams};
use taskcast::market::OutcomeLabel;
use taskcast::synth::{generate_marketplace, GeneratorConfig};

#[test]
#[ignore]
fn calibration_probe() {
    let config = GeneratorConfig::default();
    let t0 = Instant::now();
    let log = generate_marketplace(&config).unwrap();
    println!("generate: {:?}", t0.elapsed());
    println!("tasks={} events={}", log.num_tasks(), log.events().len());
    println!("registrations={}", log.num_registrations());

    let mut counts = [0usize; 3];
    for (w, t, _) in log.registered_pairs() {
        if let Ok(label) = log.derive_outcome(w, t) {
            counts[label.index()] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    println!(
        "labels: winner={} quitter={} submitter={} total={} quit_rate={:.3}",
        counts[0],
        counts[1],
        counts[2],
        total,
        counts[1] as f64 / total as f64
    );
    let cancelled = log
        .tasks()
        .filter(|t| log.task_completed(t) && log.actually_cancelled(t))
        .count();
    println!("cancelled tasks: {cancelled}/{}", log.num_tasks());

    // registrants per task distribution
    let mut regs: Vec<usize> = log.tasks().map(|t| log.registrants_of(&t.task_id).len()).collect();
    regs.sort_unstable();
    println!(
        "registrants/task: min={} p50={} p90={} max={} mean={:.1}",
        regs[0],
        regs[regs.len() / 2],
        regs[regs.len() * 9 / 10],
        regs[regs.len() - 1],
        regs.iter().sum::<usize>() as f64 / regs.len() as f64
    );

    // winners per completed task
    let mut with_winner = 0;
    for t in log.tasks() {
        if log.task_completed(t) && !log.winners_of(&t.task_id).is_empty() {
            with_winner += 1;
        }
    }
    println!("tasks with winners: {with_winner}");

    // one walk-forward run, 30 days starting day 61
    let start = config.start_date + chrono::Days::new(61);
    let params = ModelParams::RandomForest(ForestParams {
        seed: 1,
        ..ForestParams::default()
    });
    let t0 = Instant::now();
    let outputs = walk_forward(&log, start, 30, &PipelineConfig::default(), &params).unwrap();
    println!("walk_forward(30d, rf100x50): {:?}", t0.elapsed());
    let report = &outputs.report;
    let tr_sizes: Vec<usize> = report.daily.iter().map(|d| d.tr_size).collect();
    println!("tr sizes: first={} last={}", tr_sizes[0], tr_sizes[29]);
    let ts_sizes: Vec<usize> = report.daily.iter().map(|d| d.ts_size).collect();
    println!("ts sizes: first={} last={}", ts_sizes[0], ts_sizes[29]);
    println!(
        "recall curve: {:?}",
        report
            .totals
            .recall_curve
            .iter()
            .map(|r| (r.k, (r.fraction * 1000.0).round() / 1000.0, r.evaluated))
            .collect::<Vec<_>>()
    );
    println!(
        "winner f={:.3} quitter f={:.3}",
        report.totals.classes[OutcomeLabel::Winner.index()].f_measure,
        report.totals.classes[OutcomeLabel::Quitter.index()].f_measure
    );
    println!("pooled confusion [actual][predicted] W/Q/S: {:?}", report.totals.confusion);
    for label in OutcomeLabel::ALL {
        let c = report.totals.classes[label.index()];
        println!("  {label}: P={:.4} R={:.4} F={:.4}", c.precision, c.recall, c.f_measure);
    }
    println!(
        "quitter share in eval TS: {:.3}",
        report.totals.confusion.actual_count(OutcomeLabel::Quitter) as f64
            / report.totals.confusion.total() as f64
    );
    if let Some(c) = &report.cancellation {
        println!(
            "cancellation: p={:.3} r={:.3} f={:.3} tp={} fp={} fn={} mean_savings={:?}",
            c.precision,
            c.recall,
            c.f_measure,
            c.true_positives,
            c.false_positives,
            c.false_negatives,
            c.mean_savings_pct
        );
    }
    println!(
        "savings all: exp pairs={} mean={:.2} | unexp pairs={} mean={:.2}",
        report.savings_all.experienced.pairs,
        report.savings_all.experienced.mean_days,
        report.savings_all.unexperienced.pairs,
        report.savings_all.unexperienced.mean_days
    );

    // uniform-random baseline for recall@1: expectation over evaluated
    // (day, task) instances of winners_registered / registered.
    let mut baseline_sum = 0.0;
    let mut baseline_n = 0usize;
    for day_rec in &outputs.recommendations {
        for list in &day_rec.task_lists {
            let taskcast::engine::Subject::Task(task_id) = &list.subject else {
                continue;
            };
            let task = log.task(task_id).unwrap();
            if !log.task_completed(task) {
                continue;
            }
            let winners = log.winners_of(task_id);
            if winners.is_empty() {
                continue;
            }
            let registered: Vec<_> = log
                .registrants_of(task_id)
                .into_iter()
                .filter(|(_, reg)| *reg <= day_rec.day)
                .collect();
            if registered.is_empty() {
                continue;
            }
            let w = registered
                .iter()
                .filter(|(id, _)| winners.contains(id))
                .count();
            baseline_sum += w as f64 / registered.len() as f64;
            baseline_n += 1;
        }
    }
    println!(
        "uniform baseline recall@1 = {:.3} over {} instances",
        baseline_sum / baseline_n as f64,
        baseline_n
    );

    // diagnosis: why do instances miss at K=1?
    let mut winner_unregistered = 0usize;
    let mut empty_list = 0usize;
    let mut wrong_top = 0usize;
    let mut hits = 0usize;
    let mut total = 0usize;
    for day_rec in &outputs.recommendations {
        for list in &day_rec.task_lists {
            let taskcast::engine::Subject::Task(task_id) = &list.subject else { continue };
            let task = log.task(task_id).unwrap();
            if !log.task_completed(task) { continue; }
            let winners = log.winners_of(task_id);
            if winners.is_empty() { continue; }
            total += 1;
            let reg_winner = log
                .registrants_of(task_id)
                .into_iter()
                .any(|(id, reg)| reg <= day_rec.day && winners.contains(&id));
            if !reg_winner { winner_unregistered += 1; continue; }
            if list.entries.is_empty() { empty_list += 1; continue; }
            if winners.contains(&list.entries[0].worker_id.as_str()) { hits += 1; } else { wrong_top += 1; }
        }
    }
    println!(
        "K=1 diagnosis over {total}: winner_unregistered={winner_unregistered} empty_list={empty_list} wrong_top={wrong_top} hit={hits}"
    );

    // model view on one mid-run day
    use taskcast::features::build_snapshot;
    use taskcast::learn::train;
    let day = config.start_date + chrono::Days::new(75);
    let snap = build_snapshot(&log, day, &PipelineConfig::default(), false).unwrap();
    let mut tr_counts = [0usize; 3];
    for s in &snap.tr { tr_counts[s.label.unwrap().index()] += 1; }
    println!("day75 TR counts W/Q/S = {tr_counts:?} of {}", snap.tr.len());
    let model = train(&snap.tr, &params.reseeded(999)).unwrap();
    let mut sums = [(0.0, 0usize); 3];
    for s in &snap.ts {
        let Some(label) = s.label else { continue };
        let p = model.predict_proba(&s.features).unwrap();
        sums[label.index()].0 += p.winner;
        sums[label.index()].1 += 1;
    }
    for (i, name) in ["winner", "quitter", "submitter"].iter().enumerate() {
        let (sum, n) = sums[i];
        println!("mean p_winner for actual {name}: {:.3} (n={})", sum / n.max(1) as f64, n);
    }
    // split TS winners by visible history
    let mut rich = (0.0, 0usize);
    let mut cold = (0.0, 0usize);
    for s in &snap.ts {
        let Some(label) = s.label else { continue };
        if label != OutcomeLabel::Winner { continue; }
        let p = model.predict_proba(&s.features).unwrap();
        let window_wins = s.features.values()[112];
        if window_wins >= 1.0 {
            rich.0 += p.winner; rich.1 += 1;
        } else {
            cold.0 += p.winner; cold.1 += 1;
        }
    }
    println!("TS winners with window_wins>=1: n={} mean p_winner={:.3}", rich.1, rich.0 / rich.1.max(1) as f64);
    println!("TS winners with window_wins==0: n={} mean p_winner={:.3}", cold.1, cold.0 / cold.1.max(1) as f64);

    // in-sample check
    let mut correct = 0usize;
    let mut tr_winner_hits = 0usize;
    let mut tr_winner_total = 0usize;
    for s in &snap.tr {
        let pred = model.predict_label(&s.features).unwrap();
        if pred == s.label.unwrap() { correct += 1; }
        if s.label.unwrap() == OutcomeLabel::Winner {
            tr_winner_total += 1;
            if pred == OutcomeLabel::Winner { tr_winner_hits += 1; }
        }
    }
    println!("in-sample acc={:.3} winner recall={:.3}", correct as f64 / snap.tr.len() as f64, tr_winner_hits as f64 / tr_winner_total.max(1) as f64);
}
