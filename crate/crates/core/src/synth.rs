//! Deterministic synthetic marketplace with planted structure: workers
//! carry latent per-technology skill, registration follows skill-prize
//! attraction, submission follows skill and quit propensity, and review
//! scores increase in skill so the better-skilled registrants win.
//!
//! All randomness flows from one root seed through per-entity sub-streams,
//! so a worker's behavior does not shift when unrelated config fields
//! change.

use std::collections::BTreeSet;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{
    ingest_events, EventLog, EventRecord, MarketError, ReviewScore, TaskRecord, TaskType,
};
use crate::rng::{sub_seed, Rng};

/// Technology vocabulary slots available to the generator; the full list
/// covers every one-hot feature slot.
pub const DEFAULT_VOCABULARY: [&str; 107] = [
    "java", "javascript", "python", "css", "html", "html5", "sql", "angularjs", "node_js",
    "react", "ios", "android", "swift", "objective_c", "c_sharp", "dot_net", "ruby", "rails",
    "php", "go", "scala", "kotlin", "typescript", "jquery", "bootstrap", "less", "sass",
    "postgresql", "mysql", "mongodb", "redis", "elasticsearch", "cassandra", "sqlite", "oracle",
    "sql_server", "dynamodb", "aws", "azure", "gcp", "heroku", "docker", "kubernetes", "jenkins",
    "git", "svn", "rest", "graphql", "soap", "json", "xml", "protobuf", "grpc", "kafka",
    "rabbitmq", "spark", "hadoop", "hive", "storm", "flink", "tensorflow", "pytorch", "keras",
    "scikit_learn", "pandas", "numpy", "matlab", "r_lang", "julia", "perl", "bash", "powershell",
    "c_plus_plus", "c_lang", "rust", "haskell", "erlang", "elixir", "clojure", "f_sharp",
    "visual_basic", "cobol", "fortran", "assembly_lang", "unity", "unreal", "opengl", "webgl",
    "vulkan", "directx", "qt", "gtk", "electron", "cordova", "xamarin", "flutter", "react_native",
    "ionic", "selenium", "cypress", "junit", "mockito", "jmeter", "wordpress", "drupal", "magento",
    "salesforce",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("generated events failed validation: {0}")]
    Generation(#[from] MarketError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub num_workers: usize,
    pub num_tasks: usize,
    pub horizon_days: u32,
    /// Technologies drawn from the built-in vocabulary (at most 107).
    pub vocabulary_size: usize,
    /// Expected registrations per worker per week, before skill scaling.
    pub activity_rate: f64,
    /// Global tendency of registered workers to never submit.
    pub quit_propensity: f64,
    /// Expected new tasks per arrival-window day.
    pub task_arrival_rate: f64,
    pub duration_min_days: u32,
    pub duration_max_days: u32,
    pub prize_min: f64,
    pub prize_max: f64,
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            num_workers: 500,
            num_tasks: 300,
            horizon_days: 120,
            vocabulary_size: 40,
            activity_rate: 0.45,
            quit_propensity: 0.55,
            task_arrival_rate: 3.5,
            duration_min_days: 4,
            duration_max_days: 30,
            prize_min: 250.0,
            prize_max: 2500.0,
            start_date: NaiveDate::from_ymd_opt(2014, 9, 1).unwrap(),
            seed: 7,
        }
    }
}

/// Days reserved after a deadline so reviews always land inside the
/// horizon.
const REVIEW_LAG_DAYS: u32 = 4;
/// Review score a submission must reach to be rewarded.
const PASSING_CENTI: i32 = 7500;

const TAG_ARRIVALS: u64 = 1;
const TAG_TASK: u64 = 2;
const TAG_WORKER: u64 = 3;
const TAG_SKILL: u64 = 4;
const TAG_REVIEW: u64 = 5;

impl GeneratorConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidConfig(msg));
        if self.num_workers == 0 || self.num_tasks == 0 {
            return fail("num_workers and num_tasks must be positive".into());
        }
        if self.vocabulary_size == 0 || self.vocabulary_size > DEFAULT_VOCABULARY.len() {
            return fail(format!(
                "vocabulary_size must be in [1, {}]",
                DEFAULT_VOCABULARY.len()
            ));
        }
        if self.duration_min_days == 0 || self.duration_min_days > self.duration_max_days {
            return fail("duration range must satisfy 1 <= min <= max".into());
        }
        if self.horizon_days < self.duration_max_days + REVIEW_LAG_DAYS {
            return fail(format!(
                "horizon_days must be at least duration_max_days + {REVIEW_LAG_DAYS}"
            ));
        }
        if !(0.0..=1.0).contains(&self.quit_propensity) {
            return fail("quit_propensity must be in [0, 1]".into());
        }
        if self.activity_rate <= 0.0 || self.task_arrival_rate <= 0.0 {
            return fail("activity_rate and task_arrival_rate must be positive".into());
        }
        if !(self.prize_min >= 0.0 && self.prize_min <= self.prize_max) {
            return fail("prize range must satisfy 0 <= min <= max".into());
        }
        Ok(())
    }

    pub fn vocabulary(&self) -> Vec<String> {
        DEFAULT_VOCABULARY[..self.vocabulary_size]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }
}

pub fn worker_ident(index: usize) -> String {
    format!("w{index:04}")
}

pub fn task_ident(index: usize) -> String {
    format!("{}", 30_000_000 + index)
}

/// Latent overall skill of a worker, a pure function of (seed, index).
///
/// Skill is bimodal: a small professional tier sits well above a broad
/// crowd, mirroring how a competitive marketplace concentrates wins among
/// its regulars.
pub fn worker_base_skill(seed: u64, worker_index: usize) -> f64 {
    let mut rng = Rng::from_seed(sub_seed(sub_seed(seed, TAG_SKILL), worker_index as u64));
    let tier = rng.unit();
    let level = rng.unit();
    if tier < 0.10 {
        0.85 + 0.15 * level
    } else {
        0.6 * level
    }
}

/// Latent skill of a worker on one technology: anchored to the base skill
/// with a per-technology wobble.
fn worker_tech_skill(seed: u64, worker_index: usize, tech_index: usize) -> f64 {
    let stream = sub_seed(
        sub_seed(sub_seed(seed, TAG_SKILL), worker_index as u64),
        1 + tech_index as u64,
    );
    let wobble = Rng::from_seed(stream).unit();
    let base = worker_base_skill(seed, worker_index);
    (0.9 * base + 0.1 * wobble).clamp(0.0, 1.0)
}

struct GenTask {
    record: TaskRecord,
    open_offset: u32,
    duration: u32,
    tech_indices: Vec<usize>,
}

fn mean_match(seed: u64, worker: usize, task: &GenTask) -> f64 {
    if task.tech_indices.is_empty() {
        return worker_base_skill(seed, worker);
    }
    task.tech_indices
        .iter()
        .map(|&t| worker_tech_skill(seed, worker, t))
        .sum::<f64>()
        / task.tech_indices.len() as f64
}

/// Generates a full marketplace history and validates it through
/// ingestion. Identical configs produce identical logs.
pub fn generate_marketplace(config: &GeneratorConfig) -> Result<EventLog, SynthError> {
    config.validate()?;
    let seed = config.seed;
    let vocabulary = config.vocabulary();
    let date_of = |offset: u32| config.start_date + Days::new(u64::from(offset));

    // Task arrivals over the window that leaves room for the longest task
    // plus its reviews.
    let arrival_end = config.horizon_days - config.duration_max_days - REVIEW_LAG_DAYS;
    let mut arrivals_rng = Rng::from_seed(sub_seed(seed, TAG_ARRIVALS));
    let mut open_offsets = Vec::with_capacity(config.num_tasks);
    'outer: for day in 0..=arrival_end {
        for _ in 0..arrivals_rng.poisson(config.task_arrival_rate) {
            open_offsets.push(day);
            if open_offsets.len() == config.num_tasks {
                break 'outer;
            }
        }
    }
    while open_offsets.len() < config.num_tasks {
        open_offsets.push(arrival_end);
    }

    let mut tasks = Vec::with_capacity(config.num_tasks);
    for (index, &open_offset) in open_offsets.iter().enumerate() {
        let mut rng = Rng::from_seed(sub_seed(sub_seed(seed, TAG_TASK), index as u64));
        let task_type = match rng.unit() {
            u if u < 0.50 => TaskType::Code,
            u if u < 0.75 => TaskType::Assembly,
            u if u < 0.92 => TaskType::UiPrototype,
            _ => TaskType::Other("first2finish".into()),
        };
        let duration = rng.int_in(
            i64::from(config.duration_min_days),
            i64::from(config.duration_max_days),
        ) as u32;
        let prize = {
            let raw = rng.range(config.prize_min, config.prize_max);
            (raw * 100.0).round() / 100.0
        };
        let tech_count = (1 + rng.below(4)).min(config.vocabulary_size);
        let mut tech_indices = Vec::new();
        while tech_indices.len() < tech_count {
            // Squared draw skews toward low indices: popular technologies.
            let t = ((config.vocabulary_size as f64) * rng.unit().powi(2)) as usize;
            let t = t.min(config.vocabulary_size - 1);
            if !tech_indices.contains(&t) {
                tech_indices.push(t);
            }
        }
        tech_indices.sort_unstable();
        let record = TaskRecord {
            task_id: task_ident(index),
            task_type,
            registration_open: date_of(open_offset),
            submission_deadline: date_of(open_offset + duration),
            total_prize: prize,
            required_technologies: tech_indices
                .iter()
                .map(|&t| vocabulary[t].clone())
                .collect(),
        };
        tasks.push(GenTask {
            record,
            open_offset,
            duration,
            tech_indices,
        });
    }

    // Per-worker persistent streams and registration bookkeeping.
    let mut worker_rngs: Vec<Rng> = (0..config.num_workers)
        .map(|w| Rng::from_seed(sub_seed(sub_seed(seed, TAG_WORKER), w as u64)))
        .collect();
    let mut registered: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); config.num_workers];
    let mut registrations_per_task: Vec<Vec<usize>> = vec![Vec::new(); tasks.len()];
    let mut submitters_per_task: Vec<Vec<usize>> = vec![Vec::new(); tasks.len()];
    let mut events: Vec<EventRecord> = Vec::new();

    let prize_span = (config.prize_max - config.prize_min).max(f64::EPSILON);
    for day in 0..config.horizon_days {
        let open_tasks: Vec<usize> = (0..tasks.len())
            .filter(|&t| {
                tasks[t].open_offset <= day && day <= tasks[t].open_offset + tasks[t].duration
            })
            .collect();
        if open_tasks.is_empty() {
            continue;
        }
        for worker in 0..config.num_workers {
            let base = worker_base_skill(seed, worker);
            let rng = &mut worker_rngs[worker];
            let gate = rng.unit();

            // Candidate tasks and their attraction are drawn even on
            // non-registering days so the stream stays aligned.
            let mut best: Option<(f64, usize)> = None;
            for _ in 0..3 {
                let t = open_tasks[rng.below(open_tasks.len())];
                let noise = rng.unit();
                if registered[worker].contains(&t) {
                    continue;
                }
                let match_skill = mean_match(seed, worker, &tasks[t]);
                let prize_norm = (tasks[t].record.total_prize - config.prize_min) / prize_span;
                let rel_age = (day - tasks[t].open_offset) as f64
                    / tasks[t].duration.max(1) as f64;
                let attraction = 0.62 * match_skill
                    + 0.12 * prize_norm
                    + 0.05 * noise
                    + 0.21 * (1.0 - rel_age);
                if best.is_none_or(|(a, _)| attraction > a) {
                    best = Some((attraction, t));
                }
            }
            let Some((attraction, task_idx)) = best else {
                continue;
            };
            // Freshly opened tasks draw most of their registrations early,
            // so the eventual winner is usually visible from the first days.
            let rel_age = (day - tasks[task_idx].open_offset) as f64
                / tasks[task_idx].duration.max(1) as f64;
            let freshness = 1.8 - 1.6 * rel_age;
            let open_load = registered[worker]
                .iter()
                .filter(|&&t| tasks[t].open_offset + tasks[t].duration >= day)
                .count();
            let p_register = (config.activity_rate / 7.0)
                * (0.2 + 1.6 * base)
                * (0.5 + attraction).min(1.5)
                * freshness
                / (1.0 + 0.3 * open_load as f64);
            if gate >= p_register.min(0.9) {
                continue;
            }

            registered[worker].insert(task_idx);
            registrations_per_task[task_idx].push(worker);
            events.push(EventRecord::registration(
                &worker_ident(worker),
                &tasks[task_idx].record.task_id,
                date_of(day),
            ));

            // Submission decision is made at registration time.
            let load = registered[worker]
                .iter()
                .filter(|&&t| tasks[t].open_offset + tasks[t].duration >= day)
                .count();
            let match_skill = mean_match(seed, worker, &tasks[task_idx]);
            // Skilled, well-matched workers are reliable: the star bonus
            // lifts their submission odds well above the crowd's, which is
            // what makes winner probabilities learnable.
            let star_bonus = 1.0 + 40.0 * (match_skill - 0.66).max(0.0);
            let p_submit = ((1.0 - config.quit_propensity)
                * (0.015 + 0.25 * match_skill * match_skill)
                * star_bonus
                * (1.0 / (1.0 + 0.1 * load as f64)))
            .min(0.97);
            let submits = rng.chance(p_submit);
            if submits {
                let deadline_offset = tasks[task_idx].open_offset + tasks[task_idx].duration;
                let submit_offset = deadline_offset.saturating_sub(rng.below(3) as u32).max(day);
                events.push(EventRecord::submission(
                    &worker_ident(worker),
                    &tasks[task_idx].record.task_id,
                    date_of(submit_offset),
                ));
                submitters_per_task[task_idx].push(worker);
            }
        }
    }

    // Reviews: scores increase in skill; the top one or two scorers above
    // the passing floor are rewarded.
    for (task_idx, task) in tasks.iter().enumerate() {
        let submitters = &submitters_per_task[task_idx];
        if submitters.is_empty() {
            continue;
        }
        let mut rng = Rng::from_seed(sub_seed(sub_seed(seed, TAG_REVIEW), task_idx as u64));
        let review_offset = task.open_offset + task.duration + 1 + rng.below(3) as u32;

        let mut scored: Vec<(usize, i32)> = Vec::with_capacity(submitters.len());
        for &worker in submitters {
            let quality =
                0.8 * mean_match(seed, worker, task) + 0.2 * worker_base_skill(seed, worker);
            let raw = 55.0 + 40.0 * quality + 2.5 * rng.gaussian();
            let centi = ((raw * 100.0).round() as i32).clamp(0, ReviewScore::MAX_CENTI);
            scored.push((worker, centi));
        }
        let reward_count = if scored.len() >= 2 && rng.chance(0.6) { 2 } else { 1 };
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            scored[b]
                .1
                .cmp(&scored[a].1)
                .then_with(|| scored[a].0.cmp(&scored[b].0))
        });
        let rewarded: BTreeSet<usize> = order
            .iter()
            .take(reward_count)
            .copied()
            .filter(|&i| scored[i].1 >= PASSING_CENTI)
            .collect();
        for (i, &(worker, centi)) in scored.iter().enumerate() {
            events.push(EventRecord::review(
                &worker_ident(worker),
                &task.record.task_id,
                date_of(review_offset),
                ReviewScore::from_centi(centi).expect("clamped"),
                rewarded.contains(&i),
            ));
        }
    }

    let records = tasks.into_iter().map(|t| t.record).collect();
    Ok(ingest_events(records, events, vocabulary)?)
}
