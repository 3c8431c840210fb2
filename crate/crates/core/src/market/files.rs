//! Plain-text data directory format: a tasks file, an events file, and a
//! vocabulary file. These are the interchange surface between the synthetic
//! generator, external data preparation, and ingestion.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use super::{
    ingest_events, EventKind, EventLog, EventRecord, MarketError, ReviewScore, TaskRecord,
};

pub const DATA_TASKS: &str = "tasks.csv";
pub const DATA_EVENTS: &str = "events.csv";
pub const DATA_VOCABULARY: &str = "vocabulary.txt";

const TASK_HEADER: [&str; 6] = [
    "task_id",
    "task_type",
    "registration_open",
    "submission_deadline",
    "total_prize",
    "required_technologies",
];
const EVENT_HEADER: [&str; 6] = ["kind", "worker_id", "task_id", "date", "score", "rewarded"];

fn parse_date(value: &str, what: &'static str) -> Result<NaiveDate, MarketError> {
    value.parse().map_err(|_| MarketError::Malformed {
        what,
        detail: format!("`{value}` is not an ISO-8601 date"),
    })
}

/// Reads `tasks.csv`, `events.csv`, and `vocabulary.txt` from `dir` and
/// ingests them into a validated log.
pub fn read_data_dir(dir: &Path) -> Result<EventLog, MarketError> {
    let vocabulary: Vec<String> = fs::read_to_string(dir.join(DATA_VOCABULARY))?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();

    let mut tasks = Vec::new();
    let mut reader = csv::Reader::from_path(dir.join(DATA_TASKS)).map_err(csv_error)?;
    for record in reader.records() {
        let row = record.map_err(csv_error)?;
        if row.len() != TASK_HEADER.len() {
            return Err(MarketError::Malformed {
                what: "task record",
                detail: format!("expected {} fields, got {}", TASK_HEADER.len(), row.len()),
            });
        }
        let prize: f64 = row[4].parse().map_err(|_| MarketError::Malformed {
            what: "task record",
            detail: format!("total_prize `{}` is not a decimal", &row[4]),
        })?;
        tasks.push(TaskRecord {
            task_id: row[0].to_string(),
            task_type: row[1].parse()?,
            registration_open: parse_date(&row[2], "task record")?,
            submission_deadline: parse_date(&row[3], "task record")?,
            total_prize: prize,
            required_technologies: row[5]
                .split(';')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect(),
        });
    }

    let mut events = Vec::new();
    let mut reader = csv::Reader::from_path(dir.join(DATA_EVENTS)).map_err(csv_error)?;
    for record in reader.records() {
        let row = record.map_err(csv_error)?;
        if row.len() != EVENT_HEADER.len() {
            return Err(MarketError::Malformed {
                what: "event record",
                detail: format!("expected {} fields, got {}", EVENT_HEADER.len(), row.len()),
            });
        }
        let date = parse_date(&row[3], "event record")?;
        let kind = match &row[0] {
            "registration" => EventKind::Registration,
            "submission" => EventKind::Submission,
            "review" => {
                let score: ReviewScore = row[4].parse()?;
                let rewarded = match &row[5] {
                    "true" => true,
                    "false" => false,
                    other => {
                        return Err(MarketError::Malformed {
                            what: "event record",
                            detail: format!("rewarded `{other}` is not true/false"),
                        })
                    }
                };
                EventKind::Review { score, rewarded }
            }
            other => {
                return Err(MarketError::Malformed {
                    what: "event record",
                    detail: format!("unknown event kind `{other}`"),
                })
            }
        };
        events.push(EventRecord {
            worker_id: row[1].to_string(),
            task_id: row[2].to_string(),
            date,
            kind,
        });
    }

    ingest_events(tasks, events, vocabulary)
}

/// Writes the log back out as a data directory. Tasks are ordered by id and
/// events canonically, so identical logs produce byte-identical files.
pub fn write_data_dir(dir: &Path, log: &EventLog) -> Result<(), MarketError> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join(DATA_VOCABULARY),
        log.vocabulary()
            .iter()
            .map(|t| format!("{t}\n"))
            .collect::<String>(),
    )?;

    let mut writer = csv::Writer::from_path(dir.join(DATA_TASKS)).map_err(csv_error)?;
    writer.write_record(TASK_HEADER).map_err(csv_error)?;
    for task in log.tasks() {
        let techs: Vec<&str> = task
            .required_technologies
            .iter()
            .map(String::as_str)
            .collect();
        writer
            .write_record([
                task.task_id.as_str(),
                &task.task_type.to_string(),
                &task.registration_open.to_string(),
                &task.submission_deadline.to_string(),
                &task.total_prize.to_string(),
                &techs.join(";"),
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;

    let mut writer = csv::Writer::from_path(dir.join(DATA_EVENTS)).map_err(csv_error)?;
    writer.write_record(EVENT_HEADER).map_err(csv_error)?;
    for ev in log.events() {
        let (kind, score, rewarded) = match &ev.kind {
            EventKind::Registration => ("registration", String::new(), ""),
            EventKind::Submission => ("submission", String::new(), ""),
            EventKind::Review { score, rewarded } => (
                "review",
                score.to_string(),
                if *rewarded { "true" } else { "false" },
            ),
        };
        writer
            .write_record([
                kind,
                ev.worker_id.as_str(),
                ev.task_id.as_str(),
                &ev.date.to_string(),
                &score,
                rewarded,
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_error(err: csv::Error) -> MarketError {
    match err.into_kind() {
        csv::ErrorKind::Io(io) => MarketError::Io(io),
        other => MarketError::Malformed {
            what: "csv record",
            detail: format!("{other:?}"),
        },
    }
}
