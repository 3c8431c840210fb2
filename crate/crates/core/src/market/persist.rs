//! Versioned single-file snapshot of an [`EventLog`].

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ingest_events, EventLog, EventRecord, MarketError, TaskRecord};

pub const LOG_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct LogFile {
    format_version: u32,
    vocabulary: Vec<String>,
    tasks: Vec<TaskRecord>,
    events: Vec<EventRecord>,
}

/// Writes the log to `location` as versioned JSON. Field order is fixed and
/// collections are canonically ordered, so equal logs serialize to equal
/// bytes.
pub fn persist_log(log: &EventLog, location: &Path) -> Result<(), MarketError> {
    let file = LogFile {
        format_version: LOG_FORMAT_VERSION,
        vocabulary: log.vocabulary().to_vec(),
        tasks: log.tasks().cloned().collect(),
        events: log.events().to_vec(),
    };
    let mut bytes = serde_json::to_vec_pretty(&file).map_err(|e| MarketError::Malformed {
        what: "log file",
        detail: e.to_string(),
    })?;
    bytes.push(b'\n');
    fs::write(location, bytes)?;
    Ok(())
}

/// Loads a log persisted by [`persist_log`], re-running full ingestion
/// validation.
pub fn load_log(location: &Path) -> Result<EventLog, MarketError> {
    let bytes = fs::read(location)?;

    // Check the version tag before strict decoding so future formats fail
    // with FormatVersionMismatch rather than a parse error.
    #[derive(Deserialize)]
    struct VersionOnly {
        format_version: u32,
    }
    let version: VersionOnly =
        serde_json::from_slice(&bytes).map_err(|e| MarketError::Malformed {
            what: "log file",
            detail: e.to_string(),
        })?;
    if version.format_version != LOG_FORMAT_VERSION {
        return Err(MarketError::FormatVersionMismatch {
            found: version.format_version,
            expected: LOG_FORMAT_VERSION,
        });
    }

    let file: LogFile = serde_json::from_slice(&bytes).map_err(|e| MarketError::Malformed {
        what: "log file",
        detail: e.to_string(),
    })?;
    ingest_events(file.tasks, file.events, file.vocabulary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{EventRecord, TaskType};

    fn small_log() -> EventLog {
        let task = TaskRecord {
            task_id: "t1".into(),
            task_type: TaskType::Code,
            registration_open: "2015-01-01".parse().unwrap(),
            submission_deadline: "2015-01-08".parse().unwrap(),
            total_prize: 1000.0,
            required_technologies: ["java".to_string()].into(),
        };
        let events = vec![
            EventRecord::registration("alice", "t1", "2015-01-01".parse().unwrap()),
            EventRecord::registration("bob", "t1", "2015-01-02".parse().unwrap()),
            EventRecord::submission("alice", "t1", "2015-01-07".parse().unwrap()),
            EventRecord::review(
                "alice",
                "t1",
                "2015-01-10".parse().unwrap(),
                "92.50".parse().unwrap(),
                true,
            ),
        ];
        ingest_events(vec![task], events, vec!["java".into()]).unwrap()
    }

    #[test]
    fn persist_then_load_is_identity() {
        let log = small_log();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.json");
        persist_log(&log, &path).unwrap();
        let reloaded = load_log(&path).unwrap();
        assert_eq!(log, reloaded);
    }

    #[test]
    fn persisted_bytes_are_stable() {
        let log = small_log();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        persist_log(&log, &a).unwrap();
        persist_log(&log, &b).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }

    #[test]
    fn unknown_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.json");
        fs::write(
            &path,
            r#"{"format_version":99,"vocabulary":[],"tasks":[],"events":[]}"#,
        )
        .unwrap();
        assert!(matches!(
            load_log(&path),
            Err(MarketError::FormatVersionMismatch { found: 99, .. })
        ));
    }

    #[test]
    fn unwritable_location_is_io_failure() {
        let log = small_log();
        let err = persist_log(&log, Path::new("/nonexistent-dir/log.json")).unwrap_err();
        assert!(matches!(err, MarketError::Io(_)));
    }
}
