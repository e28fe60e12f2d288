//! Append-only JSONL event log.
//!
//! One JSON object per line, tagged by `event`:
//!
//! ```text
//! {"event":"session_started","session_id":"…","quiz_fingerprint":"…","started_ms":0}
//! {"event":"answer_recorded","session_id":"…","question_id":"q_…","choice_index":2,"timestamp_ms":1000}
//! {"event":"demographics_recorded","session_id":"…","demographics":{…},"timestamp_ms":2000}
//! ```
//!
//! Each line is written and synced before the request that caused it is
//! acknowledged. A final line without its newline is the trace of a write cut
//! short by a crash and is dropped on load.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use forestquiz::stats::Demographics;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionStarted {
        session_id: String,
        quiz_fingerprint: String,
        started_ms: u64,
    },
    AnswerRecorded {
        session_id: String,
        question_id: String,
        choice_index: usize,
        timestamp_ms: u64,
    },
    DemographicsRecorded {
        session_id: String,
        demographics: Demographics,
        timestamp_ms: u64,
    },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::SessionStarted { session_id, .. }
            | Event::AnswerRecorded { session_id, .. }
            | Event::DemographicsRecorded { session_id, .. } => session_id,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("event log {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("event log {path} line {line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: Mutex<File>,
}

impl EventLog {
    /// Opens (creating if needed) the log and returns the events already in it.
    pub fn open(path: &Path) -> Result<(EventLog, Vec<Event>), LogError> {
        let io = |source| LogError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .read(true)
            .write(true)
            .open(path)
            .map_err(io)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io)?;
        let complete = match text.rfind('\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if complete < text.len() {
            log::warn!(
                "dropping {} bytes of unterminated final record in {}",
                text.len() - complete,
                path.display()
            );
            file.set_len(complete as u64).map_err(io)?;
        }
        file.seek(SeekFrom::End(0)).map_err(io)?;
        let mut events = Vec::new();
        for (i, line) in BufReader::new(&text.as_bytes()[..complete]).lines().enumerate() {
            let line = line.map_err(io)?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line).map_err(|e| LogError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(e);
        }
        Ok((
            EventLog {
                path: path.to_path_buf(),
                file: Mutex::new(file),
            },
            events,
        ))
    }

    /// Writes one event as a single line and syncs it to disk.
    pub fn append(&self, event: &Event) -> Result<(), LogError> {
        let mut line = serde_json::to_vec(event).expect("events serialize");
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|p| p.into_inner());
        f.write_all(&line)
            .and_then(|_| f.sync_data())
            .map_err(|source| LogError::Io {
                path: self.path.clone(),
                source,
            })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}
