//! Append-only JSON-lines event log, one file per study.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use eop_core::questiongen::Questionnaire;

use crate::error::ServiceError;
use crate::session::AnswerValue;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session_id: String,
        participant_id: String,
        seed: u64,
        questionnaire: Questionnaire,
        at: u64,
    },
    Answer {
        session_id: String,
        question_id: String,
        answer: AnswerValue,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        justification: Option<String>,
        /// Supersedes the answer to the immediately previous question.
        #[serde(default)]
        revision: bool,
        at: u64,
    },
    Demographics {
        session_id: String,
        demographics: BTreeMap<String, String>,
        at: u64,
    },
}

impl Event {
    pub fn session_id(&self) -> &str {
        match self {
            Event::SessionCreated { session_id, .. }
            | Event::Answer { session_id, .. }
            | Event::Demographics { session_id, .. } => session_id,
        }
    }
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    len: u64,
    sync: bool,
}

impl EventLog {
    /// Opens (creating if needed) the log and returns its events in order.
    ///
    /// A final line without a terminating newline is an append that never
    /// completed, so it was never acknowledged: it is dropped and the file
    /// truncated. Any other unreadable line is an integrity error.
    pub fn open(path: &Path, sync: bool) -> Result<(Self, Vec<(usize, Event)>), ServiceError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(|e| ServiceError::Integrity {
            path: path.display().to_string(),
            line: 0,
            message: e.to_string(),
        })?;

        let mut events = Vec::new();
        let mut offset = 0usize;
        let mut good_len = 0usize;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let line_no = i + 1;
            let complete = line.ends_with('\n');
            offset += line.len();
            if !complete {
                break;
            }
            let body = line.trim_end_matches(['\n', '\r']);
            if !body.trim().is_empty() {
                let event = serde_json::from_str::<Event>(body).map_err(|e| ServiceError::Integrity {
                    path: path.display().to_string(),
                    line: line_no,
                    message: e.to_string(),
                })?;
                events.push((line_no, event));
            }
            good_len = offset;
        }
        if good_len < text.len() {
            file.set_len(good_len as u64)?;
        }
        file.seek(SeekFrom::End(0))?;
        let log = EventLog { path: path.to_path_buf(), file, len: good_len as u64, sync };
        Ok((log, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one event. On failure the file is cut back so a partial
    /// line can never precede later events.
    pub fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(event).map_err(|e| ServiceError::Internal(e.to_string()))?;
        line.push('\n');
        let written = self.file.write_all(line.as_bytes()).and_then(|()| {
            if self.sync {
                self.file.sync_data()
            } else {
                Ok(())
            }
        });
        if let Err(e) = written {
            let _ = self.file.set_len(self.len);
            return Err(e.into());
        }
        self.len += line.len() as u64;
        Ok(())
    }
}
