//! Append-only JSONL event store, one file per session.
//!
//! Each line is `<sha256 hex>\t<record json>`; the digest covers the record
//! text byte for byte. A final line that is cut short is treated as an
//! interrupted write and dropped, anything else that fails to verify is
//! corruption.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use reopt_core::model::{load_state, save_state};
use reopt_core::scenario::Scenario;
use reopt_core::solver::SolveResult;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::session::{Session, SessionEvent};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o on {path}: {message}")]
    Io { path: String, message: String },
    #[error("store corruption in {path} line {line}: {message}")]
    StoreCorruption { path: String, line: usize, message: String },
}

fn io(path: &Path, e: impl ToString) -> StoreError {
    StoreError::Io { path: path.display().to_string(), message: e.to_string() }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Created {
        id: String,
        source: String,
        name: String,
        /// Baseline state document, so restore does not depend on the
        /// scenario file staying unchanged.
        state: Value,
        solution: SolveResult,
        at: DateTime<Utc>,
    },
    Step { event: SessionEvent },
}

/// What `restore` found in one session file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestoreReport {
    pub session: String,
    pub records: usize,
    /// Set when an incomplete trailing record was dropped.
    pub truncated: bool,
}

pub fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn encode(record: &Record) -> String {
    let body = serde_json::to_string(record).expect("records serialize");
    format!("{}\t{body}\n", digest(&body))
}

#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Store { dir, locks: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_of(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut map = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        map.entry(id.to_string()).or_default().clone()
    }

    /// Appends one record and syncs it to disk before returning.
    pub fn append(&self, id: &str, record: &Record) -> Result<(), StoreError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let path = self.path_of(id);
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| io(&path, e))?;
        f.write_all(encode(record).as_bytes()).map_err(|e| io(&path, e))?;
        f.sync_data().map_err(|e| io(&path, e))?;
        Ok(())
    }

    pub fn persist_created(&self, session: &Session) -> Result<(), StoreError> {
        let record = Record::Created {
            id: session.id.clone(),
            source: session.source.clone(),
            name: session.scenario.name.clone(),
            state: serde_json::from_str(&save_state(&session.baseline)).expect("state documents are JSON"),
            solution: session.solutions[&session.baseline.version()].clone(),
            at: session.created_at,
        };
        self.append(&session.id, &record)?;
        // Make the new directory entry durable too.
        if let Ok(d) = File::open(&self.dir) {
            let _ = d.sync_all();
        }
        Ok(())
    }

    pub fn persist_event(&self, id: &str, event: &SessionEvent) -> Result<(), StoreError> {
        self.append(id, &Record::Step { event: event.clone() })
    }

    /// Writes a whole session as a fresh file.
    pub fn persist_session(&self, session: &Session) -> Result<(), StoreError> {
        let path = self.path_of(&session.id);
        if path.exists() {
            fs::remove_file(&path).map_err(|e| io(&path, e))?;
        }
        self.persist_created(session)?;
        for e in &session.events {
            self.persist_event(&session.id, e)?;
        }
        Ok(())
    }

    pub fn session_ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(|e| io(&self.dir, e))? {
            let p = entry.map_err(|e| io(&self.dir, e))?.path();
            if p.extension().is_some_and(|x| x == "jsonl") {
                if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                    ids.push(stem.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn read_records(&self, id: &str) -> Result<(Vec<Record>, bool), StoreError> {
        read_records(&self.path_of(id))
    }

    /// Restores one session and cuts any partial tail off the file so later
    /// appends start on a clean line.
    pub fn restore_session(&self, id: &str) -> Result<(Session, RestoreReport), StoreError> {
        let path = self.path_of(id);
        let restored = restore_session(&path)?;
        if restored.1.truncated {
            let bytes = fs::read(&path).map_err(|e| io(&path, e))?;
            let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
            let f = OpenOptions::new().write(true).open(&path).map_err(|e| io(&path, e))?;
            f.set_len(keep as u64).map_err(|e| io(&path, e))?;
            f.sync_data().map_err(|e| io(&path, e))?;
        }
        Ok(restored)
    }

    pub fn restore_all(&self) -> Result<Vec<(Session, RestoreReport)>, StoreError> {
        self.session_ids()?.iter().map(|id| self.restore_session(id)).collect()
    }
}

/// Reads and verifies every record; the flag reports a dropped partial tail.
pub fn read_records(path: &Path) -> Result<(Vec<Record>, bool), StoreError> {
    let bytes = fs::read(path).map_err(|e| io(path, e))?;
    let text = String::from_utf8_lossy(&bytes);
    let corrupt = |line: usize, message: String| StoreError::StoreCorruption {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut records = Vec::new();
    let mut truncated = false;
    let complete = text.ends_with('\n');
    let lines: Vec<&str> = text.split_terminator('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        let last = i + 1 == lines.len();
        if last && !complete {
            // An interrupted append leaves a tail with no newline.
            truncated = true;
            break;
        }
        let Some((sum, body)) = line.split_once('\t') else {
            return Err(corrupt(i + 1, "missing checksum field".into()));
        };
        if digest(body) != sum {
            return Err(corrupt(i + 1, "checksum mismatch".into()));
        }
        let record: Record = serde_json::from_str(body).map_err(|e| corrupt(i + 1, e.to_string()))?;
        records.push(record);
    }
    Ok((records, truncated))
}

/// Rebuilds a session from its baseline by replaying committed action sets.
pub fn restore_session(path: &Path) -> Result<(Session, RestoreReport), StoreError> {
    let (records, truncated) = read_records(path)?;
    let corrupt = |line: usize, message: String| StoreError::StoreCorruption {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut it = records.into_iter();
    let Some(Record::Created { id, source, name, state, solution, at }) = it.next() else {
        return Err(corrupt(1, "first record is not a session header".into()));
    };
    let baseline = load_state(&state.to_string()).map_err(|e| corrupt(1, e.to_string()))?;
    let mut scenario = Scenario::load(&source).unwrap_or_else(|_| Scenario {
        name: name.clone(),
        state: baseline.clone(),
        meta: Default::default(),
        framing: None,
        mock: None,
        dir: None,
    });
    scenario.name = name;
    scenario.state = baseline;
    let mut session = Session::with_baseline(id.clone(), source, scenario, solution, at);
    let mut n = 1;
    for (i, r) in it.enumerate() {
        match r {
            Record::Step { event } => session.record(event, None).map_err(|m| corrupt(i + 2, m))?,
            Record::Created { .. } => return Err(corrupt(i + 2, "duplicate session header".into())),
        }
        n += 1;
    }
    Ok((session, RestoreReport { session: id, records: n, truncated }))
}
