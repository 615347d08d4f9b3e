//! Append-only session event storage.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::Mutex;

use crate::session::SessionEvent;
use crate::ServiceError;

pub trait EventStore: Send + Sync {
    fn append(&self, session_id: &str, event: &SessionEvent) -> Result<(), ServiceError>;

    /// Every session's log, ordered by session id.
    fn load_all(&self) -> Result<Vec<(String, Vec<SessionEvent>)>, ServiceError>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    logs: Mutex<BTreeMap<String, Vec<SessionEvent>>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EventStore for MemoryStore {
    fn append(&self, session_id: &str, event: &SessionEvent) -> Result<(), ServiceError> {
        self.logs
            .lock()
            .entry(session_id.to_string())
            .or_default()
            .push(event.clone());
        Ok(())
    }

    fn load_all(&self) -> Result<Vec<(String, Vec<SessionEvent>)>, ServiceError> {
        Ok(self.logs.lock().iter().map(|(k, v)| (k.clone(), v.clone())).collect())
    }
}

/// One JSON-lines file per session under a directory.
#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
}

impl FileStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| ServiceError::Store(format!("{}: {e}", dir.display())))?;
        Ok(FileStore { dir })
    }

    fn path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }
}

fn store_err(path: &Path, e: impl std::fmt::Display) -> ServiceError {
    ServiceError::Store(format!("{}: {e}", path.display()))
}

impl EventStore for FileStore {
    fn append(&self, session_id: &str, event: &SessionEvent) -> Result<(), ServiceError> {
        if session_id.is_empty() || !session_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(ServiceError::Store(format!("unsafe session id '{session_id}'")));
        }
        let path = self.path(session_id);
        let mut line = serde_json::to_string(event).map_err(|e| store_err(&path, e))?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| store_err(&path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| store_err(&path, e))?;
        f.flush().map_err(|e| store_err(&path, e))
    }

    fn load_all(&self) -> Result<Vec<(String, Vec<SessionEvent>)>, ServiceError> {
        let mut out = Vec::new();
        let entries = fs::read_dir(&self.dir).map_err(|e| store_err(&self.dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| store_err(&self.dir, e))?.path();
            if path.extension().is_none_or(|x| x != "jsonl") {
                continue;
            }
            let id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            let reader = BufReader::new(File::open(&path).map_err(|e| store_err(&path, e))?);
            let mut events = Vec::new();
            for (n, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| store_err(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let event = serde_json::from_str(&line).map_err(|e| store_err(&path, format!("line {}: {e}", n + 1)))?;
                events.push(event);
            }
            out.push((id, events));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}
