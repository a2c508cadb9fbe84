//! One JSON session document per file, `<dir>/<id>.json`.
//!
//! Writes to a session hold that session's lock for the whole
//! read-apply-write cycle and land via rename, so readers never see a
//! partial document and never wait on a writer.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::session::{ElicitationSession, SessionError, SessionEvent};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("session `{0}` already exists")]
    Exists(String),
    #[error("`{0}` is not a valid session id (use letters, digits, '-' or '_')")]
    InvalidId(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("session store I/O: {0}")]
    Io(#[from] io::Error),
}

pub struct SessionStore {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, locks: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> Result<PathBuf, StoreError> {
        if valid_id(id) {
            Ok(self.dir.join(format!("{id}.json")))
        } else {
            Err(StoreError::InvalidId(id.to_string()))
        }
    }

    fn lock_for(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    fn write(&self, path: &Path, session: &ElicitationSession) -> io::Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, session.save())?;
        fs::rename(tmp, path)
    }

    pub fn create(&self, session: &ElicitationSession) -> Result<(), StoreError> {
        let path = self.path(&session.id)?;
        let lock = self.lock_for(&session.id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        if path.exists() {
            return Err(StoreError::Exists(session.id.clone()));
        }
        self.write(&path, session)?;
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<ElicitationSession, StoreError> {
        let path = self.path(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        Ok(ElicitationSession::load(&text)?)
    }

    /// Applies `event` to the stored session and persists the result.
    pub fn apply(&self, id: &str, event: SessionEvent) -> Result<ElicitationSession, StoreError> {
        let path = self.path(id)?;
        let lock = self.lock_for(id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let next = self.get(id)?.apply_event(event)?;
        self.write(&path, &next)?;
        Ok(next)
    }
}
