//! Session persistence: `<root>/<session_id>/` holds `session.json`, the
//! corpus directory, and an append-only `events.jsonl`.

use std::io::Write;
use std::path::{Path, PathBuf};

use super::{ServiceError, Session, SessionEvent};
use crate::corpus;

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ServiceError + '_ {
    move |source| ServiceError::Io { path: path.to_path_buf(), source }
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self, ServiceError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(io(&root))?;
        Ok(SessionStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn dir(&self, session_id: &str) -> PathBuf {
        self.root.join(session_id)
    }

    pub fn exists(&self, session_id: &str) -> bool {
        self.dir(session_id).join("session.json").is_file()
    }

    /// Session directories, sorted.
    pub fn list(&self) -> Result<Vec<String>, ServiceError> {
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&self.root).map_err(io(&self.root))? {
            let entry = entry.map_err(io(&self.root))?;
            if entry.path().is_dir() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Reserve a directory for a new session.
    pub fn reserve(&self, session_id: &str) -> Result<(), ServiceError> {
        let dir = self.dir(session_id);
        std::fs::create_dir_all(&dir).map_err(io(&dir))
    }

    pub fn save(&self, session: &Session) -> Result<(), ServiceError> {
        let dir = self.dir(&session.session_id);
        std::fs::create_dir_all(&dir).map_err(io(&dir))?;
        corpus::persist(&session.corpus, &dir.join("corpus"))?;
        let path = dir.join("session.json");
        let tmp = dir.join("session.json.tmp");
        let text = serde_json::to_string_pretty(session).expect("sessions serialize");
        std::fs::write(&tmp, text).map_err(io(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(io(&path))
    }

    pub fn load(&self, session_id: &str) -> Result<Session, ServiceError> {
        if !self.exists(session_id) {
            return Err(ServiceError::UnknownSession(session_id.to_string()));
        }
        let dir = self.dir(session_id);
        let path = dir.join("session.json");
        let text = std::fs::read_to_string(&path).map_err(io(&path))?;
        let mut session: Session = serde_json::from_str(&text)
            .map_err(|e| ServiceError::Corrupt { path: path.clone(), message: e.to_string() })?;
        session
            .idea_document
            .validate()
            .map_err(|e| ServiceError::Corrupt { path: path.clone(), message: e.to_string() })?;
        session.corpus = corpus::load(&dir.join("corpus"))?;
        Ok(session)
    }

    pub fn append_event(&self, session_id: &str, op: &str, detail: &str) -> Result<SessionEvent, ServiceError> {
        let path = self.dir(session_id).join("events.jsonl");
        let seq = self.events(session_id)?.len() as u64 + 1;
        let event = SessionEvent { seq, op: op.to_string(), detail: detail.to_string() };
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(&path).map_err(io(&path))?;
        writeln!(f, "{}", serde_json::to_string(&event).expect("events serialize")).map_err(io(&path))?;
        Ok(event)
    }

    pub fn events(&self, session_id: &str) -> Result<Vec<SessionEvent>, ServiceError> {
        let path = self.dir(session_id).join("events.jsonl");
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(ServiceError::Io { path, source: e }),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| ServiceError::Corrupt { path: path.clone(), message: e.to_string() }))
            .collect()
    }
}
