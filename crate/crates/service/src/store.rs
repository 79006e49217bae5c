//! Active-labeling sessions, one writer each, optionally persisted as
//! `<dir>/<session id>/{pool.jsonl,events.jsonl}`.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use tokio::sync::Mutex;
use urgency::active::{
    append_events, read_events, ActiveSession, PendingMessage, SessionConfig, SessionState,
    SessionStatus, SubmitOutcome,
};
use urgency::dataset::{read_jsonl, write_jsonl};
use urgency::model::Featurizer;
use urgency::preprocess::{Label, Message};

use crate::error::ApiError;

/// What new sessions start from when the request leaves it out.
#[derive(Debug, Clone, Default)]
pub struct SessionDefaults {
    pub featurizer: Featurizer,
    pub config: SessionConfig,
    pub pool: Option<Arc<Vec<Message>>>,
}

struct Live {
    session: ActiveSession,
    /// Events already on disk.
    written: usize,
}

#[derive(Clone)]
struct Snapshot {
    status: SessionStatus,
    pending: Vec<PendingMessage>,
}

/// Mutations go through `live`; reads use the last committed snapshot and
/// never wait on a retrain.
pub struct SessionHandle {
    live: Arc<Mutex<Live>>,
    snapshot: RwLock<Snapshot>,
}

impl SessionHandle {
    fn new(session: ActiveSession, written: usize) -> Self {
        let snapshot = Snapshot {
            status: session.status(),
            pending: session.pending().to_vec(),
        };
        SessionHandle {
            live: Arc::new(Mutex::new(Live { session, written })),
            snapshot: RwLock::new(snapshot),
        }
    }

    fn snapshot(&self) -> Snapshot {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn commit(&self, session: &ActiveSession) {
        *self.snapshot.write().expect("snapshot lock") = Snapshot {
            status: session.status(),
            pending: session.pending().to_vec(),
        };
    }
}

pub struct SessionStore {
    dir: Option<PathBuf>,
    defaults: SessionDefaults,
    sessions: RwLock<HashMap<String, Arc<SessionHandle>>>,
    next_id: AtomicU64,
}

pub struct NewSession {
    pub session_id: Option<String>,
    pub messages: Option<Vec<Message>>,
    pub config: SessionConfig,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 64
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn internal(e: impl std::fmt::Display) -> ApiError {
    ApiError::Internal(e.to_string())
}

impl SessionStore {
    pub fn in_memory(defaults: SessionDefaults) -> Self {
        SessionStore {
            dir: None,
            defaults,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    /// Opens `dir`, replaying every session found there.
    pub fn open(dir: impl Into<PathBuf>, defaults: SessionDefaults) -> Result<Self, ApiError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(internal)?;
        let mut sessions = HashMap::new();
        let mut entries: Vec<_> = std::fs::read_dir(&dir)
            .map_err(internal)?
            .filter_map(Result::ok)
            .filter(|e| e.path().join("events.jsonl").is_file())
            .collect();
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            let pool = read_jsonl(path.join("pool.jsonl")).map_err(internal)?;
            let events = read_events(path.join("events.jsonl"))?;
            let session = ActiveSession::replay(
                pool,
                defaults.featurizer.clone(),
                defaults.config.fit.clone(),
                &events,
            )?;
            let written = session.events().len();
            sessions.insert(session.id().to_string(), Arc::new(SessionHandle::new(session, written)));
        }
        Ok(SessionStore {
            dir: Some(dir),
            defaults,
            next_id: AtomicU64::new(sessions.len() as u64 + 1),
            sessions: RwLock::new(sessions),
        })
    }

    pub fn defaults(&self) -> &SessionDefaults {
        &self.defaults
    }

    fn handle(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::NotFound(id.to_string()))
    }

    fn persist(&self, live: &mut Live) -> Result<(), ApiError> {
        if let Some(dir) = &self.dir {
            let new = &live.session.events()[live.written..];
            if !new.is_empty() {
                append_events(dir.join(live.session.id()).join("events.jsonl"), new)?;
            }
        }
        live.written = live.session.events().len();
        Ok(())
    }

    fn fresh_id(&self) -> String {
        let sessions = self.sessions.read().expect("sessions lock");
        loop {
            let id = format!("session-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
            if !sessions.contains_key(&id) {
                return id;
            }
        }
    }

    pub async fn create(&self, req: NewSession) -> Result<SessionStatus, ApiError> {
        let id = match req.session_id {
            Some(id) if !valid_id(&id) => {
                return Err(ApiError::BadRequest(
                    "session_id must be 1-64 characters of [A-Za-z0-9_-]".into(),
                ))
            }
            Some(id) => id,
            None => self.fresh_id(),
        };
        if self.sessions.read().expect("sessions lock").contains_key(&id) {
            return Err(ApiError::Conflict {
                message: format!("session `{id}` already exists"),
                ids: vec![id],
            });
        }
        let pool = match req.messages {
            Some(m) => m,
            None => self
                .defaults
                .pool
                .as_deref()
                .cloned()
                .ok_or_else(|| ApiError::BadRequest("no `messages` given and the server has no default pool".into()))?,
        };
        // replay needs the pool in its original order
        if let Some(dir) = &self.dir {
            let sdir = dir.join(&id);
            std::fs::create_dir_all(&sdir).map_err(internal)?;
            let unlabeled: Vec<Message> = pool.iter().map(|m| Message::new(m.id.clone(), m.text.clone())).collect();
            write_jsonl(sdir.join("pool.jsonl"), &unlabeled).map_err(internal)?;
        }
        let session = ActiveSession::new(id.clone(), pool, self.defaults.featurizer.clone(), req.config)?;
        let mut live = Live { session, written: 0 };
        self.persist(&mut live)?;
        let status = live.session.status();
        let handle = Arc::new(SessionHandle::new(live.session, live.written));
        let mut sessions = self.sessions.write().expect("sessions lock");
        if sessions.contains_key(&id) {
            return Err(ApiError::Conflict {
                message: format!("session `{id}` already exists"),
                ids: vec![id],
            });
        }
        sessions.insert(id, handle);
        Ok(status)
    }

    pub fn status(&self, id: &str) -> Result<SessionStatus, ApiError> {
        Ok(self.handle(id)?.snapshot().status)
    }

    /// Pending messages; draws the next scheduled batch first when the
    /// previous one is complete.
    pub async fn pending(&self, id: &str) -> Result<(SessionStatus, Vec<PendingMessage>), ApiError> {
        let handle = self.handle(id)?;
        let snap = handle.snapshot();
        if snap.status.state != SessionState::AwaitingBatch {
            return Ok((snap.status, snap.pending));
        }
        let mut live = handle.live.clone().lock_owned().await;
        if live.session.state() == SessionState::AwaitingBatch {
            live = tokio::task::spawn_blocking(move || {
                let k = live.session.scheduled_batch_size();
                live.session.next_batch(k).map(|_| ())?;
                Ok::<_, ApiError>(live)
            })
            .await
            .map_err(internal)??;
            self.persist(&mut live)?;
            handle.commit(&live.session);
        }
        Ok((live.session.status(), live.session.pending().to_vec()))
    }

    pub async fn submit(&self, id: &str, labels: Vec<(String, Label)>) -> Result<SubmitOutcome, ApiError> {
        let handle = self.handle(id)?;
        let live = handle.live.clone().lock_owned().await;
        let (mut live, outcome) = tokio::task::spawn_blocking(move || {
            let mut live = live;
            let outcome = live.session.submit_labels(&labels);
            (live, outcome)
        })
        .await
        .map_err(internal)?;
        let outcome = outcome?;
        self.persist(&mut live)?;
        handle.commit(&live.session);
        Ok(outcome)
    }

    pub async fn export(&self, id: &str) -> Result<Vec<Message>, ApiError> {
        let handle = self.handle(id)?;
        let live = handle.live.lock().await;
        Ok(live.session.export().to_vec())
    }

    pub async fn events(&self, id: &str) -> Result<Vec<urgency::active::SessionEvent>, ApiError> {
        let handle = self.handle(id)?;
        let live = handle.live.lock().await;
        Ok(live.session.events().to_vec())
    }
}
