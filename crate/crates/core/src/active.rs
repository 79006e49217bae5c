//! Pool-based active labeling with uncertainty sampling.
//!
//! A session draws a random seed batch, and each completed batch triggers a
//! retrain on everything labeled so far. Later batches are the pool messages
//! whose ensemble score is closest to 0.5. Every state change is recorded as
//! an event; replaying the events over the same pool rebuilds the session.

use std::collections::{HashMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetRole, LabeledDataset};
use crate::model::{fit_members, EnsembleModel, FeatureSet, Featurizer, FitOptions, ModelError};
use crate::preprocess::{Label, Message};
use crate::seed::{derive_seed, STREAM_ACTIVE};

#[derive(Debug, Error)]
pub enum ActiveError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("pool has {pool} messages but the schedule needs {total}")]
    PoolTooSmall { pool: usize, total: usize },
    #[error("duplicate pool id `{0}`")]
    DuplicatePoolId(String),
    #[error("no model yet; label the seed batch first")]
    NoModel,
    #[error("{0} messages from the current batch are still pending")]
    BatchOutstanding(usize),
    #[error("session is complete")]
    Complete,
    #[error("batch size {k} is outside 1..={available}")]
    InvalidBatchSize { k: usize, available: usize },
    #[error("ids are not pending: {0:?}")]
    NotPending(Vec<String>),
    #[error("ids appear more than once in the submission: {0:?}")]
    DuplicateInSubmission(Vec<String>),
    #[error("event log does not match the session: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("event log line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Seed batch, then batches of `batch_size` until `total` are labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schedule {
    pub seed_size: usize,
    pub batch_size: usize,
    pub total: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            seed_size: 100,
            batch_size: 100,
            total: 400,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<(), ActiveError> {
        if self.seed_size == 0 || self.batch_size == 0 {
            return Err(ActiveError::InvalidSchedule("sizes must be positive".into()));
        }
        if self.seed_size > self.total {
            return Err(ActiveError::InvalidSchedule(format!(
                "seed size {} exceeds total {}",
                self.seed_size, self.total
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    SessionInit {
        session_id: String,
        schedule: Schedule,
        seed: u64,
        pool_size: usize,
    },
    SeedDrawn {
        ids: Vec<String>,
    },
    BatchDrawn {
        round: usize,
        ids: Vec<String>,
        /// True when no model was available and the batch was drawn at random.
        random: bool,
    },
    LabelsSubmitted {
        labels: Vec<LabelEntry>,
    },
    ModelRetrained {
        model_version: u64,
        labeled: usize,
    },
    RetrainSkipped {
        labeled: usize,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub id: String,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionState {
    /// Waiting for labels on the current batch.
    Labeling,
    /// Batch complete; the next one has not been drawn.
    AwaitingBatch,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionStatus {
    pub session_id: String,
    pub state: SessionState,
    pub round: usize,
    pub labeled: usize,
    pub pending: usize,
    pub pool: usize,
    pub target_total: usize,
    pub model_version: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingMessage {
    pub id: String,
    pub text: String,
    /// Ensemble score when the batch was drawn; absent for random batches.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub accepted: usize,
    pub batch_complete: bool,
    pub retrained: bool,
    pub model_version: u64,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub schedule: Schedule,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            schedule: Schedule::default(),
            seed: 0,
            fit: FitOptions::default(),
        }
    }
}

/// Indices of the `k` scores closest to 0.5, ties broken by ascending id.
pub fn select_ambiguous(scored: &[(&str, f64)], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        let (ia, sa) = scored[a];
        let (ib, sb) = scored[b];
        (sa - 0.5).abs().total_cmp(&(sb - 0.5).abs()).then_with(|| ia.cmp(ib))
    });
    order.truncate(k);
    order
}

#[derive(Debug, Clone)]
pub struct ActiveSession {
    id: String,
    config: SessionConfig,
    featurizer: Featurizer,
    initial_pool: usize,
    /// Unlabeled, not pending, in original order.
    pool: Vec<Message>,
    pending: Vec<PendingMessage>,
    pending_messages: HashMap<String, Message>,
    labeled: Vec<Message>,
    round: usize,
    model: Option<EnsembleModel>,
    model_version: u64,
    rng: ChaCha8Rng,
    events: Vec<SessionEvent>,
}

impl ActiveSession {
    /// Starts a session and draws the seed batch uniformly at random.
    pub fn new(
        id: impl Into<String>,
        pool: Vec<Message>,
        featurizer: Featurizer,
        config: SessionConfig,
    ) -> Result<Self, ActiveError> {
        let id = id.into();
        config.schedule.validate()?;
        if pool.len() < config.schedule.total {
            return Err(ActiveError::PoolTooSmall {
                pool: pool.len(),
                total: config.schedule.total,
            });
        }
        let mut seen = HashSet::new();
        for m in &pool {
            if !seen.insert(m.id.as_str()) {
                return Err(ActiveError::DuplicatePoolId(m.id.clone()));
            }
        }
        let pool: Vec<Message> = pool
            .into_iter()
            .map(|m| Message { label: None, ..m })
            .collect();
        let mut session = ActiveSession {
            rng: ChaCha8Rng::seed_from_u64(derive_seed(config.seed, STREAM_ACTIVE)),
            events: vec![SessionEvent::SessionInit {
                session_id: id.clone(),
                schedule: config.schedule,
                seed: config.seed,
                pool_size: pool.len(),
            }],
            id,
            featurizer,
            initial_pool: pool.len(),
            pool,
            pending: Vec::new(),
            pending_messages: HashMap::new(),
            labeled: Vec::new(),
            round: 0,
            model: None,
            model_version: 0,
            config,
        };
        let ids = session.draw_random(session.config.schedule.seed_size);
        session.events.push(SessionEvent::SeedDrawn { ids });
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn schedule(&self) -> Schedule {
        self.config.schedule
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn model_version(&self) -> u64 {
        self.model_version
    }

    pub fn model(&self) -> Option<&EnsembleModel> {
        self.model.as_ref()
    }

    pub fn pool(&self) -> &[Message] {
        &self.pool
    }

    pub fn pending(&self) -> &[PendingMessage] {
        &self.pending
    }

    /// Labeled messages in submission order.
    pub fn labeled(&self) -> &[Message] {
        &self.labeled
    }

    pub fn initial_pool_size(&self) -> usize {
        self.initial_pool
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn is_complete(&self) -> bool {
        self.labeled.len() >= self.config.schedule.total
    }

    pub fn state(&self) -> SessionState {
        if self.is_complete() {
            SessionState::Complete
        } else if self.pending.is_empty() {
            SessionState::AwaitingBatch
        } else {
            SessionState::Labeling
        }
    }

    pub fn status(&self) -> SessionStatus {
        SessionStatus {
            session_id: self.id.clone(),
            state: self.state(),
            round: self.round,
            labeled: self.labeled.len(),
            pending: self.pending.len(),
            pool: self.pool.len(),
            target_total: self.config.schedule.total,
            model_version: self.model_version,
        }
    }

    /// Size of the next scheduled batch.
    pub fn scheduled_batch_size(&self) -> usize {
        let remaining = self.config.schedule.total.saturating_sub(self.labeled.len());
        self.config.schedule.batch_size.min(remaining).min(self.pool.len())
    }

    fn draw_random(&mut self, k: usize) -> Vec<String> {
        let mut picked = sample(&mut self.rng, self.pool.len(), k).into_vec();
        let order = picked.clone();
        picked.sort_unstable();
        let mut taken: HashMap<usize, Message> = HashMap::with_capacity(k);
        let mut keep = Vec::with_capacity(self.pool.len() - k);
        let mut next = picked.iter().peekable();
        for (i, m) in std::mem::take(&mut self.pool).into_iter().enumerate() {
            if next.peek() == Some(&&i) {
                next.next();
                taken.insert(i, m);
            } else {
                keep.push(m);
            }
        }
        self.pool = keep;
        let mut ids = Vec::with_capacity(k);
        for i in order {
            let m = taken.remove(&i).expect("sampled index");
            ids.push(m.id.clone());
            self.mark_pending(m, None);
        }
        ids
    }

    fn mark_pending(&mut self, m: Message, score: Option<f64>) {
        self.pending.push(PendingMessage {
            id: m.id.clone(),
            text: m.text.clone(),
            score,
        });
        self.pending_messages.insert(m.id.clone(), m);
    }

    /// Draws the `k` most ambiguous pool messages under the current model.
    /// When a retrain was skipped because labels were single-class, the
    /// batch is drawn at random instead.
    pub fn next_batch(&mut self, k: usize) -> Result<&[PendingMessage], ActiveError> {
        if self.is_complete() {
            return Err(ActiveError::Complete);
        }
        if !self.pending.is_empty() {
            return Err(if self.round == 0 {
                ActiveError::NoModel
            } else {
                ActiveError::BatchOutstanding(self.pending.len())
            });
        }
        let available = self
            .config
            .schedule
            .total
            .saturating_sub(self.labeled.len())
            .min(self.pool.len());
        if k == 0 || k > available {
            return Err(ActiveError::InvalidBatchSize { k, available });
        }
        let (ids, random) = match &self.model {
            None => (self.draw_random(k), true),
            Some(model) => {
                let scores: Vec<f64> = self.pool.iter().map(|m| model.score(m)).collect();
                let scored: Vec<(&str, f64)> =
                    self.pool.iter().zip(&scores).map(|(m, &s)| (m.id.as_str(), s)).collect();
                let chosen = select_ambiguous(&scored, k);
                let mut is_chosen = vec![false; self.pool.len()];
                chosen.iter().for_each(|&i| is_chosen[i] = true);
                let mut slots: Vec<Option<Message>> = vec![None; self.pool.len()];
                let mut keep = Vec::with_capacity(self.pool.len() - k);
                for (i, m) in std::mem::take(&mut self.pool).into_iter().enumerate() {
                    if is_chosen[i] {
                        slots[i] = Some(m);
                    } else {
                        keep.push(m);
                    }
                }
                self.pool = keep;
                let mut ids = Vec::with_capacity(k);
                for i in chosen {
                    let m = slots[i].take().expect("chosen once");
                    ids.push(m.id.clone());
                    self.mark_pending(m, Some(scores[i]));
                }
                (ids, false)
            }
        };
        self.events.push(SessionEvent::BatchDrawn {
            round: self.round,
            ids,
            random,
        });
        Ok(&self.pending)
    }

    /// Records labels for pending messages. Completing a batch retrains the
    /// ensemble on all labels so far.
    pub fn submit_labels(&mut self, labels: &[(String, Label)]) -> Result<SubmitOutcome, ActiveError> {
        let mut seen = HashSet::new();
        let mut dups: Vec<String> = labels
            .iter()
            .filter(|(id, _)| !seen.insert(id.as_str()))
            .map(|(id, _)| id.clone())
            .collect();
        if !dups.is_empty() {
            dups.dedup();
            return Err(ActiveError::DuplicateInSubmission(dups));
        }
        let missing: Vec<String> = labels
            .iter()
            .filter(|(id, _)| !self.pending_messages.contains_key(id))
            .map(|(id, _)| id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(ActiveError::NotPending(missing));
        }
        for (id, label) in labels {
            let mut m = self.pending_messages.remove(id).expect("checked pending");
            m.label = Some(*label);
            self.labeled.push(m);
        }
        let submitted: HashSet<&str> = labels.iter().map(|(id, _)| id.as_str()).collect();
        self.pending.retain(|p| !submitted.contains(p.id.as_str()));
        self.events.push(SessionEvent::LabelsSubmitted {
            labels: labels
                .iter()
                .map(|(id, label)| LabelEntry {
                    id: id.clone(),
                    label: *label,
                })
                .collect(),
        });

        let batch_complete = self.pending.is_empty() && !labels.is_empty();
        let mut retrained = false;
        if batch_complete {
            retrained = self.retrain()?;
            self.round += 1;
        }
        Ok(SubmitOutcome {
            accepted: labels.len(),
            batch_complete,
            retrained,
            model_version: self.model_version,
            complete: self.is_complete(),
        })
    }

    fn retrain(&mut self) -> Result<bool, ActiveError> {
        let data = LabeledDataset::new(self.labeled.clone(), &self.featurizer.tokenizer, DatasetRole::Labeled)
            .map_err(|e| ModelError::Format(e.to_string()))?;
        if !data.has_both_classes() {
            self.events.push(SessionEvent::RetrainSkipped {
                labeled: data.len(),
                reason: "labels so far are single-class".into(),
            });
            return Ok(false);
        }
        let sets: Vec<FeatureSet> = FeatureSet::ALL
            .into_iter()
            .filter(|&s| self.featurizer.available(s))
            .collect();
        let members = fit_members(&data, &self.featurizer, &sets, &self.config.fit)?;
        let k = members.len();
        self.model = Some(EnsembleModel::new(
            self.featurizer.clone(),
            members,
            vec![1.0 / k as f64; k],
            0.5,
        )?);
        self.model_version += 1;
        self.events.push(SessionEvent::ModelRetrained {
            model_version: self.model_version,
            labeled: data.len(),
        });
        Ok(true)
    }

    /// Rebuilds a session by re-running the recorded operations over `pool`.
    /// Seed, schedule and session id come from the log; every drawn batch
    /// and retrain is checked against it.
    pub fn replay(
        pool: Vec<Message>,
        featurizer: Featurizer,
        fit: FitOptions,
        events: &[SessionEvent],
    ) -> Result<Self, ActiveError> {
        let mismatch = |what: String| ActiveError::ReplayMismatch(what);
        let Some(SessionEvent::SessionInit {
            session_id,
            schedule,
            seed,
            pool_size,
        }) = events.first()
        else {
            return Err(mismatch("log must start with session_init".into()));
        };
        if *pool_size != pool.len() {
            return Err(mismatch(format!("pool has {} messages, log says {pool_size}", pool.len())));
        }
        let config = SessionConfig {
            schedule: *schedule,
            seed: *seed,
            fit,
        };
        let mut s = ActiveSession::new(session_id.clone(), pool, featurizer, config)?;
        for (n, event) in events.iter().enumerate().skip(1) {
            match event {
                SessionEvent::SeedDrawn { ids } => {
                    if s.events.get(n) != Some(event) {
                        return Err(mismatch(format!("seed batch differs from {ids:?}")));
                    }
                }
                SessionEvent::BatchDrawn { ids, .. } => {
                    s.next_batch(ids.len())?;
                }
                SessionEvent::LabelsSubmitted { labels } => {
                    let pairs: Vec<(String, Label)> = labels.iter().map(|e| (e.id.clone(), e.label)).collect();
                    s.submit_labels(&pairs)?;
                }
                SessionEvent::ModelRetrained { .. } | SessionEvent::RetrainSkipped { .. } => {}
                SessionEvent::SessionInit { .. } => return Err(mismatch("repeated session_init".into())),
            }
            if s.events.get(n) != Some(event) {
                return Err(mismatch(format!("event {n} differs: {event:?}")));
            }
        }
        if s.events.len() != events.len() {
            return Err(mismatch("log is truncated mid-operation".into()));
        }
        Ok(s)
    }

    /// Labeled set in submission order, with labels.
    pub fn export(&self) -> &[Message] {
        &self.labeled
    }
}

pub fn append_events(path: impl AsRef<Path>, events: &[SessionEvent]) -> Result<(), ActiveError> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut buf = Vec::new();
    for e in events {
        serde_json::to_writer(&mut buf, e).map_err(std::io::Error::other)?;
        buf.push(b'\n');
    }
    f.write_all(&buf)?;
    f.sync_data()?;
    Ok(())
}

pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<SessionEvent>, ActiveError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ActiveError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
