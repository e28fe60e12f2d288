use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use forestquiz::engine::{Clock, EngineError, Next};
use forestquiz::quizkit::Question;
use forestquiz::stats::{Cutoff, Demographics, DemographicsInput, RespondentRecord, StatsError};
use forestquiz::{QuizRunner, Session, Vote};
use tokio::sync::Mutex;

use crate::events::{Event, EventLog, LogError};

pub const EVENT_LOG: &str = "events.jsonl";

/// Source of fresh session ids.
pub trait IdGenerator: Send + Sync {
    fn next_id(&self) -> String;
}

#[derive(Debug, Default)]
pub struct UuidIds;

impl IdGenerator for UuidIds {
    fn next_id(&self) -> String {
        uuid::Uuid::new_v4().to_string()
    }
}

/// `prefix-0`, `prefix-1`, … for reproducible runs.
#[derive(Debug)]
pub struct SequentialIds {
    prefix: String,
    next: AtomicU64,
}

impl SequentialIds {
    pub fn new(prefix: impl Into<String>) -> Self {
        SequentialIds {
            prefix: prefix.into(),
            next: AtomicU64::new(0),
        }
    }
}

impl IdGenerator for SequentialIds {
    fn next_id(&self) -> String {
        format!("{}-{}", self.prefix, self.next.fetch_add(1, Ordering::SeqCst))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("unknown session `{0}`")]
    NotFound(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Intake(#[from] StatsError),
    #[error("demographics already recorded for this session")]
    DemographicsRecorded,
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("replaying event for `{session}`: {message}")]
    Replay { session: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub session: Session,
    pub demographics: Option<Demographics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntakeResult {
    pub bmi: Option<f64>,
    pub agreed: Option<bool>,
}

/// Sessions in memory, backed by the event log. Requests on one session are
/// serialized by that session's lock; sessions never block each other.
pub struct SessionStore {
    runner: Arc<QuizRunner>,
    log: EventLog,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    clock: Arc<dyn Clock>,
    ids: Arc<dyn IdGenerator>,
    cutoff: Cutoff,
    salt: String,
}

impl SessionStore {
    /// Opens `data_dir/events.jsonl` and replays it.
    pub fn open(
        data_dir: &Path,
        runner: Arc<QuizRunner>,
        clock: Arc<dyn Clock>,
        ids: Arc<dyn IdGenerator>,
        cutoff: Cutoff,
        salt: String,
    ) -> Result<Self, StoreError> {
        std::fs::create_dir_all(data_dir).map_err(|source| LogError::Io {
            path: data_dir.to_path_buf(),
            source,
        })?;
        let (log, events) = EventLog::open(&data_dir.join(EVENT_LOG))?;
        let mut sessions: HashMap<String, Entry> = HashMap::new();
        let n = events.len();
        for e in events {
            apply(&runner, &mut sessions, e)?;
        }
        log::info!("replayed {n} events into {} sessions", sessions.len());
        Ok(SessionStore {
            runner,
            log,
            sessions: RwLock::new(sessions.into_iter().map(|(k, v)| (k, Arc::new(Mutex::new(v)))).collect()),
            clock,
            ids,
            cutoff,
            salt,
        })
    }

    pub fn runner(&self) -> &QuizRunner {
        &self.runner
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<Entry>>, StoreError> {
        self.sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.sessions.read().unwrap_or_else(|p| p.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self) -> Result<String, StoreError> {
        let id = loop {
            let id = self.ids.next_id();
            if !self.sessions.read().unwrap_or_else(|p| p.into_inner()).contains_key(&id) {
                break id;
            }
        };
        let session = self.runner.start(id.clone(), self.clock.now_ms());
        self.log.append(&Event::SessionStarted {
            session_id: id.clone(),
            quiz_fingerprint: session.quiz_fingerprint.clone(),
            started_ms: session.started_ms,
        })?;
        let entry = Arc::new(Mutex::new(Entry {
            session,
            demographics: None,
        }));
        self.sessions.write().unwrap_or_else(|p| p.into_inner()).insert(id.clone(), entry);
        Ok(id)
    }

    pub async fn snapshot(&self, id: &str) -> Result<Entry, StoreError> {
        Ok(self.entry(id)?.lock().await.clone())
    }

    pub async fn next_question(&self, id: &str) -> Result<Option<Question>, StoreError> {
        let entry = self.entry(id)?;
        let e = entry.lock().await;
        Ok(match self.runner.next_question(&e.session) {
            Next::Ask(q) => Some(q.clone()),
            Next::Done => None,
        })
    }

    /// Records an answer; returns whether the session is now complete.
    pub async fn answer(&self, id: &str, question_id: &str, choice_index: usize) -> Result<bool, StoreError> {
        let entry = self.entry(id)?;
        let mut e = entry.lock().await;
        self.runner.check_answer(&e.session, question_id, choice_index)?;
        let now = self.clock.now_ms();
        self.log.append(&Event::AnswerRecorded {
            session_id: id.to_string(),
            question_id: question_id.to_string(),
            choice_index,
            timestamp_ms: now,
        })?;
        self.runner.answer(&mut e.session, question_id, choice_index, now)?;
        Ok(e.session.is_complete())
    }

    pub async fn result(&self, id: &str) -> Result<Vote, StoreError> {
        let entry = self.entry(id)?;
        let e = entry.lock().await;
        Ok(self.runner.predict_session(&e.session)?)
    }

    pub async fn record_demographics(&self, id: &str, input: &DemographicsInput) -> Result<IntakeResult, StoreError> {
        let entry = self.entry(id)?;
        let mut e = entry.lock().await;
        let vote = self.runner.predict_session(&e.session)?;
        if e.demographics.is_some() {
            return Err(StoreError::DemographicsRecorded);
        }
        let d = Demographics::from_intake(input, &self.salt)?;
        self.log.append(&Event::DemographicsRecorded {
            session_id: id.to_string(),
            demographics: d.clone(),
            timestamp_ms: self.clock.now_ms(),
        })?;
        let bmi = d.bmi();
        e.demographics = Some(d);
        Ok(IntakeResult {
            bmi,
            agreed: bmi.map(|b| self.cutoff.label(b) == vote.label),
        })
    }

    /// Every completed session, ordered by start time then id.
    pub async fn records(&self) -> Vec<RespondentRecord> {
        let entries: Vec<Arc<Mutex<Entry>>> = self
            .sessions
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .values()
            .cloned()
            .collect();
        let mut out = Vec::new();
        for entry in entries {
            let e = entry.lock().await;
            if let Ok(r) = RespondentRecord::new(&e.session, e.demographics.clone().unwrap_or_default(), &self.cutoff) {
                out.push((e.session.started_ms, r));
            }
        }
        out.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.session_id.cmp(&b.1.session_id)));
        out.into_iter().map(|(_, r)| r).collect()
    }

    pub fn salt(&self) -> &str {
        &self.salt
    }
}

fn apply(runner: &QuizRunner, sessions: &mut HashMap<String, Entry>, event: Event) -> Result<(), StoreError> {
    let replay_err = |session: &str, message: String| StoreError::Replay {
        session: session.to_string(),
        message,
    };
    match event {
        Event::SessionStarted {
            session_id,
            quiz_fingerprint,
            started_ms,
        } => {
            if quiz_fingerprint != runner.fingerprint() {
                return Err(replay_err(&session_id, "logged for a different quiz".into()));
            }
            let s = runner.start(session_id.clone(), started_ms);
            if sessions
                .insert(
                    session_id.clone(),
                    Entry {
                        session: s,
                        demographics: None,
                    },
                )
                .is_some()
            {
                return Err(replay_err(&session_id, "started twice".into()));
            }
        }
        Event::AnswerRecorded {
            session_id,
            question_id,
            choice_index,
            timestamp_ms,
        } => {
            let e = sessions
                .get_mut(&session_id)
                .ok_or_else(|| replay_err(&session_id, "answer before start".into()))?;
            runner
                .answer(&mut e.session, &question_id, choice_index, timestamp_ms)
                .map_err(|err| replay_err(&session_id, err.to_string()))?;
        }
        Event::DemographicsRecorded {
            session_id, demographics, ..
        } => {
            let e = sessions
                .get_mut(&session_id)
                .ok_or_else(|| replay_err(&session_id, "demographics before start".into()))?;
            e.demographics = Some(demographics);
        }
    }
    Ok(())
}
