//! Quiz sessions: choose the next question by walking the trees, record
//! answers, and vote once every tree reaches a leaf.
//!
//! Answers are keyed by feature, so one answer resolves every node on that
//! feature in every tree. The next question is found by scanning trees in
//! index order and, within a tree, following answered predicates from the
//! root until the first unanswered feature.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::features::{Bin, FeatureId};
use crate::forest::Vote;
use crate::quizkit::{CoverageReport, Question, QuizNode, QuizSpec};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("quiz failed validation: {0:?}")]
    InvalidSpec(CoverageReport),
    #[error("unknown question `{0}`")]
    UnknownQuestion(String),
    #[error("choice index {0} out of range")]
    InvalidChoice(usize),
    #[error("already_answered: {0}")]
    AlreadyAnswered(FeatureId),
    #[error("session is already complete")]
    AlreadyComplete,
    #[error("incomplete: session has unanswered questions")]
    Incomplete,
    #[error("session belongs to a different quiz")]
    QuizMismatch,
}

/// Millisecond timestamps for transcripts.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Deterministic clock advancing by a fixed step on every read.
#[derive(Debug)]
pub struct StepClock {
    next: AtomicU64,
    step: u64,
}

impl StepClock {
    pub fn new(start: u64, step: u64) -> Self {
        StepClock {
            next: AtomicU64::new(start),
            step,
        }
    }
}

impl Clock for StepClock {
    fn now_ms(&self) -> u64 {
        self.next.fetch_add(self.step, Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    InProgress,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub question_id: String,
    pub choice_index: usize,
    pub timestamp_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub quiz_fingerprint: String,
    pub started_ms: u64,
    pub answers: BTreeMap<FeatureId, Bin>,
    pub transcript: Vec<TranscriptEntry>,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Vote>,
    /// Leaf label reached in each tree, once complete.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree_labels: Option<Vec<bool>>,
}

impl Session {
    pub fn is_complete(&self) -> bool {
        self.status == Status::Complete
    }

    pub fn questions_answered(&self) -> usize {
        self.transcript.len()
    }
}

pub enum Next<'a> {
    Ask(&'a Question),
    Done,
}

/// A validated quiz ready to drive sessions. Cheap to clone.
#[derive(Debug, Clone)]
pub struct QuizRunner {
    spec: Arc<QuizSpec>,
    index: Arc<HashMap<String, usize>>,
    fingerprint: Arc<str>,
}

enum Walk<'a> {
    Leaf(bool),
    Blocked(&'a str),
}

impl QuizRunner {
    pub fn new(spec: QuizSpec) -> Result<Self, EngineError> {
        let report = spec.self_check();
        if !report.pass() {
            return Err(EngineError::InvalidSpec(report));
        }
        let index = spec
            .questions
            .iter()
            .enumerate()
            .map(|(i, q)| (q.id.clone(), i))
            .collect();
        let fingerprint = spec.fingerprint().into();
        Ok(QuizRunner {
            spec: Arc::new(spec),
            index: Arc::new(index),
            fingerprint,
        })
    }

    pub fn spec(&self) -> &QuizSpec {
        &self.spec
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn question(&self, id: &str) -> Option<&Question> {
        self.index.get(id).map(|&i| &self.spec.questions[i])
    }

    pub fn start(&self, session_id: impl Into<String>, now_ms: u64) -> Session {
        let mut s = Session {
            session_id: session_id.into(),
            quiz_fingerprint: self.fingerprint.to_string(),
            started_ms: now_ms,
            answers: BTreeMap::new(),
            transcript: Vec::new(),
            status: Status::InProgress,
            prediction: None,
            tree_labels: None,
        };
        self.refresh(&mut s);
        s
    }

    /// Starts a session with a random v4 UUID.
    pub fn start_random(&self, clock: &dyn Clock) -> Session {
        self.start(uuid::Uuid::new_v4().to_string(), clock.now_ms())
    }

    fn walk<'a>(&'a self, tree: &'a QuizNode, answers: &BTreeMap<FeatureId, Bin>) -> Walk<'a> {
        let mut node = tree;
        loop {
            match node {
                QuizNode::Leaf { label } => return Walk::Leaf(*label),
                QuizNode::Ask {
                    question,
                    threshold,
                    no,
                    yes,
                } => {
                    let q = self.question(question).expect("validated spec");
                    match answers.get(&q.feature) {
                        None => return Walk::Blocked(question),
                        Some(b) => node = if b.get() > *threshold { yes } else { no },
                    }
                }
            }
        }
    }

    fn tree_labels(&self, answers: &BTreeMap<FeatureId, Bin>) -> Option<Vec<bool>> {
        self.spec
            .trees
            .iter()
            .map(|t| match self.walk(t, answers) {
                Walk::Leaf(l) => Some(l),
                Walk::Blocked(_) => None,
            })
            .collect()
    }

    fn refresh(&self, s: &mut Session) {
        if let Some(labels) = self.tree_labels(&s.answers) {
            s.status = Status::Complete;
            s.prediction = Some(Vote::from_labels(labels.iter().copied()));
            s.tree_labels = Some(labels);
        }
    }

    pub fn next_question(&self, session: &Session) -> Next<'_> {
        for t in &self.spec.trees {
            if let Walk::Blocked(qid) = self.walk(t, &session.answers) {
                return Next::Ask(self.question(qid).expect("validated spec"));
            }
        }
        Next::Done
    }

    /// Checks an answer without applying it.
    pub fn check_answer(&self, session: &Session, question_id: &str, choice_index: usize) -> Result<(), EngineError> {
        if session.quiz_fingerprint != *self.fingerprint {
            return Err(EngineError::QuizMismatch);
        }
        let q = self
            .question(question_id)
            .ok_or_else(|| EngineError::UnknownQuestion(question_id.to_string()))?;
        if choice_index >= q.choices.len() {
            return Err(EngineError::InvalidChoice(choice_index));
        }
        if session.answers.contains_key(&q.feature) {
            return Err(EngineError::AlreadyAnswered(q.feature.clone()));
        }
        if session.is_complete() {
            return Err(EngineError::AlreadyComplete);
        }
        Ok(())
    }

    pub fn answer(
        &self,
        session: &mut Session,
        question_id: &str,
        choice_index: usize,
        now_ms: u64,
    ) -> Result<(), EngineError> {
        self.check_answer(session, question_id, choice_index)?;
        let q = self.question(question_id).expect("checked");
        session.answers.insert(q.feature.clone(), q.choices[choice_index].bin);
        session.transcript.push(TranscriptEntry {
            question_id: question_id.to_string(),
            choice_index,
            timestamp_ms: now_ms,
        });
        self.refresh(session);
        Ok(())
    }

    pub fn predict_session(&self, session: &Session) -> Result<Vote, EngineError> {
        session.prediction.ok_or(EngineError::Incomplete)
    }

    /// Rebuilds a session by applying a transcript to a fresh start.
    pub fn replay(&self, session_id: &str, started_ms: u64, transcript: &[TranscriptEntry]) -> Result<Session, EngineError> {
        let mut s = self.start(session_id, started_ms);
        for e in transcript {
            self.answer(&mut s, &e.question_id, e.choice_index, e.timestamp_ms)?;
        }
        Ok(s)
    }
}

/// How a simulated respondent picks a choice.
pub trait AnswerPolicy: Sync {
    fn choose(&self, question: &Question, rng: &mut seed::Rng) -> usize;
}

impl<F> AnswerPolicy for F
where
    F: Fn(&Question, &mut seed::Rng) -> usize + Sync,
{
    fn choose(&self, question: &Question, rng: &mut seed::Rng) -> usize {
        self(question, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Always(usize),
    Uniform,
    /// Relative weights of choices 0, 1, 2.
    Weighted([f64; 3]),
}

impl std::str::FromStr for Policy {
    type Err = String;

    /// `uniform`, `always-<i>`, or `weighted:<a>,<b>,<c>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "uniform" {
            return Ok(Policy::Uniform);
        }
        if let Some(i) = s.strip_prefix("always-") {
            return match i.parse::<usize>() {
                Ok(i) if i < 3 => Ok(Policy::Always(i)),
                _ => Err(format!("bad policy `{s}`")),
            };
        }
        if let Some(w) = s.strip_prefix("weighted:") {
            let ws: Vec<f64> = w
                .split(',')
                .map(|x| x.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| format!("bad weights in `{s}`: {e}"))?;
            let ws: [f64; 3] = ws.try_into().map_err(|_| format!("`{s}` needs 3 weights"))?;
            if ws.iter().any(|&x| x.is_nan() || x < 0.0) || ws.iter().sum::<f64>() <= 0.0 {
                return Err(format!("weights in `{s}` must be non-negative and not all zero"));
            }
            return Ok(Policy::Weighted(ws));
        }
        Err(format!("unknown policy `{s}` (uniform, always-<0|1|2>, weighted:a,b,c)"))
    }
}

impl AnswerPolicy for Policy {
    fn choose(&self, _question: &Question, rng: &mut seed::Rng) -> usize {
        match *self {
            Policy::Always(i) => i,
            Policy::Uniform => rng.random_range(0..3),
            Policy::Weighted(w) => {
                let u = rng.random::<f64>() * w.iter().sum::<f64>();
                let mut acc = 0.0;
                for (i, x) in w.iter().enumerate() {
                    acc += x;
                    if u < acc {
                        return i;
                    }
                }
                2
            }
        }
    }
}

/// Runs one session to completion. The id and timestamps derive from `seed`.
pub fn simulate_session(runner: &QuizRunner, policy: &dyn AnswerPolicy, seed: u64) -> Session {
    let mut rng = seed::rng(seed, &[]);
    let clock = StepClock::new(0, 1000);
    let mut s = runner.start(format!("sim-{seed:016x}"), clock.now_ms());
    while let Next::Ask(q) = runner.next_question(&s) {
        let choice = policy.choose(q, &mut rng).min(q.choices.len() - 1);
        let id = q.id.clone();
        runner
            .answer(&mut s, &id, choice, clock.now_ms())
            .expect("engine only asks unanswered questions");
    }
    s
}

/// `n` independent sessions; session `i` uses the seed stream `(seed, i)`.
pub fn simulate_many(runner: &QuizRunner, policy: &dyn AnswerPolicy, n: usize, seed: u64, exec: Execution) -> Vec<Session> {
    exec.map_indexed(n, |i| simulate_session(runner, policy, seed::derive(seed, &[i as u64])))
}
