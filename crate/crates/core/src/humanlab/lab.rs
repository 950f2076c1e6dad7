use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{create_session, normalize, score_humans, Criterion, HumanScores, QuestionPool, ResponseRecord, SessionPlan};
use crate::error::{Error, Result, SessionError};
use crate::seed::derive_seed;

pub trait Clock: Send + Sync {
    /// Milliseconds since the Unix epoch.
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
    }
}

/// Clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn advance_ms(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock> Clock for std::sync::Arc<C> {
    fn now_ms(&self) -> u64 {
        (**self).now_ms()
    }
}

/// One line of the event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated { plan: SessionPlan },
    Answer { record: ResponseRecord },
}

/// What a participant sees. Carries no attention-check flag.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionView {
    pub session_id: String,
    pub question_id: String,
    /// Zero-based position in the session.
    pub index: usize,
    pub total: usize,
    pub prompt: String,
    pub remaining_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ack {
    pub record_id: u64,
    pub session_id: String,
    pub question_id: String,
    pub answered: usize,
    pub total: usize,
    pub complete: bool,
}

struct Session {
    plan: SessionPlan,
    responses: Vec<ResponseRecord>,
}

impl Session {
    fn is_complete(&self) -> bool {
        self.responses.len() == self.plan.questions.len()
    }
}

struct State {
    sessions: BTreeMap<String, Session>,
    created: u64,
    next_record: u64,
    log: Option<File>,
}

impl State {
    fn apply(&mut self, event: Event) -> Result<()> {
        match event {
            Event::SessionCreated { plan } => {
                self.created += 1;
                self.sessions.insert(plan.session_id.clone(), Session { plan, responses: Vec::new() });
            }
            Event::Answer { record } => {
                let session = self
                    .sessions
                    .get_mut(&record.session_id)
                    .ok_or_else(|| SessionError::UnknownSession(record.session_id.clone()))?;
                self.next_record = self.next_record.max(record.record_id + 1);
                session.responses.push(record);
            }
        }
        Ok(())
    }

    /// Persists before applying, so a crash never leaves memory ahead of disk.
    fn commit(&mut self, event: Event) -> Result<()> {
        if let Some(log) = self.log.as_mut() {
            let mut line = serde_json::to_string(&event)?;
            line.push('\n');
            log.write_all(line.as_bytes())?;
            log.sync_data()?;
        }
        self.apply(event)
    }
}

/// Session service backed by an append-only JSON-lines log.
pub struct Lab {
    pool: QuestionPool,
    seed: u64,
    clock: Box<dyn Clock>,
    path: Option<PathBuf>,
    state: Mutex<State>,
}

impl Lab {
    pub fn in_memory(pool: QuestionPool, seed: u64, clock: Box<dyn Clock>) -> Result<Self> {
        pool.validate()?;
        Ok(Lab {
            pool,
            seed,
            clock,
            path: None,
            state: Mutex::new(State { sessions: BTreeMap::new(), created: 0, next_record: 0, log: None }),
        })
    }

    /// Opens or creates the log at `path` and replays it. A torn final line
    /// left by a crash is cut off; any other malformed line is an error.
    pub fn open(pool: QuestionPool, seed: u64, clock: Box<dyn Clock>, path: &Path) -> Result<Self> {
        let lab = Lab::in_memory(pool, seed, clock)?;
        let mut file = OpenOptions::new().read(true).append(true).create(true).open(path)?;
        let mut good_len = 0u64;
        {
            let mut state = lab.state.lock().expect("fresh lock");
            let mut reader = BufReader::new(&file);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                if !line.ends_with('\n') {
                    break;
                }
                if !line.trim().is_empty() {
                    let event: Event = serde_json::from_str(&line).map_err(|source| Error::Record {
                        path: path.display().to_string(),
                        line: lineno,
                        source,
                    })?;
                    for q in event_questions(&event) {
                        if lab.pool.get(q).is_none() {
                            return Err(SessionError::UnknownQuestion(q.to_string()).into());
                        }
                    }
                    state.apply(event)?;
                }
                good_len += n as u64;
            }
        }
        if file.metadata()?.len() > good_len {
            file.set_len(good_len)?;
            file.seek(SeekFrom::End(0))?;
        }
        let mut lab = lab;
        lab.path = Some(path.to_path_buf());
        lab.state.get_mut().expect("unshared").log = Some(file);
        Ok(lab)
    }

    pub fn pool(&self) -> &QuestionPool {
        &self.pool
    }

    pub fn log_path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn create_session(&self) -> Result<SessionPlan> {
        let mut state = self.lock();
        let plan = create_session(&self.pool, derive_seed(self.seed, "session", state.created), self.clock.now_ms())?;
        if state.sessions.contains_key(&plan.session_id) {
            return Err(Error::Config(format!("session id collision on {}", plan.session_id)));
        }
        state.commit(Event::SessionCreated { plan: plan.clone() })?;
        Ok(plan)
    }

    /// The next unanswered question, or `None` once the session is complete.
    pub fn next_question(&self, session_id: &str) -> Result<Option<QuestionView>> {
        let state = self.lock();
        let session =
            state.sessions.get(session_id).ok_or_else(|| SessionError::UnknownSession(session_id.to_string()))?;
        if session.is_complete() {
            return Ok(None);
        }
        let now = self.clock.now_ms();
        if now > session.plan.deadline_ms() {
            return Err(SessionError::Expired(session_id.to_string()).into());
        }
        let index = session.responses.len();
        let planned = &session.plan.questions[index];
        let question = self
            .pool
            .get(&planned.question_id)
            .ok_or_else(|| SessionError::UnknownQuestion(planned.question_id.clone()))?;
        Ok(Some(QuestionView {
            session_id: session_id.to_string(),
            question_id: question.id.clone(),
            index,
            total: session.plan.questions.len(),
            prompt: question.prompt.clone(),
            remaining_ms: session.plan.deadline_ms() - now,
        }))
    }

    /// Records an answer. Questions must be answered once each, in plan
    /// order, before the time budget runs out.
    pub fn submit_answer(&self, session_id: &str, question_id: &str, text: &str, elapsed_ms: u64) -> Result<Ack> {
        let mut state = self.lock();
        let now = self.clock.now_ms();
        let session =
            state.sessions.get(session_id).ok_or_else(|| SessionError::UnknownSession(session_id.to_string()))?;
        let Some(position) = session.plan.questions.iter().position(|q| q.question_id == question_id) else {
            return Err(SessionError::UnknownQuestion(question_id.to_string()).into());
        };
        if position < session.responses.len() {
            return Err(SessionError::Duplicate(question_id.to_string()).into());
        }
        if session.is_complete() {
            return Err(SessionError::Complete(session_id.to_string()).into());
        }
        if now > session.plan.deadline_ms() {
            return Err(SessionError::Expired(session_id.to_string()).into());
        }
        let expected = &session.plan.questions[session.responses.len()];
        if expected.question_id != question_id {
            return Err(SessionError::OutOfOrder {
                expected: expected.question_id.clone(),
                got: question_id.to_string(),
            }
            .into());
        }
        let attention = expected.attention;
        let total = session.plan.questions.len();
        let answered = session.responses.len() + 1;
        let record = ResponseRecord {
            record_id: state.next_record,
            session_id: session_id.to_string(),
            question_id: question_id.to_string(),
            raw_answer: text.to_string(),
            normalized: normalize(text),
            elapsed_ms,
            attention,
            submitted_at_ms: now,
        };
        let record_id = record.record_id;
        state.commit(Event::Answer { record })?;
        Ok(Ack {
            record_id,
            session_id: session_id.to_string(),
            question_id: question_id.to_string(),
            answered,
            total,
            complete: answered == total,
        })
    }

    /// Consistent copy of every session and its responses.
    pub fn snapshot(&self) -> Vec<(SessionPlan, Vec<ResponseRecord>)> {
        self.lock().sessions.values().map(|s| (s.plan.clone(), s.responses.clone())).collect()
    }

    pub fn results(&self, criterion: Criterion) -> Result<HumanScores> {
        score_humans(&self.pool, &self.snapshot(), criterion)
    }
}

fn event_questions(event: &Event) -> Vec<&str> {
    match event {
        Event::SessionCreated { plan } => plan.questions.iter().map(|q| q.question_id.as_str()).collect(),
        Event::Answer { record } => vec![record.question_id.as_str()],
    }
}
