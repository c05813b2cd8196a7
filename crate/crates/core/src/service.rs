//! Session persistence and the JSON API for the participant client.
//!
//! Each session lives in `sessions/<id>.log`, one JSON [`EventRecord`] per
//! line. The first record holds the creation parameters; every later record
//! is an accepted [`SessionCommand`]. A command is validated on a copy of the
//! session, appended and synced to the log, and only then applied, so every
//! acknowledged mutation survives a crash and replay rebuilds the same state.
//!
//! Routes:
//!
//! | method | path                       | body                 |
//! |--------|----------------------------|----------------------|
//! | POST   | `/sessions`                | [`CreateRequest`]    |
//! | GET    | `/sessions/{id}/step`      |                      |
//! | POST   | `/sessions/{id}/advance`   | [`AdvanceRequest`] (consent or learning card) |
//! | POST   | `/sessions/{id}/response`  | [`ResponseRequest`]  |
//! | POST   | `/sessions/{id}/likert`    | [`LikertRequest`]    |
//! | GET    | `/sessions/{id}/summary`   |                      |
//! | GET    | `/deck/meta`               |                      |
//! | GET    | `/media/{file}`            |                      |

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Deck, EmbeddingStore};
use crate::scoring::{ResponseRow, TaskCode};
use crate::stats::{aggregate_participant, score_session, ParticipantMetrics};
use crate::study::{
    create_session, AdvanceKind, CommandOutcome, Condition, Phase, SessionCommand, SessionParams, StepDescriptor,
    StudyError, StudySession, Task, TimingPolicy,
};

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A clock moved by hand, for tests and simulations.
#[derive(Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        Self(AtomicU64::new(start_ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EventPayload {
    Created { deck: String, params: SessionParams },
    Command { command: SessionCommand },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub session_id: String,
    pub seq: u64,
    pub ts_ms: u64,
    #[serde(flatten)]
    pub payload: EventPayload,
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("log is empty")]
    Empty,
    #[error("line {line}: corrupt record: {message}")]
    Corrupt { line: usize, message: String },
    #[error("line {line}: expected seq {expected}, found {found}")]
    Gap { line: usize, expected: u64, found: u64 },
    #[error("line {line}: first record must be the session creation")]
    NotCreated { line: usize },
    #[error("line {line}: record belongs to session {found:?}, not {expected:?}")]
    ForeignRecord { line: usize, expected: String, found: String },
    #[error("line {line}: log was written for deck {found:?}, serving {expected:?}")]
    DeckMismatch { line: usize, expected: String, found: String },
    #[error("line {line}: command rejected on replay: {source}")]
    Rejected {
        line: usize,
        #[source]
        source: StudyError,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

/// Splits a log into its newline-terminated part and an unterminated tail.
/// Records are written whole with their newline, so an unterminated tail is
/// a write that was interrupted before it could be acknowledged.
pub fn split_torn_tail(text: &str) -> (&str, Option<&str>) {
    match text.rfind('\n') {
        _ if text.is_empty() || text.ends_with('\n') => (text, None),
        Some(i) => (&text[..=i], Some(&text[i + 1..])),
        None => ("", Some(text)),
    }
}

/// Parses log records, checking sequence numbers. Stops at the first problem.
/// An unterminated final line is ignored (see [`split_torn_tail`]).
pub fn read_records(text: &str) -> Result<Vec<EventRecord>, ReplayError> {
    let (text, torn) = split_torn_tail(text);
    if let Some(tail) = torn {
        log::warn!("ignoring unterminated final record ({} bytes)", tail.len());
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EventRecord = serde_json::from_str(line).map_err(|e| ReplayError::Corrupt {
            line: line_no,
            message: e.to_string(),
        })?;
        let expected = out.len() as u64;
        if rec.seq != expected {
            return Err(ReplayError::Gap {
                line: line_no,
                expected,
                found: rec.seq,
            });
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(ReplayError::Empty);
    }
    Ok(out)
}

/// Folds records through the study state machine.
pub fn replay_records(deck: &Deck, records: &[EventRecord]) -> Result<StudySession, ReplayError> {
    let first = records.first().ok_or(ReplayError::Empty)?;
    let EventPayload::Created { deck: deck_name, params } = &first.payload else {
        return Err(ReplayError::NotCreated { line: 1 });
    };
    if deck_name != deck.name() {
        return Err(ReplayError::DeckMismatch {
            line: 1,
            expected: deck.name().to_string(),
            found: deck_name.clone(),
        });
    }
    let mut session =
        create_session(deck, params, first.ts_ms).map_err(|source| ReplayError::Rejected { line: 1, source })?;
    for (i, rec) in records.iter().enumerate().skip(1) {
        let line = i + 1;
        if rec.session_id != session.session_id {
            return Err(ReplayError::ForeignRecord {
                line,
                expected: session.session_id.clone(),
                found: rec.session_id.clone(),
            });
        }
        match &rec.payload {
            EventPayload::Created { .. } => return Err(ReplayError::Corrupt {
                line,
                message: "second creation record".into(),
            }),
            EventPayload::Command { command } => {
                session
                    .apply(deck, command, rec.ts_ms)
                    .map_err(|source| ReplayError::Rejected { line, source })?;
            }
        }
    }
    Ok(session)
}

pub fn replay_log(deck: &Deck, path: impl AsRef<Path>) -> Result<StudySession, ReplayError> {
    let text = fs::read_to_string(path)?;
    replay_records(deck, &read_records(&text)?)
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("no session {0:?}")]
    NotFound(String),
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("storage: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("scoring: {0}")]
    Stats(#[from] crate::stats::StatsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub completed_trials: usize,
    pub total_trials: usize,
    pub likert_rated: usize,
}

/// What the client receives after every request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSessionView {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub done: bool,
    pub progress: Progress,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<StepDescriptor>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<CommandOutcome>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CreateRequest {
    pub participant_id: String,
    #[serde(default)]
    pub condition: Option<Condition>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdvanceRequest {
    pub step_id: u64,
    #[serde(default = "manual")]
    pub kind: AdvanceKind,
    #[serde(default)]
    pub client_elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseRequest {
    pub step_id: u64,
    #[serde(default)]
    pub response: String,
    #[serde(default = "manual")]
    pub kind: AdvanceKind,
    #[serde(default)]
    pub client_elapsed_ms: Option<u64>,
}

fn manual() -> AdvanceKind {
    AdvanceKind::Manual
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LikertRequest {
    pub word: String,
    pub rating: u8,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeckMeta {
    pub name: String,
    pub size: usize,
    pub set_size: usize,
    pub conditions: Vec<Condition>,
    pub policy: TimingPolicy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub phase: Phase,
    pub done: bool,
    pub events: usize,
    pub likert_rated: usize,
    /// Present once the session is done and word vectors are loaded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<ParticipantMetrics>,
}

struct Slot {
    session: StudySession,
    log: File,
    next_seq: u64,
}

impl Slot {
    fn append(&mut self, ts_ms: u64, payload: EventPayload) -> std::io::Result<()> {
        let rec = EventRecord {
            session_id: self.session.session_id.clone(),
            seq: self.next_seq,
            ts_ms,
            payload,
        };
        let mut line = serde_json::to_string(&rec).expect("record serializes");
        line.push('\n');
        self.log.write_all(line.as_bytes())?;
        self.log.sync_data()?;
        self.next_seq += 1;
        Ok(())
    }
}

/// All sessions of one deck, backed by a directory of logs.
pub struct SessionStore {
    deck: Arc<Deck>,
    dir: PathBuf,
    clock: Arc<dyn Clock>,
    vectors: Option<Arc<EmbeddingStore>>,
    policy: TimingPolicy,
    sessions: Mutex<HashMap<String, Arc<Mutex<Slot>>>>,
    created: AtomicU64,
}

fn log_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.log"))
}

impl SessionStore {
    /// Opens `dir`, replaying every log in it. Logs that fail to replay are
    /// left on disk and reported in the second return value.
    pub fn open(
        deck: Arc<Deck>,
        dir: impl Into<PathBuf>,
        clock: Arc<dyn Clock>,
    ) -> Result<(Self, Vec<(PathBuf, ReplayError)>), ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut sessions = HashMap::new();
        let mut failures = Vec::new();
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "log"))
            .collect();
        paths.sort();
        for path in paths {
            let loaded = fs::read_to_string(&path)
                .map_err(ReplayError::from)
                .and_then(|t| read_records(&t))
                .and_then(|recs| Ok((replay_records(&deck, &recs)?, recs.len() as u64)));
            match loaded {
                Ok((session, next_seq)) => {
                    let log = OpenOptions::new().append(true).open(&path)?;
                    let text = fs::read_to_string(&path)?;
                    if let (committed, Some(_)) = split_torn_tail(&text) {
                        log::warn!("truncating interrupted write at the end of {}", path.display());
                        log.set_len(committed.len() as u64)?;
                    }
                    sessions.insert(
                        session.session_id.clone(),
                        Arc::new(Mutex::new(Slot {
                            session,
                            log,
                            next_seq,
                        })),
                    );
                }
                Err(e) => {
                    log::error!("cannot recover {}: {e}", path.display());
                    failures.push((path, e));
                }
            }
        }
        log::info!("recovered {} sessions from {}", sessions.len(), dir.display());
        let created = AtomicU64::new(sessions.len() as u64);
        Ok((
            Self {
                deck,
                dir,
                clock,
                vectors: None,
                policy: TimingPolicy::default(),
                sessions: Mutex::new(sessions),
                created,
            },
            failures,
        ))
    }

    pub fn with_vectors(mut self, vectors: Arc<EmbeddingStore>) -> Self {
        self.vectors = Some(vectors);
        self
    }

    pub fn with_policy(mut self, policy: TimingPolicy) -> Result<Self, ServiceError> {
        policy.validate()?;
        self.policy = policy;
        Ok(self)
    }

    pub fn deck(&self) -> &Deck {
        &self.deck
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.lock().expect("session map").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn slot(&self, id: &str) -> Result<Arc<Mutex<Slot>>, ServiceError> {
        self.sessions
            .lock()
            .expect("session map")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(id.to_string()))
    }

    /// A copy of the current state of one session.
    pub fn session(&self, id: &str) -> Result<StudySession, ServiceError> {
        Ok(self.slot(id)?.lock().expect("session slot").session.clone())
    }

    fn view(&self, session: &StudySession, now: u64, outcome: Option<CommandOutcome>) -> ApiSessionView {
        let step = if session.is_done() {
            None
        } else {
            Some(session.current_step(&self.deck, now).expect("active session has a step"))
        };
        ApiSessionView {
            session_id: session.session_id.clone(),
            participant_id: session.participant_id.clone(),
            condition: session.condition,
            done: session.is_done(),
            progress: Progress {
                completed_trials: session.events.len(),
                total_trials: self.deck.len() * 3,
                likert_rated: session.likert.len(),
            },
            step,
            outcome,
        }
    }

    /// Starts a session. Conditions rotate Auto-I, Auto-II, Auto-III,
    /// Manual-II unless overridden.
    pub fn create(&self, req: &CreateRequest) -> Result<ApiSessionView, ServiceError> {
        let participant_id = req.participant_id.trim();
        if participant_id.is_empty() {
            return Err(ServiceError::BadRequest("participant_id must be non-empty".into()));
        }
        let n = self.created.fetch_add(1, Ordering::SeqCst);
        let condition = req
            .condition
            .unwrap_or(Condition::ALL[(n % Condition::ALL.len() as u64) as usize]);
        let params = SessionParams {
            session_id: uuid::Uuid::new_v4().to_string(),
            participant_id: participant_id.to_string(),
            condition,
            seed: req.seed.unwrap_or_else(rand::random),
            policy: self.policy.clone(),
        };
        let now = self.clock.now_ms();
        let session = create_session(&self.deck, &params, now)?;
        let log = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(log_path(&self.dir, &params.session_id))?;
        let mut slot = Slot {
            session,
            log,
            next_seq: 0,
        };
        slot.append(
            now,
            EventPayload::Created {
                deck: self.deck.name().to_string(),
                params: params.clone(),
            },
        )?;
        let view = self.view(&slot.session, now, None);
        self.sessions
            .lock()
            .expect("session map")
            .insert(params.session_id, Arc::new(Mutex::new(slot)));
        Ok(view)
    }

    /// Validates `command` on a copy, logs it, then commits it.
    pub fn execute(&self, id: &str, command: SessionCommand) -> Result<ApiSessionView, ServiceError> {
        let slot = self.slot(id)?;
        let mut slot = slot.lock().expect("session slot");
        let now = self.clock.now_ms();
        let mut next = slot.session.clone();
        let outcome = next.apply(&self.deck, &command, now)?;
        let changed = !matches!(outcome, CommandOutcome::Expired { count: 0 });
        if changed {
            slot.append(now, EventPayload::Command { command })?;
            slot.session = next;
        }
        Ok(self.view(&slot.session, now, Some(outcome)))
    }

    /// Current step, after applying any timeouts that are due. A finished
    /// session returns a view with `done` set and no step.
    pub fn step(&self, id: &str) -> Result<ApiSessionView, ServiceError> {
        if self.session(id)?.is_done() {
            let session = self.session(id)?;
            return Ok(self.view(&session, self.clock.now_ms(), None));
        }
        let mut view = self.execute(id, SessionCommand::Expire)?;
        if let Some(CommandOutcome::Expired { count: 0 }) = view.outcome {
            view.outcome = None;
        }
        Ok(view)
    }

    /// Leaves the consent page or the current learning card.
    pub fn advance(&self, id: &str, req: &AdvanceRequest) -> Result<ApiSessionView, ServiceError> {
        let command = if self.session(id)?.phase == Phase::Consent {
            SessionCommand::AcceptConsent { step_id: req.step_id }
        } else {
            SessionCommand::AdvanceLearning {
                step_id: req.step_id,
                advance: req.kind,
                client_elapsed_ms: req.client_elapsed_ms,
            }
        };
        self.execute(id, command)
    }

    pub fn respond(&self, id: &str, req: &ResponseRequest) -> Result<ApiSessionView, ServiceError> {
        self.execute(
            id,
            SessionCommand::SubmitResponse {
                step_id: req.step_id,
                response: req.response.clone(),
                advance: req.kind,
                client_elapsed_ms: req.client_elapsed_ms,
            },
        )
    }

    pub fn likert(&self, id: &str, req: &LikertRequest) -> Result<ApiSessionView, ServiceError> {
        self.execute(
            id,
            SessionCommand::SubmitLikert {
                word: req.word.clone(),
                rating: req.rating,
            },
        )
    }

    pub fn summary(&self, id: &str) -> Result<SessionSummary, ServiceError> {
        let session = self.session(id)?;
        let metrics = match (&self.vectors, session.is_done()) {
            (Some(v), true) => {
                let scores = score_session(&session, &self.deck, v)?;
                Some(aggregate_participant(&session, &scores)?)
            }
            _ => None,
        };
        Ok(SessionSummary {
            session_id: session.session_id.clone(),
            participant_id: session.participant_id.clone(),
            condition: session.condition,
            phase: session.phase,
            done: session.is_done(),
            events: session.events.len(),
            likert_rated: session.likert.len(),
            metrics,
        })
    }

    pub fn deck_meta(&self) -> DeckMeta {
        DeckMeta {
            name: self.deck.name().to_string(),
            size: self.deck.len(),
            set_size: self.deck.set_size(),
            conditions: Condition::ALL.to_vec(),
            policy: self.policy.clone(),
        }
    }

    /// Every test answer of every session, in session-id order.
    pub fn export_responses(&self) -> Vec<ResponseRow> {
        let mut rows = Vec::new();
        for id in self.session_ids() {
            if let Ok(s) = self.session(&id) {
                rows.extend(session_responses(&s));
            }
        }
        rows
    }
}

/// Test answers of one session in the response-file schema. Timed-out items
/// have an empty response.
pub fn session_responses(session: &StudySession) -> Vec<ResponseRow> {
    session
        .events
        .iter()
        .filter_map(|e| {
            let task = match e.phase.task()? {
                Task::Recognize => TaskCode::Recognition,
                Task::Generate => TaskCode::Generation,
                Task::Learn => return None,
            };
            Some(ResponseRow {
                participant_id: session.participant_id.clone(),
                word: e.word.clone(),
                task,
                response: e.response.clone().unwrap_or_default(),
                latency_ms: e.duration_ms(),
            })
        })
        .collect()
}

/// Replays every `*.log` in `dir`, returning sessions sorted by id and the
/// logs that failed.
pub fn load_sessions(deck: &Deck, dir: &Path) -> std::io::Result<(Vec<StudySession>, Vec<(PathBuf, ReplayError)>)> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "log"))
        .collect();
    paths.sort();
    for p in paths {
        match replay_log(deck, &p) {
            Ok(s) => ok.push(s),
            Err(e) => failed.push((p, e)),
        }
    }
    ok.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Ok((ok, failed))
}

/// Writes a session log from an in-memory run, e.g. a simulation.
pub fn write_log(
    path: &Path,
    deck: &Deck,
    params: &SessionParams,
    created_at_ms: u64,
    commands: &[(SessionCommand, u64)],
) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    let mut write = |seq: u64, ts_ms: u64, payload: EventPayload| -> std::io::Result<()> {
        let rec = EventRecord {
            session_id: params.session_id.clone(),
            seq,
            ts_ms,
            payload,
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")
    };
    write(
        0,
        created_at_ms,
        EventPayload::Created {
            deck: deck.name().to_string(),
            params: params.clone(),
        },
    )?;
    for (i, (command, ts)) in commands.iter().enumerate() {
        write(i as u64 + 1, *ts, EventPayload::Command { command: command.clone() })?;
    }
    drop(write);
    out.flush()
}

#[derive(Serialize)]
struct ErrorBody {
    error: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    remaining_ms: Option<u64>,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Study(e) => e.code(),
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Io(_) => "storage",
            ServiceError::Replay(_) => "replay",
            ServiceError::Stats(_) => "scoring",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Study(StudyError::Finished | StudyError::StaleStep { .. } | StudyError::WrongPhase { .. })
            | ServiceError::Study(StudyError::DuplicateRating(_)) => StatusCode::CONFLICT,
            ServiceError::Study(_) | ServiceError::BadRequest(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Io(_) | ServiceError::Replay(_) | ServiceError::Stats(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let remaining_ms = match &self {
            ServiceError::Study(StudyError::TooEarly { remaining_ms })
            | ServiceError::Study(StudyError::TimeoutTooEarly { remaining_ms }) => Some(*remaining_ms),
            _ => None,
        };
        let body = ErrorBody {
            error: self.code(),
            message: self.to_string(),
            remaining_ms,
        };
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Clone)]
struct AppState {
    store: Arc<SessionStore>,
    media_dir: Option<PathBuf>,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<Json<T>, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Io(std::io::Error::other(e)))?
        .map(Json)
}

async fn create_handler(
    State(app): State<AppState>,
    Json(req): Json<CreateRequest>,
) -> Result<(StatusCode, Json<ApiSessionView>), ServiceError> {
    let view = blocking(move || app.store.create(&req)).await?;
    Ok((StatusCode::CREATED, view))
}

async fn step_handler(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<ApiSessionView>, ServiceError> {
    blocking(move || app.store.step(&id)).await
}

async fn advance_handler(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<AdvanceRequest>,
) -> Result<Json<ApiSessionView>, ServiceError> {
    blocking(move || app.store.advance(&id, &req)).await
}

async fn response_handler(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<ResponseRequest>,
) -> Result<Json<ApiSessionView>, ServiceError> {
    blocking(move || app.store.respond(&id, &req)).await
}

async fn likert_handler(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(req): Json<LikertRequest>,
) -> Result<Json<ApiSessionView>, ServiceError> {
    blocking(move || app.store.likert(&id, &req)).await
}

async fn summary_handler(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<SessionSummary>, ServiceError> {
    blocking(move || app.store.summary(&id)).await
}

async fn meta_handler(State(app): State<AppState>) -> Json<DeckMeta> {
    Json(app.store.deck_meta())
}

fn content_type(name: &str) -> &'static str {
    match name.rsplit('.').next() {
        Some("bmp") => "image/bmp",
        Some("png") => "image/png",
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("wav") => "audio/wav",
        Some("mp3") => "audio/mpeg",
        _ => "application/octet-stream",
    }
}

async fn media_handler(State(app): State<AppState>, UrlPath(file): UrlPath<String>) -> Response {
    let safe = !file.is_empty()
        && !file.starts_with('.')
        && file.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'));
    let Some(dir) = app.media_dir.filter(|_| safe) else {
        return StatusCode::NOT_FOUND.into_response();
    };
    match tokio::task::spawn_blocking(move || fs::read(dir.join(&file)).map(|b| (b, content_type(&file)))).await {
        Ok(Ok((bytes, ct))) => ([(header::CONTENT_TYPE, ct)], bytes).into_response(),
        _ => StatusCode::NOT_FOUND.into_response(),
    }
}

/// The API router. `media_dir` is the directory holding the deck's media
/// files (the `media/` folder next to the deck file).
pub fn router(store: Arc<SessionStore>, media_dir: Option<PathBuf>) -> Router {
    Router::new()
        .route("/sessions", post(create_handler))
        .route("/sessions/{id}/step", get(step_handler))
        .route("/sessions/{id}/advance", post(advance_handler))
        .route("/sessions/{id}/response", post(response_handler))
        .route("/sessions/{id}/likert", post(likert_handler))
        .route("/sessions/{id}/summary", get(summary_handler))
        .route("/deck/meta", get(meta_handler))
        .route("/media/{file}", get(media_handler))
        .with_state(AppState { store, media_dir })
}

pub async fn serve(store: Arc<SessionStore>, media_dir: Option<PathBuf>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store, media_dir)).await
}
