//! The study protocol as a server-authoritative state machine.
//!
//! A session walks through
//!
//! ```text
//! Consent -> (Learn k -> Recognize k -> Generate k) for k = 1..3 -> Likert -> Done
//! ```
//!
//! where cycle `k` uses word set `k - 1` of the deck. Every phase shows the
//! twelve words of its set in an independently shuffled order.
//!
//! Timing is judged against the server clock (`now_ms` arguments). A learning
//! card can be left after 15 s and is timed out at 30 s. A test item accepts
//! answers for 15 s plus a 2 s grace window for network latency; later answers
//! are recorded as timeouts and their text is discarded.
//!
//! Every mutation is a [`SessionCommand`], so a session can be rebuilt by
//! replaying its command log through [`StudySession::apply`].

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Deck, WordEntry, SET_COUNT};

pub mod simulate;

pub const RECOGNITION_LABEL: &str = "What is this in English?";
pub const GENERATION_LABEL: &str = "What is this in German?";
pub const UMLAUT_NOTE: &str = "Please use a, o, u, s instead of ä, ö, ü, ß.";
pub const LIKERT_LABEL: &str = "How helpful were the cues for learning each word? (1 = not at all, 5 = very)";
pub const CONSENT_LABEL: &str = "Consent";
/// Slot for the approved consent document.
pub const CONSENT_PLACEHOLDER: &str =
    "[Consent form placeholder] Replace this text with the approved consent document before running the study.";

pub const NUM_CYCLES: u8 = SET_COUNT as u8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StudyError {
    #[error("invalid timing policy: {0}")]
    InvalidPolicy(String),
    #[error("session was created for deck {expected:?}, got {actual:?}")]
    DeckMismatch { expected: String, actual: String },
    #[error("operation needs phase {expected}, session is in {actual}")]
    WrongPhase { expected: &'static str, actual: Phase },
    #[error("step {got} is not the current step {current}")]
    StaleStep { current: u64, got: u64 },
    #[error("too early to move on, {remaining_ms} ms left")]
    TooEarly { remaining_ms: u64 },
    #[error("timeout reported {remaining_ms} ms before the limit")]
    TimeoutTooEarly { remaining_ms: u64 },
    #[error("session is finished")]
    Finished,
    #[error("rating {0} outside 1..=5")]
    RatingOutOfRange(u8),
    #[error("word {0:?} is not in the deck")]
    UnknownWord(String),
    #[error("word {0:?} is already rated")]
    DuplicateRating(String),
}

impl StudyError {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            StudyError::InvalidPolicy(_) => "invalid_policy",
            StudyError::DeckMismatch { .. } => "deck_mismatch",
            StudyError::WrongPhase { .. } => "wrong_phase",
            StudyError::StaleStep { .. } => "stale_step",
            StudyError::TooEarly { .. } => "too_early",
            StudyError::TimeoutTooEarly { .. } => "timeout_too_early",
            StudyError::Finished => "finished",
            StudyError::RatingOutOfRange(_) => "rating_out_of_range",
            StudyError::UnknownWord(_) => "unknown_word",
            StudyError::DuplicateRating(_) => "duplicate_rating",
        }
    }
}

/// Experimental arm: which cues are shown and where the keyword comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "Auto-I")]
    AutoI,
    #[serde(rename = "Auto-II")]
    AutoII,
    #[serde(rename = "Auto-III")]
    AutoIII,
    #[serde(rename = "Manual-II")]
    ManualII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeywordSource {
    Auto,
    Manual,
}

const INSTRUCTION_I: &str = "Imagine a visual scene connecting the given keyword with the English meaning, and the sound of the German word.";
const INSTRUCTION_II: &str = "Imagine a specific scene described in the verbal cue that connects the given keyword with the English meaning, and the sound of the German word.";
const INSTRUCTION_III: &str = "Remember the image by following the verbal cue that connects the given keyword with the English meaning, and the sound of the German word.";

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::AutoI,
        Condition::AutoII,
        Condition::AutoIII,
        Condition::ManualII,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Condition::AutoI => "Auto-I",
            Condition::AutoII => "Auto-II",
            Condition::AutoIII => "Auto-III",
            Condition::ManualII => "Manual-II",
        }
    }

    pub fn show_keyword(self) -> bool {
        true
    }

    pub fn show_verbal(self) -> bool {
        !matches!(self, Condition::AutoI)
    }

    pub fn show_visual(self) -> bool {
        matches!(self, Condition::AutoIII)
    }

    pub fn keyword_source(self) -> KeywordSource {
        match self {
            Condition::ManualII => KeywordSource::Manual,
            _ => KeywordSource::Auto,
        }
    }

    pub fn instruction_text(self) -> &'static str {
        match self {
            Condition::AutoI => INSTRUCTION_I,
            Condition::AutoII | Condition::ManualII => INSTRUCTION_II,
            Condition::AutoIII => INSTRUCTION_III,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Condition::ALL
            .into_iter()
            .find(|c| c.id().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown condition {s:?} (expected Auto-I, Auto-II, Auto-III or Manual-II)"))
    }
}

/// Protocol timing, in milliseconds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingPolicy {
    pub learn_limit_ms: u64,
    pub learn_min_advance_ms: u64,
    pub pronounce_offsets_ms: Vec<u64>,
    pub test_limit_ms: u64,
    pub likert_limit_ms: Option<u64>,
    pub grace_ms: u64,
}

impl Default for TimingPolicy {
    fn default() -> Self {
        Self {
            learn_limit_ms: 30_000,
            learn_min_advance_ms: 15_000,
            pronounce_offsets_ms: vec![2_000, 7_000],
            test_limit_ms: 15_000,
            likert_limit_ms: None,
            grace_ms: 2_000,
        }
    }
}

impl TimingPolicy {
    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |m: &str| Err(StudyError::InvalidPolicy(m.to_string()));
        if self.learn_limit_ms == 0 || self.learn_min_advance_ms == 0 || self.test_limit_ms == 0 {
            return bad("limits must be positive");
        }
        if self.learn_min_advance_ms >= self.learn_limit_ms {
            return bad("minimum advance time must be below the learning limit");
        }
        if self.pronounce_offsets_ms.iter().any(|&o| o == 0 || o >= self.learn_limit_ms) {
            return bad("pronunciation offsets must fall inside the learning limit");
        }
        if self.pronounce_offsets_ms.windows(2).any(|w| w[0] >= w[1]) {
            return bad("pronunciation offsets must be strictly increasing");
        }
        if self.likert_limit_ms == Some(0) {
            return bad("likert limit must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Learn,
    Recognize,
    Generate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "lowercase")]
pub enum Phase {
    Consent,
    Learn { cycle: u8 },
    Recognize { cycle: u8 },
    Generate { cycle: u8 },
    Likert,
    Done,
}

impl Phase {
    pub fn task(self) -> Option<Task> {
        match self {
            Phase::Learn { .. } => Some(Task::Learn),
            Phase::Recognize { .. } => Some(Task::Recognize),
            Phase::Generate { .. } => Some(Task::Generate),
            _ => None,
        }
    }

    pub fn cycle(self) -> Option<u8> {
        match self {
            Phase::Learn { cycle } | Phase::Recognize { cycle } | Phase::Generate { cycle } => Some(cycle),
            _ => None,
        }
    }

    /// The phase that follows this one.
    pub fn next(self) -> Phase {
        match self {
            Phase::Consent => Phase::Learn { cycle: 1 },
            Phase::Learn { cycle } => Phase::Recognize { cycle },
            Phase::Recognize { cycle } => Phase::Generate { cycle },
            Phase::Generate { cycle } if cycle < NUM_CYCLES => Phase::Learn { cycle: cycle + 1 },
            Phase::Generate { .. } => Phase::Likert,
            Phase::Likert | Phase::Done => Phase::Done,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phase::Consent => f.write_str("consent"),
            Phase::Learn { cycle } => write!(f, "learn-{cycle}"),
            Phase::Recognize { cycle } => write!(f, "recognize-{cycle}"),
            Phase::Generate { cycle } => write!(f, "generate-{cycle}"),
            Phase::Likert => f.write_str("likert"),
            Phase::Done => f.write_str("done"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvanceKind {
    Manual,
    Timeout,
}

/// One shown card or test item and how it ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialEvent {
    pub word: String,
    pub phase: Phase,
    pub shown_at_ms: u64,
    pub answered_at_ms: u64,
    pub response: Option<String>,
    pub advance_kind: AdvanceKind,
    /// Elapsed time reported by the client, kept for reference only.
    pub client_elapsed_ms: Option<u64>,
    /// Answer arrived after the limit but inside the grace window.
    #[serde(default)]
    pub near_limit: bool,
}

impl TrialEvent {
    pub fn duration_ms(&self) -> u64 {
        self.answered_at_ms.saturating_sub(self.shown_at_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleOrder {
    pub learn: Vec<String>,
    pub recognize: Vec<String>,
    pub generate: Vec<String>,
}

impl CycleOrder {
    fn for_task(&self, task: Task) -> &[String] {
        match task {
            Task::Learn => &self.learn,
            Task::Recognize => &self.recognize,
            Task::Generate => &self.generate,
        }
    }
}

/// Everything needed to create a session; logged as the first record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionParams {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub seed: u64,
    #[serde(default)]
    pub policy: TimingPolicy,
}

/// A state-changing request. Rejected commands leave the session untouched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SessionCommand {
    AcceptConsent {
        step_id: u64,
    },
    AdvanceLearning {
        step_id: u64,
        advance: AdvanceKind,
        client_elapsed_ms: Option<u64>,
    },
    SubmitResponse {
        step_id: u64,
        response: String,
        advance: AdvanceKind,
        client_elapsed_ms: Option<u64>,
    },
    SubmitLikert {
        word: String,
        rating: u8,
    },
    /// Applies server-side timeouts that are due.
    Expire,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum CommandOutcome {
    Advanced,
    Recorded { near_limit: bool },
    TimedOut,
    Expired { count: usize },
    Rated { remaining: usize },
}

/// A cue-free description of a deck word for the Likert page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikertItem {
    pub word: String,
    pub meaning: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbal_cue: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rating: Option<u8>,
}

/// What the participant should see right now. Fields the condition hides
/// are absent, and test steps never carry the answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepDescriptor {
    pub step_id: u64,
    #[serde(flatten)]
    pub phase: Phase,
    pub position: usize,
    pub phase_length: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_label: Option<String>,
    /// L2 word (learning and recognition).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
    /// L1 meaning (learning and generation).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meaning: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keyword: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verbal_cue: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audio_ref: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub audio_offsets_ms: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub instruction_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub consent_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_limit_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_remaining_ms: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_advance_ms: Option<u64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub likert_items: Vec<LikertItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudySession {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub deck_name: String,
    pub rng_seed: u64,
    pub policy: TimingPolicy,
    pub created_at_ms: u64,
    pub phase: Phase,
    pub item_orders: Vec<CycleOrder>,
    pub cursor: usize,
    /// Increments whenever the current step changes.
    pub step_id: u64,
    pub step_started_at_ms: u64,
    pub events: Vec<TrialEvent>,
    pub likert: BTreeMap<String, u8>,
}

/// Builds a session with seeded per-phase shuffles. Deterministic in
/// `(deck, params)`.
pub fn create_session(deck: &Deck, params: &SessionParams, now_ms: u64) -> Result<StudySession, StudyError> {
    params.policy.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let item_orders = (0..NUM_CYCLES)
        .map(|set| {
            let words: Vec<String> = deck.set(set).map(|e| e.l2_word.clone()).collect();
            let mut shuffled = || {
                let mut w = words.clone();
                w.shuffle(&mut rng);
                w
            };
            CycleOrder {
                learn: shuffled(),
                recognize: shuffled(),
                generate: shuffled(),
            }
        })
        .collect();

    Ok(StudySession {
        session_id: params.session_id.clone(),
        participant_id: params.participant_id.clone(),
        condition: params.condition,
        deck_name: deck.name().to_string(),
        rng_seed: params.seed,
        policy: params.policy.clone(),
        created_at_ms: now_ms,
        phase: Phase::Consent,
        item_orders,
        cursor: 0,
        step_id: 0,
        step_started_at_ms: now_ms,
        events: Vec::new(),
        likert: BTreeMap::new(),
    })
}

fn cue_fields(entry: &WordEntry, condition: Condition) -> (Option<String>, Option<String>, Option<String>) {
    let (keyword, verbal) = match condition.keyword_source() {
        KeywordSource::Auto => (&entry.auto_keyword, &entry.auto_verbal_cue),
        KeywordSource::Manual => (&entry.manual_keyword, &entry.manual_verbal_cue),
    };
    let nonempty = |s: &String| (!s.is_empty()).then(|| s.clone());
    (
        condition.show_keyword().then(|| nonempty(keyword)).flatten(),
        condition.show_verbal().then(|| nonempty(verbal)).flatten(),
        condition.show_visual().then(|| entry.image_ref.clone()).flatten(),
    )
}

impl StudySession {
    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    fn check_deck(&self, deck: &Deck) -> Result<(), StudyError> {
        if deck.name() != self.deck_name {
            return Err(StudyError::DeckMismatch {
                expected: self.deck_name.clone(),
                actual: deck.name().to_string(),
            });
        }
        Ok(())
    }

    /// Word list of the current phase (empty outside the cycles).
    pub fn phase_items(&self) -> &[String] {
        match (self.phase.cycle(), self.phase.task()) {
            (Some(c), Some(t)) => self.item_orders[(c - 1) as usize].for_task(t),
            _ => &[],
        }
    }

    pub fn current_word(&self) -> Option<&str> {
        self.phase_items().get(self.cursor).map(String::as_str)
    }

    fn phase_limit_ms(&self) -> Option<u64> {
        match self.phase.task() {
            Some(Task::Learn) => Some(self.policy.learn_limit_ms),
            Some(_) => Some(self.policy.test_limit_ms),
            None if self.phase == Phase::Likert => self.policy.likert_limit_ms,
            None => None,
        }
    }

    fn elapsed(&self, now_ms: u64) -> u64 {
        now_ms.saturating_sub(self.step_started_at_ms)
    }

    pub fn current_step(&self, deck: &Deck, now_ms: u64) -> Result<StepDescriptor, StudyError> {
        self.check_deck(deck)?;
        let mut step = StepDescriptor {
            step_id: self.step_id,
            phase: self.phase,
            position: self.cursor,
            phase_length: self.phase_items().len(),
            prompt_label: None,
            word: None,
            meaning: None,
            keyword: None,
            verbal_cue: None,
            image_ref: None,
            audio_ref: None,
            audio_offsets_ms: Vec::new(),
            instruction_text: None,
            note: None,
            consent_text: None,
            time_limit_ms: self.phase_limit_ms(),
            time_remaining_ms: self.phase_limit_ms().map(|l| l.saturating_sub(self.elapsed(now_ms))),
            min_advance_ms: None,
            likert_items: Vec::new(),
        };

        match self.phase {
            Phase::Done => return Err(StudyError::Finished),
            Phase::Consent => {
                step.prompt_label = Some(CONSENT_LABEL.into());
                step.consent_text = Some(CONSENT_PLACEHOLDER.into());
            }
            Phase::Likert => {
                step.prompt_label = Some(LIKERT_LABEL.into());
                step.phase_length = deck.len();
                step.position = self.likert.len();
                step.likert_items = deck
                    .entries()
                    .iter()
                    .map(|e| {
                        let (keyword, verbal_cue, image_ref) = cue_fields(e, self.condition);
                        LikertItem {
                            word: e.l2_word.clone(),
                            meaning: e.l1_meaning.clone(),
                            keyword,
                            verbal_cue,
                            image_ref,
                            rating: self.likert.get(&e.l2_word).copied(),
                        }
                    })
                    .collect();
            }
            Phase::Learn { .. } | Phase::Recognize { .. } | Phase::Generate { .. } => {
                let word = self.current_word().expect("cursor inside phase");
                let entry = deck
                    .entry(word)
                    .ok_or_else(|| StudyError::UnknownWord(word.to_string()))?;
                match self.phase.task().expect("cycle phase") {
                    Task::Learn => {
                        let (keyword, verbal, image) = cue_fields(entry, self.condition);
                        step.word = Some(entry.l2_word.clone());
                        step.meaning = Some(entry.l1_meaning.clone());
                        step.keyword = keyword;
                        step.verbal_cue = verbal;
                        step.image_ref = image;
                        step.audio_ref = entry.audio_ref.clone();
                        step.audio_offsets_ms = self.policy.pronounce_offsets_ms.clone();
                        step.instruction_text = Some(self.condition.instruction_text().into());
                        step.min_advance_ms = Some(self.policy.learn_min_advance_ms);
                    }
                    Task::Recognize => {
                        step.prompt_label = Some(RECOGNITION_LABEL.into());
                        step.word = Some(entry.l2_word.clone());
                    }
                    Task::Generate => {
                        step.prompt_label = Some(GENERATION_LABEL.into());
                        step.meaning = Some(entry.l1_meaning.clone());
                        step.note = Some(UMLAUT_NOTE.into());
                    }
                }
            }
        }
        Ok(step)
    }

    fn expect_step(&self, step_id: u64) -> Result<(), StudyError> {
        if self.phase == Phase::Done {
            return Err(StudyError::Finished);
        }
        if step_id != self.step_id {
            return Err(StudyError::StaleStep {
                current: self.step_id,
                got: step_id,
            });
        }
        Ok(())
    }

    fn expect_task(&self, expected: &'static str, ok: impl Fn(Task) -> bool) -> Result<(), StudyError> {
        if self.phase == Phase::Done {
            return Err(StudyError::Finished);
        }
        match self.phase.task() {
            Some(t) if ok(t) => Ok(()),
            _ => Err(StudyError::WrongPhase {
                expected,
                actual: self.phase,
            }),
        }
    }

    /// Moves to the next step, entering the next phase at the end of this one.
    fn move_on(&mut self, at_ms: u64) {
        self.cursor += 1;
        if self.cursor >= self.phase_items().len() || self.phase.task().is_none() {
            self.phase = self.phase.next();
            self.cursor = 0;
        }
        self.step_id += 1;
        self.step_started_at_ms = at_ms;
    }

    fn record(
        &mut self,
        at_ms: u64,
        response: Option<String>,
        advance_kind: AdvanceKind,
        client_elapsed_ms: Option<u64>,
        near_limit: bool,
    ) {
        let at_ms = at_ms.max(self.step_started_at_ms);
        let word = self.current_word().expect("cursor inside phase").to_string();
        self.events.push(TrialEvent {
            word,
            phase: self.phase,
            shown_at_ms: self.step_started_at_ms,
            answered_at_ms: at_ms,
            response,
            advance_kind,
            client_elapsed_ms,
            near_limit,
        });
        self.move_on(at_ms);
    }

    pub fn accept_consent(&mut self, step_id: u64, now_ms: u64) -> Result<CommandOutcome, StudyError> {
        self.expect_step(step_id)?;
        if self.phase != Phase::Consent {
            return Err(StudyError::WrongPhase {
                expected: "consent",
                actual: self.phase,
            });
        }
        self.move_on(now_ms.max(self.step_started_at_ms));
        Ok(CommandOutcome::Advanced)
    }

    /// Leaves the current learning card. Manual advances need the minimum
    /// time; timeout reports need the full limit.
    pub fn advance_learning(
        &mut self,
        step_id: u64,
        kind: AdvanceKind,
        client_elapsed_ms: Option<u64>,
        now_ms: u64,
    ) -> Result<CommandOutcome, StudyError> {
        self.expect_task("learn", |t| t == Task::Learn)?;
        self.expect_step(step_id)?;
        let elapsed = self.elapsed(now_ms);
        let limit = self.policy.learn_limit_ms;
        match kind {
            AdvanceKind::Manual if elapsed < self.policy.learn_min_advance_ms => Err(StudyError::TooEarly {
                remaining_ms: self.policy.learn_min_advance_ms - elapsed,
            }),
            AdvanceKind::Manual if elapsed > limit + self.policy.grace_ms => {
                let at = self.step_started_at_ms + limit;
                self.record(at, None, AdvanceKind::Timeout, client_elapsed_ms, false);
                Ok(CommandOutcome::TimedOut)
            }
            AdvanceKind::Manual => {
                self.record(now_ms, None, AdvanceKind::Manual, client_elapsed_ms, false);
                Ok(CommandOutcome::Advanced)
            }
            AdvanceKind::Timeout if elapsed < limit => Err(StudyError::TimeoutTooEarly {
                remaining_ms: limit - elapsed,
            }),
            AdvanceKind::Timeout => {
                self.record(now_ms, None, AdvanceKind::Timeout, client_elapsed_ms, false);
                Ok(CommandOutcome::TimedOut)
            }
        }
    }

    /// Records an answer for the current test item. Answers later than the
    /// limit plus grace become timeouts with the text discarded.
    pub fn submit_response(
        &mut self,
        step_id: u64,
        response: &str,
        kind: AdvanceKind,
        client_elapsed_ms: Option<u64>,
        now_ms: u64,
    ) -> Result<CommandOutcome, StudyError> {
        self.expect_task("recognize or generate", |t| t != Task::Learn)?;
        self.expect_step(step_id)?;
        let elapsed = self.elapsed(now_ms);
        let limit = self.policy.test_limit_ms;
        if kind == AdvanceKind::Timeout || elapsed > limit + self.policy.grace_ms {
            self.record(now_ms, None, AdvanceKind::Timeout, client_elapsed_ms, false);
            return Ok(CommandOutcome::TimedOut);
        }
        let near_limit = elapsed > limit;
        self.record(
            now_ms,
            Some(response.to_string()),
            AdvanceKind::Manual,
            client_elapsed_ms,
            near_limit,
        );
        Ok(CommandOutcome::Recorded { near_limit })
    }

    pub fn submit_likert(&mut self, deck: &Deck, word: &str, rating: u8) -> Result<CommandOutcome, StudyError> {
        self.check_deck(deck)?;
        if self.phase == Phase::Done {
            return Err(StudyError::Finished);
        }
        if self.phase != Phase::Likert {
            return Err(StudyError::WrongPhase {
                expected: "likert",
                actual: self.phase,
            });
        }
        if !(1..=5).contains(&rating) {
            return Err(StudyError::RatingOutOfRange(rating));
        }
        let entry = deck
            .entry(word)
            .ok_or_else(|| StudyError::UnknownWord(word.to_string()))?;
        if self.likert.contains_key(&entry.l2_word) {
            return Err(StudyError::DuplicateRating(entry.l2_word.clone()));
        }
        self.likert.insert(entry.l2_word.clone(), rating);
        let remaining = deck.len() - self.likert.len();
        if remaining == 0 {
            self.phase = Phase::Done;
            self.step_id += 1;
        }
        Ok(CommandOutcome::Rated { remaining })
    }

    /// Applies every timeout that is due at `now_ms`. Learning cards time
    /// out at the limit; test items at the limit plus grace. Each timeout is
    /// stamped with its deadline, so a long absence times out successive
    /// items back to back.
    pub fn expire(&mut self, now_ms: u64) -> usize {
        let mut count = 0;
        loop {
            let deadline = match self.phase.task() {
                Some(Task::Learn) => self.step_started_at_ms + self.policy.learn_limit_ms,
                Some(_) => self.step_started_at_ms + self.policy.test_limit_ms + self.policy.grace_ms,
                None => break,
            };
            let due = match self.phase.task() {
                Some(Task::Learn) => now_ms >= deadline,
                _ => now_ms > deadline,
            };
            if !due {
                break;
            }
            self.record(deadline, None, AdvanceKind::Timeout, None, false);
            count += 1;
        }
        count
    }

    pub fn apply(&mut self, deck: &Deck, command: &SessionCommand, now_ms: u64) -> Result<CommandOutcome, StudyError> {
        self.check_deck(deck)?;
        match command {
            SessionCommand::AcceptConsent { step_id } => self.accept_consent(*step_id, now_ms),
            SessionCommand::AdvanceLearning {
                step_id,
                advance,
                client_elapsed_ms,
            } => self.advance_learning(*step_id, *advance, *client_elapsed_ms, now_ms),
            SessionCommand::SubmitResponse {
                step_id,
                response,
                advance,
                client_elapsed_ms,
            } => self.submit_response(*step_id, response, *advance, *client_elapsed_ms, now_ms),
            SessionCommand::SubmitLikert { word, rating } => self.submit_likert(deck, word, *rating),
            SessionCommand::Expire => Ok(CommandOutcome::Expired {
                count: self.expire(now_ms),
            }),
        }
    }

    /// Rebuilds a session from its creation parameters and accepted commands.
    pub fn replay<'a>(
        deck: &Deck,
        params: &SessionParams,
        created_at_ms: u64,
        commands: impl IntoIterator<Item = (&'a SessionCommand, u64)>,
    ) -> Result<StudySession, (usize, StudyError)> {
        let mut session = create_session(deck, params, created_at_ms).map_err(|e| (0, e))?;
        for (i, (command, at)) in commands.into_iter().enumerate() {
            session.apply(deck, command, at).map_err(|e| (i + 1, e))?;
        }
        Ok(session)
    }

    pub fn events_for(&self, task: Task) -> impl Iterator<Item = &TrialEvent> {
        self.events.iter().filter(move |e| e.phase.task() == Some(task))
    }

    /// Phases not yet completed; empty for a finished session.
    pub fn missing_phases(&self) -> Vec<Phase> {
        let mut missing = Vec::new();
        let mut p = self.phase;
        while p != Phase::Done {
            missing.push(p);
            p = p.next();
        }
        missing
    }
}
