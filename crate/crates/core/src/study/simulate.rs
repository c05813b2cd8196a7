//! Scripted participants that drive a session end to end.
//!
//! The simulator behaves like a real client: it polls the current step,
//! sometimes tries to skip a card too early, answers late, lets items time
//! out, and makes typos. Every command it sends is checked against the
//! session, and rejected commands are counted rather than logged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    create_session, AdvanceKind, CommandOutcome, SessionCommand, SessionParams, StepDescriptor, StudyError,
    StudySession, Task,
};
use crate::lexicon::Deck;

/// How a simulated participant behaves. Probabilities are per item.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipantProfile {
    /// Chance of knowing the answer on a test item.
    pub recall: f64,
    /// Chance that a known generation answer carries one typo.
    pub typo: f64,
    /// Chance of trying to leave a learning card before the minimum time.
    pub impatient: f64,
    /// Chance of sitting on a learning card until it times out.
    pub idle_learning: f64,
    /// Chance of answering inside the grace window.
    pub late: f64,
    /// Chance of answering after the grace window.
    pub very_late: f64,
    /// Mean Likert rating; ratings are drawn around it.
    pub likert_mean: f64,
}

impl Default for ParticipantProfile {
    fn default() -> Self {
        Self {
            recall: 0.6,
            typo: 0.2,
            impatient: 0.1,
            idle_learning: 0.1,
            late: 0.05,
            very_late: 0.05,
            likert_mean: 3.0,
        }
    }
}

/// A finished simulated session with its accepted command log.
#[derive(Debug, Clone)]
pub struct SimulatedRun {
    pub session: StudySession,
    pub created_at_ms: u64,
    /// Accepted commands with their server timestamps, in order.
    pub log: Vec<(SessionCommand, u64)>,
    /// Commands the session refused, with the reason.
    pub rejected: Vec<(SessionCommand, StudyError)>,
}

fn typo(rng: &mut ChaCha8Rng, word: &str) -> String {
    let mut chars: Vec<char> = word.chars().collect();
    let i = rng.random_range(0..chars.len());
    match rng.random_range(0..3) {
        0 => chars[i] = (b'a' + rng.random_range(0..26u8)) as char,
        1 => {
            chars.remove(i);
        }
        _ => chars.insert(i, chars[i]),
    }
    chars.into_iter().collect()
}

struct Driver<'a> {
    deck: &'a Deck,
    session: StudySession,
    now: u64,
    log: Vec<(SessionCommand, u64)>,
    rejected: Vec<(SessionCommand, StudyError)>,
}

impl Driver<'_> {
    fn send(&mut self, cmd: SessionCommand) -> Option<CommandOutcome> {
        match self.session.apply(self.deck, &cmd, self.now) {
            Ok(outcome) => {
                self.log.push((cmd, self.now));
                Some(outcome)
            }
            Err(e) => {
                self.rejected.push((cmd, e));
                None
            }
        }
    }
}

/// Runs one participant through the whole protocol. `observe` sees every
/// step descriptor the client receives.
pub fn simulate_session(
    deck: &Deck,
    params: &SessionParams,
    profile: &ParticipantProfile,
    seed: u64,
    mut observe: impl FnMut(&StudySession, &StepDescriptor),
) -> Result<SimulatedRun, StudyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let created_at_ms = 1_700_000_000_000 + rng.random_range(0..86_400_000);
    let session = create_session(deck, params, created_at_ms)?;
    let policy = params.policy.clone();
    let mut d = Driver {
        deck,
        session,
        now: created_at_ms,
        log: Vec::new(),
        rejected: Vec::new(),
    };

    while !d.session.is_done() {
        let step = d.session.current_step(deck, d.now)?;
        observe(&d.session, &step);
        let step_id = step.step_id;
        let start = d.session.step_started_at_ms;

        match step.phase.task() {
            None if step.phase == super::Phase::Consent => {
                d.now += rng.random_range(3_000..20_000);
                d.send(SessionCommand::AcceptConsent { step_id });
            }
            None => {
                let mut words: Vec<String> = step.likert_items.iter().map(|i| i.word.clone()).collect();
                words.retain(|w| !d.session.likert.contains_key(w));
                for word in words {
                    d.now += rng.random_range(500..4_000);
                    if rng.random_bool(0.02) {
                        d.send(SessionCommand::SubmitLikert {
                            word: word.clone(),
                            rating: 6,
                        });
                    }
                    let jitter: f64 = rng.random_range(-1.5..1.5);
                    let rating = (profile.likert_mean + jitter).round().clamp(1.0, 5.0) as u8;
                    d.send(SessionCommand::SubmitLikert { word, rating });
                }
            }
            Some(Task::Learn) => {
                if rng.random_bool(profile.impatient) {
                    d.now = start + rng.random_range(1_000..policy.learn_min_advance_ms);
                    d.send(SessionCommand::AdvanceLearning {
                        step_id,
                        advance: AdvanceKind::Manual,
                        client_elapsed_ms: Some(d.now - start),
                    });
                }
                if rng.random_bool(profile.idle_learning) {
                    if rng.random_bool(0.5) {
                        // the client timer fires
                        d.now = d.now.max(start + policy.learn_limit_ms);
                        d.send(SessionCommand::AdvanceLearning {
                            step_id,
                            advance: AdvanceKind::Timeout,
                            client_elapsed_ms: Some(policy.learn_limit_ms),
                        });
                    } else {
                        // the tab was away; the server expires it on the next poll
                        d.now = d.now.max(start + policy.learn_limit_ms + rng.random_range(0..5_000));
                        d.send(SessionCommand::Expire);
                    }
                } else {
                    let at = rng.random_range(policy.learn_min_advance_ms..policy.learn_limit_ms);
                    d.now = d.now.max(start + at);
                    d.send(SessionCommand::AdvanceLearning {
                        step_id,
                        advance: AdvanceKind::Manual,
                        client_elapsed_ms: Some(at),
                    });
                }
            }
            Some(task) => {
                let word = d.session.current_word().expect("test item").to_string();
                let entry = deck.entry(&word).expect("deck word");
                let roll: f64 = rng.random();
                let elapsed = if roll < profile.very_late {
                    policy.test_limit_ms + policy.grace_ms + rng.random_range(1..8_000)
                } else if roll < profile.very_late + profile.late {
                    policy.test_limit_ms + rng.random_range(1..=policy.grace_ms)
                } else {
                    rng.random_range(1_500..policy.test_limit_ms)
                };
                let knows = rng.random_bool(profile.recall);
                let response = match (task, knows) {
                    (Task::Recognize, true) => entry.l1_meaning.clone(),
                    (Task::Generate, true) if rng.random_bool(profile.typo) => typo(&mut rng, &entry.l2_word),
                    (Task::Generate, true) => entry.l2_word.clone(),
                    (_, false) => match rng.random_range(0..3) {
                        0 => String::new(),
                        1 => "qwzx".to_string(),
                        _ => {
                            let other = &deck.entries()[rng.random_range(0..deck.len())];
                            if task == Task::Recognize {
                                other.l1_meaning.clone()
                            } else {
                                other.l2_word.clone()
                            }
                        }
                    },
                    (Task::Learn, _) => unreachable!(),
                };
                d.now = d.now.max(start + elapsed);
                d.send(SessionCommand::SubmitResponse {
                    step_id,
                    response,
                    advance: AdvanceKind::Manual,
                    client_elapsed_ms: Some(elapsed),
                });
            }
        }
        if d.session.step_id == step_id && !d.session.is_done() && d.session.phase.task().is_some() {
            // nothing moved: let the server timer take over
            d.now += policy.learn_limit_ms + policy.grace_ms + 1;
            d.send(SessionCommand::Expire);
        }
    }

    Ok(SimulatedRun {
        session: d.session,
        created_at_ms,
        log: d.log,
        rejected: d.rejected,
    })
}
