//! Analysis of finished sessions: per-participant and per-word aggregates,
//! one-tailed Welch t-tests, and CSV exports.
//!
//! Times and Likert ratings are normalized by their theoretical maxima (the
//! session's time limits and the 5-point scale), not by observed maxima.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Deck, EmbeddingStore};
use crate::scoring::{combined_score, generation_score, recognition_score, ScoredResponse, ScoringError};
use crate::study::{Condition, Phase, StudySession, Task};

pub const ALPHA: f64 = 0.05;
pub const LIKERT_MAX: f64 = 5.0;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample needs at least 2 values, got {0}")]
    TooFewSamples(usize),
    #[error("both samples have zero variance")]
    DegenerateVariance,
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("degrees of freedom must be positive, got {0}")]
    InvalidDf(f64),
    #[error("no samples for condition {0}")]
    MissingCondition(Condition),
    #[error("session {session_id} is incomplete, missing {missing:?}")]
    IncompleteSession { session_id: String, missing: Vec<Phase> },
    #[error("word {word:?}: {source}")]
    Scoring {
        word: String,
        #[source]
        source: ScoringError,
    },
    #[error("session {0} has no event for word {1:?}")]
    MissingEvent(String, String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    /// Unbiased (n - 1) variance.
    pub variance: f64,
}

impl SampleSummary {
    pub fn of(sample: &[f64]) -> Result<Self, StatsError> {
        let n = sample.len();
        if n < 2 {
            return Err(StatsError::TooFewSamples(n));
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(StatsError::NonFinite("sample"));
        }
        let mean = sample.iter().sum::<f64>() / n as f64;
        let variance = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self { n, mean, variance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tail {
    Right,
    Left,
}

impl std::fmt::Display for Tail {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tail::Right => "right",
            Tail::Left => "left",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub tail: Tail,
    pub significant: bool,
}

/// Welch's t statistic and Welch-Satterthwaite degrees of freedom.
pub fn welch_t(sample_a: &[f64], sample_b: &[f64]) -> Result<(f64, f64), StatsError> {
    let a = SampleSummary::of(sample_a)?;
    let b = SampleSummary::of(sample_b)?;
    let va = a.variance / a.n as f64;
    let vb = b.variance / b.n as f64;
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = (a.mean - b.mean) / se2.sqrt();
    let df = se2 * se2 / (va * va / (a.n - 1) as f64 + vb * vb / (b.n - 1) as f64);
    Ok((t, df))
}

/// Lanczos approximation (g = 7, n = 9) of ln Γ(x) for x > 0.
fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut sum = C[0];
    for (i, c) in C.iter().enumerate().skip(1) {
        sum += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Continued fraction for the incomplete beta, modified Lentz.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-12;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// One-tailed Student-t probability: `P(T >= t)` for the right tail,
/// `P(T <= t)` for the left.
pub fn t_tail_p(t: f64, df: f64, tail: Tail) -> Result<f64, StatsError> {
    if !t.is_finite() || !df.is_finite() {
        return Err(StatsError::NonFinite("t or df"));
    }
    if df <= 0.0 {
        return Err(StatsError::InvalidDf(df));
    }
    // P(|T| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)
    let two_sided = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    let upper = if t >= 0.0 { 0.5 * two_sided } else { 1.0 - 0.5 * two_sided };
    let p = match tail {
        Tail::Right => upper,
        Tail::Left => 1.0 - upper,
    };
    Ok(p.clamp(0.0, 1.0))
}

pub fn welch_test(sample_a: &[f64], sample_b: &[f64], tail: Tail) -> Result<TTestResult, StatsError> {
    let (t, df) = welch_t(sample_a, sample_b)?;
    let p = t_tail_p(t, df, tail)?;
    Ok(TTestResult {
        t,
        df,
        p,
        tail,
        significant: p < ALPHA,
    })
}

/// One-tailed Welch test of `a` against `b` at the 5% level.
pub fn compare_conditions(
    scores_by_condition: &BTreeMap<Condition, Vec<f64>>,
    a: Condition,
    b: Condition,
    tail: Tail,
) -> Result<TTestResult, StatsError> {
    let get = |c| scores_by_condition.get(&c).ok_or(StatsError::MissingCondition(c));
    welch_test(get(a)?, get(b)?, tail)
}

/// The comparisons reported for the four conditions.
pub const HYPOTHESES: [(Condition, Condition, Tail); 4] = [
    (Condition::AutoII, Condition::AutoI, Tail::Right),
    (Condition::AutoII, Condition::AutoI, Tail::Left),
    (Condition::ManualII, Condition::AutoII, Tail::Right),
    (Condition::AutoIII, Condition::AutoII, Tail::Right),
];

/// Scores of one word within one session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub word: String,
    pub recognition: ScoredResponse,
    pub generation: ScoredResponse,
    pub combined: f64,
}

/// Per-word scores of one session, in deck order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionScores {
    pub session_id: String,
    pub participant_id: String,
    pub condition: Condition,
    pub words: Vec<WordScore>,
}

fn last_response(session: &StudySession, task: Task, word: &str) -> Option<Option<String>> {
    session
        .events_for(task)
        .filter(|e| e.word == word)
        .last()
        .map(|e| e.response.clone())
}

/// Scores every deck word the session has tested. Timed-out items score 0.
pub fn score_session(session: &StudySession, deck: &Deck, store: &EmbeddingStore) -> Result<SessionScores, StatsError> {
    let mut words = Vec::with_capacity(deck.len());
    for entry in deck.entries() {
        let w = &entry.l2_word;
        let missing = || StatsError::MissingEvent(session.session_id.clone(), w.clone());
        let scoring = |source| StatsError::Scoring {
            word: w.clone(),
            source,
        };
        let recog = last_response(session, Task::Recognize, w).ok_or_else(missing)?;
        let gen = last_response(session, Task::Generate, w).ok_or_else(missing)?;
        let recognition = recognition_score(store, &entry.l1_meaning, recog.as_deref().unwrap_or("")).map_err(scoring)?;
        let generation = generation_score(w, gen.as_deref().unwrap_or("")).map_err(scoring)?;
        let combined = combined_score(recognition.score, generation.score).map_err(scoring)?;
        words.push(WordScore {
            word: w.clone(),
            recognition,
            generation,
            combined,
        });
    }
    Ok(SessionScores {
        session_id: session.session_id.clone(),
        participant_id: session.participant_id.clone(),
        condition: session.condition,
        words,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantMetrics {
    pub participant_id: String,
    pub session_id: String,
    pub condition: Condition,
    pub learning_time_norm: f64,
    pub testing_time_norm: f64,
    pub recognition_score: f64,
    pub generation_score: f64,
    pub combined_score: f64,
    pub likert_norm: f64,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

pub fn aggregate_participant(session: &StudySession, scores: &SessionScores) -> Result<ParticipantMetrics, StatsError> {
    if !session.is_done() {
        return Err(StatsError::IncompleteSession {
            session_id: session.session_id.clone(),
            missing: session.missing_phases(),
        });
    }
    let policy = &session.policy;
    let learn = mean(session.events_for(Task::Learn).map(|e| e.duration_ms() as f64));
    let test = mean(
        session
            .events
            .iter()
            .filter(|e| matches!(e.phase.task(), Some(Task::Recognize | Task::Generate)))
            .map(|e| e.duration_ms() as f64),
    );
    let likert = mean(session.likert.values().map(|&r| r as f64));
    Ok(ParticipantMetrics {
        participant_id: session.participant_id.clone(),
        session_id: session.session_id.clone(),
        condition: session.condition,
        learning_time_norm: (learn / policy.learn_limit_ms as f64).min(1.0),
        testing_time_norm: (test / policy.test_limit_ms as f64).min(1.0),
        recognition_score: mean(scores.words.iter().map(|w| w.recognition.score)),
        generation_score: mean(scores.words.iter().map(|w| w.generation.score)),
        combined_score: mean(scores.words.iter().map(|w| w.combined)),
        likert_norm: likert / LIKERT_MAX,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordMetrics {
    pub word: String,
    /// Mean combined score per condition; conditions without data are absent.
    pub by_condition: BTreeMap<Condition, f64>,
}

/// Mean combined score per word and condition, in deck order.
pub fn per_word_table(deck: &Deck, sessions: &[SessionScores]) -> Vec<WordMetrics> {
    deck.entries()
        .iter()
        .map(|entry| {
            let mut acc: BTreeMap<Condition, (f64, usize)> = BTreeMap::new();
            for s in sessions {
                if let Some(w) = s.words.iter().find(|w| w.word == entry.l2_word) {
                    let slot = acc.entry(s.condition).or_default();
                    slot.0 += w.combined;
                    slot.1 += 1;
                }
            }
            WordMetrics {
                word: entry.l2_word.clone(),
                by_condition: acc.into_iter().map(|(c, (s, n))| (c, s / n as f64)).collect(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExclusionReport {
    pub before: usize,
    pub removed: usize,
    pub remaining: usize,
    pub unknown_ids: Vec<String>,
}

/// Drops sessions of the listed participants. Unknown ids are reported and
/// logged, not treated as errors.
pub fn filter_excluded(sessions: Vec<StudySession>, exclusion_ids: &[String]) -> (Vec<StudySession>, ExclusionReport) {
    let before = sessions.len();
    let unknown_ids: Vec<String> = exclusion_ids
        .iter()
        .filter(|id| !sessions.iter().any(|s| &s.participant_id == *id))
        .cloned()
        .collect();
    for id in &unknown_ids {
        log::warn!("excluded participant {id:?} has no session");
    }
    let kept: Vec<StudySession> = sessions
        .into_iter()
        .filter(|s| !exclusion_ids.contains(&s.participant_id))
        .collect();
    let report = ExclusionReport {
        before,
        removed: before - kept.len(),
        remaining: kept.len(),
        unknown_ids,
    };
    log::info!("excluded {} of {} sessions", report.removed, report.before);
    (kept, report)
}

/// What one observation in a t-test stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleUnit {
    /// One value per word: the word's mean combined score in that condition.
    PerWord,
    /// One value per participant: their mean combined score.
    PerParticipant,
}

impl std::str::FromStr for SampleUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per-word" | "word" => Ok(SampleUnit::PerWord),
            "per-participant" | "participant" => Ok(SampleUnit::PerParticipant),
            _ => Err(format!("unknown sample unit {s:?} (per-word or per-participant)")),
        }
    }
}

pub fn condition_samples(
    unit: SampleUnit,
    participants: &[ParticipantMetrics],
    words: &[WordMetrics],
) -> BTreeMap<Condition, Vec<f64>> {
    let mut out: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    match unit {
        SampleUnit::PerParticipant => {
            for p in participants {
                out.entry(p.condition).or_default().push(p.combined_score);
            }
        }
        SampleUnit::PerWord => {
            for w in words {
                for (c, v) in &w.by_condition {
                    out.entry(*c).or_default().push(*v);
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestRow {
    pub condition_a: Condition,
    pub condition_b: Condition,
    pub tail: Tail,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub significant: bool,
}

/// Runs the reported hypotheses; comparisons lacking data are skipped with a
/// warning.
pub fn run_hypotheses(samples: &BTreeMap<Condition, Vec<f64>>) -> Vec<TestRow> {
    HYPOTHESES
        .iter()
        .filter_map(|&(a, b, tail)| match compare_conditions(samples, a, b, tail) {
            Ok(r) => Some(TestRow {
                condition_a: a,
                condition_b: b,
                tail,
                t: r.t,
                df: r.df,
                p: r.p,
                significant: r.significant,
            }),
            Err(e) => {
                log::warn!("skipping {a} vs {b} ({tail}): {e}");
                None
            }
        })
        .collect()
}

pub fn write_participants_csv(w: impl Write, rows: &[ParticipantMetrics]) -> Result<(), StatsError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_per_word_csv(w: impl Write, rows: &[WordMetrics]) -> Result<(), StatsError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["word".to_string()];
    header.extend(Condition::ALL.iter().map(|c| c.id().to_string()));
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.word.clone()];
        rec.extend(
            Condition::ALL
                .iter()
                .map(|c| r.by_condition.get(c).map(|v| format!("{v:.6}")).unwrap_or_default()),
        );
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_tests_csv(w: impl Write, rows: &[TestRow]) -> Result<(), StatsError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Long format for box plots: one row per participant and metric.
pub fn write_long_csv(w: impl Write, rows: &[ParticipantMetrics]) -> Result<(), StatsError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["participant_id", "condition", "metric", "value"])?;
    for r in rows {
        for (metric, v) in [
            ("learning_time", r.learning_time_norm),
            ("testing_time", r.testing_time_norm),
            ("recognition", r.recognition_score),
            ("generation", r.generation_score),
            ("combined", r.combined_score),
            ("likert", r.likert_norm),
        ] {
            out.write_record([&r.participant_id, r.condition.id(), metric, &format!("{v:.6}")])?;
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn welch_hand_computed() {
        // a: mean 2, var 1, n 3;  b: mean 3, var 2.5, n 5
        // se2 = 1/3 + 1/2 = 5/6, t = -1 / sqrt(5/6)
        // df = (5/6)^2 / ((1/3)^2/2 + (1/2)^2/4) = (25/36) / (1/18 + 1/16) = 5.8823...
        let (t, df) = welch_t(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!(close(t, -1.0 / (5.0f64 / 6.0).sqrt(), 1e-12));
        assert!(close(df, (25.0 / 36.0) / (1.0 / 18.0 + 1.0 / 16.0), 1e-12));
        let (t2, df2) = welch_t(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((t2, df2), (-t, df));
    }

    #[test]
    fn welch_errors() {
        assert!(matches!(welch_t(&[1.0], &[1.0, 2.0]), Err(StatsError::TooFewSamples(1))));
        assert!(matches!(welch_t(&[1.0, 1.0], &[2.0, 2.0]), Err(StatsError::DegenerateVariance)));
        assert_eq!(welch_t(&[1.0, 2.0], &[1.0, 2.0]).unwrap().0, 0.0);
    }

    #[test]
    fn reported_p_values() {
        let p = |t, df| t_tail_p(t, df, Tail::Right).unwrap();
        assert!(close(p(1.79, 33.0), 0.04, 0.005));
        assert!(close(p(-1.79, 33.0), 0.96, 0.005));
        assert!(close(p(-0.32, 24.0), 0.62, 0.01));
        assert!(close(p(0.39, 32.0), 0.35, 0.01));
        assert_eq!(p(0.0, 7.0), 0.5);
        assert!(t_tail_p(1.0, 0.0, Tail::Right).is_err());
        assert!(t_tail_p(f64::NAN, 3.0, Tail::Right).is_err());
    }

    #[test]
    fn matches_statrs_oracle() {
        for &df in &[0.5, 1.0, 2.5, 5.88, 24.0, 33.0, 120.0, 1000.0] {
            let dist = StudentsT::new(0.0, 1.0, df).unwrap();
            for i in -40..=40 {
                let t = i as f64 * 0.2;
                let want = 1.0 - dist.cdf(t);
                let got = t_tail_p(t, df, Tail::Right).unwrap();
                assert!(close(got, want, 1e-6), "t={t} df={df}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(close(ln_gamma(1.0), 0.0, 1e-13));
        assert!(close(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), 1e-13));
        assert!(close(ln_gamma(10.0), 362_880f64.ln(), 1e-11));
    }

    #[test]
    fn compare_conditions_cases() {
        let mut m = BTreeMap::new();
        m.insert(Condition::AutoII, vec![0.9, 0.95, 0.92, 0.97]);
        m.insert(Condition::AutoI, vec![0.1, 0.12, 0.08, 0.15]);
        let r = compare_conditions(&m, Condition::AutoII, Condition::AutoI, Tail::Right).unwrap();
        assert!(r.significant && r.p < 0.05);
        let r = compare_conditions(&m, Condition::AutoII, Condition::AutoII, Tail::Right).unwrap();
        assert_eq!((r.p, r.significant), (0.5, false));
        assert!(matches!(
            compare_conditions(&m, Condition::AutoIII, Condition::AutoI, Tail::Right),
            Err(StatsError::MissingCondition(Condition::AutoIII))
        ));
    }

    #[test]
    fn exclusion_report() {
        let deck_sessions: Vec<StudySession> = (0..20)
            .map(|i| {
                let deck = crate::lexicon::load_deck(crate::data_dir().join("deck.json")).unwrap();
                let params = crate::study::SessionParams {
                    session_id: format!("s{i}"),
                    participant_id: format!("p{i}"),
                    condition: Condition::AutoII,
                    seed: i,
                    policy: Default::default(),
                };
                crate::study::create_session(&deck, &params, 0).unwrap()
            })
            .collect();
        let ids: Vec<String> = ["p1", "p5", "p9"].iter().map(|s| s.to_string()).collect();
        let (kept, report) = filter_excluded(deck_sessions.clone(), &ids);
        assert_eq!((kept.len(), report.removed), (17, 3));
        let (kept, report) = filter_excluded(deck_sessions.clone(), &[]);
        assert_eq!((kept.len(), report.removed), (20, 0));
        let (kept, report) = filter_excluded(deck_sessions, &["nobody".to_string()]);
        assert_eq!((kept.len(), report.unknown_ids.len()), (20, 1));
    }

    proptest! {
        #[test]
        fn tails_sum_to_one(t in -50.0f64..50.0, df in 0.1f64..500.0) {
            let r = t_tail_p(t, df, Tail::Right).unwrap();
            let l = t_tail_p(t, df, Tail::Left).unwrap();
            prop_assert!((r + l - 1.0).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn right_tail_decreases(t in -20.0f64..20.0, dt in 0.01f64..5.0, df in 0.5f64..200.0) {
            prop_assert!(t_tail_p(t + dt, df, Tail::Right).unwrap() <= t_tail_p(t, df, Tail::Right).unwrap());
        }

        #[test]
        fn large_df_approaches_normal(t in -4.0f64..4.0, df in 200.0f64..5000.0) {
            let z = 1.0 - Normal::new(0.0, 1.0).unwrap().cdf(t);
            prop_assert!((t_tail_p(t, df, Tail::Right).unwrap() - z).abs() < 5e-3);
        }

        #[test]
        fn welch_df_bounds(
            a in proptest::collection::vec(-10.0f64..10.0, 2..30),
            b in proptest::collection::vec(-10.0f64..10.0, 2..30),
        ) {
            if let Ok((_, df)) = welch_t(&a, &b) {
                let lo = (a.len().min(b.len()) - 1) as f64;
                let hi = (a.len() + b.len() - 2) as f64;
                prop_assert!(df >= lo - 1e-9 && df <= hi + 1e-9, "df {} not in [{}, {}]", df, lo, hi);
            }
        }
    }
}
