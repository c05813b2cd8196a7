//! Answer scoring for the two test directions.
//!
//! Recognition (L2 shown, L1 typed) is scored by embedding cosine between the
//! answer and the gold meaning, clamped at 0. Generation (L1 shown, L2 typed)
//! is scored by `1 - lev / max(|a|, |b|)` after lowercasing and umlaut
//! transliteration on both sides.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{cosine, tokenize, Deck, EmbeddingStore, LexiconError};

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("gold answer is empty")]
    EmptyGold,
    #[error("gold answer {gold:?} cannot be embedded: {source}")]
    GoldNotEmbeddable {
        gold: String,
        #[source]
        source: LexiconError,
    },
    #[error("score inputs must lie in [0, 1], got {0}")]
    OutOfRange(f64),
    #[error("response for {0:?}, which is not in the deck")]
    UnknownWord(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Recognition,
    Generation,
}

/// Why a response scored 0 without being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFlag {
    Missing,
    OutOfVocabulary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredResponse {
    pub raw_response: String,
    pub normalized_response: String,
    pub score: f64,
    pub metric: Metric,
    pub flag: Option<ScoreFlag>,
}

/// Maps ä, ö, ü, ß (either case) to a, o, u, s. Other characters pass
/// through unchanged.
pub fn transliterate_umlauts(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            'ä' | 'Ä' => 'a',
            'ö' | 'Ö' => 'o',
            'ü' | 'Ü' => 'u',
            'ß' | 'ẞ' => 's',
            other => other,
        })
        .collect()
}

/// `1 - d(a, b) / max(|a|, |b|)` with unit-cost edits over characters. Two
/// empty strings are identical.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    crate::edit::normalized_similarity(a, b)
}

fn normalize_generation(text: &str) -> String {
    transliterate_umlauts(&text.trim().to_lowercase())
}

pub fn generation_score(gold_l2: &str, response: &str) -> Result<ScoredResponse, ScoringError> {
    let gold = normalize_generation(gold_l2);
    if gold.is_empty() {
        return Err(ScoringError::EmptyGold);
    }
    let normalized = normalize_generation(response);
    let (score, flag) = if normalized.is_empty() {
        (0.0, Some(ScoreFlag::Missing))
    } else {
        (normalized_levenshtein(&gold, &normalized), None)
    };
    Ok(ScoredResponse {
        raw_response: response.to_string(),
        normalized_response: normalized,
        score,
        metric: Metric::Generation,
        flag,
    })
}

fn strip_infinitive(text: &str) -> Option<&str> {
    text.strip_prefix("to ").map(str::trim_start)
}

pub fn recognition_score(
    store: &EmbeddingStore,
    gold_l1: &str,
    response: &str,
) -> Result<ScoredResponse, ScoringError> {
    let gold = tokenize(gold_l1).join(" ");
    if gold.is_empty() {
        return Err(ScoringError::EmptyGold);
    }
    let normalized = tokenize(response).join(" ");

    // "step" counts as a full answer for "to step"
    let gold = match strip_infinitive(&gold) {
        Some(bare) if !normalized.starts_with("to ") && !bare.is_empty() => bare.to_string(),
        _ => gold,
    };
    let gold_vec = store
        .embed_phrase(&gold)
        .map_err(|source| ScoringError::GoldNotEmbeddable {
            gold: gold.clone(),
            source,
        })?;

    let (score, flag) = if normalized.is_empty() {
        (0.0, Some(ScoreFlag::Missing))
    } else {
        match store.embed_phrase(&normalized) {
            Ok(v) => (cosine(&gold_vec, &v).clamp(0.0, 1.0), None),
            Err(_) => (0.0, Some(ScoreFlag::OutOfVocabulary)),
        }
    };
    Ok(ScoredResponse {
        raw_response: response.to_string(),
        normalized_response: normalized,
        score,
        metric: Metric::Recognition,
        flag,
    })
}

/// Mean of the recognition and generation scores for one word.
pub fn combined_score(recognition: f64, generation: f64) -> Result<f64, ScoringError> {
    for v in [recognition, generation] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ScoringError::OutOfRange(v));
        }
    }
    Ok((recognition + generation) / 2.0)
}

/// Test direction as written in response files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskCode {
    #[serde(rename = "recog")]
    Recognition,
    #[serde(rename = "gen")]
    Generation,
}

/// One typed answer: `participant_id,word,task,response,latency_ms`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRow {
    pub participant_id: String,
    pub word: String,
    pub task: TaskCode,
    pub response: String,
    pub latency_ms: u64,
}

/// A response row followed by its score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRow {
    pub participant_id: String,
    pub word: String,
    pub task: TaskCode,
    pub response: String,
    pub latency_ms: u64,
    pub normalized_response: String,
    pub score: f64,
    pub flag: Option<ScoreFlag>,
}

pub fn read_responses(r: impl Read) -> Result<Vec<ResponseRow>, ScoringError> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(r);
    rd.deserialize().map(|row| row.map_err(ScoringError::from)).collect()
}

pub fn write_rows<T: Serialize>(w: impl Write, rows: &[T]) -> Result<(), ScoringError> {
    let mut out = csv::Writer::from_writer(w);
    for row in rows {
        out.serialize(row)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Scores each row against the deck's gold answers.
pub fn score_responses(deck: &Deck, store: &EmbeddingStore, rows: &[ResponseRow]) -> Result<Vec<ScoredRow>, ScoringError> {
    rows.iter()
        .map(|row| {
            let entry = deck
                .entry(&row.word)
                .ok_or_else(|| ScoringError::UnknownWord(row.word.clone()))?;
            let scored = match row.task {
                TaskCode::Recognition => recognition_score(store, &entry.l1_meaning, &row.response)?,
                TaskCode::Generation => generation_score(&entry.l2_word, &row.response)?,
            };
            Ok(ScoredRow {
                participant_id: row.participant_id.clone(),
                word: row.word.clone(),
                task: row.task,
                response: row.response.clone(),
                latency_ms: row.latency_ms,
                normalized_response: scored.normalized_response,
                score: scored.score,
                flag: scored.flag,
            })
        })
        .collect()
}
