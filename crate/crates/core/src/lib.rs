//! Keyword-mnemonic vocabulary learning toolkit.
//!
//! The crate covers the whole loop of a keyword-mnemonic study:
//!
//! - [`lexicon`]: word vectors, pronunciations, imageability ratings and deck files.
//! - [`keywordgen`]: ranking L1 keyword candidates for an L2 word by phonetic,
//!   orthographic, semantic and imageability scores.
//! - [`cuegen`]: the prompt pipeline that turns (keyword, meaning) into an
//!   "Imagine ..." verbal cue and an image, behind pluggable providers.
//! - [`scoring`]: recognition (embedding cosine) and generation (normalized
//!   Levenshtein) scoring of participant answers.
//! - [`study`]: the timed learn/recognize/generate protocol as a
//!   server-authoritative state machine.
//! - [`stats`]: per-participant and per-word aggregation and one-tailed
//!   Welch t-tests.
//! - [`service`]: event-sourced persistence and the JSON HTTP API for the
//!   participant UI.
//!
//! Every runnable capability has a matching program under `examples/`.

pub mod cuegen;
pub mod edit;
pub mod keywordgen;
pub mod lexicon;
pub mod scoring;
pub mod service;
pub mod stats;
pub mod study;

use std::path::PathBuf;

/// Directory holding the bundled fixture resources (deck, vectors,
/// pronunciations, imageability ratings, feature table).
pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}
