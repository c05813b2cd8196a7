//! Verbal and visual cue generation.
//!
//! The pipeline per word:
//!
//! 1. build the verbal-cue prompt from (keyword, meaning);
//! 2. ask a [`TextProvider`] for a sentence, retrying until it starts with
//!    "Imagine" and mentions both the keyword and the meaning;
//! 3. drop the leading "Imagine" to get the image prompt;
//! 4. ask an [`ImageProvider`] for the picture and store it under `media/`
//!    named by its SHA-256.
//!
//! Providers are a narrow text-in/text-out and text-in/bytes-out contract.
//! [`mock`] has deterministic offline implementations, [`live`] talks to an
//! OpenAI-compatible HTTP API.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lexicon::{Deck, LexiconError, WordEntry, SET_COUNT};

pub mod live;
pub mod mock;

const PROMPT_PREFIX: &str = "Write a short, catchy sentence that connects ";
const PROMPT_SUFFIX: &str = ". Start the sentence with \"Imagine\".";
const IMAGINE: &str = "Imagine";

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Minimum shared prefix for an inflected form to count as the meaning word.
const STEM_PREFIX: usize = 4;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("provider returned HTTP {status}: {body}")]
    Api { status: u16, body: String },
    #[error("unexpected provider response: {0}")]
    BadResponse(String),
    #[error("missing credentials: set {0}")]
    MissingCredentials(&'static str),
    #[error("prompt not understood by mock provider: {0:?}")]
    UnknownPrompt(String),
}

#[derive(Debug, Error)]
pub enum CueError {
    #[error("cue request fields must be non-empty")]
    EmptyRequest,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no valid cue after {attempts} attempts; last candidate {last_candidate:?} violated {violations:?}")]
    GenerationFailed {
        attempts: u32,
        last_candidate: String,
        violations: Vec<CueViolation>,
    },
    #[error("cue does not start with \"Imagine\": {0:?}")]
    NotImagine(String),
    #[error("image prompt is empty after removing \"Imagine\"")]
    EmptyImagePrompt,
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("no words given")]
    NoWords,
    #[error("every word failed: {0:?}")]
    AllFailed(Vec<WordFailure>),
    #[error("words file line {line}: {message}")]
    WordsFile { line: usize, message: String },
    #[error("curated cue for {0:?}, which is not in the deck")]
    UnknownCuratedWord(String),
    #[error(transparent)]
    Deck(#[from] LexiconError),
}

/// Whether `text` starts with the whole token "Imagine" (not "Imagined").
pub fn starts_with_imagine(text: &str) -> bool {
    match text.strip_prefix(IMAGINE) {
        Some(rest) => rest.chars().next().is_none_or(|c| !c.is_alphanumeric()),
        None => false,
    }
}

pub fn build_verbal_prompt(keyword: &str, l1_meaning: &str) -> String {
    format!("{PROMPT_PREFIX}{keyword} and {l1_meaning}{PROMPT_SUFFIX}")
}

/// Inverse of [`build_verbal_prompt`], for providers that need the inputs back.
pub fn parse_verbal_prompt(prompt: &str) -> Option<(&str, &str)> {
    let body = prompt.strip_prefix(PROMPT_PREFIX)?.strip_suffix(PROMPT_SUFFIX)?;
    body.split_once(" and ")
}

/// The meaning with a leading infinitive "to " removed.
pub fn meaning_head(l1_meaning: &str) -> &str {
    let trimmed = l1_meaning.trim();
    match trimmed.get(..3) {
        Some(p) if p.eq_ignore_ascii_case("to ") => trimmed[3..].trim_start(),
        _ => trimmed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CueViolation {
    MissingImagine,
    KeywordAbsent,
    MeaningAbsent,
}

fn shared_prefix(a: &str, b: &str) -> usize {
    a.chars().zip(b.chars()).take_while(|(x, y)| x == y).count()
}

fn word_present(cue_lower: &str, cue_tokens: &[String], word: &str) -> bool {
    let word = word.to_lowercase();
    if cue_lower.contains(&word) {
        return true;
    }
    let need = STEM_PREFIX.min(word.chars().count());
    need >= STEM_PREFIX && cue_tokens.iter().any(|t| shared_prefix(t, &word) >= need)
}

fn meaning_present(cue: &str, l1_meaning: &str) -> bool {
    let lower = cue.to_lowercase();
    let tokens = crate::lexicon::tokenize(cue);
    let head = meaning_head(l1_meaning);
    if head.is_empty() {
        return false;
    }
    lower.contains(&head.to_lowercase())
        || head
            .split_whitespace()
            .all(|w| word_present(&lower, &tokens, w))
}

/// Checks the three cue rules and returns every one that is violated.
pub fn validate_verbal_cue(
    cue_text: &str,
    keyword: &str,
    l1_meaning: &str,
) -> Result<(), Vec<CueViolation>> {
    let mut violations = Vec::new();
    if !starts_with_imagine(cue_text) {
        violations.push(CueViolation::MissingImagine);
    }
    if keyword.is_empty() || !cue_text.to_lowercase().contains(&keyword.to_lowercase()) {
        violations.push(CueViolation::KeywordAbsent);
    }
    if !meaning_present(cue_text, l1_meaning) {
        violations.push(CueViolation::MeaningAbsent);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueRequest {
    pub keyword: String,
    pub l1_meaning: String,
    pub l2_word: String,
}

impl CueRequest {
    pub fn new(
        keyword: impl Into<String>,
        l1_meaning: impl Into<String>,
        l2_word: impl Into<String>,
    ) -> Result<Self, CueError> {
        let req = Self {
            keyword: keyword.into(),
            l1_meaning: l1_meaning.into(),
            l2_word: l2_word.into(),
        };
        if [&req.keyword, &req.l1_meaning, &req.l2_word]
            .iter()
            .any(|s| s.trim().is_empty())
        {
            return Err(CueError::EmptyRequest);
        }
        Ok(req)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbalCue {
    pub text: String,
    pub keyword: String,
    pub l1_meaning: String,
}

impl VerbalCue {
    /// Wraps a hand-written cue. Only the leading "Imagine" is required, since
    /// human cues may use irregular inflections of the meaning ("told" for
    /// "to tell").
    pub fn curated(text: &str, keyword: &str, l1_meaning: &str) -> Result<Self, CueError> {
        if !starts_with_imagine(text) {
            return Err(CueError::NotImagine(text.to_string()));
        }
        Ok(Self {
            text: text.to_string(),
            keyword: keyword.to_string(),
            l1_meaning: l1_meaning.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualCue {
    pub prompt: String,
    pub image_ref: String,
    pub content_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Live,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    pub model: String,
    pub temperature: f64,
    pub retry_limit: u32,
    pub seed: u64,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Mock,
            model: "text-davinci-003".into(),
            temperature: 0.5,
            retry_limit: 3,
            seed: 0,
        }
    }
}

/// Text in, text out. Implementations must tolerate concurrent calls.
pub trait TextProvider: Send + Sync {
    fn complete(&self, prompt: &str, config: &ProviderConfig) -> Result<String, ProviderError>;
}

/// Text in, encoded image bytes out. Implementations must tolerate concurrent
/// calls.
pub trait ImageProvider: Send + Sync {
    fn render(&self, prompt: &str, config: &ProviderConfig) -> Result<Vec<u8>, ProviderError>;
}

/// Strips whitespace and one layer of surrounding quotes from model output.
fn clean_completion(raw: &str) -> String {
    let t = raw.trim();
    let t = t
        .strip_prefix(['"', '\u{201c}'])
        .and_then(|s| s.strip_suffix(['"', '\u{201d}']))
        .unwrap_or(t);
    t.trim().to_string()
}

/// Asks the provider for a cue, retrying up to `config.retry_limit` times
/// until one passes [`validate_verbal_cue`]. Transport errors are not retried.
pub fn generate_verbal_cue(
    provider: &dyn TextProvider,
    request: &CueRequest,
    config: &ProviderConfig,
) -> Result<VerbalCue, CueError> {
    let prompt = build_verbal_prompt(&request.keyword, &request.l1_meaning);
    let attempts = config.retry_limit.max(1);
    let mut last = None;
    for attempt in 1..=attempts {
        let text = clean_completion(&provider.complete(&prompt, config)?);
        match validate_verbal_cue(&text, &request.keyword, &request.l1_meaning) {
            Ok(()) => {
                return Ok(VerbalCue {
                    text,
                    keyword: request.keyword.clone(),
                    l1_meaning: request.l1_meaning.clone(),
                })
            }
            Err(violations) => {
                log::debug!(
                    "{}: attempt {attempt}/{attempts} rejected {text:?}: {violations:?}",
                    request.l2_word
                );
                last = Some((text, violations));
            }
        }
    }
    let (last_candidate, violations) = last.expect("at least one attempt");
    Err(CueError::GenerationFailed {
        attempts,
        last_candidate,
        violations,
    })
}

/// Removes the leading "Imagine" and one following separator (`", "`, `","`
/// or `" "`). The rest of the sentence is kept byte for byte. A cue that
/// still starts with "Imagine" afterwards is stripped again.
pub fn to_image_prompt(cue: &VerbalCue) -> Result<String, CueError> {
    if !starts_with_imagine(&cue.text) {
        return Err(CueError::NotImagine(cue.text.clone()));
    }
    let mut rest = cue.text.as_str();
    while starts_with_imagine(rest) {
        rest = &rest[IMAGINE.len()..];
        rest = rest
            .strip_prefix(", ")
            .or_else(|| rest.strip_prefix(','))
            .or_else(|| rest.strip_prefix(' '))
            .unwrap_or(rest);
    }
    if rest.trim().is_empty() {
        return Err(CueError::EmptyImagePrompt);
    }
    Ok(rest.to_string())
}

fn image_extension(bytes: &[u8]) -> &'static str {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        "png"
    } else if bytes.starts_with(b"BM") {
        "bmp"
    } else if bytes.starts_with(&[0xff, 0xd8, 0xff]) {
        "jpg"
    } else if bytes.starts_with(b"RIFF") && bytes.get(8..12) == Some(b"WEBP") {
        "webp"
    } else {
        "bin"
    }
}

/// Writes `bytes` to `<root>/media/<sha256>.<ext>` and returns
/// `(relative path, hex digest)`.
pub fn store_media(root: &Path, bytes: &[u8]) -> Result<(String, String), CueError> {
    let hash = hex::encode(Sha256::digest(bytes));
    let rel = format!("media/{hash}.{}", image_extension(bytes));
    let path = root.join(&rel);
    let io = |source, p: &Path| CueError::Io {
        path: p.display().to_string(),
        source,
    };
    let dir = root.join("media");
    fs::create_dir_all(&dir).map_err(|e| io(e, &dir))?;
    if !path.exists() {
        // Concurrent writers of the same image race on the rename only.
        let n = TMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        let tmp = dir.join(format!(".{hash}.{}.{n}.tmp", std::process::id()));
        fs::write(&tmp, bytes).map_err(|e| io(e, &tmp))?;
        fs::rename(&tmp, &path).map_err(|e| io(e, &path))?;
    }
    Ok((rel, hash))
}

pub fn generate_visual_cue(
    provider: &dyn ImageProvider,
    cue: &VerbalCue,
    config: &ProviderConfig,
    output_root: &Path,
) -> Result<VisualCue, CueError> {
    let prompt = to_image_prompt(cue)?;
    let bytes = provider.render(&prompt, config)?;
    let (image_ref, content_hash) = store_media(output_root, &bytes)?;
    Ok(VisualCue {
        prompt,
        image_ref,
        content_hash,
    })
}

/// One input row for deck generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordSpec {
    pub l2_word: String,
    pub l1_meaning: String,
    pub keyword: String,
}

/// Parses a `l2<TAB>l1<TAB>keyword` file; `#` lines are comments.
pub fn parse_words(text: &str) -> Result<Vec<WordSpec>, CueError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        match fields[..] {
            [l2, l1, kw] if !l2.is_empty() && !l1.is_empty() && !kw.is_empty() => out.push(WordSpec {
                l2_word: l2.into(),
                l1_meaning: l1.into(),
                keyword: kw.into(),
            }),
            _ => {
                return Err(CueError::WordsFile {
                    line: i + 1,
                    message: "expected three non-empty tab-separated fields".into(),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordFailure {
    pub l2_word: String,
    pub error: String,
}

/// Output of [`generate_deck`]: entries for every word that succeeded, in
/// input order, plus the failures.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeckGeneration {
    pub name: String,
    pub entries: Vec<WordEntry>,
    pub failures: Vec<WordFailure>,
}

impl DeckGeneration {
    /// Validates the entries as a [`Deck`]. Fails when failures left the
    /// three sets unbalanced.
    pub fn into_deck(self) -> Result<Deck, LexiconError> {
        Deck::new(self.name, self.entries)
    }
}

fn generate_entry(
    spec: &WordSpec,
    set_index: u8,
    text: &dyn TextProvider,
    image: &dyn ImageProvider,
    config: &ProviderConfig,
    output_root: &Path,
) -> Result<WordEntry, CueError> {
    let request = CueRequest::new(&spec.keyword, &spec.l1_meaning, &spec.l2_word)?;
    let verbal = generate_verbal_cue(text, &request, config)?;
    let visual = generate_visual_cue(image, &verbal, config, output_root)?;
    Ok(WordEntry {
        l2_word: spec.l2_word.clone(),
        l1_meaning: spec.l1_meaning.clone(),
        auto_keyword: spec.keyword.clone(),
        manual_keyword: String::new(),
        auto_verbal_cue: verbal.text,
        manual_verbal_cue: String::new(),
        image_ref: Some(visual.image_ref),
        audio_ref: None,
        set_index,
    })
}

/// Runs the pipeline for every word. Words are processed in parallel; the
/// result is assembled in input order, with `set_index` assigned round-robin
/// by input position.
pub fn generate_deck(
    name: &str,
    words: &[WordSpec],
    text: &dyn TextProvider,
    image: &dyn ImageProvider,
    config: &ProviderConfig,
    output_root: &Path,
) -> Result<DeckGeneration, CueError> {
    if words.is_empty() {
        return Err(CueError::NoWords);
    }
    let results: Vec<Result<WordEntry, CueError>> = words
        .par_iter()
        .enumerate()
        .map(|(i, spec)| generate_entry(spec, (i % SET_COUNT) as u8, text, image, config, output_root))
        .collect();

    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for (spec, result) in words.iter().zip(results) {
        match result {
            Ok(entry) => entries.push(entry),
            Err(e) => {
                log::warn!("{}: {e}", spec.l2_word);
                failures.push(WordFailure {
                    l2_word: spec.l2_word.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    if entries.is_empty() {
        return Err(CueError::AllFailed(failures));
    }
    Ok(DeckGeneration {
        name: name.to_string(),
        entries,
        failures,
    })
}

/// Hand-written keyword and cues for one word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedCue {
    pub l2_word: String,
    pub manual_keyword: String,
    pub manual_verbal_cue: String,
    /// Replaces the generated auto cue when set.
    pub auto_verbal_cue: Option<String>,
}

/// Parses `l2<TAB>manual_keyword<TAB>manual_cue[<TAB>auto_cue]`; `#` lines
/// are comments. Every cue must start with "Imagine".
pub fn parse_curated(text: &str) -> Result<Vec<CuratedCue>, CueError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let bad = |message: &str| CueError::WordsFile {
            line: i + 1,
            message: message.into(),
        };
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        let (l2, kw, manual, auto) = match fields[..] {
            [l2, kw, manual] => (l2, kw, manual, None),
            [l2, kw, manual, ""] => (l2, kw, manual, None),
            [l2, kw, manual, auto] => (l2, kw, manual, Some(auto)),
            _ => return Err(bad("expected three or four tab-separated fields")),
        };
        if l2.is_empty() || kw.is_empty() {
            return Err(bad("word and manual keyword must be non-empty"));
        }
        if !starts_with_imagine(manual) || auto.is_some_and(|a| !starts_with_imagine(a)) {
            return Err(bad("cues must start with \"Imagine\""));
        }
        out.push(CuratedCue {
            l2_word: l2.into(),
            manual_keyword: kw.into(),
            manual_verbal_cue: manual.into(),
            auto_verbal_cue: auto.map(String::from),
        });
    }
    Ok(out)
}

/// Merges curated cues into generated entries. An auto cue override also
/// re-renders the visual cue so the image matches the text.
pub fn apply_curation(
    entries: &mut [WordEntry],
    curated: &[CuratedCue],
    image: &dyn ImageProvider,
    config: &ProviderConfig,
    output_root: &Path,
) -> Result<(), CueError> {
    for c in curated {
        let entry = entries
            .iter_mut()
            .find(|e| e.l2_word.eq_ignore_ascii_case(&c.l2_word))
            .ok_or_else(|| CueError::UnknownCuratedWord(c.l2_word.clone()))?;
        entry.manual_keyword = c.manual_keyword.clone();
        entry.manual_verbal_cue = c.manual_verbal_cue.clone();
        if let Some(text) = &c.auto_verbal_cue {
            let cue = VerbalCue::curated(text, &entry.auto_keyword, &entry.l1_meaning)?;
            let visual = generate_visual_cue(image, &cue, config, output_root)?;
            entry.auto_verbal_cue = cue.text;
            entry.image_ref = Some(visual.image_ref);
        }
    }
    Ok(())
}
