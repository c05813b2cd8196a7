//! Keyword candidate scoring and ranking.
//!
//! A keyword for an L2 word should sound like it, look like it, be easy to
//! picture, and ideally sit close to the word's meaning. Each of those is a
//! score in `[0, 1]`:
//!
//! - phonetic: `1 - D / max(|a|, |b|)` where `D` is an edit distance over
//!   phonemes with unit insertions/deletions and substitution cost equal to the
//!   fraction of articulatory features on which the two phonemes differ;
//! - orthographic: `1 - lev / max(|a|, |b|)` on lowercased spellings;
//! - semantic: `(cos + 1) / 2` between the keyword and the L1 meaning;
//! - imageability: the rating from an [`ImageabilityTable`].
//!
//! The total is the weighted sum under normalized [`ScoreWeights`].

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::edit::{levenshtein, weighted_edit_distance};
use crate::lexicon::{cosine, EmbeddingStore, ImageabilityTable, LexiconError, PronunciationDict};

#[derive(Debug, Error)]
pub enum KeywordError {
    #[error("unknown phoneme symbol {0:?}")]
    UnknownPhoneme(String),
    #[error("phoneme sequence is empty")]
    EmptySequence,
    #[error("text is empty")]
    EmptyText,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("feature table line {line}: {message}")]
    FeatureTable { line: usize, message: String },
    #[error("no keyword candidates given")]
    NoCandidates,
    #[error("k must be at least 1")]
    ZeroK,
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
}

/// A non-empty sequence of phoneme symbols.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PhonemeSequence(Vec<String>);

impl PhonemeSequence {
    pub fn new(symbols: Vec<String>) -> Result<Self, KeywordError> {
        if symbols.is_empty() {
            return Err(KeywordError::EmptySequence);
        }
        Ok(Self(symbols))
    }

    /// Parses space-separated symbols, e.g. `"p a t o"`.
    pub fn parse(text: &str) -> Result<Self, KeywordError> {
        Self::new(text.split_whitespace().map(str::to_string).collect())
    }

    pub fn symbols(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for PhonemeSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "/{}/", self.0.join(" "))
    }
}

/// Articulatory feature vectors per phoneme symbol (`symbol<TAB>f1,...,fn`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureTable {
    width: usize,
    features: HashMap<String, Vec<i8>>,
}

impl FeatureTable {
    pub fn parse(text: &str) -> Result<Self, KeywordError> {
        let mut table = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let record = raw.trim_end_matches('\r');
            if record.trim().is_empty() || record.trim_start().starts_with('#') {
                continue;
            }
            let err = |message: String| KeywordError::FeatureTable { line, message };
            let (symbol, values) = record
                .split_once('\t')
                .ok_or_else(|| err("expected `symbol<TAB>f1,f2,...`".into()))?;
            let values = values
                .split(',')
                .map(|v| v.trim().parse::<i8>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(format!("bad feature value: {e}")))?;
            table
                .insert(symbol.trim(), values)
                .map_err(|e| err(e.to_string()))?;
        }
        if table.features.is_empty() {
            return Err(KeywordError::FeatureTable {
                line: 0,
                message: "no feature rows".into(),
            });
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, KeywordError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The table bundled with the crate; covers the English and German
    /// inventories of the shipped fixtures.
    pub fn bundled() -> Self {
        Self::parse(include_str!("../data/features.tsv")).expect("bundled feature table parses")
    }

    pub fn insert(&mut self, symbol: &str, features: Vec<i8>) -> Result<(), KeywordError> {
        if features.is_empty() {
            return Err(KeywordError::FeatureTable {
                line: 0,
                message: format!("{symbol:?} has an empty feature vector"),
            });
        }
        if self.features.is_empty() {
            self.width = features.len();
        } else if features.len() != self.width {
            return Err(KeywordError::FeatureTable {
                line: 0,
                message: format!(
                    "{symbol:?} has {} features, expected {}",
                    features.len(),
                    self.width
                ),
            });
        }
        self.features.insert(symbol.to_string(), features);
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.features.contains_key(symbol)
    }

    pub fn features(&self, symbol: &str) -> Result<&[i8], KeywordError> {
        self.features
            .get(symbol)
            .map(Vec::as_slice)
            .ok_or_else(|| KeywordError::UnknownPhoneme(symbol.to_string()))
    }

    /// Fraction of features on which two phonemes differ.
    pub fn substitution_cost(&self, a: &str, b: &str) -> Result<f64, KeywordError> {
        let fa = self.features(a)?;
        let fb = self.features(b)?;
        let differing = fa.iter().zip(fb).filter(|(x, y)| x != y).count();
        Ok(differing as f64 / self.width as f64)
    }

    fn check(&self, seq: &PhonemeSequence) -> Result<(), KeywordError> {
        match seq.symbols().iter().find(|s| !self.contains(s)) {
            Some(s) => Err(KeywordError::UnknownPhoneme(s.clone())),
            None => Ok(()),
        }
    }
}

pub fn phonetic_similarity(
    a: &PhonemeSequence,
    b: &PhonemeSequence,
    table: &FeatureTable,
) -> Result<f64, KeywordError> {
    table.check(a)?;
    table.check(b)?;
    let distance = weighted_edit_distance(a.symbols(), b.symbols(), |x, y| {
        table.substitution_cost(x, y).expect("symbols checked")
    });
    let longest = a.len().max(b.len()) as f64;
    Ok((1.0 - distance / longest).clamp(0.0, 1.0))
}

pub fn orthographic_similarity(a: &str, b: &str) -> Result<f64, KeywordError> {
    if a.is_empty() || b.is_empty() {
        return Err(KeywordError::EmptyText);
    }
    let a = a.to_lowercase();
    let b = b.to_lowercase();
    let longest = a.chars().count().max(b.chars().count()) as f64;
    Ok(1.0 - levenshtein(&a, &b) as f64 / longest)
}

/// Cosine between the two phrase embeddings, mapped from `[-1, 1]` to `[0, 1]`.
pub fn semantic_similarity(store: &EmbeddingStore, a: &str, b: &str) -> Result<f64, KeywordError> {
    let va = store.embed_phrase(a)?;
    let vb = store.embed_phrase(b)?;
    Ok(((cosine(&va, &vb) + 1.0) / 2.0).clamp(0.0, 1.0))
}

/// Relative weights of the four keyword measures, normalized to sum to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreWeights {
    pub phonetic: f64,
    pub orthographic: f64,
    pub imageability: f64,
    pub semantic: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            phonetic: 0.25,
            orthographic: 0.25,
            imageability: 0.25,
            semantic: 0.25,
        }
    }
}

impl ScoreWeights {
    pub fn new(
        phonetic: f64,
        orthographic: f64,
        imageability: f64,
        semantic: f64,
    ) -> Result<Self, KeywordError> {
        let raw = [phonetic, orthographic, imageability, semantic];
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(KeywordError::InvalidWeights(format!(
                "weights must be finite and non-negative, got {raw:?}"
            )));
        }
        let sum: f64 = raw.iter().sum();
        if sum <= 0.0 {
            return Err(KeywordError::InvalidWeights("weights sum to zero".into()));
        }
        Ok(Self {
            phonetic: phonetic / sum,
            orthographic: orthographic / sum,
            imageability: imageability / sum,
            semantic: semantic / sum,
        })
    }

    /// Parses `p,o,i,s`.
    pub fn parse(text: &str) -> Result<Self, KeywordError> {
        let parts = text
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| KeywordError::InvalidWeights(e.to_string()))?;
        match parts[..] {
            [p, o, i, s] => Self::new(p, o, i, s),
            _ => Err(KeywordError::InvalidWeights(format!(
                "expected four comma-separated weights, got {}",
                parts.len()
            ))),
        }
    }

    fn combine(&self, phonetic: f64, orthographic: f64, imageability: f64, semantic: f64) -> f64 {
        (self.phonetic * phonetic
            + self.orthographic * orthographic
            + self.imageability * imageability
            + self.semantic * semantic)
            .clamp(0.0, 1.0)
    }
}

/// The L2 word a keyword is sought for.
#[derive(Debug, Clone)]
pub struct KeywordTarget {
    pub spelling: String,
    pub pronunciation: PhonemeSequence,
    pub meaning: String,
}

/// A candidate L1 word. Candidates without a pronunciation are skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub word: String,
    pub pronunciation: Option<PhonemeSequence>,
}

#[derive(Debug, Clone, Copy)]
pub struct KeywordResources<'a> {
    pub embeddings: &'a EmbeddingStore,
    pub imageability: &'a ImageabilityTable,
    pub features: &'a FeatureTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeywordCandidate {
    pub keyword: String,
    pub phonetic: f64,
    pub orthographic: f64,
    pub imageability: f64,
    pub semantic: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedCandidate {
    pub word: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    pub ranked: Vec<KeywordCandidate>,
    pub skipped: Vec<SkippedCandidate>,
}

pub fn score_candidate(
    target: &KeywordTarget,
    word: &str,
    pronunciation: &PhonemeSequence,
    weights: &ScoreWeights,
    resources: &KeywordResources<'_>,
) -> Result<KeywordCandidate, KeywordError> {
    let phonetic = phonetic_similarity(&target.pronunciation, pronunciation, resources.features)?;
    let orthographic = orthographic_similarity(&target.spelling, word)?;
    let imageability = resources.imageability.rating(word);
    let semantic = semantic_similarity(resources.embeddings, word, &target.meaning)?;
    Ok(KeywordCandidate {
        keyword: word.to_string(),
        phonetic,
        orthographic,
        imageability,
        semantic,
        total: weights.combine(phonetic, orthographic, imageability, semantic),
    })
}

/// Descending total, then ascending keyword.
fn rank_order(a: &KeywordCandidate, b: &KeywordCandidate) -> Ordering {
    b.total
        .partial_cmp(&a.total)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.keyword.cmp(&b.keyword))
}

/// Scores every candidate and returns the best `k`.
///
/// Candidates that cannot be scored (no pronunciation, unknown phoneme,
/// keyword without an embedding) are reported in [`Ranking::skipped`].
/// Problems with the target itself are errors.
pub fn rank_keywords(
    target: &KeywordTarget,
    candidates: &[Candidate],
    weights: &ScoreWeights,
    resources: &KeywordResources<'_>,
    k: usize,
) -> Result<Ranking, KeywordError> {
    if candidates.is_empty() {
        return Err(KeywordError::NoCandidates);
    }
    if k == 0 {
        return Err(KeywordError::ZeroK);
    }
    resources.features.check(&target.pronunciation)?;
    resources.embeddings.embed_phrase(&target.meaning)?;
    if target.spelling.is_empty() {
        return Err(KeywordError::EmptyText);
    }

    // Sorting by (keyword, pronunciation) first makes the output independent
    // of input order even for duplicate spellings.
    let mut ordered: Vec<&Candidate> = candidates.iter().collect();
    ordered.sort_by(|a, b| (&a.word, &a.pronunciation).cmp(&(&b.word, &b.pronunciation)));

    let mut ranked = Vec::with_capacity(ordered.len());
    let mut skipped = Vec::new();
    for c in ordered {
        let Some(pron) = &c.pronunciation else {
            skipped.push(SkippedCandidate {
                word: c.word.clone(),
                reason: "no pronunciation".into(),
            });
            continue;
        };
        match score_candidate(target, &c.word, pron, weights, resources) {
            Ok(scored) => ranked.push(scored),
            Err(e) => skipped.push(SkippedCandidate {
                word: c.word.clone(),
                reason: e.to_string(),
            }),
        }
    }

    ranked.sort_by(rank_order);
    ranked.truncate(k);
    Ok(Ranking { ranked, skipped })
}

/// Every word that has both an imageability rating and a pronunciation,
/// sorted alphabetically.
pub fn candidate_pool(imageability: &ImageabilityTable, dict: &PronunciationDict) -> Vec<Candidate> {
    let mut pool: Vec<Candidate> = imageability
        .words()
        .filter_map(|w| {
            dict.get(w).map(|p| Candidate {
                word: w.to_string(),
                pronunciation: Some(p.clone()),
            })
        })
        .collect();
    pool.sort_by(|a, b| a.word.cmp(&b.word));
    pool
}
