//! Static language resources: word vectors, pronunciations, imageability
//! ratings and vocabulary decks.
//!
//! Everything here is immutable once loaded, so a loaded resource can be
//! shared freely across threads.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cuegen::starts_with_imagine;
use crate::keywordgen::{FeatureTable, PhonemeSequence};

/// Rating used for words missing from an [`ImageabilityTable`].
pub const DEFAULT_IMAGEABILITY: f64 = 0.5;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("empty resource file")]
    Empty,
    #[error("phrase is empty")]
    EmptyPhrase,
    #[error("no token of the phrase is in the vocabulary: {tokens:?}")]
    OutOfVocabulary { tokens: Vec<String> },
    #[error("invalid deck: {0}")]
    Deck(String),
    #[error("malformed deck file: {0}")]
    DeckJson(#[from] serde_json::Error),
}

fn read_file(path: &Path) -> Result<String, LexiconError> {
    fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Lines of a record file, numbered from 1, with blank lines and `#` comments
/// removed.
fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// Splits a phrase into lowercase tokens with leading and trailing
/// punctuation removed. Tokens that are pure punctuation are dropped.
pub fn tokenize(phrase: &str) -> Vec<String> {
    phrase
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Cosine similarity, or 0 when either vector has zero length. Identical
/// vectors give exactly 1.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// Token to vector map backing the semantic and recognition metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self {
            dimension,
            vectors: HashMap::new(),
        }
    }

    /// Inserts a vector under the lowercased token, replacing any previous one.
    pub fn insert(&mut self, token: &str, vector: Vec<f64>) -> Result<(), LexiconError> {
        if vector.len() != self.dimension {
            return Err(LexiconError::Parse {
                line: 0,
                message: format!(
                    "vector for {token:?} has {} components, expected {}",
                    vector.len(),
                    self.dimension
                ),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(LexiconError::Parse {
                line: 0,
                message: format!("vector for {token:?} has non-finite components"),
            });
        }
        self.vectors.insert(token.to_lowercase(), vector);
        Ok(())
    }

    /// Parses the text vector format: a `count dimension` header, then one
    /// `token v1 ... vN` row per line.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .filter(|(_, l)| !l.trim().is_empty());

        let (header_line, header) = lines.next().ok_or(LexiconError::Empty)?;
        let header_err = |message: &str| LexiconError::Parse {
            line: header_line,
            message: message.to_string(),
        };
        let mut fields = header.split_whitespace();
        let count: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| header_err("header must be `count dimension`"))?;
        let dimension: usize = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| header_err("header must be `count dimension`"))?;
        if fields.next().is_some() || dimension == 0 {
            return Err(header_err("header must be `count dimension` with a positive dimension"));
        }

        let mut store = Self::new(dimension);
        let mut rows = 0;
        for (line, row) in lines {
            let mut fields = row.split_whitespace();
            let token = fields.next().unwrap_or_default();
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| LexiconError::Parse {
                    line,
                    message: format!("bad number for {token:?}: {e}"),
                })?;
            if values.len() != dimension {
                return Err(LexiconError::Parse {
                    line,
                    message: format!(
                        "{token:?} has {} components, expected {dimension}",
                        values.len()
                    ),
                });
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(LexiconError::Parse {
                    line,
                    message: format!("{token:?} has non-finite components"),
                });
            }
            rows += 1;
            // Distributions sometimes carry case variants of one token; the
            // first spelling wins.
            store.vectors.entry(token.to_lowercase()).or_insert(values);
        }

        if rows == 0 {
            return Err(LexiconError::Empty);
        }
        if rows != count {
            return Err(LexiconError::Parse {
                line: header_line,
                message: format!("header declares {count} rows but the file has {rows}"),
            });
        }
        Ok(store)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Case-insensitive lookup.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(&token.to_lowercase()).map(Vec::as_slice)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.get(token).is_some()
    }

    /// Componentwise mean of the vectors of the phrase's in-vocabulary tokens.
    pub fn embed_phrase(&self, phrase: &str) -> Result<Vec<f64>, LexiconError> {
        let tokens = tokenize(phrase);
        if tokens.is_empty() {
            return Err(LexiconError::EmptyPhrase);
        }

        let mut sum = vec![0.0; self.dimension];
        let mut found = 0usize;
        for token in &tokens {
            if let Some(v) = self.vectors.get(token) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += x;
                }
                found += 1;
            }
        }
        if found == 0 {
            return Err(LexiconError::OutOfVocabulary { tokens });
        }
        let n = found as f64;
        Ok(sum.into_iter().map(|s| s / n).collect())
    }
}

pub fn load_word_vectors(path: impl AsRef<Path>) -> Result<EmbeddingStore, LexiconError> {
    EmbeddingStore::parse(&read_file(path.as_ref())?)
}

/// Word to phoneme-sequence dictionary (`word<TAB>PH1 PH2 ...`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PronunciationDict {
    entries: HashMap<String, PhonemeSequence>,
}

impl PronunciationDict {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut entries = HashMap::new();
        for (line, record) in records(text) {
            let (word, phonemes) = record.split_once('\t').ok_or_else(|| LexiconError::Parse {
                line,
                message: "expected `word<TAB>phonemes`".into(),
            })?;
            let symbols: Vec<String> = phonemes.split_whitespace().map(str::to_string).collect();
            let seq = PhonemeSequence::new(symbols).map_err(|e| LexiconError::Parse {
                line,
                message: e.to_string(),
            })?;
            entries.insert(word.trim().to_lowercase(), seq);
        }
        Ok(Self { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::parse(&read_file(path.as_ref())?)
    }

    pub fn insert(&mut self, word: &str, pronunciation: PhonemeSequence) {
        self.entries.insert(word.to_lowercase(), pronunciation);
    }

    pub fn get(&self, word: &str) -> Option<&PhonemeSequence> {
        self.entries.get(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Phoneme symbols used by the dictionary but absent from `table`,
    /// sorted and deduplicated.
    pub fn uncovered_symbols(&self, table: &FeatureTable) -> Vec<String> {
        let mut missing: Vec<String> = self
            .entries
            .values()
            .flat_map(|p| p.symbols())
            .filter(|s| !table.contains(s))
            .cloned()
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        missing.sort();
        missing
    }
}

/// Per-word imageability ratings in `[0, 1]` (`word<TAB>rating`).
#[derive(Debug, Clone, PartialEq)]
pub struct ImageabilityTable {
    ratings: HashMap<String, f64>,
    default_rating: f64,
}

impl Default for ImageabilityTable {
    fn default() -> Self {
        Self {
            ratings: HashMap::new(),
            default_rating: DEFAULT_IMAGEABILITY,
        }
    }
}

impl ImageabilityTable {
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut table = Self::default();
        for (line, record) in records(text) {
            let (word, rating) = record.split_once('\t').ok_or_else(|| LexiconError::Parse {
                line,
                message: "expected `word<TAB>rating`".into(),
            })?;
            let rating: f64 = rating.trim().parse().map_err(|e| LexiconError::Parse {
                line,
                message: format!("bad rating: {e}"),
            })?;
            if !(0.0..=1.0).contains(&rating) {
                return Err(LexiconError::Parse {
                    line,
                    message: format!("rating {rating} outside [0, 1]"),
                });
            }
            table.ratings.insert(word.trim().to_lowercase(), rating);
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::parse(&read_file(path.as_ref())?)
    }

    pub fn with_default(mut self, default_rating: f64) -> Self {
        assert!((0.0..=1.0).contains(&default_rating));
        self.default_rating = default_rating;
        self
    }

    pub fn insert(&mut self, word: &str, rating: f64) {
        assert!((0.0..=1.0).contains(&rating), "rating outside [0, 1]");
        self.ratings.insert(word.to_lowercase(), rating);
    }

    /// The word's rating, or the default rating for unlisted words.
    pub fn rating(&self, word: &str) -> f64 {
        self.ratings
            .get(&word.to_lowercase())
            .copied()
            .unwrap_or(self.default_rating)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.ratings.contains_key(&word.to_lowercase())
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.ratings.keys().map(String::as_str)
    }
}

/// One vocabulary item with its keywords and cues.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordEntry {
    pub l2_word: String,
    pub l1_meaning: String,
    #[serde(default)]
    pub auto_keyword: String,
    #[serde(default)]
    pub manual_keyword: String,
    #[serde(default)]
    pub auto_verbal_cue: String,
    #[serde(default)]
    pub manual_verbal_cue: String,
    #[serde(default)]
    pub image_ref: Option<String>,
    #[serde(default)]
    pub audio_ref: Option<String>,
    pub set_index: u8,
}

/// Number of word sets a deck is split into; one set per study cycle.
pub const SET_COUNT: usize = 3;

#[derive(Deserialize)]
struct DeckFile {
    name: String,
    entries: Vec<WordEntry>,
}

/// An ordered vocabulary deck whose entries split evenly into three sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DeckFile")]
pub struct Deck {
    name: String,
    entries: Vec<WordEntry>,
}

impl TryFrom<DeckFile> for Deck {
    type Error = LexiconError;

    fn try_from(file: DeckFile) -> Result<Self, Self::Error> {
        Deck::new(file.name, file.entries)
    }
}

impl Deck {
    pub fn new(name: impl Into<String>, entries: Vec<WordEntry>) -> Result<Self, LexiconError> {
        let deck = Self {
            name: name.into(),
            entries,
        };
        deck.validate()?;
        Ok(deck)
    }

    fn validate(&self) -> Result<(), LexiconError> {
        let bad = |m: String| Err(LexiconError::Deck(m));
        if self.entries.is_empty() {
            return bad("deck has no entries".into());
        }
        let mut seen = HashSet::new();
        let mut sizes = [0usize; SET_COUNT];
        for (i, e) in self.entries.iter().enumerate() {
            if e.l2_word.trim().is_empty() || e.l1_meaning.trim().is_empty() {
                return bad(format!("entry {i}: l2_word and l1_meaning must be non-empty"));
            }
            if !seen.insert(e.l2_word.to_lowercase()) {
                return bad(format!("duplicate l2_word {:?}", e.l2_word));
            }
            if !e.auto_verbal_cue.is_empty() && !starts_with_imagine(&e.auto_verbal_cue) {
                return bad(format!(
                    "auto_verbal_cue of {:?} does not start with \"Imagine\"",
                    e.l2_word
                ));
            }
            match sizes.get_mut(e.set_index as usize) {
                Some(n) => *n += 1,
                None => {
                    return bad(format!(
                        "entry {:?} has set_index {}, expected 0..{SET_COUNT}",
                        e.l2_word, e.set_index
                    ))
                }
            }
        }
        if sizes.iter().any(|&n| n != sizes[0]) {
            return bad(format!("word sets have unequal sizes {sizes:?}"));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn entries(&self) -> &[WordEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Size of each of the three sets.
    pub fn set_size(&self) -> usize {
        self.entries.len() / SET_COUNT
    }

    /// Entries of set `index`, in deck order.
    pub fn set(&self, index: u8) -> impl Iterator<Item = &WordEntry> {
        self.entries.iter().filter(move |e| e.set_index == index)
    }

    /// Case-insensitive lookup by L2 word.
    pub fn entry(&self, l2_word: &str) -> Option<&WordEntry> {
        let key = l2_word.to_lowercase();
        self.entries.iter().find(|e| e.l2_word.to_lowercase() == key)
    }

    pub fn position(&self, l2_word: &str) -> Option<usize> {
        let key = l2_word.to_lowercase();
        self.entries.iter().position(|e| e.l2_word.to_lowercase() == key)
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("deck serializes");
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| LexiconError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        let file: DeckFile = serde_json::from_str(text)?;
        Deck::new(file.name, file.entries)
    }
}

pub fn load_deck(path: impl AsRef<Path>) -> Result<Deck, LexiconError> {
    Deck::from_json(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &str = "3 4\nduck 1 0 0 0.5\npot 0 1 0 0\nthe 0.25 0.25 0.25 0.25\n";

    fn entry(word: &str, set_index: u8) -> WordEntry {
        WordEntry {
            l2_word: word.into(),
            l1_meaning: format!("meaning of {word}"),
            auto_keyword: String::new(),
            manual_keyword: String::new(),
            auto_verbal_cue: String::new(),
            manual_verbal_cue: String::new(),
            image_ref: None,
            audio_ref: None,
            set_index,
        }
    }

    #[test]
    fn loads_vector_fixture() {
        let store = EmbeddingStore::parse(FIXTURE).unwrap();
        assert_eq!(store.len(), 3);
        assert_eq!(store.dimension(), 4);
        assert_eq!(store.get("duck").unwrap(), &[1.0, 0.0, 0.0, 0.5]);
        assert_eq!(store.get("DUCK").unwrap(), &[1.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn short_row_reports_its_line() {
        let err = EmbeddingStore::parse("2 4\nduck 1 0 0 0\npot 0 1 0\n").unwrap_err();
        match err {
            LexiconError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_and_bad_header_rejected() {
        assert!(matches!(EmbeddingStore::parse(""), Err(LexiconError::Empty)));
        assert!(matches!(EmbeddingStore::parse("3 4\n"), Err(LexiconError::Empty)));
        assert!(matches!(
            EmbeddingStore::parse("four 4\nduck 1 2 3 4\n"),
            Err(LexiconError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            EmbeddingStore::parse("2 4\nduck 1 2 3 4\n"),
            Err(LexiconError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            EmbeddingStore::parse("1 2\nduck 1 x\n"),
            Err(LexiconError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn phrase_embedding() {
        let store = EmbeddingStore::parse(FIXTURE).unwrap();
        assert_eq!(store.embed_phrase("duck").unwrap(), vec![1.0, 0.0, 0.0, 0.5]);
        assert_eq!(
            store.embed_phrase("The duck!").unwrap(),
            vec![0.625, 0.125, 0.125, 0.375]
        );
        // out-of-vocabulary tokens are ignored as long as one token is known
        assert_eq!(store.embed_phrase("duck zzqx").unwrap(), vec![1.0, 0.0, 0.0, 0.5]);
        match store.embed_phrase("zzqx") {
            Err(LexiconError::OutOfVocabulary { tokens }) => assert_eq!(tokens, vec!["zzqx"]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(store.embed_phrase("  ,, "), Err(LexiconError::EmptyPhrase)));
    }

    #[test]
    fn tokenizer_strips_edges_only() {
        assert_eq!(tokenize("  To step, "), vec!["to", "step"]);
        assert_eq!(tokenize("hair-dresser."), vec!["hair-dresser"]);
        assert_eq!(tokenize("!!"), Vec::<String>::new());
    }

    #[test]
    fn pronunciation_and_imageability_files() {
        let p = PronunciationDict::parse("# comment\npato\tp a t o\n\npot\tp ɒ t\n").unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.get("Pato").unwrap().symbols(), &["p", "a", "t", "o"]);
        assert!(PronunciationDict::parse("pato p a t o\n").is_err());
        assert!(PronunciationDict::parse("pato\t   \n").is_err());

        let t = ImageabilityTable::parse("duck\t0.9\npot\t0.7\n").unwrap();
        assert_eq!(t.rating("duck"), 0.9);
        assert_eq!(t.rating("idea"), DEFAULT_IMAGEABILITY);
        assert!(matches!(
            ImageabilityTable::parse("duck\t1.5\n"),
            Err(LexiconError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn minimal_partition_is_valid() {
        let deck = Deck::new("d", vec![entry("a", 0), entry("b", 1), entry("c", 2)]).unwrap();
        assert_eq!(deck.set_size(), 1);
    }

    #[test]
    fn uneven_sets_rejected() {
        let err = Deck::new(
            "d",
            vec![entry("a", 0), entry("b", 0), entry("c", 1), entry("e", 2)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("unequal"), "{err}");
    }

    #[test]
    fn duplicate_words_and_bad_fields_rejected() {
        assert!(Deck::new("d", vec![entry("a", 0), entry("A", 1), entry("c", 2)]).is_err());
        assert!(Deck::new("d", vec![entry("a", 0), entry("b", 1), entry("c", 3)]).is_err());
        assert!(Deck::new("d", vec![]).is_err());
        let mut bad_cue = entry("b", 1);
        bad_cue.auto_verbal_cue = "A bottle.".into();
        assert!(Deck::new("d", vec![entry("a", 0), bad_cue, entry("c", 2)]).is_err());
    }

    #[test]
    fn missing_required_field_is_a_json_error() {
        let text = r#"{"name":"d","entries":[{"l2_word":"a","set_index":0}]}"#;
        assert!(matches!(Deck::from_json(text), Err(LexiconError::DeckJson(_))));
        // serde's try_from path validates too
        let text = r#"{"name":"d","entries":[{"l2_word":"a","l1_meaning":"x","set_index":1}]}"#;
        assert!(serde_json::from_str::<Deck>(text).is_err());
    }

    #[test]
    fn shipped_deck_has_three_sets_of_twelve() {
        let deck = load_deck(crate::data_dir().join("deck.json")).unwrap();
        assert_eq!(deck.len(), 36);
        for k in 0..3 {
            assert_eq!(deck.set(k).count(), 12);
        }
    }

    #[test]
    fn shipped_resources_are_consistent() {
        let dir = crate::data_dir();
        let table = FeatureTable::load(dir.join("features.tsv")).unwrap();
        let dict = PronunciationDict::load(dir.join("pronunciations.tsv")).unwrap();
        assert!(dict.uncovered_symbols(&table).is_empty());
        let images = ImageabilityTable::load(dir.join("imageability.tsv")).unwrap();
        let vectors = load_word_vectors(dir.join("vectors.txt")).unwrap();
        for w in images.words() {
            assert!(dict.get(w).is_some(), "{w} lacks a pronunciation");
            assert!(vectors.contains(w), "{w} lacks a vector");
        }
    }

    fn arb_entry() -> impl Strategy<Value = WordEntry> {
        (
            "[a-zäöüß]{1,10}",
            "[a-z ]{1,12}[a-z]",
            "[A-Za-z]{0,8}",
            proptest::option::of("media/[0-9a-f]{8}\\.bmp"),
            "( [a-z]{1,6}){0,4}",
        )
            .prop_map(|(w, m, k, img, tail)| WordEntry {
                l2_word: w,
                l1_meaning: m,
                auto_keyword: k.clone(),
                manual_keyword: k.to_uppercase(),
                auto_verbal_cue: if tail.is_empty() { String::new() } else { format!("Imagine{tail}.") },
                manual_verbal_cue: tail,
                image_ref: img,
                audio_ref: None,
                set_index: 0,
            })
    }

    proptest! {
        #[test]
        fn deck_round_trips_through_json(raw in proptest::collection::vec(arb_entry(), 1..8)) {
            let mut seen = HashSet::new();
            let mut entries: Vec<WordEntry> = raw
                .into_iter()
                .filter(|e| seen.insert(e.l2_word.to_lowercase()))
                .collect();
            entries.truncate(entries.len() / 3 * 3);
            prop_assume!(!entries.is_empty());
            for (i, e) in entries.iter_mut().enumerate() {
                e.set_index = (i % 3) as u8;
            }
            let deck = Deck::new("prop", entries).unwrap();
            let reloaded = Deck::from_json(&deck.to_json()).unwrap();
            prop_assert_eq!(reloaded, deck);
        }

        #[test]
        fn single_token_embedding_is_the_stored_vector(
            v in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let mut store = EmbeddingStore::new(4);
            store.insert("tok", v.clone()).unwrap();
            prop_assert_eq!(store.embed_phrase("tok").unwrap(), v);
        }

        #[test]
        fn two_token_embedding_is_order_free(
            a in proptest::collection::vec(-10.0f64..10.0, 4),
            b in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let mut store = EmbeddingStore::new(4);
            store.insert("alpha", a).unwrap();
            store.insert("beta", b).unwrap();
            prop_assert_eq!(
                store.embed_phrase("alpha beta").unwrap(),
                store.embed_phrase("beta alpha").unwrap()
            );
        }
    }
}
