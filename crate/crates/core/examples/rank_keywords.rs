//! Ranks keyword candidates for a few German words with the bundled lexicon.
//!
//!     cargo run --example rank_keywords -- [weights]
//!
//! `weights` is phonetic,orthographic,imageability,semantic (default equal).

use mnemocue::data_dir;
use mnemocue::keywordgen::{candidate_pool, rank_keywords, FeatureTable, KeywordResources, KeywordTarget, ScoreWeights};
use mnemocue::lexicon::{load_deck, load_word_vectors, ImageabilityTable, PronunciationDict};

fn main() -> anyhow::Result<()> {
    let weights = match std::env::args().nth(1) {
        Some(w) => ScoreWeights::parse(&w)?,
        None => ScoreWeights::default(),
    };
    let data = data_dir();
    let deck = load_deck(data.join("deck.json"))?;
    let dict = PronunciationDict::load(data.join("pronunciations.tsv"))?;
    let imageability = ImageabilityTable::load(data.join("imageability.tsv"))?;
    let embeddings = load_word_vectors(data.join("vectors.txt"))?;
    let features = FeatureTable::load(data.join("features.tsv"))?;
    let resources = KeywordResources {
        embeddings: &embeddings,
        imageability: &imageability,
        features: &features,
    };
    let pool = candidate_pool(&imageability, &dict);
    println!("{} candidates, weights {weights:?}", pool.len());

    for word in ["flasche", "treten", "rasen", "nehmen"] {
        let (Some(entry), Some(pron)) = (deck.entry(word), dict.get(word)) else {
            continue;
        };
        let target = KeywordTarget {
            spelling: word.into(),
            pronunciation: pron.clone(),
            meaning: entry.l1_meaning.clone(),
        };
        let ranking = rank_keywords(&target, &pool, &weights, &resources, 3)?;
        println!("\n{word} {pron} ({}), deck keyword {:?}", entry.l1_meaning, entry.auto_keyword);
        for c in &ranking.ranked {
            println!(
                "  {:<10} total {:.3}  phon {:.2} orth {:.2} img {:.2} sem {:.2}",
                c.keyword, c.total, c.phonetic, c.orthographic, c.imageability, c.semantic
            );
        }
    }
    Ok(())
}
