//! Scores a handful of recognition and generation answers.
//!
//!     cargo run --example score_responses

use mnemocue::data_dir;
use mnemocue::lexicon::load_word_vectors;
use mnemocue::scoring::{combined_score, generation_score, recognition_score};

fn main() -> anyhow::Result<()> {
    let store = load_word_vectors(data_dir().join("vectors.txt"))?;

    println!("recognition (L2 shown, English typed):");
    for (gold, answer) in [("to step", "step"), ("to step", "to walk"), ("bottle", "bottle"), ("bottle", "glass"), ("lawn", "")] {
        let s = recognition_score(&store, gold, answer)?;
        println!("  {gold:<10} {answer:<10} {:.3} {:?}", s.score, s.flag);
    }

    println!("generation (English shown, German typed):");
    for (gold, answer) in [("süß", "sus"), ("flasche", "flashe"), ("treten", "tretten"), ("rasen", "")] {
        let s = generation_score(gold, answer)?;
        println!("  {gold:<10} {answer:<10} {:.3} {:?}", s.score, s.flag);
    }

    println!("combined(0.8, 0.5) = {}", combined_score(0.8, 0.5)?);
    Ok(())
}
