//! Runs the cue pipeline with the offline mock providers and writes a deck
//! plus its images to a temporary directory.
//!
//!     cargo run --example generate_deck -- [seed]

use mnemocue::cuegen::mock::{MockImageProvider, MockTextProvider};
use mnemocue::cuegen::{generate_deck, parse_words, to_image_prompt, validate_verbal_cue, ProviderConfig, VerbalCue};
use mnemocue::data_dir;

fn main() -> anyhow::Result<()> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(0);
    let specs = parse_words(&std::fs::read_to_string(data_dir().join("words.tsv"))?)?;
    let out = tempfile::tempdir()?;
    let config = ProviderConfig {
        seed,
        ..ProviderConfig::default()
    };
    let generation = generate_deck("example", &specs, &MockTextProvider::new(), &MockImageProvider, &config, out.path())?;
    let deck = generation.into_deck()?;

    for e in deck.entries().iter().take(6) {
        let ok = validate_verbal_cue(&e.auto_verbal_cue, &e.auto_keyword, &e.l1_meaning).is_ok();
        let cue = VerbalCue::curated(&e.auto_verbal_cue, &e.auto_keyword, &e.l1_meaning)?;
        println!("{} -> {} ({})", e.l2_word, e.auto_keyword, e.l1_meaning);
        println!("  cue    {}{}", e.auto_verbal_cue, if ok { "" } else { "  [invalid]" });
        println!("  image  {:?} -> {}", to_image_prompt(&cue)?, e.image_ref.as_deref().unwrap_or("-"));
    }
    let path = out.path().join("deck.json");
    deck.save(&path)?;
    println!("\n{} entries in {} sets, written to {}", deck.len(), mnemocue::lexicon::SET_COUNT, path.display());
    Ok(())
}
