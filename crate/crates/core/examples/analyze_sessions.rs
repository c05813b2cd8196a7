//! Scores simulated sessions and runs the Welch comparisons between
//! conditions.
//!
//!     cargo run --example analyze_sessions -- [sessions]

use std::collections::BTreeMap;

use mnemocue::data_dir;
use mnemocue::lexicon::{load_deck, load_word_vectors};
use mnemocue::stats::{aggregate_participant, compare_conditions, per_word_table, score_session, welch_test, Tail};
use mnemocue::study::simulate::{simulate_session, ParticipantProfile};
use mnemocue::study::{Condition, SessionParams};

fn main() -> anyhow::Result<()> {
    let n: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(40);
    let deck = load_deck(data_dir().join("deck.json"))?;
    let store = load_word_vectors(data_dir().join("vectors.txt"))?;

    let mut scores = Vec::new();
    let mut by_participant: BTreeMap<Condition, Vec<f64>> = BTreeMap::new();
    for i in 0..n {
        let condition = Condition::ALL[i as usize % 4];
        let params = SessionParams {
            session_id: format!("s{i}"),
            participant_id: format!("p{i}"),
            condition,
            seed: i,
            policy: Default::default(),
        };
        let profile = ParticipantProfile {
            recall: if condition == Condition::AutoI { 0.45 } else { 0.65 },
            ..ParticipantProfile::default()
        };
        let run = simulate_session(&deck, &params, &profile, i, |_, _| {})?;
        let sc = score_session(&run.session, &deck, &store)?;
        let m = aggregate_participant(&run.session, &sc)?;
        by_participant.entry(condition).or_default().push(m.combined_score);
        scores.push(sc);
    }

    println!("per participant (combined score):");
    for (a, b, tail) in [(Condition::AutoII, Condition::AutoI, Tail::Right), (Condition::AutoIII, Condition::AutoII, Tail::Right)] {
        let r = compare_conditions(&by_participant, a, b, tail)?;
        println!("  {a} > {b}: t({:.1}) = {:.2}, p = {:.4}, significant {}", r.df, r.t, r.p, r.significant);
    }

    let words = per_word_table(&deck, &scores);
    let column = |c: Condition| -> Vec<f64> { words.iter().filter_map(|w| w.by_condition.get(&c).copied()).collect() };
    let r = welch_test(&column(Condition::AutoII), &column(Condition::AutoI), Tail::Right)?;
    println!("per word: Auto-II > Auto-I: t({:.1}) = {:.2}, p = {:.4}", r.df, r.t, r.p);
    Ok(())
}
