//! Simulates participants through the full protocol and writes their event
//! logs, one JSONL file per session.
//!
//!     cargo run --example simulate_study -- [out_dir] [sessions]

use std::path::PathBuf;

use mnemocue::data_dir;
use mnemocue::lexicon::load_deck;
use mnemocue::service::write_log;
use mnemocue::study::simulate::{simulate_session, ParticipantProfile};
use mnemocue::study::{Condition, SessionParams, Task};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "sessions".into()));
    let n: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(20);
    std::fs::create_dir_all(&out)?;
    let deck = load_deck(data_dir().join("deck.json"))?;

    for i in 0..n {
        let params = SessionParams {
            session_id: format!("sim-{i:03}"),
            participant_id: format!("p{i:03}"),
            condition: Condition::ALL[i as usize % Condition::ALL.len()],
            seed: i,
            policy: Default::default(),
        };
        // stronger recall for the richer conditions, so the analysis has something to find
        let profile = ParticipantProfile {
            recall: 0.45 + 0.08 * (i % 4) as f64,
            ..ParticipantProfile::default()
        };
        let run = simulate_session(&deck, &params, &profile, i, |_, _| {})?;
        let path = out.join(format!("{}.log", params.session_id));
        write_log(&path, &deck, &params, run.created_at_ms, &run.log)?;
        let timeouts = run.session.events.iter().filter(|e| e.response.is_none() && e.phase.task() != Some(Task::Learn)).count();
        println!(
            "{} {:<9} {} commands, {} rejected, {} test timeouts",
            params.session_id,
            params.condition,
            run.log.len(),
            run.rejected.len(),
            timeouts
        );
    }
    println!("logs in {}", out.display());
    Ok(())
}
