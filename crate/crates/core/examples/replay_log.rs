//! Rebuilds a session from its event log and prints what happened.
//!
//!     cargo run --example replay_log -- sessions/sim-000.log
//!
//! Without an argument a fresh simulated session is logged and replayed.

use mnemocue::data_dir;
use mnemocue::lexicon::load_deck;
use mnemocue::service::{replay_log, write_log};
use mnemocue::study::simulate::{simulate_session, ParticipantProfile};
use mnemocue::study::{Condition, SessionParams, Task};

fn main() -> anyhow::Result<()> {
    let deck = load_deck(data_dir().join("deck.json"))?;
    let tmp = tempfile::tempdir()?;
    let path = match std::env::args().nth(1) {
        Some(p) => p.into(),
        None => {
            let params = SessionParams {
                session_id: "demo".into(),
                participant_id: "p-demo".into(),
                condition: Condition::AutoIII,
                seed: 42,
                policy: Default::default(),
            };
            let run = simulate_session(&deck, &params, &ParticipantProfile::default(), 42, |_, _| {})?;
            let path = tmp.path().join("demo.log");
            write_log(&path, &deck, &params, run.created_at_ms, &run.log)?;
            path
        }
    };

    let session = replay_log(&deck, &path)?;
    println!("{} ({}) participant {}", session.session_id, session.condition, session.participant_id);
    println!("phase {}, {} events", session.phase, session.events.len());
    for task in [Task::Learn, Task::Recognize, Task::Generate] {
        let events: Vec<_> = session.events_for(task).collect();
        let mean = events.iter().map(|e| e.duration_ms()).sum::<u64>() as f64 / events.len().max(1) as f64;
        let answered = events.iter().filter(|e| e.response.is_some()).count();
        println!("  {task:?}: {} items, {answered} answered, mean {:.1} s", events.len(), mean / 1000.0);
    }
    if !session.is_done() {
        println!("  missing phases: {:?}", session.missing_phases());
    }
    Ok(())
}
