use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mnemocue::data_dir;
use mnemocue::lexicon::load_deck;
use mnemocue::service::write_log;
use mnemocue::study::simulate::{simulate_session, ParticipantProfile};
use mnemocue::study::{Condition, SessionParams};

fn mnemocue(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_mnemocue"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("MNEMOCUE_API_KEY")
        .env_remove("OPENAI_API_KEY")
        .output()
        .unwrap();
    out
}

fn ok(args: &[&str]) -> String {
    let out = mnemocue(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_deck_reproduces_the_shipped_deck() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("deck.json");
    let words = data_dir().join("words.tsv");
    let curated = data_dir().join("curated.tsv");
    ok(&[
        "generate-deck", "--words", s(&words), "--curated", s(&curated), "--out", s(&out),
        "--name", "german-36", "--provider", "mock", "--seed", "0",
    ]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(data_dir().join("deck.json")).unwrap());
    let deck = load_deck(&out).unwrap();
    for e in deck.entries() {
        let image = e.image_ref.as_ref().unwrap();
        assert_eq!(fs::read(dir.path().join(image)).unwrap(), fs::read(data_dir().join(image)).unwrap());
    }
}

#[test]
fn live_provider_without_credentials_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = mnemocue(&[
        "generate-deck", "--words", s(&data_dir().join("words.tsv")), "--out", s(&dir.path().join("d.json")),
        "--provider", "live",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("MNEMOCUE_API_KEY"));
}

#[test]
fn unbalanced_generation_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let words = dir.path().join("words.tsv");
    fs::write(&words, "a\tapple\tape\nb\tbee\tbe\nc\tcat\tcap\nd\tdog\tdot\n").unwrap();
    let out = dir.path().join("d.json");
    let res = mnemocue(&["generate-deck", "--words", s(&words), "--out", s(&out)]);
    // four words cannot split into three equal sets
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("balanced"));
}

#[test]
fn keywords_ranks_candidates() {
    let deck = data_dir().join("deck.json");
    let text = ok(&["keywords", "flasche", "--deck", s(&deck), "-k", "3"]);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let ranked = v["ranked"].as_array().unwrap();
    assert_eq!(ranked.len(), 3);
    let totals: Vec<f64> = ranked.iter().map(|c| c["total"].as_f64().unwrap()).collect();
    assert!(totals.windows(2).all(|w| w[0] >= w[1]));
    assert!(!mnemocue(&["keywords", "flasche", "--weights", "1,1"]).status.success());
}

#[test]
fn score_writes_scored_rows() {
    let dir = tempfile::tempdir().unwrap();
    let responses = dir.path().join("r.csv");
    fs::write(
        &responses,
        "participant_id,word,task,response,latency_ms\np1,treten,recog,step,4000\np1,käse,gen,kase,5000\np1,treten,gen,,15000\n",
    )
    .unwrap();
    let out = dir.path().join("scored.csv");
    ok(&["score", "--deck", s(&data_dir().join("deck.json")), "--responses", s(&responses), "--out", s(&out)]);
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let headers = rd.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["participant_id", "word", "task", "response", "latency_ms", "normalized_response", "score", "flag"]
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(&rows[0][6], "1.0");
    assert_eq!(&rows[1][6], "1.0");
    assert_eq!((&rows[2][6], &rows[2][7]), ("0.0", "missing"));
}

#[test]
fn analyze_and_export_simulated_sessions() {
    let deck = load_deck(data_dir().join("deck.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sessions = dir.path().join("sessions");
    fs::create_dir(&sessions).unwrap();
    for i in 0..12u64 {
        let params = SessionParams {
            session_id: format!("s{i:02}"),
            participant_id: format!("p{i:02}"),
            condition: Condition::ALL[i as usize % 4],
            seed: i,
            policy: Default::default(),
        };
        let run = simulate_session(&deck, &params, &ParticipantProfile::default(), i, |_, _| {}).unwrap();
        write_log(&sessions.join(format!("s{i:02}.log")), &deck, &params, run.created_at_ms, &run.log).unwrap();
    }
    let exclude = dir.path().join("exclude.txt");
    fs::write(&exclude, "p00\nnobody\n").unwrap();
    let out = dir.path().join("analysis");
    let deck_path = data_dir().join("deck.json");
    let stdout = ok(&[
        "analyze", "--sessions", s(&sessions), "--deck", s(&deck_path), "--exclude", s(&exclude), "--out", s(&out),
    ]);
    assert_eq!(stdout.lines().count(), 4, "{stdout}");

    let participants = fs::read_to_string(out.join("participants.csv")).unwrap();
    assert_eq!(participants.lines().count(), 1 + 11);
    assert!(!participants.contains("p00"));
    let per_word = fs::read_to_string(out.join("per_word.csv")).unwrap();
    assert_eq!(per_word.lines().next().unwrap(), "word,Auto-I,Auto-II,Auto-III,Manual-II");
    assert_eq!(per_word.lines().nth(1).unwrap().split(',').next(), Some("flasche"));
    let tests = fs::read_to_string(out.join("tests.csv")).unwrap();
    assert_eq!(tests.lines().next().unwrap(), "condition_a,condition_b,tail,t,df,p,significant");
    assert_eq!(tests.lines().count(), 5);
    let long = fs::read_to_string(out.join("long.csv")).unwrap();
    assert_eq!(long.lines().count(), 1 + 11 * 6);

    let again = dir.path().join("analysis2");
    ok(&["analyze", "--sessions", s(&sessions), "--deck", s(&deck_path), "--exclude", s(&exclude), "--out", s(&again)]);
    assert_eq!(per_word, fs::read_to_string(again.join("per_word.csv")).unwrap());

    let export = dir.path().join("responses.csv");
    ok(&["export", "--deck", s(&deck_path), "--sessions", s(&sessions), "--out", s(&export)]);
    let text = fs::read_to_string(&export).unwrap();
    assert_eq!(text.lines().next().unwrap(), "participant_id,word,task,response,latency_ms");
    assert_eq!(text.lines().count(), 1 + 12 * 72);
}
