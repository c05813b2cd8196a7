//! Runs the study server on a scratch session directory and walks one
//! session through its first steps over HTTP.
//!
//!     cargo run --example serve_study            # demo, then exit
//!     cargo run --example serve_study -- 8080    # keep serving on :8080

use std::net::SocketAddr;
use std::sync::Arc;

use mnemocue::data_dir;
use mnemocue::lexicon::load_deck;
use mnemocue::service::{router, SessionStore, SystemClock};
use serde_json::{json, Value};

async fn call(client: &reqwest::Client, method: &str, url: String, body: Option<Value>) -> anyhow::Result<Value> {
    let req = match method {
        "GET" => client.get(url),
        _ => client.post(url).json(&body.unwrap_or(Value::Null)),
    };
    Ok(req.send().await?.json().await?)
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let port: Option<u16> = std::env::args().nth(1).map(|p| p.parse()).transpose()?;
    let deck = Arc::new(load_deck(data_dir().join("deck.json"))?);
    let sessions = tempfile::tempdir()?;
    let (store, _) = SessionStore::open(deck, sessions.path(), Arc::new(SystemClock))?;
    let app = router(Arc::new(store), Some(data_dir().join("media")));

    let listener = tokio::net::TcpListener::bind(SocketAddr::from(([127, 0, 0, 1], port.unwrap_or(0)))).await?;
    let base = format!("http://{}", listener.local_addr()?);
    println!("serving on {base}, sessions in {}", sessions.path().display());
    let server = tokio::spawn(async move { axum::serve(listener, app).await });
    if port.is_some() {
        server.await??;
        return Ok(());
    }

    let client = reqwest::Client::new();
    println!("GET /deck/meta -> {}", call(&client, "GET", format!("{base}/deck/meta"), None).await?);
    let created = call(&client, "POST", format!("{base}/sessions"), Some(json!({"participant_id": "demo", "condition": "Auto-III"}))).await?;
    let id = created["session_id"].as_str().unwrap().to_string();
    println!("POST /sessions -> {} in phase {}", id, created["step"]["phase"]);

    let step_id = created["step"]["step_id"].clone();
    let learn = call(&client, "POST", format!("{base}/sessions/{id}/advance"), Some(json!({"step_id": step_id}))).await?;
    let step = &learn["step"];
    println!("consent accepted, now showing {} / {} / {}", step["word"], step["keyword"], step["verbal_cue"]);

    // the minimum viewing time has not passed, so this is refused
    let early = call(&client, "POST", format!("{base}/sessions/{id}/advance"), Some(json!({"step_id": step["step_id"]}))).await?;
    println!("early advance -> {early}");
    server.abort();
    Ok(())
}
