//! Live providers against a local stand-in for the HTTP API.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use base64::Engine;
use serde_json::{json, Value};

use mnemocue::cuegen::live::{ApiEndpoint, LiveImageProvider, LiveTextProvider};
use mnemocue::cuegen::{
    generate_verbal_cue, generate_visual_cue, CueError, CueRequest, ImageProvider, ProviderConfig, ProviderError,
    TextProvider,
};

#[derive(Default)]
struct Seen {
    bodies: Mutex<Vec<(String, Value)>>,
    auth: Mutex<Vec<String>>,
    calls: AtomicUsize,
}

const PNG: &[u8] = b"\x89PNG\r\n\x1a\nfake-image-payload";

fn record(seen: &Seen, path: &str, headers: &HeaderMap, body: &Value) -> usize {
    seen.bodies.lock().unwrap().push((path.to_string(), body.clone()));
    if let Some(a) = headers.get("authorization") {
        seen.auth.lock().unwrap().push(a.to_str().unwrap().to_string());
    }
    seen.calls.fetch_add(1, Ordering::SeqCst)
}

fn start() -> (SocketAddr, Arc<Seen>) {
    let seen = Arc::new(Seen::default());
    let app = Router::new()
        .route(
            "/v1/completions",
            post(|State(s): State<Arc<Seen>>, h: HeaderMap, Json(b): Json<Value>| async move {
                // first answer violates the "Imagine" rule, later ones pass
                let n = record(&s, "/completions", &h, &b);
                let text = if n == 0 {
                    "A flashy bottle."
                } else {
                    "\n\n\"Imagine a flashy bottle sparkling on a shelf.\""
                };
                Json(json!({"choices": [{"text": text}]}))
            }),
        )
        .route(
            "/v1/chat/completions",
            post(|State(s): State<Arc<Seen>>, h: HeaderMap, Json(b): Json<Value>| async move {
                record(&s, "/chat/completions", &h, &b);
                Json(json!({"choices": [{"message": {"role": "assistant", "content": "Imagine a flashy bottle."}}]}))
            }),
        )
        .route(
            "/v1/images/generations",
            post(|State(s): State<Arc<Seen>>, h: HeaderMap, Json(b): Json<Value>| async move {
                record(&s, "/images/generations", &h, &b);
                let data = base64::engine::general_purpose::STANDARD.encode(PNG);
                Json(json!({"data": [{"b64_json": data}]}))
            }),
        )
        .route(
            "/broken/chat/completions",
            post(|| async { (StatusCode::TOO_MANY_REQUESTS, "slow down") }),
        )
        .with_state(seen.clone());

    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    (rx.recv().unwrap(), seen)
}

fn endpoint(addr: SocketAddr, prefix: &str) -> ApiEndpoint {
    ApiEndpoint::new(format!("http://{addr}/{prefix}/"), "test-key")
}

#[test]
fn completion_model_retries_until_valid() {
    let (addr, seen) = start();
    let provider = LiveTextProvider::new(endpoint(addr, "v1"));
    let config = ProviderConfig::default();
    let request = CueRequest::new("flashy", "bottle", "flasche").unwrap();
    let cue = generate_verbal_cue(&provider, &request, &config).unwrap();
    assert_eq!(cue.text, "Imagine a flashy bottle sparkling on a shelf.");

    let bodies = seen.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 2);
    let (path, body) = &bodies[0];
    assert_eq!(path, "/completions");
    assert_eq!(body["model"], "text-davinci-003");
    assert_eq!(body["temperature"], 0.5);
    assert_eq!(
        body["prompt"],
        "Write a short, catchy sentence that connects flashy and bottle. Start the sentence with \"Imagine\"."
    );
    assert!(seen.auth.lock().unwrap().iter().all(|a| a == "Bearer test-key"));
}

#[test]
fn chat_models_use_messages() {
    let (addr, seen) = start();
    let provider = LiveTextProvider::new(endpoint(addr, "v1"));
    let config = ProviderConfig {
        model: "gpt-4o-mini".into(),
        ..ProviderConfig::default()
    };
    let text = provider.complete("hello", &config).unwrap();
    assert_eq!(text, "Imagine a flashy bottle.");
    let bodies = seen.bodies.lock().unwrap();
    assert_eq!(bodies[0].0, "/chat/completions");
    assert_eq!(bodies[0].1["messages"][0]["content"], "hello");
}

#[test]
fn image_is_decoded_and_stored_by_hash() {
    let (addr, seen) = start();
    let dir = tempfile::tempdir().unwrap();
    let provider = LiveImageProvider::new(endpoint(addr, "v1"), "dall-e-2", "256x256");
    let cue = mnemocue::cuegen::VerbalCue::curated("Imagine, a flashy bottle.", "flashy", "bottle").unwrap();
    let visual = generate_visual_cue(&provider, &cue, &ProviderConfig::default(), dir.path()).unwrap();
    assert_eq!(visual.prompt, "a flashy bottle.");
    assert!(visual.image_ref.starts_with("media/") && visual.image_ref.ends_with(".png"));
    assert_eq!(std::fs::read(dir.path().join(&visual.image_ref)).unwrap(), PNG);
    let bodies = seen.bodies.lock().unwrap();
    assert_eq!(bodies[0].1["prompt"], "a flashy bottle.");
    assert_eq!(bodies[0].1["size"], "256x256");
    assert_eq!(bodies[0].1["response_format"], "b64_json");
}

#[test]
fn api_errors_are_not_retried() {
    let (addr, _) = start();
    let provider = LiveTextProvider::new(endpoint(addr, "broken"));
    let config = ProviderConfig {
        model: "gpt-4o-mini".into(),
        ..ProviderConfig::default()
    };
    let request = CueRequest::new("flashy", "bottle", "flasche").unwrap();
    match generate_verbal_cue(&provider, &request, &config) {
        Err(CueError::Provider(ProviderError::Api { status: 429, body })) => assert_eq!(body, "slow down"),
        other => panic!("unexpected {other:?}"),
    }
    let image = LiveImageProvider::new(endpoint(addr, "broken"), "m", "s");
    assert!(matches!(image.render("x", &config), Err(ProviderError::Api { status: 404, .. })));
}

#[test]
fn unreachable_host_is_a_transport_error() {
    let provider = LiveTextProvider::new(ApiEndpoint::new("http://127.0.0.1:9", "k"));
    let err = provider.complete("x", &ProviderConfig::default()).unwrap_err();
    assert!(matches!(err, ProviderError::Transport(_)), "{err:?}");
}
