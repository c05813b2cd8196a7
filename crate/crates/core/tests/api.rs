use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use mnemocue::data_dir;
use mnemocue::lexicon::{load_deck, load_word_vectors, Deck};
use mnemocue::service::{replay_log, router, ManualClock, SessionStore};

const T0: u64 = 1_700_000_000_000;

fn deck() -> Arc<Deck> {
    Arc::new(load_deck(data_dir().join("deck.json")).unwrap())
}

struct Api {
    app: Router,
    clock: Arc<ManualClock>,
    store: Arc<SessionStore>,
}

fn api(dir: &Path) -> Api {
    let clock = Arc::new(ManualClock::new(T0));
    let (store, failures) = SessionStore::open(deck(), dir, clock.clone()).unwrap();
    assert!(failures.is_empty());
    let vectors = Arc::new(load_word_vectors(data_dir().join("vectors.txt")).unwrap());
    let store = Arc::new(store.with_vectors(vectors));
    Api {
        app: router(store.clone(), Some(data_dir().join("media"))),
        clock,
        store,
    }
}

impl Api {
    async fn call(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let req = Request::builder().method(method).uri(uri);
        let req = match body {
            Some(b) => req
                .header("content-type", "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        (status, value)
    }

    async fn create(&self, body: Value) -> Value {
        let (status, v) = self.call("POST", "/sessions", Some(body)).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v
    }

    async fn step(&self, id: &str) -> Value {
        let (status, v) = self.call("GET", &format!("/sessions/{id}/step"), None).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        v
    }

    /// Drives a consented session to completion with on-time answers.
    async fn complete(&self, id: &str) {
        loop {
            let v = self.step(id).await;
            if v["done"] == true {
                break;
            }
            let step = &v["step"];
            let sid = step["step_id"].as_u64().unwrap();
            match step["phase"].as_str().unwrap() {
                "learn" => {
                    self.clock.advance(16_000);
                    let (s, r) = self
                        .call("POST", &format!("/sessions/{id}/advance"), Some(json!({"step_id": sid})))
                        .await;
                    assert_eq!(s, StatusCode::OK, "{r}");
                }
                "recognize" | "generate" => {
                    self.clock.advance(3_000);
                    let (s, r) = self
                        .call(
                            "POST",
                            &format!("/sessions/{id}/response"),
                            Some(json!({"step_id": sid, "response": "x"})),
                        )
                        .await;
                    assert_eq!(s, StatusCode::OK, "{r}");
                }
                "likert" => {
                    for item in step["likert_items"].as_array().unwrap() {
                        let (s, r) = self
                            .call(
                                "POST",
                                &format!("/sessions/{id}/likert"),
                                Some(json!({"word": item["word"], "rating": 4})),
                            )
                            .await;
                        assert_eq!(s, StatusCode::OK, "{r}");
                    }
                }
                other => panic!("unexpected phase {other}"),
            }
        }
    }
}

#[tokio::test]
async fn conditions_rotate_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path());
    let mut got = Vec::new();
    for i in 0..4 {
        got.push(api.create(json!({"participant_id": format!("p{i}")})).await["condition"].clone());
    }
    assert_eq!(got, vec![json!("Auto-I"), json!("Auto-II"), json!("Auto-III"), json!("Manual-II")]);
    let v = api.create(json!({"participant_id": "x", "condition": "Manual-II"})).await;
    assert_eq!(v["condition"], "Manual-II");
    let (status, v) = api.call("POST", "/sessions", Some(json!({"participant_id": "  "}))).await;
    assert_eq!((status, v["error"].as_str()), (StatusCode::UNPROCESSABLE_ENTITY, Some("bad_request")));
}

#[tokio::test]
async fn create_then_fetch_is_the_same_view() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path());
    let created = api.create(json!({"participant_id": "p1", "seed": 7})).await;
    let id = created["session_id"].as_str().unwrap();
    let fetched = api.step(id).await;
    assert_eq!(created, fetched);
    assert_eq!(fetched["step"]["phase"], "consent");
    assert!(fetched["step"]["consent_text"].as_str().unwrap().contains("placeholder"));
}

async fn consent(api: &Api, id: &str) {
    let v = api.step(id).await;
    let sid = v["step"]["step_id"].as_u64().unwrap();
    let (s, r) = api
        .call("POST", &format!("/sessions/{id}/advance"), Some(json!({"step_id": sid})))
        .await;
    assert_eq!(s, StatusCode::OK, "{r}");
}

#[tokio::test]
async fn learning_timing_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path());
    let id = api.create(json!({"participant_id": "p", "condition": "Auto-I"})).await["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    consent(&api, &id).await;
    let v = api.step(&id).await;
    let step = &v["step"];
    assert_eq!(step["phase"], "learn");
    assert!(step.get("keyword").is_some());
    assert!(step.get("verbal_cue").is_none() && step.get("image_ref").is_none());
    assert_eq!(step["audio_offsets_ms"], json!([2000, 7000]));
    let sid = step["step_id"].as_u64().unwrap();

    api.clock.advance(14_000);
    let (s, r) = api
        .call("POST", &format!("/sessions/{id}/advance"), Some(json!({"step_id": sid})))
        .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(r["error"], "too_early");
    assert_eq!(r["remaining_ms"], 1_000);

    api.clock.advance(2_000);
    let (s, r) = api
        .call("POST", &format!("/sessions/{id}/advance"), Some(json!({"step_id": sid, "client_elapsed_ms": 15900})))
        .await;
    assert_eq!(s, StatusCode::OK, "{r}");
    let (s, r) = api
        .call("POST", &format!("/sessions/{id}/advance"), Some(json!({"step_id": sid})))
        .await;
    assert_eq!((s, r["error"].as_str()), (StatusCode::CONFLICT, Some("stale_step")));

    // nobody touches the next card: the next poll times it out
    api.clock.advance(30_000);
    let v = api.step(&id).await;
    assert_eq!(v["outcome"], json!({"outcome": "expired", "count": 1}));
    assert_eq!(v["progress"]["completed_trials"], 2);
}

#[tokio::test]
async fn test_steps_hide_answers_and_cues() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path());
    let id = api.create(json!({"participant_id": "p", "condition": "Auto-III"})).await["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    consent(&api, &id).await;
    let deck = deck();
    for _ in 0..12 {
        let v = api.step(&id).await;
        assert_eq!(v["step"]["phase"], "learn");
        assert!(v["step"]["image_ref"].as_str().unwrap().starts_with("media/"));
        api.clock.advance(15_000);
        let sid = v["step"]["step_id"].as_u64().unwrap();
        api.call("POST", &format!("/sessions/{id}/advance"), Some(json!({"step_id": sid}))).await;
    }
    for phase in ["recognize", "generate"] {
        for _ in 0..12 {
            let v = api.step(&id).await;
            let step = &v["step"];
            assert_eq!(step["phase"], phase);
            let text = step.to_string();
            let word = step["word"].as_str().or(step["meaning"].as_str()).unwrap();
            let entry = deck
                .entries()
                .iter()
                .find(|e| e.l2_word == word || e.l1_meaning == word)
                .unwrap();
            for hidden in [&entry.auto_keyword, &entry.auto_verbal_cue] {
                assert!(!text.contains(hidden.as_str()), "{phase} step leaks {hidden:?}: {text}");
            }
            let answer = if phase == "recognize" { &entry.l1_meaning } else { &entry.l2_word };
            assert!(!text.contains(&format!("\"{answer}\"")), "{phase} step leaks the answer: {text}");
            api.clock.advance(1_000);
            let sid = step["step_id"].as_u64().unwrap();
            api.call(
                "POST",
                &format!("/sessions/{id}/response"),
                Some(json!({"step_id": sid, "response": answer})),
            )
            .await;
        }
    }
}

#[tokio::test]
async fn finished_sessions_conflict_and_summarize() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path());
    let id = api.create(json!({"participant_id": "p9"})).await["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    consent(&api, &id).await;
    api.complete(&id).await;
    let v = api.step(&id).await;
    assert_eq!((v["done"].as_bool(), v.get("step")), (Some(true), None));
    let (s, r) = api
        .call("POST", &format!("/sessions/{id}/response"), Some(json!({"step_id": 0, "response": "x"})))
        .await;
    assert_eq!((s, r["error"].as_str()), (StatusCode::CONFLICT, Some("finished")));

    let (s, summary) = api.call("GET", &format!("/sessions/{id}/summary"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(summary["events"], 108);
    let m = &summary["metrics"];
    assert!((m["likert_norm"].as_f64().unwrap() - 0.8).abs() < 1e-12);
    assert!((m["testing_time_norm"].as_f64().unwrap() - 0.2).abs() < 1e-12);

    let replayed = replay_log(&deck(), dir.path().join(format!("{id}.log"))).unwrap();
    assert_eq!(replayed, api.store.session(&id).unwrap());
}

#[tokio::test]
async fn unknown_session_and_bad_likert() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path());
    let (s, r) = api.call("GET", "/sessions/nope/step", None).await;
    assert_eq!((s, r["error"].as_str()), (StatusCode::NOT_FOUND, Some("not_found")));
    let id = api.create(json!({"participant_id": "p"})).await["session_id"]
        .as_str()
        .unwrap()
        .to_string();
    let (s, r) = api
        .call("POST", &format!("/sessions/{id}/likert"), Some(json!({"word": "flasche", "rating": 5})))
        .await;
    assert_eq!((s, r["error"].as_str()), (StatusCode::CONFLICT, Some("wrong_phase")));
}

#[tokio::test]
async fn restart_recovers_sessions_and_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let (id, before) = {
        let api = api(dir.path());
        let id = api.create(json!({"participant_id": "p1"})).await["session_id"]
            .as_str()
            .unwrap()
            .to_string();
        consent(&api, &id).await;
        api.clock.advance(20_000);
        let v = api.step(&id).await;
        let sid = v["step"]["step_id"].as_u64().unwrap();
        api.call("POST", &format!("/sessions/{id}/advance"), Some(json!({"step_id": sid}))).await;
        let session = api.store.session(&id).unwrap();
        (id, session)
    };
    let log = dir.path().join(format!("{id}.log"));
    let committed = std::fs::read_to_string(&log).unwrap();

    // a corrupt committed record makes the log unrecoverable
    let broken = committed.replacen("\"seq\":1", "\"seq\":x", 1);
    std::fs::write(&log, &broken).unwrap();
    let clock = Arc::new(ManualClock::new(T0));
    let (_, failures) = SessionStore::open(deck(), dir.path(), clock).unwrap();
    assert_eq!(failures.len(), 1);

    // a write torn by a crash was never acknowledged and is dropped
    std::fs::write(&log, format!("{committed}{{\"session_id\":\"")).unwrap();
    let api = api(dir.path());
    assert_eq!(api.store.session(&id).unwrap(), before);
    assert_eq!(std::fs::read_to_string(&log).unwrap(), committed);
    let v = api.create(json!({"participant_id": "p2"})).await;
    assert_eq!(v["condition"], "Auto-II");
}

#[tokio::test]
async fn deck_meta_and_media() {
    let dir = tempfile::tempdir().unwrap();
    let api = api(dir.path());
    let (s, meta) = api.call("GET", "/deck/meta", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!((meta["name"].as_str(), meta["size"].as_u64()), (Some("german-36"), Some(36)));
    assert_eq!(meta["policy"]["learn_limit_ms"], 30_000);
    assert!(!meta.to_string().contains("Imagine"));

    let image = deck().entries()[0].image_ref.clone().unwrap();
    let resp = api
        .app
        .clone()
        .oneshot(Request::get(format!("/{image}")).body(Body::empty()).unwrap())
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    assert_eq!(resp.headers()["content-type"], "image/bmp");
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..2], b"BM");
    for bad in ["/media/..%2Fdeck.json", "/media/.hidden", "/media/missing.bmp"] {
        let resp = api.app.clone().oneshot(Request::get(bad).body(Body::empty()).unwrap()).await.unwrap();
        assert_eq!(resp.status(), StatusCode::NOT_FOUND, "{bad}");
    }
}
