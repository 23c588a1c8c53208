use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lessonforge_core::corpus::{CorpusDocument, CorpusIndex, HashEmbedder, OwnedRetriever};
use lessonforge_core::evaluation::Rubric;
use lessonforge_core::pipeline::backend::{BackendError, ChatRequest, ModelBackend, SyntheticBackend};
use lessonforge_core::pipeline::{ModelConfig, PromptTemplates};
use lessonforge_core::store::Store;
use lessonforge_server::{router, AppState, ServerOptions};
use serde_json::{json, Value};
use tower::ServiceExt;

fn retriever() -> OwnedRetriever {
    let embedder = HashEmbedder::default();
    let mut index = CorpusIndex::for_embedder(&embedder);
    let doc = CorpusDocument {
        id: "notes".into(),
        title: "Notes on camera use in online tutoring".into(),
        authors: vec![],
        year: Some(2021),
        body: "Students often keep cameras off for privacy. Tutors can invite rather than require. ".repeat(30),
        bibliography: vec![],
    };
    index.ingest(doc, &embedder, &Default::default()).unwrap();
    OwnedRetriever { index, embedder: Box::new(embedder) }
}

fn app_with(backend: Arc<dyn ModelBackend>) -> (Router, Arc<AppState>, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let state = Arc::new(AppState::new(
        Store::open(dir.path()).unwrap(),
        backend,
        Arc::new(retriever()),
        PromptTemplates::builtin(),
        Rubric::default(),
        ModelConfig::default(),
    ));
    let app = router(Arc::clone(&state), &ServerOptions { cors_origin: Some("http://localhost:5173".into()) });
    (app, state, dir)
}

fn app() -> (Router, Arc<AppState>, tempfile::TempDir) {
    app_with(Arc::new(SyntheticBackend::new()))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn wait_done(app: &Router, id: &str) -> Value {
    for _ in 0..400 {
        let (status, v) = call(app, "GET", &format!("/runs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if v["status"]["state"] != "pending" && v["in_flight"] == false {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("run {id} did not finish");
}

async fn create_run(app: &Router, k: i64) -> String {
    let (status, v) = call(app, "POST", "/runs", Some(json!({"topic": "Turning on Cameras", "k": k}))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    v["id"].as_str().unwrap().to_owned()
}

fn all_codes(value: &str) -> Value {
    let rubric = Rubric::default();
    Value::Object(rubric.ids().map(|id| (id.to_owned(), json!(value))).collect())
}

#[tokio::test]
async fn run_lifecycle_and_lessons() {
    let (app, _, _dir) = app();
    let id = create_run(&app, 3).await;
    let run = wait_done(&app, &id).await;
    assert_eq!(run["status"]["state"], "complete");
    assert_eq!(run["plan"]["k"], 3);
    let lesson_id = run["lesson"]["id"].as_str().unwrap();
    assert_eq!(run["lesson_id"], lesson_id);

    let (_, lessons) = call(&app, "GET", "/lessons", None).await;
    assert_eq!(lessons[0]["lesson_id"], lesson_id);
    let (status, lesson) = call(&app, "GET", &format!("/lessons/{lesson_id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(lesson["lesson"]["sections"].as_array().unwrap().len(), 5);
    let (_, transcripts) = call(&app, "GET", &format!("/runs/{id}/transcripts"), None).await;
    assert_eq!(transcripts.as_array().unwrap().len(), 3);
    let (_, runs) = call(&app, "GET", "/runs", None).await;
    assert_eq!(runs.as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn bad_run_requests() {
    let (app, _, _dir) = app();
    let (status, v) = call(&app, "POST", "/runs", Some(json!({"topic": "x", "k": 6}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["code"], "invalid_request");
    let (status, _) = call(&app, "POST", "/runs", Some(json!({"topic": " ", "k": 2}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", "/runs", Some(json!({"topic": "x", "k": 2, "config": {"temperature": -1.0}}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, v) = call(&app, "GET", "/runs/01ARZ3NDEKTSV4RRFFQ69G5FAV", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["code"], "not_found");
    let (status, v) = call(&app, "GET", "/lessons/..", None).await;
    assert!(status == StatusCode::BAD_REQUEST || status == StatusCode::NOT_FOUND, "{v}");
    let (status, _) = call(&app, "GET", "/nowhere", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn regenerate_reexecutes_later_groups_only() {
    let calls = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&calls);
    let backend = move |req: &ChatRequest| {
        counter.fetch_add(1, Ordering::SeqCst);
        SyntheticBackend::new().complete(req)
    };
    let (app, state, _dir) = app_with(Arc::new(backend));
    let id = create_run(&app, 3).await;
    wait_done(&app, &id).await;
    let before = state.store.load_run(&id).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 3);

    let (status, v) = call(&app, "POST", &format!("/runs/{id}/segments/1/regenerate"), Some(json!({"note": "Use a sibling in the room."}))).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{v}");
    let after_view = wait_done(&app, &id).await;
    assert_eq!(after_view["status"]["state"], "complete");
    let after = state.store.load_run(&id).unwrap();
    assert_eq!(after.transcripts[0], before.transcripts[0]);
    assert_eq!(after.transcripts.len(), 3);
    assert_eq!(calls.load(Ordering::SeqCst), 5);
    assert_ne!(after.transcripts[1].attempts[0].fingerprint, before.transcripts[1].attempts[0].fingerprint);
    assert_eq!(after.transcripts[1].note.as_deref(), Some("Use a sibling in the room."));
    let lb = serde_json::to_string(&before.lesson.as_ref().unwrap().sections[..2]).unwrap();
    let la = serde_json::to_string(&after.lesson.as_ref().unwrap().sections[..2]).unwrap();
    assert_eq!(la, lb);

    let (status, v) = call(&app, "POST", &format!("/runs/{id}/segments/3/regenerate"), Some(json!({"note": ""}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "regenerate_rejected");
}

/// Backend that blocks until released.
struct Gate {
    open: Mutex<bool>,
    cv: Condvar,
}

impl ModelBackend for Gate {
    fn complete(&self, request: &ChatRequest) -> Result<String, BackendError> {
        let mut open = self.open.lock().unwrap();
        while !*open {
            open = self.cv.wait(open).unwrap();
        }
        SyntheticBackend::new().complete(request)
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn regenerate_while_in_flight_conflicts() {
    let gate = Arc::new(Gate { open: Mutex::new(false), cv: Condvar::new() });
    let (app, _, _dir) = app_with(gate.clone());
    let id = create_run(&app, 2).await;
    let (status, v) = call(&app, "POST", &format!("/runs/{id}/segments/0/regenerate"), Some(json!({"note": "x"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["error"]["code"], "run_in_flight");
    let (_, view) = call(&app, "GET", &format!("/runs/{id}"), None).await;
    assert_eq!(view["status"]["state"], "pending");
    assert_eq!(view["in_flight"], true);
    *gate.open.lock().unwrap() = true;
    gate.cv.notify_all();
    assert_eq!(wait_done(&app, &id).await["status"]["state"], "complete");
}

#[tokio::test]
async fn rating_kappa_consensus_aggregate_flow() {
    let (app, _, _dir) = app();
    let (_, rubric) = call(&app, "GET", "/rubric", None).await;
    assert_eq!(rubric["codes"].as_array().unwrap().len(), 17);

    let id = create_run(&app, 3).await;
    let run = wait_done(&app, &id).await;
    let lesson = run["lesson"]["id"].as_str().unwrap().to_owned();

    // 16 of 17 codes.
    let mut partial = all_codes("positive");
    partial.as_object_mut().unwrap().remove("conclusion.authenticity_of_references");
    let (status, v) = call(&app, "POST", "/ratings", Some(json!({"coder": "ann", "lesson": lesson, "values": partial}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "incomplete_rating");
    assert_eq!(v["error"]["details"]["missing"], json!(["conclusion.authenticity_of_references"]));
    assert!(v["error"]["message"].as_str().unwrap().contains("conclusion.authenticity_of_references"));

    let mut bogus = all_codes("positive");
    bogus["title.bogus"] = json!("positive");
    let (status, v) = call(&app, "POST", "/ratings", Some(json!({"coder": "ann", "lesson": lesson, "values": bogus}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "unknown_codes");

    let mut a = all_codes("positive");
    a["title.clarity"] = json!("negative");
    a["conclusion.authenticity_of_references"] = json!("negative");
    let (status, _) = call(&app, "POST", "/ratings", Some(json!({"coder": "ann", "lesson": lesson, "values": a}))).await;
    assert_eq!(status, StatusCode::CREATED);

    // Only one coder so far.
    let (status, v) = call(&app, "GET", &format!("/kappa?lesson={lesson}"), None).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["code"], "kappa_unavailable");

    let (status, _) = call(&app, "POST", "/ratings", Some(json!({"coder": "bo", "lesson": lesson, "values": a}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, v) = call(&app, "GET", &format!("/kappa?lesson={lesson}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["kappa"], 1.0);
    let (_, pooled) = call(&app, "GET", "/kappa?pooled=true", None).await;
    assert_eq!(pooled["kappa"], 1.0);
    let (status, _) = call(&app, "GET", "/kappa", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // Introduce one disagreement.
    let mut b = a.clone();
    b["title.clarity"] = json!("positive");
    call(&app, "POST", "/ratings", Some(json!({"coder": "bo", "lesson": lesson, "values": b}))).await;
    let (_, ratings) = call(&app, "GET", &format!("/ratings/{lesson}"), None).await;
    assert_eq!(ratings.as_array().unwrap().len(), 2);

    let (status, v) = call(&app, "POST", &format!("/consensus/{lesson}"), Some(json!({"reviewer": "cy", "values": {}}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["details"]["missing"], json!(["title.clarity"]));
    let (status, rec) = call(&app, "POST", &format!("/consensus/{lesson}"), Some(json!({"reviewer": "cy", "values": {"title.clarity": "positive"}}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(rec["provenance"]["title.clarity"], json!({"kind": "adjudicated", "reviewer": "cy"}));
    let (_, got) = call(&app, "GET", &format!("/consensus/{lesson}"), None).await;
    assert_eq!(got, rec);

    let (status, agg) = call(&app, "GET", "/reports/aggregate", None).await;
    assert_eq!(status, StatusCode::OK);
    let col = &agg["report"]["scores"]["columns"][0];
    assert_eq!(col["strategy"], 3);
    assert_eq!(col["totals"], json!([16]));
    assert_eq!(col["average"], "16.00");
    let (_, again) = call(&app, "GET", "/reports/aggregate", None).await;
    assert_eq!(agg, again);
}

#[tokio::test]
async fn responses_are_canonical_and_cors_enabled() {
    let (app, _, _dir) = app();
    let req = Request::builder()
        .uri("/rubric")
        .header("origin", "http://localhost:5173")
        .body(Body::empty())
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://localhost:5173");
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(text, lessonforge_core::canonical::to_canonical_string(&v).unwrap());
}
