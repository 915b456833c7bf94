use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use genoshare::ingest;
use genoshare::pipeline::{tradeoff_curve, TradeoffCurve, Workspace};
use genoshare::synth;
use genoshare_cli::server::{router, AppState, RunState, RunStatus};
use genoshare_cli::RunParams;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const BOUNDARY: &str = "genoshare-test-boundary";

fn cohort(n: usize, m: usize, seed: u64) -> (String, String) {
    let panel = synth::synthetic_panel(m, 0.05, seed);
    let ds = synth::panel_population(&panel, n, seed + 1, "s");
    (ingest::serialize_genotype_matrix(&ds), ingest::serialize_reference_panel(&panel))
}

fn multipart(fields: &[(&str, &str)]) -> Request<Body> {
    let mut body = String::new();
    for (name, value) in fields {
        body += &format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"; filename=\"{name}.tsv\"\r\n\r\n{value}\r\n");
    }
    body += &format!("--{BOUNDARY}--\r\n");
    Request::post("/api/datasets")
        .header("content-type", format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap()
}

fn post_json(uri: &str, value: Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(value.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    // extractor rejections are plain text
    let value = serde_json::from_slice(&bytes)
        .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into_owned()));
    (status, value)
}

struct Fixture {
    _dir: tempfile::TempDir,
    workspace: Workspace,
    app: Router,
}

fn fixture(workers: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let workspace = Workspace::open(dir.path()).unwrap();
    let app = router(AppState::new(workspace.clone(), workers));
    Fixture { _dir: dir, workspace, app }
}

async fn upload(f: &Fixture, name: &str, n: usize, m: usize) {
    let (g, p) = cohort(n, m, 21);
    let (status, body) = send(&f.app, multipart(&[("name", name), ("genotypes", &g), ("panel", &p)])).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
}

async fn wait_for(app: &Router, id: &str) -> RunState {
    for _ in 0..2000 {
        let (status, body) = send(app, get(&format!("/api/runs/{id}"))).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        let state: RunState = serde_json::from_value(body).unwrap();
        if matches!(state.status, RunStatus::Done | RunStatus::Failed) {
            return state;
        }
        tokio::time::sleep(Duration::from_millis(10)).await;
    }
    panic!("run {id} did not finish");
}

#[tokio::test]
async fn empty_workspace_lists_nothing() {
    let f = fixture(1);
    assert_eq!(send(&f.app, get("/api/datasets")).await, (StatusCode::OK, json!([])));
    assert_eq!(send(&f.app, get("/api/decisions")).await, (StatusCode::OK, json!([])));
    assert_eq!(send(&f.app, get("/api/runs")).await, (StatusCode::OK, json!([])));
}

#[tokio::test]
async fn datasets_upload_and_list() {
    let f = fixture(1);
    upload(&f, "cohort", 12, 30).await;
    let (_, list) = send(&f.app, get("/api/datasets")).await;
    assert_eq!(list, json!([{"name": "cohort", "samples": 12, "snps": 30}]));

    let (g, p) = cohort(3, 3, 1);
    let (status, _) = send(&f.app, multipart(&[("name", "cohort"), ("genotypes", &g), ("panel", &p)])).await;
    assert_eq!(status, StatusCode::CONFLICT);
    let (status, _) = send(&f.app, multipart(&[("name", "bad"), ("genotypes", "nonsense"), ("panel", &p)])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = send(&f.app, multipart(&[("name", "partial"), ("genotypes", &g)])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = send(&f.app, multipart(&[("name", "../escape"), ("genotypes", &g), ("panel", &p)])).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn runs_move_through_queued_running_done() {
    let f = fixture(1);
    upload(&f, "cohort", 60, 400).await;
    let mut ids = Vec::new();
    for seed in 0..3 {
        let (status, body) = send(&f.app, post_json("/api/runs", json!({"dataset": "cohort", "epsilon": 1.0, "seed": seed}))).await;
        assert_eq!(status, StatusCode::ACCEPTED, "{body}");
        assert_eq!(body["history"][0], "queued");
        ids.push(body["id"].as_str().unwrap().to_owned());
    }
    for id in &ids {
        let state = wait_for(&f.app, id).await;
        assert_eq!(state.history, vec![RunStatus::Queued, RunStatus::Running, RunStatus::Done]);
        let report = state.report.unwrap();
        assert_eq!(&report.id, id);
        assert_eq!(f.workspace.load_report(id).unwrap().unwrap().utility, report.utility);
    }

    // a finished run is answered from disk
    let (status, body) = send(&f.app, post_json("/api/runs", json!({"dataset": "cohort", "epsilon": 1.0, "seed": 0}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "done");
    let (_, list) = send(&f.app, get("/api/runs")).await;
    assert_eq!(list.as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn duplicate_submissions_share_one_job() {
    let f = fixture(1);
    upload(&f, "cohort", 30, 200).await;
    let req = || post_json("/api/runs", json!({"dataset": "cohort", "epsilon": 3.0, "seed": 4}));
    let (_, a) = send(&f.app, req()).await;
    let (_, b) = send(&f.app, req()).await;
    assert_eq!(a["id"], b["id"]);
    let state = wait_for(&f.app, a["id"].as_str().unwrap()).await;
    assert_eq!(state.history.iter().filter(|s| **s == RunStatus::Running).count(), 1);
    assert_eq!(f.workspace.list_runs().unwrap().len(), 1);
}

#[tokio::test]
async fn bad_run_requests_are_rejected() {
    let f = fixture(1);
    upload(&f, "cohort", 5, 5).await;
    let cases = [
        (json!({"dataset": "cohort", "epsilon": 0.0}), StatusCode::BAD_REQUEST),
        (json!({"dataset": "cohort", "epsilon": 1.0, "lambda": 2.0}), StatusCode::BAD_REQUEST),
        (json!({"dataset": "cohort", "epsilon": 1.0, "mode": "MARKOV"}), StatusCode::BAD_REQUEST),
        (json!({"dataset": "missing", "epsilon": 1.0}), StatusCode::NOT_FOUND),
    ];
    for (body, expected) in cases {
        let (status, resp) = send(&f.app, post_json("/api/runs", body.clone())).await;
        assert_eq!(status, expected, "{body} -> {resp}");
        assert!(resp["error"].is_string());
    }
    let (status, _) = send(&f.app, post_json("/api/runs", json!({"dataset": "cohort", "epsilon": 1.0, "epsilom": 2}))).await;
    assert!(status.is_client_error());
    assert_eq!(send(&f.app, get("/api/runs/0123abcd")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn failing_runs_report_failed() {
    let f = fixture(1);
    upload(&f, "cohort", 5, 5).await;
    let (status, body) = send(
        &f.app,
        post_json("/api/runs", json!({"dataset": "cohort", "epsilon": 1e-300, "semantics": "PER_RECORD"})),
    )
    .await;
    assert_eq!(status, StatusCode::ACCEPTED);
    let state = wait_for(&f.app, body["id"].as_str().unwrap()).await;
    assert_eq!(state.history, vec![RunStatus::Queued, RunStatus::Running, RunStatus::Failed]);
    assert!(state.error.unwrap().contains("per-bit budget"));
    assert!(f.workspace.list_runs().unwrap().is_empty());
}

#[tokio::test]
async fn tradeoff_matches_library_curve() {
    let f = fixture(2);
    upload(&f, "cohort", 25, 40).await;
    let (status, body) =
        send(&f.app, get("/api/tradeoff?dataset=cohort&epsilons=0.5,1,2,4,8&seed=3&semantics=PER_BIT")).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let api: TradeoffCurve = serde_json::from_value(body).unwrap();

    let other = tempfile::tempdir().unwrap();
    let ws = Workspace::open(other.path()).unwrap();
    let (g, p) = f.workspace.dataset_paths("cohort").unwrap();
    let params = RunParams { seed: 3, ..RunParams::new(1.0) };
    let lib = tradeoff_curve(&ws, &params.config_for_paths(g, p), &[0.5, 1.0, 2.0, 4.0, 8.0]).unwrap();
    assert_eq!(api, lib);

    assert_eq!(send(&f.app, get("/api/tradeoff?dataset=cohort&epsilons=2,1")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&f.app, get("/api/tradeoff?dataset=cohort&epsilons=a")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(send(&f.app, get("/api/tradeoff?dataset=nope&epsilons=1")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn decisions_round_trip() {
    let f = fixture(1);
    upload(&f, "cohort", 10, 10).await;
    let (_, body) = send(&f.app, post_json("/api/runs", json!({"dataset": "cohort", "epsilon": 2.0}))).await;
    let id = body["id"].as_str().unwrap().to_owned();
    wait_for(&f.app, &id).await;

    let (status, entry) = send(
        &f.app,
        post_json("/api/decisions", json!({"run_id": id, "decision": "share", "rationale": "AUC near chance"})),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{entry}");
    assert_eq!(entry["seq"], 1);
    let (_, list) = send(&f.app, get("/api/decisions")).await;
    assert_eq!(list[0]["run_id"], id.as_str());
    assert_eq!(list[0]["decision"], "share");
    assert_eq!(list[0]["rationale"], "AUC near chance");

    let blank = json!({"run_id": id, "decision": "hold", "rationale": ""});
    assert_eq!(send(&f.app, post_json("/api/decisions", blank)).await.0, StatusCode::BAD_REQUEST);
    let unknown = json!({"run_id": "feed", "decision": "hold", "rationale": "x"});
    assert_eq!(send(&f.app, post_json("/api/decisions", unknown)).await.0, StatusCode::NOT_FOUND);
    let bad = json!({"run_id": id, "decision": "publish", "rationale": "x"});
    assert!(send(&f.app, post_json("/api/decisions", bad)).await.0.is_client_error());
    assert_eq!(send(&f.app, get("/api/decisions")).await.1.as_array().unwrap().len(), 1);
}
