use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use axum::body::Body;
use axum::http::Request;
use genoshare::pipeline::{RunReport, TradeoffCurve, Workspace, WORKSPACE_ENV};
use genoshare_cli::server::{router, AppState, RunState, RunStatus};
use http_body_util::BodyExt;
use tower::ServiceExt;

const BIN: &str = env!("CARGO_BIN_EXE_genoshare");

fn genoshare(workspace: &Path, args: &[&str]) -> Output {
    Command::new(BIN).env(WORKSPACE_ENV, workspace).args(args).output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Simulated cohort in `<dir>/data` plus a workspace holding it as `cohort`.
fn setup(dir: &Path, snps: &str, samples: &str) -> std::path::PathBuf {
    let ws = dir.join("ws");
    let data = dir.join("data");
    ok(genoshare(&ws, &["simulate", "--snps", snps, "--samples", samples, "--seed", "4", "--out-dir", data.to_str().unwrap()]));
    ok(genoshare(&ws, &[
        "import", "--name", "cohort",
        "--genotypes", data.join("genotypes.tsv").to_str().unwrap(),
        "--panel", data.join("panel.tsv").to_str().unwrap(),
    ]));
    ws
}

/// Reports from different workspaces differ only in input paths and
/// timings.
fn comparable(mut report: RunReport) -> RunReport {
    report.timings_ms = None;
    report.config.dataset = Default::default();
    report.config.panel = Default::default();
    report
}

#[test]
fn stepwise_commands_reproduce_the_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let ws = setup(dir.path(), "60", "25");
    let data = dir.path().join("data");
    let p = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();
    let genotypes = data.join("genotypes.tsv").to_str().unwrap().to_owned();
    let panel = data.join("panel.tsv").to_str().unwrap().to_owned();

    let report: RunReport = serde_json::from_str(&ok(genoshare(&ws, &[
        "run", "--name", "cohort", "--epsilon", "3", "--semantics", "per-record",
        "--mode", "markov", "--seed", "12",
    ])))
    .unwrap();

    ok(genoshare(&ws, &["encode", "--input", &genotypes, "--panel", &panel, "--output", &p("x.tsv")]));
    ok(genoshare(&ws, &[
        "perturb", "--input", &p("x.tsv"), "--panel", &panel, "--epsilon", "3", "--semantics", "per-record",
        "--mode", "markov", "--seed", "12", "--noise-model", &p("nm.json"), "--output", &p("y.tsv"),
    ]));
    ok(genoshare(&ws, &[
        "restore", "--input", &p("y.tsv"), "--noise-model", &p("nm.json"), "--panel", &panel, "--output", &p("s.tsv"),
    ]));
    let run_dir = ws.join("runs").join(&report.id);
    assert_eq!(fs::read(p("s.tsv")).unwrap(), fs::read(run_dir.join("shared.tsv")).unwrap());
    assert_eq!(fs::read(p("nm.json")).unwrap(), fs::read(run_dir.join("noise-model.json")).unwrap());

    let utility: serde_json::Value = serde_json::from_str(&ok(genoshare(&ws, &[
        "evaluate", "--original", &genotypes, "--panel", &panel, "--shared", &p("s.tsv"),
        "--epsilon", "3", "--semantics", "per-record",
    ])))
    .unwrap();
    assert_eq!(utility, serde_json::to_value(&report.utility).unwrap());

    let attack: serde_json::Value = serde_json::from_str(&ok(genoshare(&ws, &[
        "attack", "--original", &genotypes, "--shared", &p("s.tsv"), "--panel", &panel,
        "--trials", "200", "--seed", "12", "--epsilon", "3",
    ])))
    .unwrap();
    assert_eq!(attack, serde_json::to_value(&report.attack).unwrap());
}

#[test]
fn cli_and_api_produce_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cli_ws = setup(&dir.path().join("cli"), "80", "30");
    let api_ws = setup(&dir.path().join("api"), "80", "30");
    let cli_report: RunReport = serde_json::from_str(&ok(genoshare(&cli_ws, &[
        "run", "--name", "cohort", "--epsilon", "1.5", "--seed", "9", "--lambda", "0.25",
    ])))
    .unwrap();

    let rt = tokio::runtime::Runtime::new().unwrap();
    let api_state: RunState = rt.block_on(async {
        let app = router(AppState::new(Workspace::open(&api_ws).unwrap(), 1));
        let body = serde_json::json!({"dataset": "cohort", "epsilon": 1.5, "seed": 9, "lambda": 0.25});
        let submit = Request::post("/api/runs")
            .header("content-type", "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let resp = app.clone().oneshot(submit).await.unwrap();
        let accepted: RunState =
            serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
        loop {
            let req = Request::get(format!("/api/runs/{}", accepted.id)).body(Body::empty()).unwrap();
            let bytes = app.clone().oneshot(req).await.unwrap().into_body().collect().await.unwrap().to_bytes();
            let state: RunState = serde_json::from_slice(&bytes).unwrap();
            if state.status != RunStatus::Queued && state.status != RunStatus::Running {
                break state;
            }
            tokio::time::sleep(std::time::Duration::from_millis(10)).await;
        }
    });
    let api_report = api_state.report.expect("api run finished");
    assert_eq!(comparable(api_report), comparable(cli_report.clone()));

    let files = |ws: &Path| {
        ["shared.tsv", "noise-model.json"].map(|f| fs::read(ws.join("runs").join(&cli_report.id).join(f)).unwrap())
    };
    assert_eq!(files(&cli_ws), files(&api_ws));
}

#[test]
fn tradeoff_is_cached_and_stable() {
    let dir = tempfile::tempdir().unwrap();
    let ws = setup(dir.path(), "40", "20");
    let args = ["tradeoff", "--name", "cohort", "--epsilons", "0.5,2,8", "--seed", "2"];
    let first: TradeoffCurve = serde_json::from_str(&ok(genoshare(&ws, &args))).unwrap();
    assert_eq!(first.points.len(), 3);
    assert!(first.points.iter().all(|p| p.error.is_none()));
    assert_eq!(fs::read_dir(ws.join("runs")).unwrap().count(), 3);
    let second: TradeoffCurve = serde_json::from_str(&ok(genoshare(&ws, &args))).unwrap();
    assert_eq!(first, second);

    let bad = genoshare(&ws, &["tradeoff", "--name", "cohort", "--epsilons", "2,1"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("strictly increasing"));
}

#[test]
fn run_accepts_paths_and_uses_env_workspace() {
    let dir = tempfile::tempdir().unwrap();
    let ws = setup(dir.path(), "20", "10");
    let data = dir.path().join("data");
    let out: RunReport = serde_json::from_str(&ok(genoshare(&ws, &[
        "run", "--dataset", data.join("genotypes.tsv").to_str().unwrap(),
        "--panel", data.join("panel.tsv").to_str().unwrap(), "--epsilon", "1",
    ])))
    .unwrap();
    assert!(ws.join("runs").join(&out.id).join("report.json").is_file());

    let by_name: RunReport = serde_json::from_str(&ok(genoshare(&ws, &["run", "--name", "cohort", "--epsilon", "1"]))).unwrap();
    assert_eq!(by_name.id, out.id);
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let ws = setup(dir.path(), "10", "5");
    let cases: [&[&str]; 4] = [
        &["run", "--name", "missing", "--epsilon", "1"],
        &["run", "--name", "cohort", "--epsilon", "-1"],
        &["run", "--name", "cohort", "--epsilon", "1", "--mode", "markov"],
        &["encode", "--input", "/nonexistent.tsv"],
    ];
    for args in cases {
        let out = genoshare(&ws, args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"), "{args:?}");
    }
}

#[test]
fn verify_dp_reports_and_sets_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(genoshare(dir.path(), &["verify-dp", "--bits", "3", "--p", "0.25", "--stay-probs", "0.75,0.9"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["passes"], true);
    assert!((v["max_ratio"].as_f64().unwrap() - 81.0).abs() < 1e-9);

    let out = ok(genoshare(dir.path(), &["verify-dp", "--bits", "6", "--epsilon", "2", "--semantics", "per-bit"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((v["epsilon_observed"].as_f64().unwrap() - 2.0).abs() < 1e-9);

    let too_big = genoshare(dir.path(), &["verify-dp", "--bits", "13", "--p", "0.1"]);
    assert_eq!(too_big.status.code(), Some(2));
}

#[test]
fn serve_answers_http_and_refuses_taken_ports() {
    let dir = tempfile::tempdir().unwrap();
    let ws = dir.path().join("ws");

    let taken = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let out = genoshare(&ws, &["serve", "--port", &port]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("serving on"), "{}", String::from_utf8_lossy(&out.stderr));
    drop(taken);

    let mut child = Command::new(BIN)
        .env(WORKSPACE_ENV, &ws)
        .args(["serve", "--port", "0"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on http://").expect(&line).to_owned();

    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(stream, "GET /api/datasets HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.ends_with("[]"), "{response}");
}
