use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

fn navbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_navbench"))
        .args(args)
        .current_dir(dir)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = navbench(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn pipeline(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ok(dir, &["generate", "--topology", "hexagon", "--size", "2", "--steps", "6", "--count", "60", "--seed", "3", "--out", "inst.jsonl"]);
    ok(dir, &["run", "--instances", "inst.jsonl", "--agent-kind", "oracle", "--out", "oracle.jsonl"]);
    ok(dir, &["run", "--instances", "inst.jsonl", "--agent-kind", "spatial", "--seed", "5", "--runs", "2", "--out", "spatial.jsonl"]);
    ok(dir, &["analyze", "--instances", "inst.jsonl", "--evals", "oracle.jsonl", "--kind", "score", "--out", "score.csv"]);
    ok(dir, &["analyze", "--instances", "inst.jsonl", "--evals", "spatial.jsonl", "--kind", "hist", "--out", "hist.csv"]);
    ok(dir, &["analyze", "--instances", "inst.jsonl", "--kind", "baseline", "--samples", "5000", "--seed", "1", "--out", "base.csv"]);
    ["inst.jsonl", "oracle.jsonl", "spatial.jsonl", "score.csv", "hist.csv", "base.csv"]
        .iter()
        .flat_map(|n| [n.to_string(), format!("{n}.manifest.json")])
        .map(|n| {
            let bytes = read(dir, &n);
            (n, bytes)
        })
        .collect()
}

#[test]
fn pipeline_is_byte_identical_across_executions() {
    let dir = tempfile::tempdir().unwrap();
    let first = pipeline(dir.path());
    let second = pipeline(dir.path());
    for ((name, a), (_, b)) in first.iter().zip(&second) {
        assert!(a == b, "{name} differs between executions");
    }
    let score = String::from_utf8(read(dir.path(), "score.csv")).unwrap();
    assert_eq!(score, "group,records,runs,mean,std_error,ci95\nhexagon2-local-k6,60,1,1.000000,0.000000,0.000000\n");
    let manifest: Value = serde_json::from_slice(&read(dir.path(), "inst.jsonl.manifest.json")).unwrap();
    assert_eq!(manifest["command"], "generate");
    assert_eq!(manifest["timestamp"], 1_700_000_000u64);
    assert_eq!(manifest["outputs"], json!(["inst.jsonl"]));
}

#[test]
fn run_prints_accuracy_summary() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["generate", "--topology", "ring", "--nodes", "9", "--setting", "global", "--steps", "4", "--count", "20", "--out", "ring.jsonl"]);
    let out = ok(dir.path(), &["run", "--instances", "ring.jsonl", "--agent-kind", "oracle", "--runs", "3", "--out", "e.jsonl"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "oracle: accuracy 1.000 (60/60 records, 3 runs)\n");
    let first = String::from_utf8(read(dir.path(), "ring.jsonl")).unwrap();
    assert!(first.lines().next().unwrap().contains("ring9-global-ring_clockwise-k4-00000"));
}

#[test]
fn zero_count_writes_an_empty_file_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["generate", "--topology", "square", "--count", "0", "--out", "none.jsonl"]);
    assert!(read(dir.path(), "none.jsonl").is_empty());
    assert!(dir.path().join("none.jsonl.manifest.json").exists());
    assert!(stderr(&out).contains("wrote 0 instances"));
}

#[test]
fn generate_reads_suite_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("suite.toml"),
        "count = 5\nseed = 2\n\n[task]\ntask = \"tree_kinship\"\nnodes = 9\nrelation = \"cousin\"\norder = \"tree_bfs\"\n\n[render]\ncot_shots = 1\n",
    )
    .unwrap();
    ok(dir.path(), &["generate", "--config", "suite.toml", "--out", "t.jsonl"]);
    let text = String::from_utf8(read(dir.path(), "t.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 5);
    let first: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["prompt"]["variant"]["cot_shots"], 1);
}

fn assert_fails(dir: &Path, args: &[&str], code: &str, exit: i32) {
    let out = navbench(dir, args);
    let err = stderr(&out);
    assert_eq!(out.status.code(), Some(exit), "{args:?}: {err}");
    assert!(err.starts_with(&format!("error[{code}]: ")), "{args:?}: {err}");
    assert_eq!(err.lines().count(), 1, "{err}");
}

#[test]
fn failures_carry_stable_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_fails(d, &["generate", "--topology", "square"], "E_USAGE", 2);
    assert_fails(d, &["generate", "--topology", "ring", "--out", "x.jsonl"], "E_USAGE", 2);
    assert_fails(d, &["generate", "--topology", "square", "--setting", "global", "--order", "ring-clockwise", "--out", "x.jsonl"], "E_USAGE", 2);
    assert_fails(d, &["generate", "--topology", "square", "--steps", "1", "--out", "x.jsonl"], "E_USAGE", 2);
    assert_fails(d, &["generate", "--topology", "square", "--steps", "2", "--out", "x.jsonl"], "E_GENERATION", 1);
    assert_fails(d, &["generate", "--topology", "square", "--vocab", "missing.txt", "--out", "x.jsonl"], "E_IO", 1);
    std::fs::write(d.join("tiny.txt"), "ant\nbee\n").unwrap();
    assert_fails(d, &["generate", "--topology", "square", "--vocab", "tiny.txt", "--out", "x.jsonl"], "E_VOCABULARY", 1);
    assert_fails(d, &["run", "--instances", "missing.jsonl", "--agent-kind", "oracle", "--out", "e.jsonl"], "E_IO", 1);
    std::fs::write(d.join("bad.jsonl"), "{\"schema\": 1}\n").unwrap();
    assert_fails(d, &["run", "--instances", "bad.jsonl", "--agent-kind", "oracle", "--out", "e.jsonl"], "E_FORMAT", 1);
    ok(d, &["generate", "--topology", "square", "--count", "3", "--out", "i.jsonl"]);
    std::fs::write(d.join("agent.toml"), "kind = \"telepathy\"\n").unwrap();
    assert_fails(d, &["run", "--instances", "i.jsonl", "--agent", "agent.toml", "--out", "e.jsonl"], "E_CONFIG", 1);
    assert_fails(d, &["run", "--instances", "i.jsonl", "--agent-kind", "spatial", "--strength", "2", "--out", "e.jsonl"], "E_CONFIG", 1);
    assert_fails(d, &["analyze", "--instances", "i.jsonl", "--kind", "hist"], "E_USAGE", 2);
    ok(d, &["run", "--instances", "i.jsonl", "--agent-kind", "oracle", "--out", "e.jsonl"]);
    assert_fails(d, &["analyze", "--instances", "i.jsonl", "--evals", "e.jsonl", "--kind", "regression"], "E_ANALYSIS", 1);
    let help = navbench(d, &["--help"]);
    assert!(help.status.success() && String::from_utf8_lossy(&help.stdout).contains("generate"));
}

#[test]
fn empty_histograms_warn() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--topology", "triangle", "--size", "2", "--steps", "3", "--count", "4", "--out", "i.jsonl"]);
    ok(d, &["run", "--instances", "i.jsonl", "--agent-kind", "oracle", "--out", "e.jsonl"]);
    let out = ok(d, &["analyze", "--instances", "i.jsonl", "--evals", "e.jsonl", "--kind", "hist"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "distance,count,frequency\n");
    assert!(stderr(&out).starts_with("warning: "));
}

async fn fake_chat(Json(body): Json<Value>) -> Json<Value> {
    let user = body["messages"][1]["content"].as_str().unwrap_or_default();
    let text = if user.contains("What do you find?") { "I am lost.\nAnswer: zebra" } else { "Answer: 3, 3" };
    Json(json!({"choices": [{"message": {"content": text}}]}))
}

#[test]
fn remote_agent_runs_against_a_chat_endpoint() {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let listener = runtime.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    runtime.spawn(async move {
        axum::serve(listener, Router::new().route("/chat", post(fake_chat))).await.unwrap();
    });
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["generate", "--topology", "square", "--count", "6", "--out", "loc.jsonl"]);
    std::fs::write(
        d.join("agent.json"),
        json!({"kind": "remote_chat", "endpoint": format!("http://{addr}/chat"), "model": "fake", "parallelism": 2}).to_string(),
    )
    .unwrap();
    let out = ok(d, &["run", "--instances", "loc.jsonl", "--agent", "agent.json", "--runs", "2", "--out", "e.jsonl"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "remote_chat: accuracy 0.000 (0/12 records, 2 runs)\n");
    let records: Vec<Value> =
        String::from_utf8(read(d, "e.jsonl")).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert!(records.iter().all(|r| r["extracted"] == json!(["zebra"])));

    std::fs::write(
        d.join("down.json"),
        json!({"kind": "remote_chat", "endpoint": "http://127.0.0.1:9/none", "model": "m", "max_retries": 0}).to_string(),
    )
    .unwrap();
    let out = ok(d, &["run", "--instances", "loc.jsonl", "--agent", "down.json", "--out", "f.jsonl"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "remote_chat: accuracy 0.000 (0/6 records, 1 runs, 6 failed calls)\n");
}

struct Server {
    child: Child,
    base: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start_server(dir: &Path, extra: &[&str]) -> Server {
    let mut args = vec!["serve", "--pool", "pool.json", "--log", "lab.jsonl", "--port", "0"];
    args.extend_from_slice(extra);
    let mut child = Command::new(env!("CARGO_BIN_EXE_navbench"))
        .args(&args)
        .current_dir(dir)
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let base = line.trim().strip_prefix("listening on ").unwrap_or_else(|| panic!("unexpected: {line}")).to_string();
    Server { child, base }
}

fn http() -> ureq::Agent {
    ureq::Agent::config_builder().http_status_as_error(false).build().into()
}

fn call(agent: &ureq::Agent, method: &str, url: &str, body: Option<Value>) -> (u16, String) {
    let mut resp = match (method, body) {
        ("POST", Some(b)) => agent.post(url).send_json(b).unwrap(),
        ("POST", None) => agent.post(url).send_empty().unwrap(),
        _ => agent.get(url).call().unwrap(),
    };
    (resp.status().as_u16(), resp.body_mut().read_to_string().unwrap())
}

#[test]
fn survey_api_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = ok(d, &["pool", "--seed", "1", "--out", "pool.json"]);
    assert!(stderr(&out).contains("wrote 84 questions"));
    let pool: Value = serde_json::from_slice(&read(d, "pool.json")).unwrap();
    let truth = |id: &str| -> String {
        let q = pool["questions"].as_array().unwrap().iter().find(|q| q["id"] == id).unwrap();
        q["ground_truth"][0].as_str().unwrap().to_string()
    };
    std::fs::create_dir(d.join("ui")).unwrap();
    std::fs::write(d.join("ui/index.html"), "<html>survey</html>").unwrap();

    let server = start_server(d, &["--static", "ui"]);
    let agent = http();
    let (status, body) = call(&agent, "GET", &format!("{}/index.html", server.base), None);
    assert_eq!((status, body.as_str()), (200, "<html>survey</html>"));

    let (status, body) = call(&agent, "POST", &format!("{}/sessions", server.base), None);
    assert_eq!(status, 201);
    let plan: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(plan["total"], 14);
    assert_eq!(plan["time_budget_secs"], 1800);
    assert!(!body.contains("attention"), "the public plan hides check flags");
    let sid = plan["session_id"].as_str().unwrap().to_string();
    let ids: Vec<String> = plan["question_ids"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().into()).collect();

    let (status, _) = call(&agent, "POST", &format!("{}/sessions/{sid}/answers", server.base), Some(json!({"question_id": ids[1], "answer": "x"})));
    assert_eq!(status, 409);
    let (status, body) = call(&agent, "GET", &format!("{}/sessions/nope/next", server.base), None);
    assert_eq!(status, 404);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["error"], "E_UNKNOWN_SESSION");

    for (i, id) in ids.iter().enumerate() {
        let (status, body) = call(&agent, "GET", &format!("{}/sessions/{sid}/next", server.base), None);
        assert_eq!(status, 200);
        let next: Value = serde_json::from_str(&body).unwrap();
        assert_eq!((next["complete"].as_bool(), next["question"]["question_id"].as_str()), (Some(false), Some(id.as_str())));
        assert!(next["question"].get("attention").is_none());
        let answer = if i % 2 == 0 { format!("The {}", truth(id)) } else { "no idea".into() };
        let answer = if id.starts_with("check-") { truth(id) } else { answer };
        let (status, body) = call(
            &agent,
            "POST",
            &format!("{}/sessions/{sid}/answers", server.base),
            Some(json!({"question_id": id, "answer": answer, "elapsed_ms": 1500})),
        );
        assert_eq!(status, 201, "{body}");
        assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["answered"], i + 1);
    }
    let (_, body) = call(&agent, "GET", &format!("{}/sessions/{sid}/next", server.base), None);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["complete"], true);
    let (status, _) = call(&agent, "POST", &format!("{}/sessions/{sid}/answers", server.base), Some(json!({"question_id": ids[13], "answer": "x"})));
    assert_eq!(status, 409);

    let (status, csv) = call(&agent, "GET", &format!("{}/admin/results", server.base), None);
    assert_eq!(status, 200);
    assert!(csv.starts_with(",Square,Ring,Hexagon,Triangle,Aggregated\nHuman,"), "{csv}");
    let (_, json_body) = call(&agent, "GET", &format!("{}/admin/results?criterion=square_check_must_pass&format=json", server.base), None);
    let scores: Value = serde_json::from_str(&json_body).unwrap();
    assert_eq!(scores["aggregate"]["total"], 10);
    let expected_correct = ids.iter().enumerate().filter(|(i, id)| !id.starts_with("check-") && i % 2 == 0).count();
    assert_eq!(scores["aggregate"]["correct"], expected_correct);
    let (status, _) = call(&agent, "GET", &format!("{}/admin/results?criterion=vibes", server.base), None);
    assert_eq!(status, 400);
    drop(server);

    let restarted = start_server(d, &[]);
    let (_, again) = call(&agent, "GET", &format!("{}/admin/results", restarted.base), None);
    assert_eq!(again, csv, "results survive a restart");
    let log = String::from_utf8(read(d, "lab.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 15);
}

#[test]
fn busy_port_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["pool", "--out", "pool.json"]);
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    assert_fails(d, &["serve", "--pool", "pool.json", "--log", "l.jsonl", "--port", &port], "E_BIND", 1);
    assert_fails(d, &["serve", "--pool", "absent.json"], "E_IO", 1);
}
