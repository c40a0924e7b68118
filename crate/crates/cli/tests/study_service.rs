//! Drives the study API over real HTTP the way the browser client would.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use medsr_cli::study::{self, StudyPool, StudyState, VoteRecord, METHOD_A_FILE, METHOD_B_FILE, ORIGINAL_FILE, SESSION_PAIRS};
use medsr_core::io::save_slice_png;
use medsr_core::Tensor;
use reqwest::{Client, StatusCode};
use serde_json::{json, Value};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

const METHOD_A: &str = "zz_cnn_hidden";
const METHOD_B: &str = "zz_lanczos_hidden";

/// `x2` with 120 pairs and `x4` with 30, each image a distinct flat gray.
fn write_material(root: &Path) {
    for (factor, n) in [(2u32, 120usize), (4, 30)] {
        let dir = root.join(format!("x{factor}"));
        fs::create_dir_all(&dir).unwrap();
        fs::write(dir.join("methods.json"), json!({"method_a": METHOD_A, "method_b": METHOD_B}).to_string()).unwrap();
        for i in 0..n {
            let pair = dir.join(format!("pair_{i:03}"));
            fs::create_dir_all(&pair).unwrap();
            let flat = |v: f32| Tensor::<f32>::from_fn(&[8, 8], |_| v);
            save_slice_png(&flat(0.5), &pair.join(ORIGINAL_FILE), 8).unwrap();
            save_slice_png(&flat(i as f32 / 255.0), &pair.join(METHOD_A_FILE), 8).unwrap();
            save_slice_png(&flat((128 + i) as f32 / 255.0), &pair.join(METHOD_B_FILE), 8).unwrap();
        }
    }
}

struct Server {
    base: String,
    stop: Option<oneshot::Sender<()>>,
    handle: tokio::task::JoinHandle<()>,
}

impl Server {
    async fn start(results: &Path, votes: &Path, seed: u64) -> Server {
        let pool = StudyPool::scan(results).unwrap();
        let state = Arc::new(StudyState::new(pool, votes.to_path_buf(), seed).unwrap());
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = oneshot::channel::<()>();
        let handle = tokio::spawn(async move {
            study::serve(listener, state, async {
                let _ = rx.await;
            })
            .await
            .unwrap();
        });
        Server {
            base,
            stop: Some(tx),
            handle,
        }
    }

    async fn shutdown(mut self) {
        self.stop.take().unwrap().send(()).unwrap();
        self.handle.await.unwrap();
    }
}

fn assert_blind(body: &str) {
    assert!(!body.contains(METHOD_A) && !body.contains(METHOD_B), "method name leaked: {body}");
    assert!(!body.contains("method_a") && !body.contains("method_b"), "file role leaked: {body}");
}

async fn session(client: &Client, base: &str, annotator: &str, factor: u32) -> Value {
    let resp = client
        .get(format!("{base}/api/session"))
        .query(&[("annotator", annotator), ("factor", &factor.to_string())])
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let text = resp.text().await.unwrap();
    assert_blind(&text);
    serde_json::from_str(&text).unwrap()
}

async fn image(client: &Client, base: &str, url: &str, annotator: &str, factor: u32) -> Vec<u8> {
    let resp = client
        .get(format!("{base}{url}"))
        .query(&[("annotator", annotator), ("factor", &factor.to_string())])
        .send()
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK, "{url}");
    assert_eq!(resp.headers()["content-type"], "image/png");
    resp.bytes().await.unwrap().to_vec()
}

async fn vote(client: &Client, base: &str, body: Value) -> (StatusCode, String) {
    let resp = client.post(format!("{base}/api/vote")).json(&body).send().await.unwrap();
    (resp.status(), resp.text().await.unwrap())
}

fn read_log(path: &Path) -> Vec<VoteRecord> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("every line is one complete record"))
        .collect()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn scripted_annotator_completes_a_blinded_session() {
    let dir = tempfile::tempdir().unwrap();
    let (results, votes) = (dir.path().join("results"), dir.path().join("votes.jsonl"));
    write_material(&results);
    let server = Server::start(&results, &votes, 11).await;
    let client = Client::new();
    let base = server.base.clone();

    let s = session(&client, &base, "reader1", 2).await;
    assert_eq!(s["total"], SESSION_PAIRS);
    assert_eq!(s["next_index"], 0);
    let pairs = s["pairs"].as_array().unwrap().clone();
    assert_eq!(pairs.len(), SESSION_PAIRS);

    // Which method each click should be attributed to, worked out from the
    // pixels the annotator was actually shown.
    let mut expected = HashMap::new();
    for (k, p) in pairs.iter().enumerate() {
        let id = p["pair_id"].as_str().unwrap();
        let pair_dir = results.join("x2").join(id);
        let original = image(&client, &base, p["original"].as_str().unwrap(), "reader1", 2).await;
        let left = image(&client, &base, p["left"].as_str().unwrap(), "reader1", 2).await;
        let right = image(&client, &base, p["right"].as_str().unwrap(), "reader1", 2).await;
        assert_eq!(original, fs::read(pair_dir.join(ORIGINAL_FILE)).unwrap());
        let a = fs::read(pair_dir.join(METHOD_A_FILE)).unwrap();
        let b = fs::read(pair_dir.join(METHOD_B_FILE)).unwrap();
        assert!((left == a && right == b) || (left == b && right == a), "{id}");
        let side = if k % 3 == 0 { "right" } else { "left" };
        let chosen = if (side == "left") == (left == a) { METHOD_A } else { METHOD_B };
        expected.insert(id.to_string(), (side, chosen));

        let (status, body) = vote(&client, &base, json!({"annotator": "reader1", "factor": 2, "pair_id": id, "side": side})).await;
        assert_eq!(status, StatusCode::OK, "{body}");
        assert_blind(&body);
        let ack: Value = serde_json::from_str(&body).unwrap();
        assert_eq!(ack["completed"], k + 1);
    }

    let done = session(&client, &base, "reader1", 2).await;
    assert_eq!(done["completed"], SESSION_PAIRS);
    assert_eq!(done["next_index"], SESSION_PAIRS);

    let log = read_log(&votes);
    assert_eq!(log.len(), SESSION_PAIRS);
    for r in &log {
        let (side, method) = expected[&r.pair_id];
        assert_eq!((r.annotator_id.as_str(), r.factor), ("reader1", 2));
        assert_eq!(r.chosen_side.to_string(), side);
        assert_eq!(r.chosen_method, method, "{}", r.pair_id);
        assert!(r.timestamp > 1_600_000_000_000);
    }
    let raw_line: Value = serde_json::from_str(fs::read_to_string(&votes).unwrap().lines().next().unwrap()).unwrap();
    let mut keys: Vec<_> = raw_line.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(keys, ["annotator_id", "chosen_method", "chosen_side", "factor", "pair_id", "timestamp"]);

    // Changing one answer: the log keeps both, the report counts the last.
    let first = pairs[0]["pair_id"].as_str().unwrap();
    let (old_side, old_method) = expected[first];
    let new_side = if old_side == "left" { "right" } else { "left" };
    let (status, _) = vote(&client, &base, json!({"annotator": "reader1", "factor": 2, "pair_id": first, "side": new_side})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(read_log(&votes).len(), SESSION_PAIRS + 1);

    let report: Value = client.get(format!("{base}/api/report")).send().await.unwrap().json().await.unwrap();
    assert_eq!(report["votes"], SESSION_PAIRS);
    let t = &report["factors"]["2"];
    let count = |m: &str| t["annotators"]["reader1"][m].as_u64().unwrap_or(0);
    let old_count = expected.values().filter(|(_, m)| *m == old_method).count() as u64 - 1;
    assert_eq!(count(old_method), old_count);
    assert_eq!(count(METHOD_A) + count(METHOD_B), SESSION_PAIRS as u64);
    let pct: f64 = t["overall_percent"].as_object().unwrap().values().map(|v| v.as_f64().unwrap()).sum();
    assert!((pct - 100.0).abs() < 1e-9, "{pct}");

    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_are_deterministic_and_per_annotator() {
    let dir = tempfile::tempdir().unwrap();
    let (results, votes) = (dir.path().join("results"), dir.path().join("votes.jsonl"));
    write_material(&results);
    let server = Server::start(&results, &votes, 5).await;
    let client = Client::new();
    let base = server.base.clone();

    let ids = |s: &Value| -> Vec<String> {
        s["pairs"].as_array().unwrap().iter().map(|p| p["pair_id"].as_str().unwrap().to_string()).collect()
    };
    let a1 = session(&client, &base, "reader1", 2).await;
    let a2 = session(&client, &base, "reader1", 2).await;
    let b = session(&client, &base, "reader2", 2).await;
    assert_eq!(ids(&a1), ids(&a2));
    assert_ne!(ids(&a1), ids(&b));

    let mut left_bytes = Vec::new();
    for p in a1["pairs"].as_array().unwrap().iter().take(10) {
        left_bytes.push(image(&client, &base, p["left"].as_str().unwrap(), "reader1", 2).await);
    }
    server.shutdown().await;

    // A restart with the same seed shows the same pairs on the same sides.
    let server = Server::start(&results, &votes, 5).await;
    let base = server.base.clone();
    let again = session(&client, &base, "reader1", 2).await;
    assert_eq!(ids(&a1), ids(&again));
    for (p, before) in again["pairs"].as_array().unwrap().iter().take(10).zip(&left_bytes) {
        assert_eq!(&image(&client, &base, p["left"].as_str().unwrap(), "reader1", 2).await, before);
    }

    // The x4 pool is smaller than a full session.
    let small = session(&client, &base, "reader1", 4).await;
    assert_eq!(small["total"], 30);
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn bad_requests_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (results, votes) = (dir.path().join("results"), dir.path().join("votes.jsonl"));
    write_material(&results);
    let server = Server::start(&results, &votes, 0).await;
    let client = Client::new();
    let base = server.base.clone();
    let s = session(&client, &base, "reader1", 2).await;
    let in_session = s["pairs"][0]["pair_id"].as_str().unwrap().to_string();
    let all: Vec<String> = (0..120).map(|i| format!("pair_{i:03}")).collect();
    let listed: Vec<&str> = s["pairs"].as_array().unwrap().iter().map(|p| p["pair_id"].as_str().unwrap()).collect();
    let outside = all.iter().find(|id| !listed.contains(&id.as_str())).unwrap().clone();

    let raw = |body: &'static str| {
        client
            .post(format!("{base}/api/vote"))
            .header("content-type", "application/json")
            .body(body)
            .send()
    };
    assert_eq!(raw("{not json").await.unwrap().status(), StatusCode::BAD_REQUEST);
    assert_eq!(raw("").await.unwrap().status(), StatusCode::BAD_REQUEST);
    assert_eq!(raw(r#"{"annotator":"r","factor":2}"#).await.unwrap().status(), StatusCode::BAD_REQUEST);
    let cases = [
        (json!({"annotator": "reader1", "factor": 2, "pair_id": in_session, "side": "middle"}), StatusCode::BAD_REQUEST),
        (json!({"annotator": "reader1", "factor": "two", "pair_id": in_session, "side": "left"}), StatusCode::BAD_REQUEST),
        (json!({"annotator": "  ", "factor": 2, "pair_id": in_session, "side": "left"}), StatusCode::BAD_REQUEST),
        (json!({"annotator": "reader1", "factor": 2, "pair_id": in_session, "side": "left", "method": "x"}), StatusCode::BAD_REQUEST),
        (json!({"annotator": "reader1", "factor": 2, "pair_id": "no_such_pair", "side": "left"}), StatusCode::NOT_FOUND),
        (json!({"annotator": "reader1", "factor": 2, "pair_id": outside, "side": "left"}), StatusCode::NOT_FOUND),
        (json!({"annotator": "reader1", "factor": 3, "pair_id": in_session, "side": "left"}), StatusCode::NOT_FOUND),
    ];
    for (body, want) in cases {
        let (status, text) = vote(&client, &base, body.clone()).await;
        assert_eq!(status, want, "{body} -> {text}");
    }
    assert!(!votes.exists() || fs::read_to_string(&votes).unwrap().is_empty(), "rejected votes must not be logged");

    let get = |path: String| client.get(format!("{base}{path}")).send();
    assert_eq!(get("/api/session?factor=2".into()).await.unwrap().status(), StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/session?annotator=r&factor=x".into()).await.unwrap().status(), StatusCode::BAD_REQUEST);
    assert_eq!(get("/api/session?annotator=r&factor=8".into()).await.unwrap().status(), StatusCode::NOT_FOUND);
    let img = |id: &str, role: &str| format!("/api/image/{id}/{role}?annotator=reader1&factor=2");
    assert_eq!(get(img(&in_session, "method_a")).await.unwrap().status(), StatusCode::BAD_REQUEST);
    assert_eq!(get(img(&outside, "left")).await.unwrap().status(), StatusCode::NOT_FOUND);
    assert_eq!(get(img("nope", "left")).await.unwrap().status(), StatusCode::NOT_FOUND);
    assert_eq!(get(format!("/api/image/{in_session}/left")).await.unwrap().status(), StatusCode::BAD_REQUEST);
    server.shutdown().await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn concurrent_votes_write_whole_lines_and_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let (results, votes) = (dir.path().join("results"), dir.path().join("votes.jsonl"));
    write_material(&results);
    let server = Server::start(&results, &votes, 3).await;
    let client = Client::new();
    let base = server.base.clone();

    let mut tasks = Vec::new();
    for a in 0..8 {
        let (client, base) = (client.clone(), base.clone());
        tasks.push(tokio::spawn(async move {
            let annotator = format!("reader{a}");
            let s = session(&client, &base, &annotator, 4).await;
            for p in s["pairs"].as_array().unwrap() {
                let body = json!({"annotator": annotator, "factor": 4, "pair_id": p["pair_id"], "side": "left"});
                assert_eq!(vote(&client, &base, body).await.0, StatusCode::OK);
            }
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
    assert_eq!(read_log(&votes).len(), 8 * 30);
    server.shutdown().await;

    let server = Server::start(&results, &votes, 3).await;
    let s = session(&client, &server.base, "reader5", 4).await;
    assert_eq!(s["completed"], 30);
    let report: Value = client.get(format!("{}/api/report", server.base)).send().await.unwrap().json().await.unwrap();
    assert_eq!(report["votes"], 240);
    server.shutdown().await;
}
