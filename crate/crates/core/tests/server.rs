mod common;

use std::io::{BufRead, BufReader};
use std::process::Stdio;

use common::*;
use reqwest::blocking::Client;
use serde_json::Value;

#[test]
fn service_matches_the_cli() {
    let msg = check_service(150, 41).unwrap();
    assert!(msg.starts_with("150 scores"), "{msg}");
}

#[test]
fn lists_loaded_models() {
    let empty = tempfile::tempdir().unwrap();
    let server = start_server(empty.path());
    let list: Value = Client::new().get(format!("{}/v1/models", server.base)).send().unwrap().json().unwrap();
    assert_eq!(list, serde_json::json!([]));

    let fx = model_fixture(42);
    let art = std::fs::read_to_string(fx.dir.path().join("spoof-knn.json")).unwrap();
    let mut future: Value = serde_json::from_str(&art).unwrap();
    future["version"] = (future["version"].as_u64().unwrap() + 1).into();
    future["model_id"] = "from-the-future".into();
    std::fs::write(fx.dir.path().join("from-the-future.json"), future.to_string()).unwrap();

    let server = start_server(fx.dir.path());
    let list: Vec<Value> = Client::new().get(format!("{}/v1/models", server.base)).send().unwrap().json().unwrap();
    let ids: Vec<&str> = list.iter().map(|m| m["model_id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["spoof-knn", "spoof-rockad", "user2-knn", "verify-quant"]);
    let verify = &list[3];
    assert_eq!(verify["direction"], "reject_below");
    assert_eq!(verify["kind"], "quant_et");
    assert_eq!(list[0]["direction"], "reject_above");
}

#[test]
fn repeated_requests_score_identically() {
    let fx = model_fixture(43);
    let server = start_server(fx.dir.path());
    let client = Client::new();
    let trace = &fx.corpus.traces[1];
    let mut seen = Vec::new();
    for style in [0, 0, 1, 2] {
        let body: Value = client
            .post(format!("{}/v1/score", server.base))
            .body(request_body("spoof-rockad", trace, None, style))
            .send()
            .unwrap()
            .json()
            .unwrap();
        assert!(body["latency_ms"].as_f64().unwrap() >= 0.0);
        seen.push(body["score"].as_f64().unwrap().to_bits());
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn rejects_unknown_request_fields() {
    let fx = model_fixture(44);
    let server = start_server(fx.dir.path());
    let mut body: Value = serde_json::from_str(&request_body("spoof-knn", &fx.corpus.traces[0], None, 0)).unwrap();
    body["extra"] = 1.into();
    let r = Client::new().post(format!("{}/v1/score", server.base)).body(body.to_string()).send().unwrap();
    assert_eq!(r.status().as_u16(), 400);
    let err: Value = r.json().unwrap();
    assert!(err["error"].as_str().unwrap().contains("extra"));
}

#[test]
fn serve_subcommand_answers() {
    let fx = model_fixture(45);
    let mut child = bin()
        .args(["serve", "--models", fx.dir.path().to_str().unwrap(), "--addr", "127.0.0.1:0"])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("listen line").to_string();
    let list: Vec<Value> = Client::new().get(format!("http://{addr}/v1/models")).send().unwrap().json().unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(list.len(), 4);
}
