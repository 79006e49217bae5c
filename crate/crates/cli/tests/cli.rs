use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::thread::sleep;
use std::time::{Duration, Instant};

use urgency::model::load_ensemble;

const FAST: &str = "[embedding]\nepochs = 2\ndim = 10\n[model]\nregularization_grid = [1.0]\n";

fn urgency(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_urgency"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = urgency(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn workspace(topic: &str, seed: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("fast.toml"), FAST).unwrap();
    ok(
        dir.path(),
        &[
            "synth-corpus", "--seed", seed, "--out-dir", "data", "--unlabeled", "400", "--labeled", "160",
            "--topic", topic, "--wiki-dim", "10",
        ],
    );
    dir
}

fn lines(s: &str) -> Vec<serde_json::Value> {
    s.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn predict_agrees_with_the_service_scorer() {
    let dir = workspace("flood", "3");
    let d = dir.path();
    ok(
        d,
        &[
            "train", "--config", "fast.toml", "--labeled", "data/labeled.jsonl", "--corpus", "data/unlabeled.jsonl",
            "--wiki", "data/wiki.vec", "--features", "manual,local,wiki", "--out-dir", "model",
        ],
    );
    assert!(d.join("model/validation.json").exists());
    let texts = ["need food and water now", "calm day at the river", "12 people stranded", ""];
    let mut args = vec!["predict", "--model", "model/model.json"];
    for t in texts {
        args.extend(["--text", t]);
    }
    let rows = lines(&ok(d, &args));

    let model = load_ensemble(d.join("model/model.json")).unwrap();
    let texts: Vec<String> = texts.iter().map(|t| t.to_string()).collect();
    let service = urgency_service::score_texts(&model, &texts);
    assert_eq!(rows.len(), service.len());
    for (i, (row, want)) in rows.iter().zip(&service).enumerate() {
        assert_eq!(row["id"], (i + 1).to_string());
        assert_eq!(row["score"].as_f64().unwrap().to_bits(), want.score.to_bits());
        assert_eq!(row["verdict"], serde_json::to_value(want.verdict).unwrap());
    }
}

#[test]
fn bad_config_fails_before_reading_data() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[embedding]\ndim = 0\n").unwrap();
    let out = urgency(d, &["train", "--config", "bad.toml", "--labeled", "missing.jsonl", "--out-dir", "m"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("embedding.dim"), "{err}");
    assert!(!d.join("m").exists());

    std::fs::write(d.join("typo.toml"), "[embeding]\ndim = 5\n").unwrap();
    let out = urgency(d, &["config", "--config", "typo.toml"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn config_prints_resolved_values() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["config", "--seed", "77"]);
    let table: toml::Table = text.parse().unwrap();
    assert_eq!(table["seed"].as_integer(), Some(77));
}

#[test]
fn preprocess_writes_tokens_and_keeps_labels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("in.jsonl"),
        "{\"id\":\"a\",\"text\":\"RT @x: HELP!! 3 trapped http://t.co/z\",\"label\":1}\n{\"id\":\"b\",\"text\":\"nice\"}\n",
    )
    .unwrap();
    let rows = lines(&ok(d, &["preprocess", "--input", "in.jsonl"]));
    assert_eq!(rows[0]["tokens"], serde_json::json!(["help", "3", "trapped"]));
    assert_eq!(rows[0]["label"], 1);
    assert_eq!(rows[1]["id"], "b");
    assert!(rows[1].get("label").is_none_or(|l| l.is_null()));
}

#[test]
fn transfer_train_mixes_source_and_target() {
    let source = workspace("flood", "4");
    let target = workspace("earthquake", "5");
    let d = source.path();
    ok(d, &["train-embeddings", "--config", "fast.toml", "--corpus", "data/unlabeled.jsonl", "--output", "local.uemb"]);
    let target_file = target.path().join("data/labeled.jsonl");
    let stdout = ok(
        d,
        &[
            "transfer-train", "--config", "fast.toml", "--target", target_file.to_str().unwrap(),
            "--source-labeled", "data/labeled.jsonl", "--local", "local.uemb", "--out-dir", "transfer",
        ],
    );
    // default up-sampling is 6
    assert!(stdout.contains("trained on 1120 rows"), "{stdout}");
    let model = load_ensemble(d.join("transfer/model.json")).unwrap();
    assert_eq!(model.weights().len(), 2);
    assert!(model.weights().iter().all(|&w| (w - 0.5).abs() < 1e-12));
}

#[test]
fn serve_answers_health_over_tcp() {
    let dir = tempfile::tempdir().unwrap();
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_urgency"))
        .current_dir(dir.path())
        .args(["active", "serve", "--addr", &addr, "--sessions-dir", "sessions"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let body = loop {
        if let Ok(mut s) = TcpStream::connect(&addr) {
            s.write_all(b"GET /v1/health HTTP/1.1\r\nHost: x\r\nConnection: close\r\n\r\n").unwrap();
            let mut buf = String::new();
            s.read_to_string(&mut buf).unwrap();
            break buf;
        }
        assert!(Instant::now() < deadline, "server did not start");
        sleep(Duration::from_millis(50));
    };
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(body.starts_with("HTTP/1.1 200"), "{body}");
    assert!(body.contains("\"model_loaded\":false"), "{body}");
    assert!(body.contains("\"sessions_persisted\":true"), "{body}");
}
