//! End-to-end runs of the `sgcodec` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sgcodec::{KnowledgeBase, SceneGraph};

fn sgcodec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sgcodec"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sgcodec(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn categories(dir: &Path, profile: &str, seed: &str, out: &str) {
    ok(dir, &["synth", "categories", "--profile", profile, "--n", "60", "--seed", seed, "--id-prefix", out, "--out", out]);
}

#[test]
fn compress_recover_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    categories(d, "human=0.7,animal=0.2,transport=0.1", "4", "train.json");
    ok(d, &["kb", "build", "--in", "train.json", "--out", "kb.json"]);
    ok(d, &["synth", "shapes", "--n", "3", "--seed", "9", "--out", "shapes.json"]);

    let doc: Value = serde_json::from_slice(&std::fs::read(d.join("train.json")).unwrap()).unwrap();
    let corpus = sgcodec::scene_graph::parse_annotations(&std::fs::read(d.join("train.json")).unwrap()).unwrap();
    let id = doc["images"][0]["id"].as_str().unwrap();
    let graph = corpus.graphs.iter().find(|g| g.image_id == id).unwrap();
    std::fs::write(d.join("g.json"), serde_json::to_vec(graph).unwrap()).unwrap();

    let summary = ok(
        d,
        &["compress", "--kb", "kb.json", "--in", "g.json", "--out", "g.sgsc", "--theta-r", "0.5", "--theta-t", "0.5"],
    );
    let summary: Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["config"]["theta_r"], 0.5);
    ok(d, &["recover", "--kb", "kb.json", "--in", "g.sgsc", "--out", "back.json", "--image-id", id]);
    let back: SceneGraph = serde_json::from_slice(&std::fs::read(d.join("back.json")).unwrap()).unwrap();
    assert_eq!(&back, graph);

    // Shapes carry layouts; select one graph out of the annotation document.
    ok(d, &["kb", "build", "--in", "shapes.json", "--out", "skb.json"]);
    ok(d, &["compress", "--kb", "skb.json", "--in", "shapes.json", "--image-id", "shape-0001", "--out", "s.sgsc"]);
    ok(d, &["recover", "--kb", "skb.json", "--in", "s.sgsc", "--out", "s.json", "--image-id", "shape-0001"]);
    let shapes = sgcodec::scene_graph::parse_annotations(&std::fs::read(d.join("shapes.json")).unwrap()).unwrap();
    let back: SceneGraph = serde_json::from_slice(&std::fs::read(d.join("s.json")).unwrap()).unwrap();
    assert_eq!(back, shapes.graphs[1]);
}

#[test]
fn merge_equals_build_on_concatenation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    categories(d, "human=0.7,animal=0.2,transport=0.1", "1", "a.json");
    categories(d, "transport=0.7,animal=0.2,human=0.1", "2", "b.json");
    ok(d, &["kb", "build", "--in", "a.json", "--out", "ka.json"]);
    ok(d, &["kb", "build", "--in", "b.json", "--out", "kb.json"]);
    ok(d, &["kb", "merge", "ka.json", "kb.json", "--out", "s.json"]);
    ok(d, &["kb", "build", "--in", "a.json", "b.json", "--out", "c.json"]);
    let merged = std::fs::read(d.join("s.json")).unwrap();
    assert_eq!(merged, std::fs::read(d.join("c.json")).unwrap());
    KnowledgeBase::load(&merged).unwrap().validate().unwrap();
}

#[test]
fn link_throughput_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let profile = serde_json::to_string(&sgcodec::LinkProfile::nr_5mhz_qpsk()).unwrap();
    std::fs::write(d.join("nr5mhz.json"), profile).unwrap();
    let out = ok(d, &["link", "throughput", "--profile", "nr5mhz.json", "--snr", "0", "--payload-bits", "2400"]);
    assert_eq!(out.trim(), "1388.9");
    let out = sgcodec(d, &["link", "throughput", "--snr", "-3", "--payload-bits", "2400"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn multi_round_roundtrip_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let samples = ok(d, &["synth", "sensors", "--minutes", "120", "--seed", "5"]);
    let all: Vec<Vec<Value>> = serde_json::from_str(&samples).unwrap();
    std::fs::write(d.join("train.json"), serde_json::to_vec(&all[..100]).unwrap()).unwrap();
    std::fs::write(d.join("msg.json"), serde_json::to_vec(&all[110]).unwrap()).unwrap();
    std::fs::write(d.join("held.json"), serde_json::to_vec(&all[100..105]).unwrap()).unwrap();
    ok(d, &["kb", "build", "--in", "train.json", "--out", "kb.json"]);
    ok(d, &["mr", "compress", "--kb", "kb.json", "--in", "msg.json", "--out", "m.sgmr", "--max-rounds", "3"]);
    ok(d, &["mr", "recover", "--kb", "kb.json", "--in", "m.sgmr", "--out", "back.json"]);
    let back: Vec<Value> = serde_json::from_slice(&std::fs::read(d.join("back.json")).unwrap()).unwrap();
    assert_eq!(back, all[110]);
    let csv = ok(d, &["mr", "profile", "--kb", "kb.json", "--in", "held.json", "--sweep", "1,2", "--repetitions", "1", "--segments", "1", "--format", "csv"]);
    assert!(csv.contains("rho,runtime_s,rounds"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(sgcodec(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(sgcodec(d, &["synth", "shapes", "--n", "3"]).status.code(), Some(1));
    assert_eq!(sgcodec(d, &["kb", "stats", "--kb", "missing.json"]).status.code(), Some(2));
    std::fs::write(d.join("bad.json"), b"{\"images\": [").unwrap();
    assert_eq!(sgcodec(d, &["kb", "build", "--in", "bad.json", "--out", "k.json"]).status.code(), Some(1));
    assert_eq!(
        sgcodec(d, &["synth", "categories", "--profile", "human=0.5", "--n", "3", "--seed", "1"]).status.code(),
        Some(1)
    );
    assert!(sgcodec(d, &["--help"]).status.success());
}

#[test]
fn deterministic_artifacts_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = ok(d, &["synth", "shapes", "--n", "10", "--seed", "3"]);
    assert_eq!(a, ok(d, &["synth", "shapes", "--n", "10", "--seed", "3"]));
    let args = ["exp", "federation", "--seed", "1", "--seeds", "2", "--sizes", "20,40", "--n-test", "10"];
    let report = ok(d, &args);
    assert_eq!(report, ok(d, &args));
    let v: Value = serde_json::from_str(&report).unwrap();
    assert_eq!(v["config"]["config"]["seeds"], serde_json::json!([1, 2]));
    let shapes: Value = serde_json::from_str(&ok(d, &["exp", "shapes", "--seed", "2"])).unwrap();
    assert_eq!(shapes["config"]["seed"], 2);
}
