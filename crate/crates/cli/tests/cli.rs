use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn swapcomm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swapcomm"))
        .args(args)
        .env_remove("SWAPCOMM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json document")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn worked_example_decodes_both_ways() {
    let doc = json(&swapcomm(&[
        "simulate", "--pairs", "6", "--alice-msg", "011110", "--bob-msg", "101100", "--seed", "7",
    ]));
    assert_eq!(doc["decoded"]["by_bob"], "011110");
    assert_eq!(doc["decoded"]["by_alice"], "101100");
    assert_eq!(doc["summary"]["bit_errors"], 0);
    assert_eq!(doc["seed"], 7);
    // Announcements never carry operations.
    let wire = doc["transcript"].to_string();
    assert!(!wire.contains("U1") && !wire.contains("op"));
}

#[test]
fn odd_pair_count_reports_last_pair_idle() {
    let doc = json(&swapcomm(&["simulate", "--pairs", "5", "--alice-msg", "0111"]));
    assert_eq!(doc["summary"]["idle_pairs"], serde_json::json!([5]));
    assert_eq!(doc["decoded"]["by_bob"], "0111");
    let text = swapcomm(&["simulate", "--pairs", "5", "--alice-msg", "0111", "--format", "text"]);
    assert!(String::from_utf8_lossy(&text.stdout).contains("pair 5 idle"));
}

#[test]
fn same_flags_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["json", "csv", "text"] {
        let mut outputs = Vec::new();
        for run in 0..2 {
            let path = dir.path().join(format!("{format}-{run}"));
            let out = swapcomm(&[
                "simulate", "--pairs", "20", "--seed", "42", "--alice-msg", "0xbeef", "--bob-msg", "1101",
                "--format", format, "--out", path.to_str().unwrap(),
            ]);
            assert!(out.status.success(), "{}", stderr(&out));
            outputs.push(fs::read(&path).unwrap());
        }
        assert_eq!(outputs[0], outputs[1], "{format} output differs between runs");
    }
}

#[test]
fn capacity_violation_names_pairs() {
    let out = swapcomm(&["simulate", "--pairs", "5", "--alice-msg", "011110"]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("needs 6 pairs") && msg.contains("has 5"), "{msg}");
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(swapcomm(&["simulate"]).status.code(), Some(1));
    assert_eq!(swapcomm(&["simulate", "--pairs", "4", "--alice-msg", "01x"]).status.code(), Some(1));
    assert_eq!(swapcomm(&["simulate", "--pairs", "4", "--mode", "sideways"]).status.code(), Some(1));
    // Bob has nothing to send in a-to-b mode.
    let out = swapcomm(&["simulate", "--pairs", "4", "--mode", "a-to-b", "--bob-msg", "01"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(swapcomm(&["--help"]).status.code(), Some(0));
}

#[test]
fn message_from_file_and_hex() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("msg.txt");
    fs::write(&file, "1010\n").unwrap();
    let arg = format!("@{}", file.display());
    let doc = json(&swapcomm(&["simulate", "--pairs", "8", "--alice-msg", &arg, "--bob-msg", "0xA"]));
    assert_eq!(doc["decoded"]["by_bob"], "1010");
    assert_eq!(doc["decoded"]["by_alice"], "1010");
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_swapcomm"))
        .args(["simulate", "--pairs", "4", "--seed", "3", "--alice-msg", "11"])
        .env("SWAPCOMM_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(files.len(), 1);
}

#[test]
fn table_lists_psi_minus_combinations() {
    let doc = json(&swapcomm(&["table"]));
    let mut combos: Vec<String> = doc["decode_table"]["combos"]["PsiMinus"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| format!("{}{}", p[0].as_str().unwrap(), p[1].as_str().unwrap()))
        .collect();
    combos.sort();
    assert_eq!(combos, ["U0U1", "U1U0", "U2U3", "U3U2"]);
    let flagged = doc["audit"]["discrepancies"].as_array().unwrap();
    assert_eq!(flagged.len(), 6);
    assert!(flagged.iter().all(|d| d["section"] == "operations" && d["column"] == 1));
}

#[test]
fn verify_prints_headline() {
    let out = swapcomm(&["verify"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8_lossy(&out.stdout).trim(),
        "16/16 decompositions exact, 4 columns × 4 outcomes, 16/16 decode round-trips"
    );
}

fn write_run(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.json");
    let out = swapcomm(&[
        "simulate", "--pairs", "12", "--seed", "9", "--alice-msg", "110010", "--bob-msg", "0111",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    path
}

#[test]
fn replay_reproduces_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_run(dir.path());
    let out = swapcomm(&["replay", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("Bob decodes 110010"));

    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let entry = &mut doc["private"]["alice"]["entries"][1]["op"];
    *entry = Value::from(if entry == "U0" { "U1" } else { "U0" });
    let tampered = dir.path().join("tampered.json");
    fs::write(&tampered, doc.to_string()).unwrap();
    let out = swapcomm(&["replay", tampered.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analyze_run_document() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_run(dir.path());
    let doc = json(&swapcomm(&["analyze", path.to_str().unwrap()]));
    let summary = &doc["summary"];
    assert_eq!(summary["blocks"], 6);
    assert!(summary["mutual_information"]["alice"].as_f64().unwrap().abs() < 1e-12);
    assert!((summary["mutual_information"]["joint"].as_f64().unwrap() - 12.0).abs() < 1e-9);
    assert_eq!(doc["report"]["blocks"].as_array().unwrap().len(), 6);

    let prior = dir.path().join("prior.json");
    fs::write(&prior, "[[1,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]").unwrap();
    let out = swapcomm(&["analyze", path.to_str().unwrap(), "--prior", prior.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    fs::write(&prior, "[[1,1,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]").unwrap();
    let out = swapcomm(&["analyze", path.to_str().unwrap(), "--prior", prior.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unreachable_peer_exits_three_without_document() {
    let dir = tempfile::tempdir().unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    drop(listener);
    let doc = dir.path().join("party.json");
    let out = swapcomm(&[
        "connect", "--peer", &addr, "--pairs", "4", "--msg", "01", "--out", doc.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(!doc.exists());
}

#[test]
fn montecarlo_small_run() {
    let doc = json(&swapcomm(&["montecarlo", "--trials", "20", "--pairs", "10", "--blocks", "2000", "--seed", "5"]));
    assert_eq!(doc["bit_errors"], 0);
    assert_eq!(doc["bits_sent"], 400);
    assert_eq!(doc["leakage"].as_array().unwrap().len(), 4);
}
