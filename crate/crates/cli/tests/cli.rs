use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::{json, Value};

fn stratum() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stratum"));
    c.env("RUST_LOG", "warn");
    c
}

fn run_ok(c: &mut Command) -> Value {
    let out = c.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Distinct pseudo-words; `seed` picks the stream.
fn words(seed: u64, n: usize) -> String {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    (0..n)
        .map(|_| {
            let mut w = String::new();
            for _ in 0..6 {
                x ^= x << 13;
                x ^= x >> 7;
                x ^= x << 17;
                w.push((b'a' + (x % 26) as u8) as char);
            }
            w
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_docs(path: &Path, docs: &[(&str, String)]) {
    let body: String = docs.iter().map(|(id, t)| json!({"id": id, "text": t}).to_string() + "\n").collect();
    std::fs::write(path, body).unwrap();
}

/// Ten documents: one exact duplicate, two too short, one paper.
fn ten_doc_fixture(dir: &Path) {
    let mut docs: Vec<(String, String)> = (0..10).map(|i| (format!("t{i}"), words(i + 1, 1400))).collect();
    docs[1].1 = docs[0].1.clone();
    docs[2].1 = words(77, 50);
    docs[3].1 = words(78, 60);
    docs[4].1 = format!("papermark {}", docs[4].1);
    let refs: Vec<(&str, String)> = docs.iter().map(|(a, b)| (a.as_str(), b.clone())).collect();
    write_docs(&dir.join("docs.jsonl"), &refs);
    std::fs::write(
        dir.join("bp.json"),
        json!({
            "rules": [{"contains": "papermark", "reply": "{\"analysis\": \"a\", \"is_article\": true}"}],
            "default": "{\"analysis\": \"b\", \"is_article\": false}",
        })
        .to_string(),
    )
    .unwrap();
    std::fs::write(
        dir.join("run.toml"),
        r#"input = "docs.jsonl"
output_dir = "out"

[models]
teacher = { kind = "identity" }
book_paper = { kind = "scripted", script = "bp.json" }
labeler = { kind = "uniform", fdc_code = "610" }

[[stages]]
kind = "dedup"

[[stages]]
kind = "rules"
language_detector = "off"

[[stages]]
kind = "classify"

[[stages]]
kind = "refine"

[[stages]]
kind = "complete"
"#,
    )
    .unwrap();
}

#[test]
fn run_accounts_for_ten_documents() {
    let dir = tempfile::tempdir().unwrap();
    ten_doc_fixture(dir.path());
    let s = run_ok(stratum().arg("run").arg(dir.path().join("run.toml")));
    assert_eq!(s["documents"]["total"], 10);
    assert_eq!(s["documents"]["active"], 7);
    assert_eq!(s["documents"]["dropped"], 3);
    assert_eq!(s["documents"]["failed"], 0);
    assert_eq!(s["stages"][0]["report"]["dropped"], 1);
    assert_eq!(s["stages"][1]["report"]["drop_reasons"]["undersize"], 2);
    assert_eq!(s["stages"][4]["extra"]["eligible"], 1);
    assert!(dir.path().join("out/resolved_config.toml").exists());

    let again = run_ok(stratum().arg("run").arg(dir.path().join("run.toml")));
    assert_eq!(again["executed"], 0);
    assert_eq!(again["documents"], s["documents"]);

    let stats = run_ok(stratum().args(["stats", "--run"]).arg(dir.path().join("out")));
    assert_eq!(stats["documents"], s["documents"]);
}

#[test]
fn config_errors_exit_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    ten_doc_fixture(dir.path());
    let cfg = dir.path().join("run.toml");
    let text = std::fs::read_to_string(&cfg).unwrap();
    std::fs::write(&cfg, text.replace("kind = \"dedup\"", "kind = \"dedup\"\nthresold = 0.7")).unwrap();
    let out = stratum().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("thresold"));
    assert!(!dir.path().join("out").exists());

    std::fs::write(&cfg, text.replace("docs.jsonl", "missing.jsonl")).unwrap();
    assert_eq!(stratum().arg("run").arg(&cfg).output().unwrap().status.code(), Some(2));
    assert_eq!(stratum().arg("bogus").output().unwrap().status.code(), Some(2));
}

#[test]
fn stage_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    write_docs(&dir.path().join("d.jsonl"), &[("a", words(1, 30))]);
    std::fs::write(dir.path().join("g.json"), "{\"default\": \"No QA\"}").unwrap();
    let out = stratum()
        .args(["benchgen", "--generator", "scripted:g.json", "--judge", "scripted:g.json", "--eval-size", "5"])
        .args(["--input", "d.jsonl", "--output-dir", "o"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn single_stage_commands_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = words(5, 300);
    write_docs(&d.join("raw.jsonl"), &[("a", a.clone()), ("b", a), ("c", words(6, 300))]);
    let ing = run_ok(stratum().args(["ingest", "--input", "raw.jsonl", "--output", "l1.jsonl"]).current_dir(d));
    assert_eq!(ing["ingested"], 3);
    let s = run_ok(
        stratum()
            .args(["dedup", "--input", "l1.jsonl", "--output-dir", "dd", "--seed", "9"])
            .current_dir(d),
    );
    assert_eq!(s["stages"][0]["report"]["dropped"], 1);
    let s = run_ok(
        stratum()
            .args(["filter", "--input", "dd/documents.jsonl", "--output-dir", "f", "--min-bytes", "100"])
            .arg("--no-language-detect")
            .current_dir(d),
    );
    assert_eq!(s["stages"][0]["report"]["input"], 2);
    assert_eq!(s["documents"]["active"], 2);
    let p = run_ok(
        stratum()
            .args(["portrait", "--input", "f/documents.jsonl", "--group-by", "doc_type", "--json"])
            .current_dir(d),
    );
    assert_eq!(p["rows"][0]["sample_count"], 2);
}

#[test]
fn simulate_reports_clean_schedules() {
    let out = stratum().args(["simulate", "--seed", "3", "--seeds", "4"]).output().unwrap();
    assert!(out.status.success());
    let lines: Vec<Value> = String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|r| r["violations"].as_array().unwrap().is_empty()));
}

struct Server {
    child: Child,
    addr: String,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn serve(tasks: Option<&Path>, timeout_ms: u64) -> Server {
    let mut c = stratum();
    c.args(["queue-serve", "--addr", "127.0.0.1:0", "--reap-ms", "50"])
        .args(["--heartbeat-timeout-ms", &timeout_ms.to_string()])
        .stdout(Stdio::piped());
    if let Some(t) = tasks {
        c.arg("--tasks").arg(t);
    }
    let mut child = c.spawn().unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening ").expect("listening line").to_string();
    Server { child, addr }
}

fn stats(addr: &str) -> Value {
    run_ok(stratum().args(["stats", "--addr", addr]))
}

fn task_file(dir: &Path, n: usize) -> std::path::PathBuf {
    let body: String = (0..n)
        .map(|i| json!({"task_id": format!("t{i:03}"), "kind": "noop", "payload_ref": "-", "priority": i % 3}).to_string() + "\n")
        .collect();
    let p = dir.join("tasks.jsonl");
    std::fs::write(&p, body).unwrap();
    p
}

fn worker(addr: &str, id: &str, work_ms: u64) -> Command {
    let mut c = stratum();
    c.args(["worker", "--addr", addr, "--id", id, "--work-ms", &work_ms.to_string()])
        .args(["--heartbeat-ms", "50", "--idle-poll-ms", "10", "--exit-when-drained"]);
    c
}

fn wait_output(c: Child) -> Output {
    let out = c.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn two_workers_drain_hundred_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(Some(&task_file(dir.path(), 100)), 2_000);
    let ws: Vec<Child> = ["w1", "w2"]
        .iter()
        .map(|id| worker(&server.addr, id, 2).stdout(Stdio::piped()).spawn().unwrap())
        .collect();
    let done: u64 = ws
        .into_iter()
        .map(|w| serde_json::from_slice::<Value>(&wait_output(w).stdout).unwrap()["done"].as_u64().unwrap())
        .sum();
    assert_eq!(done, 100);
    let s = stats(&server.addr);
    assert_eq!(s["done"], 100);
    assert_eq!(s["failed_permanent"], 0);
    assert_eq!(s["queued"], 0);
}

#[test]
fn killed_worker_tasks_are_reclaimed() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(Some(&task_file(dir.path(), 30)), 300);
    let mut rogue = worker(&server.addr, "rogue", 60_000).stdout(Stdio::null()).spawn().unwrap();
    let start = Instant::now();
    while stats(&server.addr)["leased"] == 0 {
        assert!(start.elapsed() < Duration::from_secs(20), "rogue never leased");
        std::thread::sleep(Duration::from_millis(20));
    }
    rogue.kill().unwrap();
    rogue.wait().unwrap();

    let ws: Vec<Child> = ["w1", "w2"]
        .iter()
        .map(|id| worker(&server.addr, id, 1).stdout(Stdio::piped()).spawn().unwrap())
        .collect();
    for w in ws {
        wait_output(w);
    }
    let s = stats(&server.addr);
    assert_eq!(s["done"], 30);
    assert!(s["reclaimed"].as_u64().unwrap() > 0, "{s}");
}

#[test]
fn without_workers_tasks_stay_queued() {
    let dir = tempfile::tempdir().unwrap();
    let server = serve(None, 1_000);
    let s = run_ok(stratum().args(["enqueue", "--addr", &server.addr, "--tasks"]).arg(task_file(dir.path(), 12)));
    assert_eq!(s["queued"], 12);
    std::thread::sleep(Duration::from_millis(200));
    let s = stats(&server.addr);
    assert_eq!(s["queued"], 12);
    assert_eq!(s["done"], 0);
}

#[test]
fn llm_worker_refines_document_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut doc: Value = json!({"id": "x", "text": words(3, 2500), "stage": "L3", "status": "active"});
    let p = dir.path().join("x.json");
    std::fs::write(&p, doc.to_string()).unwrap();
    let tasks = dir.path().join("t.jsonl");
    std::fs::write(&tasks, json!({"task_id": "x", "kind": "refine", "payload_ref": p}).to_string() + "\n").unwrap();
    let server = serve(Some(&tasks), 5_000);
    let w = worker(&server.addr, "w", 0)
        .args(["--handler", "llm", "--teacher", "identity"])
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    wait_output(w);
    let out: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("x.out.json")).unwrap()).unwrap();
    assert_eq!(out["stage"], "L4");
    doc["stage"] = json!("L4");
    assert_eq!(out["text"], doc["text"]);
    assert_eq!(stats(&server.addr)["done"], 1);
}
