mod common;

use std::net::TcpListener;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread::sleep;
use std::time::{Duration, Instant};

use serde_json::Value;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ticketsim"));
    cmd.env_remove("RUST_LOG");
    for (k, _) in std::env::vars() {
        if k.starts_with("TICKETSIM_") {
            cmd.env_remove(k);
        }
    }
    cmd
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_output_matches_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let mut cases = vec![(vec!["--help"], "help.txt".to_string())];
    for sub in ["ingest", "fit", "compare", "embed-cache", "serve"] {
        cases.push((vec![sub, "--help"], format!("{sub}.txt")));
    }
    for (args, file) in cases {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{args:?}");
        let want = std::fs::read_to_string(golden.join(&file)).unwrap();
        assert_eq!(
            String::from_utf8_lossy(&out.stdout),
            want,
            "{args:?} differs from {file}"
        );
    }
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["fit", "--technique", "doc2vec", "--model-out", "m.json"]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ingest_missing_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["ingest", "--input", "absent.jsonl", "--output", "out.jsonl"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("absent.jsonl"));
    assert!(!dir.path().join("out.jsonl").exists());
}

#[test]
fn ingest_rejects_malformed_lines() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("raw.jsonl"),
        "{\"external_id\":\"A\",\"title\":\"x\",\"description\":\"y\"}\nnot json\n",
    )
    .unwrap();
    let out = run(dir.path(), &["ingest", "--input", "raw.jsonl", "--output", "out.jsonl"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn ingest_is_idempotent_and_redacts() {
    let dir = tempfile::tempdir().unwrap();
    let raw = [
        r#"{"external_id":"T1","title":"Password reset","description":"user alice@example.com locked out, call +49 170 1234567","date_open":"2021-03-01T08:00:00"}"#,
        r#"{"external_id":"T2","title":"VPN down","description":"bob@example.org cannot connect","date_open":"2021-03-02T08:00:00"}"#,
    ]
    .join("\n");
    std::fs::write(dir.path().join("raw.jsonl"), raw).unwrap();
    std::fs::write(
        dir.path().join("rules.json"),
        r#"[{"pattern":"[\\w.+-]+@[\\w-]+\\.[\\w.]+","tag":"[EMAIL]"},{"pattern":"\\+?\\d[\\d ]{7,}\\d","tag":"[PHONE]"}]"#,
    )
    .unwrap();
    let args = [
        "ingest",
        "--input",
        "raw.jsonl",
        "--output",
        "a.jsonl",
        "--redact-rules",
        "rules.json",
    ];
    let out = run(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let first = std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap();
    assert!(
        !first.contains("alice@example.com") && !first.contains("bob@example.org"),
        "{first}"
    );
    assert!(!first.contains("1234567"), "{first}");
    assert!(first.contains("[EMAIL]") && first.contains("[PHONE]"), "{first}");

    let out = run(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("a.jsonl")).unwrap(), first);

    // feeding the output back in changes nothing
    let out = run(
        dir.path(),
        &[
            "ingest",
            "--input",
            "a.jsonl",
            "--output",
            "b.jsonl",
            "--redact-rules",
            "rules.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("b.jsonl")).unwrap(), first);
}

#[test]
fn random_artifact_holds_only_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["--seed", "42", "fit", "--technique", "random", "--model-out", "r.json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["model"], serde_json::json!({"technique": "random", "seed": 42}));
}

fn eval_fixture(dir: &Path) {
    let (corpus, positions) = common::labelled_set(7);
    corpus.save(&dir.join("eval.jsonl")).unwrap();
    common::write_positions_dir(&dir.join("positions"), &positions);
}

fn compare(dir: &Path, techniques: &str, report: &str) -> Output {
    run(
        dir,
        &[
            "compare",
            "--positions-dir",
            "positions",
            "--eval-corpus",
            "eval.jsonl",
            "--techniques",
            techniques,
            "--report-out",
            report,
        ],
    )
}

fn metric_columns(report: &Path) -> Vec<(String, f64, f64)> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(report.join("report.json")).unwrap()).unwrap();
    v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| {
            (
                r["technique"].as_str().unwrap().to_string(),
                r["accuracy_alo"].as_f64().unwrap(),
                r["precision"].as_f64().unwrap(),
            )
        })
        .collect()
}

#[test]
fn compare_with_a_fixed_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    eval_fixture(dir.path());
    let out = run(
        dir.path(),
        &["fit", "--technique", "random", "--model-out", "random.json"],
    );
    assert_eq!(out.status.code(), Some(0));
    let a = compare(dir.path(), "random.json", "one");
    let b = compare(dir.path(), "random.json", "two");
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(b.status.code(), Some(0));
    let (ra, rb) = (
        metric_columns(&dir.path().join("one")),
        metric_columns(&dir.path().join("two")),
    );
    assert_eq!(ra, rb);
    assert_eq!(ra[0].0, "random");
}

#[test]
fn a_failing_technique_gives_exit_3_and_an_error_row() {
    let dir = tempfile::tempdir().unwrap();
    eval_fixture(dir.path());
    // vectors cover only the first subgroup, so the other queries cannot be represented
    let (corpus, _) = common::labelled_set(7);
    let partial = ticketsim::corpus::Corpus::from_tickets(
        corpus
            .iter()
            .filter(|t| t.external_id.starts_with("S0"))
            .cloned()
            .collect(),
    )
    .unwrap();
    common::write_category_vectors(&dir.path().join("vectors.jsonl"), &partial, "partial", 3);
    std::fs::write(
        dir.path().join("provider.json"),
        format!(
            r#"{{"name":"partial","dim":{},"source":{{"type":"vector-file","path":"vectors.jsonl"}}}}"#,
            common::CATEGORIES.len() + 2
        ),
    )
    .unwrap();
    let out = run(
        dir.path(),
        &[
            "fit",
            "--technique",
            "external-embed",
            "--provider",
            "provider.json",
            "--model-out",
            "ext.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = run(
        dir.path(),
        &["fit", "--technique", "random", "--model-out", "random.json"],
    );
    assert_eq!(out.status.code(), Some(0));

    let out = compare(dir.path(), "random.json,ext.json", "report");
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let v: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report/report.json")).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let ext = rows.iter().find(|r| r["technique"] == "external-embed").unwrap();
    assert!(ext["error"].is_string(), "{ext}");
    let random = rows.iter().find(|r| r["technique"] == "random").unwrap();
    assert!(random.get("error").is_none_or(Value::is_null), "{random}");
}

#[test]
fn compare_refuses_artifacts_from_different_training_sets() {
    let dir = tempfile::tempdir().unwrap();
    eval_fixture(dir.path());
    common::training_corpus(5, 1).save(&dir.path().join("a.jsonl")).unwrap();
    common::training_corpus(5, 2).save(&dir.path().join("b.jsonl")).unwrap();
    for (train, model) in [("a.jsonl", "ta.json"), ("b.jsonl", "tb.json")] {
        let out = run(
            dir.path(),
            &["fit", "--technique", "tfidf", "--train", train, "--model-out", model],
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let out = compare(dir.path(), "one=ta.json,two=tb.json", "report");
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn write_service_fixture(dir: &Path, port: u16) -> usize {
    let corpus = common::training_corpus(4, 9);
    corpus.save(&dir.join("corpus.jsonl")).unwrap();
    let out = run(
        dir,
        &[
            "fit",
            "--technique",
            "bm25",
            "--train",
            "corpus.jsonl",
            "--model-out",
            "model.json",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    std::fs::write(
        dir.join("service.toml"),
        format!(
            "model = \"model.json\"\ncorpus = \"corpus.jsonl\"\ndata_dir = \"state\"\nlisten = \"127.0.0.1:{port}\"\n"
        ),
    )
    .unwrap();
    corpus.len()
}

fn spawn_server(dir: &Path) -> Child {
    bin()
        .current_dir(dir)
        .args(["--config", "service.toml", "serve"])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap()
}

fn get_json(url: &str) -> Option<Value> {
    let mut resp = ureq::get(url).call().ok()?;
    resp.body_mut().read_json().ok()
}

fn wait_for_health(port: u16, child: &mut Child) -> Value {
    let deadline = Instant::now() + Duration::from_secs(30);
    loop {
        if let Some(v) = get_json(&format!("http://127.0.0.1:{port}/health")) {
            return v;
        }
        if let Some(status) = child.try_wait().unwrap() {
            panic!("server exited early: {status}");
        }
        assert!(Instant::now() < deadline, "server never became healthy");
        sleep(Duration::from_millis(50));
    }
}

fn terminate(child: &mut Child) -> Option<i32> {
    let status = Command::new("kill")
        .args(["-TERM", &child.id().to_string()])
        .status()
        .unwrap();
    assert!(status.success());
    let deadline = Instant::now() + Duration::from_secs(20);
    loop {
        if let Some(status) = child.try_wait().unwrap() {
            return status.code();
        }
        if Instant::now() > deadline {
            child.kill().ok();
            panic!("server ignored SIGTERM");
        }
        sleep(Duration::from_millis(50));
    }
}

#[test]
fn serve_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let port = free_port();
    let size = write_service_fixture(dir.path(), port);

    let mut child = spawn_server(dir.path());
    let health = wait_for_health(port, &mut child);
    assert_eq!(health["index_size"], size);
    assert_eq!(health["technique"], "bm25");

    let base = format!("http://127.0.0.1:{port}");
    let submitted: Value = ureq::post(format!("{base}/tickets"))
        .send_json(serde_json::json!({"title": "printer jam", "description": "toner cartridge tray"}))
        .unwrap()
        .body_mut()
        .read_json()
        .unwrap();
    let id = submitted["ticket_id"].as_str().unwrap().to_string();
    let resp = ureq::post(format!("{base}/feedback"))
        .send_json(serde_json::json!({"query_ticket_id": id, "verdict": "helpful"}))
        .unwrap();
    assert_eq!(resp.status(), 201);
    assert_eq!(terminate(&mut child), Some(0));

    let mut child = spawn_server(dir.path());
    let health = wait_for_health(port, &mut child);
    assert_eq!(health["index_size"], size + 1);
    let ticket = get_json(&format!("{base}/tickets/{id}")).unwrap();
    assert_eq!(ticket["title"], "printer jam");
    let feedback = get_json(&format!("{base}/feedback")).unwrap();
    assert_eq!(feedback.as_array().unwrap().len(), 1);
    terminate(&mut child);
}

#[test]
fn serve_on_a_busy_port_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let holder = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port();
    write_service_fixture(dir.path(), port);
    let out = run(dir.path(), &["--config", "service.toml", "serve"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    drop(holder);
}

#[test]
fn serve_without_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["serve"]);
    assert!(matches!(out.status.code(), Some(1) | Some(2)), "{:?}", out.status);
}

#[test]
fn sample_files_load() {
    let samples = Path::new(env!("CARGO_MANIFEST_DIR")).join("samples");
    let dir = tempfile::tempdir().unwrap();
    let lexicon = samples.join("lexicon.json");
    let out = run(
        dir.path(),
        &["fit", "--technique", "expert", "--lexicon", lexicon.to_str().unwrap(), "--model-out", "expert.json"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let redactor = ticketsim::corpus::Redactor::from_file(&samples.join("redaction_rules.json")).unwrap();
    let text = redactor.redact("mail jane.doe@corp.example or call +49 89 1234567 from 10.0.0.12");
    assert_eq!(text, "mail [EMAIL] or call [PHONE] from [IP]");

    let cfg = ticketsim::service::ServiceConfig::load(&samples.join("service.toml")).unwrap();
    assert_eq!(cfg.model, samples.join("models/tfidf.json"));
    assert_eq!((cfg.k, cfg.candidate_window), (5, 100));
}
