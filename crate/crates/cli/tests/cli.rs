//! End-to-end tests of the `cyberdef` binary: flag handling, the exit-code
//! contract (0 success, 1 usage, 2 data/validation, 3 I/O), file outputs,
//! cross-invocation determinism, and the HTTP service lifecycle including
//! signal-driven shutdown.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_cyberdef"));
    // Keep the environment override out of tests that exercise key files.
    cmd.env_remove("CYBERDEF_API_KEY");
    cmd
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[track_caller]
fn assert_exit(o: &Output, code: i32) {
    assert_eq!(
        o.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(o),
        stderr(o)
    );
}

fn line_count(path: &Path) -> usize {
    std::fs::read_to_string(path).unwrap().lines().count()
}

// ---------------------------------------------------------------------------
// sim
// ---------------------------------------------------------------------------

#[test]
fn sim_run_builtin_variant_writes_series_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sim",
            "run",
            "--scenario",
            "s2",
            "--variant",
            "2",
            "--seed",
            "7",
            "--out",
            "r",
        ],
    );
    assert_exit(&out, 0);

    // 200 ticks plus the CSV header.
    let series = tmp.path().join("r/s2_response_10_seed7.csv");
    assert_eq!(line_count(&series), 201);

    let summary_text =
        std::fs::read_to_string(tmp.path().join("r/s2_response_10_seed7_summary.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&summary_text).unwrap();
    assert_eq!(summary["parameters"]["response_rate"], 10);
    assert_eq!(summary["seed"], 7);
    assert!(stdout(&out).contains("peak infected"));
}

#[test]
fn sim_run_s4_has_one_hundred_ticks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sim",
            "run",
            "--scenario",
            "s4",
            "--seed",
            "1",
            "--out",
            "r",
        ],
    );
    assert_exit(&out, 0);
    let csv = std::fs::read_dir(tmp.path().join("r"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "csv"))
        .unwrap();
    assert_eq!(line_count(&csv), 101);
}

#[test]
fn sim_run_missing_out_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &["sim", "run", "--scenario", "s1", "--seed", "1"],
    );
    assert_exit(&out, 1);
    assert!(stderr(&out).contains("--out"));
}

#[test]
fn sim_run_unknown_scenario_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sim",
            "run",
            "--scenario",
            "s9",
            "--seed",
            "1",
            "--out",
            "r",
        ],
    );
    assert_exit(&out, 1);
    assert!(stderr(&out).contains("unknown scenario"));
}

#[test]
fn sim_run_variant_out_of_range_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sim",
            "run",
            "--scenario",
            "s2",
            "--variant",
            "9",
            "--seed",
            "1",
            "--out",
            "r",
        ],
    );
    assert_exit(&out, 1);
    assert!(stderr(&out).contains("out of range"));
}

#[test]
fn sim_run_outputs_are_identical_across_invocations() {
    let tmp = tempfile::tempdir().unwrap();
    for dir in ["a", "b"] {
        let out = run_in(
            tmp.path(),
            &[
                "sim",
                "run",
                "--scenario",
                "s3",
                "--seed",
                "5",
                "--out",
                dir,
            ],
        );
        assert_exit(&out, 0);
    }
    let read_dir = |d: &str| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(tmp.path().join(d))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    assert_eq!(read_dir("a"), read_dir("b"));
}

#[test]
fn sim_run_accepts_a_scenario_file() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("mini.scenario"),
        "# three quiet nodes\nnodes = 3\nticks = 10\nthreats = 1\nresponse_rate = 2\n",
    )
    .unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sim",
            "run",
            "--scenario",
            "mini.scenario",
            "--seed",
            "3",
            "--out",
            "r",
        ],
    );
    assert_exit(&out, 0);
    assert_eq!(line_count(&tmp.path().join("r/mini_seed3.csv")), 11);
}

#[test]
fn sim_sweep_runs_every_variant_for_every_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sim",
            "sweep",
            "--scenario",
            "s1",
            "--seeds",
            "2",
            "--out",
            "sw",
        ],
    );
    assert_exit(&out, 0);
    // 3 variants x 2 seeds plus the header.
    assert_eq!(line_count(&tmp.path().join("sw/s1_sweep.csv")), 7);

    let single = run_in(
        tmp.path(),
        &[
            "sim",
            "sweep",
            "--scenario",
            "s1",
            "--seeds",
            "1",
            "--out",
            "sw1",
        ],
    );
    assert_exit(&single, 0);
    assert_eq!(line_count(&tmp.path().join("sw1/s1_sweep.csv")), 4);
}

#[test]
fn sim_sweep_unknown_id_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "sim",
            "sweep",
            "--scenario",
            "s9",
            "--seeds",
            "2",
            "--out",
            "sw",
        ],
    );
    assert_exit(&out, 1);
}

// ---------------------------------------------------------------------------
// detect
// ---------------------------------------------------------------------------

#[test]
fn detect_synth_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["a.csv", "b.csv"] {
        let out = run_in(
            tmp.path(),
            &[
                "detect", "synth", "--out", name, "--rows", "400", "--seed", "3",
            ],
        );
        assert_exit(&out, 0);
    }
    let a = std::fs::read(tmp.path().join("a.csv")).unwrap();
    let b = std::fs::read(tmp.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(line_count(&tmp.path().join("a.csv")), 401);
}

#[test]
fn detect_pipeline_synth_train_eval_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let synth = run_in(
        tmp.path(),
        &[
            "detect",
            "synth",
            "--out",
            "train.csv",
            "--rows",
            "1000",
            "--seed",
            "5",
        ],
    );
    assert_exit(&synth, 0);

    let train = run_in(
        tmp.path(),
        &[
            "detect",
            "train",
            "--data",
            "train.csv",
            "--model",
            "model.bin",
            "--seed",
            "9",
        ],
    );
    assert_exit(&train, 0);
    let train_out = stdout(&train);
    assert!(train_out.contains("decision_tree"));
    assert!(train_out.contains("model version: "));

    let eval = run_in(
        tmp.path(),
        &[
            "detect",
            "eval",
            "--data",
            "train.csv",
            "--model",
            "model.bin",
            "--report",
            "report.json",
        ],
    );
    assert_exit(&eval, 0);
    let eval_out = stdout(&eval);
    assert!(
        eval_out.contains("Dropped"),
        "confusion matrix must show the Dropped column"
    );
    assert!(eval_out.contains("micro F1: 1.000000"));
    assert!(eval_out.contains("macro F1: 1.000000"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["f1_micro"], 1.0);
    assert_eq!(report["evaluated"], 1000);

    let predict = run_in(
        tmp.path(),
        &[
            "detect",
            "predict",
            "--data",
            "train.csv",
            "--model",
            "model.bin",
            "--out",
            "pred.csv",
        ],
    );
    assert_exit(&predict, 0);
    let predict_out = stdout(&predict);
    assert!(predict_out.contains("Failed: 0"));
    assert!(predict_out.contains("Succeeded: 1000"));
    assert_eq!(line_count(&tmp.path().join("pred.csv")), 1001);
}

#[test]
fn detect_train_reports_starved_class_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let synth = run_in(
        tmp.path(),
        &[
            "detect", "synth", "--out", "tiny.csv", "--rows", "50", "--seed", "1",
        ],
    );
    assert_exit(&synth, 0);
    let train = run_in(
        tmp.path(),
        &["detect", "train", "--data", "tiny.csv", "--model", "m.bin"],
    );
    assert_exit(&train, 2);
    assert!(stderr(&train).contains("FTP-Patator"));
}

#[test]
fn detect_eval_rejects_a_corrupt_model_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let synth = run_in(
        tmp.path(),
        &[
            "detect", "synth", "--out", "d.csv", "--rows", "200", "--seed", "1",
        ],
    );
    assert_exit(&synth, 0);
    std::fs::write(tmp.path().join("bad.bin"), b"this is not a model").unwrap();
    let eval = run_in(
        tmp.path(),
        &["detect", "eval", "--data", "d.csv", "--model", "bad.bin"],
    );
    assert_exit(&eval, 2);
    assert!(stderr(&eval).contains("invalid model file"));
}

#[test]
fn detect_predict_missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    train_fixture_model(tmp.path());
    let predict = run_in(
        tmp.path(),
        &[
            "detect",
            "predict",
            "--data",
            "missing.csv",
            "--model",
            "model.bin",
            "--out",
            "p.csv",
        ],
    );
    assert_exit(&predict, 3);
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

/// Synthesizes and trains a small model named `model.bin` in `dir`.
fn train_fixture_model(dir: &Path) {
    let synth = run_in(
        dir,
        &[
            "detect",
            "synth",
            "--out",
            "train.csv",
            "--rows",
            "600",
            "--seed",
            "5",
        ],
    );
    assert_exit(&synth, 0);
    let train = run_in(
        dir,
        &[
            "detect",
            "train",
            "--data",
            "train.csv",
            "--model",
            "model.bin",
        ],
    );
    assert_exit(&train, 0);
}

/// Minimal HTTP/1.1 client so the service tests need no HTTP dependency.
fn http(
    addr: &str,
    method: &str,
    path: &str,
    headers: &[(&str, &str)],
    body: &str,
) -> (u16, String) {
    let mut stream = TcpStream::connect(addr).unwrap();
    let mut req = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Length: {}\r\n",
        body.len()
    );
    for (k, v) in headers {
        req.push_str(&format!("{k}: {v}\r\n"));
    }
    req.push_str("\r\n");
    req.push_str(body);
    stream.write_all(req.as_bytes()).unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    let status: u16 = response
        .split_whitespace()
        .nth(1)
        .expect("status line")
        .parse()
        .expect("numeric status");
    (status, response)
}

/// Builds a predict body from the fixture CSV: header names zipped with the
/// first data row.
fn predict_body(dir: &Path) -> String {
    let text = std::fs::read_to_string(dir.join("train.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let map: serde_json::Map<String, serde_json::Value> = header
        .iter()
        .zip(&row)
        .filter(|(h, _)| **h != "Label")
        .map(|(h, v)| (h.to_string(), serde_json::Value::String(v.to_string())))
        .collect();
    serde_json::to_string(&map).unwrap()
}

/// Starts `cyberdef serve` on an ephemeral port and returns the child, the
/// stdout reader, and the bound address parsed from the startup banner. The
/// reader must stay alive while the server runs — dropping it closes the
/// pipe, which a supervisor would not do to a healthy service.
fn spawn_serve(
    dir: &Path,
    extra: &[&str],
    envs: &[(&str, &str)],
) -> (Child, BufReader<std::process::ChildStdout>, String) {
    let mut cmd = bin();
    cmd.current_dir(dir)
        .args([
            "serve",
            "--model",
            "model.bin",
            "--port",
            "0",
            "--api-key-file",
            "key.txt",
            "--log-dir",
            "logs",
        ])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null());
    for (k, v) in envs {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().unwrap();
    let mut reader = BufReader::new(child.stdout.take().unwrap());
    let mut addr = None;
    for _ in 0..10 {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap() == 0 {
            break;
        }
        if let Some(rest) = line.strip_prefix("listening on http://") {
            addr = Some(rest.trim().to_string());
            break;
        }
    }
    (child, reader, addr.expect("server printed its address"))
}

#[test]
fn serve_answers_health_enforces_auth_and_shuts_down_on_sigint() {
    let tmp = tempfile::tempdir().unwrap();
    train_fixture_model(tmp.path());
    std::fs::write(tmp.path().join("key.txt"), "cli-test-key\n").unwrap();
    let (mut child, _stdout_tail, addr) = spawn_serve(tmp.path(), &[], &[]);

    let (status, response) = http(&addr, "GET", "/v1/health", &[], "");
    assert_eq!(status, 200);
    assert!(response.contains("model_version"));

    let body = predict_body(tmp.path());
    let (status, _) = http(
        &addr,
        "POST",
        "/v1/predict",
        &[("X-Api-Key", "wrong")],
        &body,
    );
    assert_eq!(status, 401);

    let (status, response) = http(
        &addr,
        "POST",
        "/v1/predict",
        &[("X-Api-Key", "cli-test-key")],
        &body,
    );
    assert_eq!(status, 200);
    assert!(response.contains("\"alert_id\":1"));

    // SIGINT must end the process cleanly with the logs flushed.
    let pid = child.id() as i32;
    let kill = Command::new("kill")
        .args(["-INT", &pid.to_string()])
        .status()
        .unwrap();
    assert!(kill.success());
    let status = child.wait().unwrap();
    assert!(
        status.success(),
        "clean shutdown should exit 0, got {status:?}"
    );
    assert_eq!(line_count(&tmp.path().join("logs/alerts.ndjson")), 1);
}

#[test]
fn serve_env_var_overrides_the_key_file() {
    let tmp = tempfile::tempdir().unwrap();
    train_fixture_model(tmp.path());
    std::fs::write(tmp.path().join("key.txt"), "file-key\n").unwrap();
    let (mut child, _stdout_tail, addr) =
        spawn_serve(tmp.path(), &[], &[("CYBERDEF_API_KEY", "env-key")]);

    let body = predict_body(tmp.path());
    let (status, _) = http(
        &addr,
        "POST",
        "/v1/predict",
        &[("X-Api-Key", "file-key")],
        &body,
    );
    assert_eq!(
        status, 401,
        "file key must lose to the environment variable"
    );
    let (status, _) = http(
        &addr,
        "POST",
        "/v1/predict",
        &[("X-Api-Key", "env-key")],
        &body,
    );
    assert_eq!(status, 200);
    child.kill().unwrap();
    child.wait().unwrap();
}

#[test]
fn serve_busy_port_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    train_fixture_model(tmp.path());
    std::fs::write(tmp.path().join("key.txt"), "k\n").unwrap();
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port().to_string();
    let out = run_in(
        tmp.path(),
        &[
            "serve",
            "--model",
            "model.bin",
            "--port",
            &port,
            "--api-key-file",
            "key.txt",
            "--log-dir",
            "logs",
        ],
    );
    assert_exit(&out, 3);
}

#[test]
fn serve_unreadable_key_file_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    train_fixture_model(tmp.path());
    let out = run_in(
        tmp.path(),
        &[
            "serve",
            "--model",
            "model.bin",
            "--port",
            "0",
            "--api-key-file",
            "absent.txt",
            "--log-dir",
            "logs",
        ],
    );
    assert_exit(&out, 3);
}

#[test]
fn serve_without_any_key_source_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    train_fixture_model(tmp.path());
    let out = run_in(
        tmp.path(),
        &["serve", "--model", "model.bin", "--port", "0"],
    );
    assert_exit(&out, 1);
    assert!(stderr(&out).contains("CYBERDEF_API_KEY"));
}

#[test]
fn serve_uses_a_custom_sop_table() {
    let tmp = tempfile::tempdir().unwrap();
    train_fixture_model(tmp.path());
    std::fs::write(tmp.path().join("key.txt"), "k\n").unwrap();
    std::fs::write(
        tmp.path().join("sop.json"),
        r#"{"low": "L-9", "medium": "M-9", "high": "H-9"}"#,
    )
    .unwrap();
    let (mut child, _stdout_tail, addr) =
        spawn_serve(tmp.path(), &["--sop-table", "sop.json"], &[]);

    // Score an attack-typical row so a playbook id appears.
    let text = std::fs::read_to_string(tmp.path().join("train.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let attack_row: Vec<&str> = lines
        .map(|l| l.split(',').collect::<Vec<&str>>())
        .find(|cells| cells.last().is_some_and(|l| *l != "BENIGN"))
        .unwrap();
    let map: serde_json::Map<String, serde_json::Value> = header
        .iter()
        .zip(&attack_row)
        .filter(|(h, _)| **h != "Label")
        .map(|(h, v)| (h.to_string(), serde_json::Value::String(v.to_string())))
        .collect();
    let body = serde_json::to_string(&map).unwrap();

    let (status, response) = http(&addr, "POST", "/v1/predict", &[("X-Api-Key", "k")], &body);
    assert_eq!(status, 200);
    assert!(
        response.contains("\"sop_id\":\"H-9\"")
            || response.contains("\"sop_id\":\"M-9\"")
            || response.contains("\"sop_id\":\"L-9\""),
        "custom playbook ids should be dispatched: {response}"
    );
    child.kill().unwrap();
    child.wait().unwrap();
}
