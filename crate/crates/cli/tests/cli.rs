use std::path::Path;
use std::process::{Command, Output};
use std::time::Duration;

use serde_json::Value;

use roadtrace_core::eval::{geo_precision_recall, EvalConfig};
use roadtrace_core::graph_io::read_graph;

fn roadtrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roadtrace"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn json_file(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let out = roadtrace(&[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(roadtrace(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(roadtrace(&["trace"]).status.code(), Some(1));
    assert_eq!(roadtrace(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_input_is_a_data_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = roadtrace(&["trace", "--input", "missing.csv", "--out", &p(tmp.path(), "o.graph")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
}

#[test]
fn bad_config_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = p(tmp.path(), "c.json");
    std::fs::write(&cfg, r#"{"trace": {"step": 20}}"#).unwrap();
    let out = roadtrace(&["eval", "a", "b", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
}

#[test]
fn invalid_flag_values_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let (g, t) = (p(tmp.path(), "t.graph"), p(tmp.path(), "t.csv"));
    let out = roadtrace(&["synth", "--out-graph", &g, "--out-trips", &t, "--kind", "straight", "--n-blocks", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let out = roadtrace(&["synth", "--out-graph", &g, "--out-trips", &t, "--sigma", "-1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pipeline_on_a_straight_road() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (truth, trips) = (p(d, "truth.graph"), p(d, "trips.csv"));
    let out = roadtrace(&[
        "synth", "--kind", "straight", "--length-m", "500", "--trips", "50", "--out-graph", &truth, "--out-trips", &trips,
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let (traced, report) = (p(d, "traced.graph"), p(d, "report.json"));
    let trace_args = [
        "trace", "--input", &trips, "--out", &traced, "--report", &report, "--seed-at", "-87.6298,41.8781",
    ];
    assert_eq!(roadtrace(&trace_args).status.code(), Some(0));
    let first_graph = std::fs::read_to_string(&traced).unwrap();
    let mut first_report = json_file(&report);
    assert_eq!(first_report["stop_reason"], "exhausted");
    assert!(first_report["edges_added"].as_u64().unwrap() >= 20);
    assert_eq!(roadtrace(&trace_args).status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&traced).unwrap(), first_graph);
    let mut second_report = json_file(&report);
    for r in [&mut first_report, &mut second_report] {
        r.as_object_mut().unwrap().remove("wall_time_s");
    }
    assert_eq!(first_report, second_report);

    let scores = p(d, "eval.json");
    assert_eq!(roadtrace(&["eval", &traced, &truth, "--out", &scores]).status.code(), Some(0));
    let e = json_file(&scores);
    assert!(e["precision"].as_f64().unwrap() >= 0.95, "{e}");
    assert!(e["recall"].as_f64().unwrap() >= 0.95, "{e}");

    let refined = p(d, "refined.graph");
    assert_eq!(roadtrace(&["refine", "--input", &traced, "--out", &refined]).status.code(), Some(0));
    let g = read_graph(&std::fs::read_to_string(&refined).unwrap()).unwrap();
    assert!(g.vertex_count() < read_graph(&first_graph).unwrap().vertex_count());

    let base = p(d, "baseline.graph");
    let out = roadtrace(&["baseline", "--input", &trips, "--out", &base, "--cell-size", "5", "--threshold", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(stdout["edges"].as_u64().unwrap() > 0);
    let t = read_graph(&std::fs::read_to_string(&truth).unwrap()).unwrap();
    let b = read_graph(&std::fs::read_to_string(&base).unwrap()).unwrap();
    let r = geo_precision_recall(&b.reprojected(*t.projection()), &t, &EvalConfig::default());
    assert!(r.recall > 0.9, "{r:?}");
}

#[test]
fn eval_of_a_graph_against_itself_is_perfect() {
    let tmp = tempfile::tempdir().unwrap();
    let (g, t) = (p(tmp.path(), "g.graph"), p(tmp.path(), "t.csv"));
    let synth = ["synth", "--kind", "grid", "--n-blocks", "2", "--trips", "3", "--out-graph", &g, "--out-trips", &t];
    assert_eq!(roadtrace(&synth).status.code(), Some(0));
    let out = roadtrace(&["eval", &g, &g]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["precision"], 1.0);
    assert_eq!(v["recall"], 1.0);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let (g, t) = (p(d, "g.graph"), p(d, "t.csv"));
    let cfg = p(d, "c.json");
    std::fs::write(
        &cfg,
        r#"{"synth": {"graph_kind": {"type": "grid", "n_blocks": 2, "block_m": 100.0}, "n_trips": 40},
            "trace": {"max_iterations": 500}}"#,
    )
    .unwrap();
    assert_eq!(roadtrace(&["synth", "--config", &cfg, "--out-graph", &g, "--out-trips", &t]).status.code(), Some(0));
    let truth = read_graph(&std::fs::read_to_string(&g).unwrap()).unwrap();
    assert_eq!(truth.edge_count(), 12);

    let (o, r) = (p(d, "o.graph"), p(d, "r.json"));
    let out = roadtrace(&["trace", "--config", &cfg, "--input", &t, "--out", &o, "--report", &r, "--max-iterations", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json_file(&r);
    assert_eq!(report["iterations"], 3);
    assert_eq!(report["stop_reason"], "max_iterations");
}

#[test]
fn serve_answers_health_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_roadtrace"))
        .args(["serve", "--port", &port.to_string(), "--data-dir", &p(tmp.path(), "data")])
        .env("RUST_LOG", "warn")
        .spawn()
        .unwrap();
    let rt = tokio::runtime::Runtime::new().unwrap();
    let ok = rt.block_on(async {
        for _ in 0..100 {
            if let Ok(r) = reqwest::get(format!("http://127.0.0.1:{port}/healthz")).await {
                return r.status() == 200;
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        false
    });
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(ok);
}
