use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halo-sim"))
        .args(args)
        .current_dir(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../.."))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("halo-sim-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn verify_passes_bundled_scenario() {
    let o = bin(&["verify", "scenarios/data_health.toml"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS switches_to_gnss"));
}

#[test]
fn verify_fails_without_the_door_logic() {
    let o = bin(&["verify", "scenarios/behavioral.toml", "--disable-halo-node", "behavioral"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL merge_only_after_lead"));
}

#[test]
fn unknown_safety_node_is_a_usage_error() {
    let o = bin(&["run", "scenarios/data_health.toml", "--disable-halo-node", "ekf"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("halo.disabled"));
}

#[test]
fn missing_scenario_is_reported() {
    let o = bin(&["run", "scenarios/nope.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn fmeca_prints_the_table() {
    let o = bin(&["fmeca"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("node_health") && text.contains("Remote") && text.contains("Major"));
    assert!(text.contains("behavioral_safety") && text.contains("High"));
}

#[test]
fn run_writes_trace_and_metrics_then_plot_renders() {
    let dir = scratch("plot");
    let trace = dir.join("trace.jsonl");
    let metrics = dir.join("metrics.json");
    let o = bin(&[
        "run",
        "scenarios/behavioral.toml",
        "--seed",
        "3",
        "--trace",
        trace.to_str().unwrap(),
        "--metrics",
        metrics.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(m["seed"], 3);
    assert_eq!(m["merges"].as_array().unwrap().len(), 1);

    let out = dir.join("svg");
    let o = bin(&["plot", trace.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["rates.svg", "covariance.svg", "separation.svg"] {
        let svg = std::fs::read_to_string(out.join(f)).unwrap();
        assert!(svg.starts_with("<svg"), "{f}");
    }
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn same_seed_same_trace() {
    let dir = scratch("det");
    let (a, b) = (dir.join("a.jsonl"), dir.join("b.jsonl"));
    for p in [&a, &b] {
        let o = bin(&["run", "scenarios/node_health.toml", "--trace", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    std::fs::remove_dir_all(&dir).ok();
}
