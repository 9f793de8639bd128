use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn arbiter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arbiter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("one JSON object on stdout")
}

fn smoke_setup(dir: &Path) -> String {
    let map = dir.join("line.map");
    fs::write(&map, "S.G\n").unwrap();
    let cfg = dir.join("smoke.cfg");
    fs::write(
        &cfg,
        format!(
            "# smoke run\nrun.map = {}\nrun.sessions = 1\nrun.total_episodes = 5\n",
            map.display()
        ),
    )
    .unwrap();
    cfg.to_string_lossy().into_owned()
}

#[test]
fn maps_lists_bundled_maps() {
    let v = stdout_json(&arbiter(&["maps"]));
    let maps = v.as_array().unwrap();
    let names: Vec<_> = maps.iter().map(|m| m["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["easy", "hard"]);
    assert_eq!(maps[0]["width"], 7);
    assert_eq!(maps[0]["shortest_path"], 8);
    assert_eq!(maps[1]["shortest_path"], 40);
}

#[test]
fn maps_rejects_a_broken_file() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.map");
    fs::write(&bad, "S.#\n##G\n").unwrap();
    let out = arbiter(&["maps", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn config_errors_exit_with_one() {
    assert_eq!(arbiter(&["train", "--config", "missing.cfg"]).status.code(), Some(1));
    assert_eq!(arbiter(&["train", "--set", "run.no_such_key=3"]).status.code(), Some(1));
    assert_eq!(arbiter(&["train", "--set", "run.total_episodes=zero"]).status.code(), Some(1));
    assert_eq!(arbiter(&["sweep", "--accuracies", "0.5,1.5"]).status.code(), Some(1));
    assert_eq!(arbiter(&["bogus"]).status.code(), Some(1));
}

#[test]
fn train_writes_metrics_summary_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_setup(dir.path());
    let out_dir = dir.path().join("out");
    let out = arbiter(&["train", "--config", &cfg, "--out", out_dir.to_str().unwrap(), "--jobs", "1"]);
    let summary = stdout_json(&out);
    assert_eq!(summary["summary"]["sessions"], 1);
    assert_eq!(summary["total_episodes"], 5);

    let csv = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("session,episode,"));
    let saved: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(saved, summary);

    let ckpt = out_dir.join("session-000.ckpt");
    let eval = stdout_json(&arbiter(&["eval", "--config", &cfg, "--checkpoint", ckpt.to_str().unwrap()]));
    assert!(eval["eval_return"].is_number());
    assert_eq!(eval["optimal_return"], 98.0);
}

#[test]
fn same_invocation_gives_identical_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_setup(dir.path());
    let run = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        stdout_json(&arbiter(&[
            "train", "--config", &cfg, "--seed", seed, "--set", "run.sessions=3", "--out",
            out_dir.to_str().unwrap(),
        ]));
        fs::read(out_dir.join("metrics.csv")).unwrap()
    };
    let a = run("a", "11");
    assert_eq!(a, run("b", "11"));
    assert_ne!(a, run("c", "12"));
}

#[test]
fn sweep_reports_one_summary_per_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_setup(dir.path());
    let out_dir = dir.path().join("sweep");
    let v = stdout_json(&arbiter(&[
        "sweep", "--config", &cfg, "--accuracies", "0.5,1.0", "--set", "run.mode=confidence_only",
        "--out", out_dir.to_str().unwrap(),
    ]));
    let rows = v["sweep"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["accuracy"], 0.5);
    assert!(out_dir.join("acc-0.50-metrics.csv").exists());
    assert!(out_dir.join("acc-1.00-metrics.csv").exists());
}

#[test]
fn eval_rejects_a_corrupt_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ckpt");
    fs::write(&bad, b"not a checkpoint").unwrap();
    let out = arbiter(&["eval", "--checkpoint", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn serve_runs_headless_to_completion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_setup(dir.path());
    let out_dir = dir.path().join("live");
    let v = stdout_json(&arbiter(&[
        "serve", "--config", &cfg, "--bind", "127.0.0.1:0", "--start", "--set",
        "service.speed=100000", "--out", out_dir.to_str().unwrap(),
    ]));
    assert_eq!(v["episodes"], 5);
    assert_eq!(fs::read_to_string(out_dir.join("metrics.csv")).unwrap().lines().count(), 6);
    assert!(out_dir.join("live.ckpt").exists());
}
