use std::path::Path;
use std::process::{Command, Output};

use navimpress::dataio::{read_dataset, read_map};
use navimpress::sim::default_warehouse;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_navimpress"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn small_dataset(dir: &Path, participants: &str) {
    ok(dir, &["simulate", "--participants", participants, "--tasks", "2", "--seed", "3", "--out", "d.jsonl"]);
}

#[test]
fn help_lists_every_flag_with_its_default() {
    for sub in ["simulate", "train", "eval", "loocv", "export-traces", "plan", "serve", "make-map"] {
        let out = bin().args([sub, "--help"]).output().unwrap();
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        // Each flag's entry runs until the next line that starts a flag.
        let mut entries: Vec<String> = Vec::new();
        for line in text.lines().map(str::trim_start) {
            if line.starts_with("--") || line.starts_with("-h,") {
                entries.push(line.to_string());
            } else if let Some(last) = entries.last_mut() {
                last.push(' ');
                last.push_str(line);
            }
        }
        for entry in entries.iter().filter(|e| e.starts_with("--")) {
            let flag = entry.split_whitespace().next().unwrap();
            assert!(required_flag(sub, flag) || entry.contains("[default:"), "{sub}: flag without default: {entry}");
        }
        assert!(entries.len() > 1);
    }
}

fn required_flag(sub: &str, flag: &str) -> bool {
    match sub {
        "eval" => ["--model", "--dataset"].contains(&flag),
        "serve" => ["--dataset", "--plan"].contains(&flag),
        "train" | "loocv" | "export-traces" | "plan" => flag == "--dataset" || (flag == "--out" && sub != "loocv"),
        "simulate" | "make-map" => flag == "--out",
        _ => false,
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(d, &["simulate"]).status.code(), Some(1));
    assert_eq!(run(d, &["train", "--dataset", "missing.jsonl", "--out", "m.json"]).status.code(), Some(2));
    std::fs::write(d.join("bad.jsonl"), "{\"format\":\"something-else\"}\n").unwrap();
    assert_eq!(run(d, &["train", "--dataset", "bad.jsonl", "--out", "m.json"]).status.code(), Some(2));
    small_dataset(d, "1");
    let out = run(d, &["train", "--dataset", "d.jsonl", "--model", "gnn", "--features", "facial", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not supported"));
    assert!(!d.join("m.json").exists());
    // Output into a directory that does not exist.
    let out = run(d, &["make-map", "--out", "nowhere/map.txt"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_reproducible_and_scales() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(d, &["simulate", "--participants", "1", "--tasks", "1", "--out", "a.jsonl"]);
    assert!(stdout.starts_with("samples: "));
    ok(d, &["simulate", "--participants", "1", "--tasks", "1", "--out", "b.jsonl"]);
    let a = std::fs::read(d.join("a.jsonl")).unwrap();
    assert_eq!(a, std::fs::read(d.join("b.jsonl")).unwrap());
    let ds = read_dataset(&d.join("a.jsonl")).unwrap();
    assert!(!ds.samples.is_empty());
    assert!(ds.samples.iter().all(|s| s.participant_id == "p00" && s.task_id == 0));
    ok(d, &["simulate", "--participants", "1", "--tasks", "1", "--seed", "9", "--out", "c.jsonl"]);
    assert_ne!(a, std::fs::read(d.join("c.jsonl")).unwrap());
}

#[test]
fn custom_map_is_referenced_relative_to_the_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["make-map", "--out", "w.map"]);
    assert_eq!(read_map(&d.join("w.map")).unwrap(), default_warehouse());
    ok(d, &["simulate", "--participants", "1", "--tasks", "1", "--map", "w.map", "--out", "d.jsonl"]);
    let ds = read_dataset(&d.join("d.jsonl")).unwrap();
    assert_eq!(ds.header.map.as_deref(), Some("w.map"));
    ok(d, &["export-traces", "--dataset", "d.jsonl", "--out", "traces"]);
}

#[test]
fn train_eval_pipeline_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "3");
    let train = |out: &str, report: &str| {
        ok(d, &[
            "train", "--dataset", "d.jsonl", "--model", "mlp", "--features", "both", "--lr", "0.001", "--batch-size", "16",
            "--dropout", "0.1", "--max-epochs", "3", "--seed", "5", "--out", out, "--report", report,
        ])
    };
    train("m1.json", "r1.json");
    train("m2.json", "r2.json");
    assert_eq!(std::fs::read(d.join("m1.json")).unwrap(), std::fs::read(d.join("m2.json")).unwrap());
    assert_eq!(std::fs::read(d.join("r1.json")).unwrap(), std::fs::read(d.join("r2.json")).unwrap());

    let stdout = ok(d, &["eval", "--model", "m1.json", "--dataset", "d.jsonl", "--seed", "5", "--stratify-phase", "--out", "e.json"]);
    assert!(stdout.contains("competence\tmlp"));
    assert!(stdout.contains("mae before switch"));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("e.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["n"], 6);
    assert_eq!(report["metrics"]["binary"], false);

    ok(d, &["eval", "--model", "m1.json", "--dataset", "d.jsonl", "--seed", "5", "--binary", "--out", "b.json"]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("b.json")).unwrap()).unwrap();
    assert_eq!(report["metrics"]["binary"], true);
}

#[test]
fn loocv_reports_one_row_per_participant() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "3");
    let stdout = ok(d, &["loocv", "--dataset", "d.jsonl", "--model", "rf", "--trees", "10", "--jobs", "2", "--out", "cv.json"]);
    let rows: Vec<&str> = stdout.lines().filter(|l| l.starts_with("p0")).collect();
    assert_eq!(rows.len(), 3, "{stdout}");
    assert!(stdout.lines().last().unwrap().starts_with("mean\t"));
    assert!(stdout.contains('±'));
    let cv: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("cv.json")).unwrap()).unwrap();
    assert_eq!(cv["folds"].as_array().unwrap().len(), 3);
}

#[test]
fn export_writes_one_trace_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "1");
    ok(d, &["export-traces", "--dataset", "d.jsonl", "--out", "traces"]);
    let n = read_dataset(&d.join("d.jsonl")).unwrap().samples.len();
    assert_eq!(std::fs::read_dir(d.join("traces")).unwrap().count(), n);
}

#[test]
fn plan_covers_the_test_split() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "2");
    ok(d, &["plan", "--dataset", "d.jsonl", "--per-sample", "2", "--per-annotator", "2", "--out", "plan.json"]);
    let plan: navimpress::annotate::AssignmentPlan =
        serde_json::from_slice(&std::fs::read(d.join("plan.json")).unwrap()).unwrap();
    plan.validate().unwrap();
    assert_eq!(plan.sample_ids.len(), 4);
    assert_eq!(plan.total_assignments(), 4 * 2 * 3);
}
