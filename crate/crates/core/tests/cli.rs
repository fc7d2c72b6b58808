use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn posefov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_posefov")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL_CAMERA: &str = r#"{"fx": 455.75, "fy": 455.75, "cx": 320.0, "cy": 180.0, "width": 640, "height": 360}"#;

fn synth(dir: &Path, name: &str, scenario: Value) -> PathBuf {
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, scenario.to_string()).unwrap();
    let out = dir.join(name);
    let o = posefov(&["synth", "--scenario", s(&path), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

fn small(extra: Value) -> Value {
    let mut v = json!({"duration": 2.0, "intrinsics": serde_json::from_str::<Value>(SMALL_CAMERA).unwrap()});
    v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
    v
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_owned()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_owned(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn synth_process_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let rec = synth(dir.path(), "rec", small(json!({"trajectory": "walk_straight"})));
    let results = dir.path().join("results.jsonl");
    let o = posefov(&["process", "--input", s(&rec), "--output", s(&results)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = String::from_utf8(o.stdout).unwrap();
    assert!(
        summary.contains("frames: 60") && summary.contains("tracks: 1") && summary.contains("valid gaze: 100.0%"),
        "{summary}"
    );
    assert_eq!(std::fs::read_to_string(&results).unwrap().lines().count(), 60);

    let report = dir.path().join("report.json");
    let overlay = dir.path().join("overlay.jsonl");
    let o =
        posefov(&["eval", "--results", s(&results), "--gt", s(&rec), "--report", s(&report), "--overlay", s(&overlay)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("MPJPE"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["matched"], 60);
    assert!(r["mpjpe_mean"].as_f64().unwrap() < 0.002, "{r}");
    assert_eq!(r["fov_accuracy"], 1.0);
    let first: Value =
        serde_json::from_str(std::fs::read_to_string(&overlay).unwrap().lines().next().unwrap()).unwrap();
    let colors: Vec<_> =
        first["arrows"].as_array().unwrap().iter().map(|a| (a["kind"].clone(), a["color"].clone())).collect();
    assert!(colors.contains(&(json!("gaze"), json!("red"))));
    assert!(colors.contains(&(json!("torso"), json!("green"))));
}

#[test]
fn eval_tolerance_zero_needs_exact_timestamps() {
    let dir = tempfile::tempdir().unwrap();
    let rec = synth(dir.path(), "rec", small(json!({"duration": 1.0})));
    let results = dir.path().join("results.jsonl");
    assert!(posefov(&["process", "--input", s(&rec), "--output", s(&results)]).status.success());
    let shifted = dir.path().join("shifted.jsonl");
    let text: String = std::fs::read_to_string(&results)
        .unwrap()
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let mut v: Value = serde_json::from_str(l).unwrap();
            if i % 2 == 1 {
                v["timestamp"] = json!(v["timestamp"].as_f64().unwrap() + 0.001);
            }
            format!("{v}\n")
        })
        .collect();
    std::fs::write(&shifted, text).unwrap();
    let report = dir.path().join("report.json");
    let o = posefov(&["eval", "--results", s(&shifted), "--gt", s(&rec), "--report", s(&report), "--tolerance", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["matched"], 15);
    assert_eq!(r["unmatched_results"], 15);
}

#[test]
fn eval_of_empty_results_reports_zero_matches() {
    let dir = tempfile::tempdir().unwrap();
    let rec = synth(dir.path(), "rec", small(json!({"duration": 0.5})));
    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let report = dir.path().join("report.json");
    let o = posefov(&["eval", "--results", s(&empty), "--gt", s(&rec), "--report", s(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["matched"], 0);
    assert_eq!(r["unmatched_gt"], 15);
}

#[test]
fn eval_of_missing_inputs_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = posefov(&["eval", "--results", "/nonexistent/r.jsonl", "--gt", s(dir.path()), "--report", s(&report)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_intrinsics_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("frames.jsonl"), "").unwrap();
    let o = posefov(&["process", "--input", s(dir.path()), "--output", s(&dir.path().join("r.jsonl"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("intrinsics"), "{}", stderr(&o));
}

#[test]
fn malformed_frame_line_names_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let rec = synth(dir.path(), "rec", small(json!({"duration": 0.2})));
    let frames = rec.join("frames.jsonl");
    let mut text = std::fs::read_to_string(&frames).unwrap();
    text.push_str("{\"timestamp\": 9.0, \"oops\": 1}\n");
    std::fs::write(&frames, text).unwrap();
    let o = posefov(&["process", "--input", s(&rec), "--output", s(&dir.path().join("r.jsonl"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("frames.jsonl:7"), "{}", stderr(&o));
}

#[test]
fn bad_config_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let rec = synth(dir.path(), "rec", small(json!({"duration": 0.2})));
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"kalman.qq": 1}"#).unwrap();
    let o = posefov(&["process", "--input", s(&rec), "--output", s(&dir.path().join("r.jsonl")), "--config", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("qq"), "{}", stderr(&o));
    let o = posefov(&["process", "--input", s(&rec), "--output", s(&dir.path().join("r.jsonl")), "--fov-deg", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_trajectory_exits_2_listing_options() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, r#"{"trajectory": "moonwalk"}"#).unwrap();
    let o = posefov(&["synth", "--scenario", s(&path), "--out", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for name in ["walk_straight", "arms_crossed_walk", "sudden_dodge", "zigzag_head_turns"] {
        assert!(e.contains(name), "{e}");
    }
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = small(json!({"seed": 5, "noise": {"keypoint_px": 1.5, "depth_mm": 10.0, "dropout": 0.2}}));
    let a = synth(dir.path(), "a", scenario.clone());
    let b = synth(dir.path(), "b", scenario);
    assert_eq!(tree(&a), tree(&b));
}

#[test]
fn full_dropout_gives_no_tracks() {
    let dir = tempfile::tempdir().unwrap();
    let rec = synth(dir.path(), "rec", small(json!({"duration": 0.5, "noise": {"dropout": 1.0}})));
    let results = dir.path().join("r.jsonl");
    let o = posefov(&["process", "--input", s(&rec), "--output", s(&results)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8(o.stdout).unwrap().contains("tracks: 0"));
    assert_eq!(std::fs::read_to_string(&results).unwrap(), "");
}

#[test]
fn help_documents_every_flag() {
    for (cmd, flags) in [
        ("process", &["--input", "--output", "--config", "--fov-deg"][..]),
        ("synth", &["--scenario", "--out"][..]),
        ("eval", &["--results", "--gt", "--report", "--tolerance", "--config", "--fov-deg", "--overlay"][..]),
    ] {
        let o = posefov(&[cmd, "--help"]);
        assert!(o.status.success());
        let text = String::from_utf8(o.stdout).unwrap();
        for f in flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
        assert!(text.contains("default"), "{cmd} --help names no defaults:\n{text}");
    }
}
