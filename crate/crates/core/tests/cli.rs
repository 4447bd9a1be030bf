use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn probe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_probe")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Spec with class `l` controlled by dim `3 * l + 1`.
fn write_spec(dir: &Path, gain: f64) -> PathBuf {
    let control_map: Vec<Value> = (0..4).map(|l| json!([{ "dim": 3 * l + 1, "gain": gain }])).collect();
    let path = dir.join("spec.json");
    let spec = json!({ "n": 12, "l": 4, "control_map": control_map });
    std::fs::write(&path, spec.to_string()).unwrap();
    path
}

#[test]
fn missing_models_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = probe(&["apcr", "--out", s(&dir.path().join("a.csv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_and_bad_class_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2.0);
    assert_eq!(probe(&["apcr", "--bogus"]).status.code(), Some(2));
    let out = probe(&[
        "optimize", "--synth", s(&spec), "--class", "9", "--out", s(&dir.path().join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn apcr_output_is_reproducible_and_ranks_control_dims() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2.0);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let o = probe(&["apcr", "--synth", s(&spec), "--bases", "4", "--out", s(out), "--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);

    let text = String::from_utf8(ta).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("dim,class0,class1,class2,class3"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 12);
    for class in 0..4 {
        let column: Vec<f64> = rows.iter().map(|r| r[class]).collect();
        let top = (0..12).max_by(|&x, &y| column[x].total_cmp(&column[y])).unwrap();
        assert_eq!(top, 3 * class + 1);
    }
}

#[test]
fn apcr_writes_histogram_json_and_sets() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2.0);
    let d = dir.path();
    let o = probe(&[
        "apcr", "--synth", s(&spec), "--bases", "2", "--out", s(&d.join("a.csv")),
        "--json", s(&d.join("a.json")), "--hist", s(&d.join("h.csv")), "--class", "1",
        "--bins", "4", "--sets-dir", s(d), "--topk", "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let hist = std::fs::read_to_string(d.join("h.csv")).unwrap();
    assert_eq!(hist.lines().count(), 5);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(d.join("a.json")).unwrap()).unwrap();
    assert_eq!(doc["n"], 12);
    assert_eq!(doc["base_count"], 2);
    let set: Value = serde_json::from_str(&std::fs::read_to_string(d.join("seq_class1.json")).unwrap()).unwrap();
    assert_eq!(set["k"], 2);
    assert_eq!(set["entries"][0]["dim"], 4);
    assert_eq!(set["provenance"], "sequential");
}

#[test]
fn ir_of_a_set_with_itself_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2.0);
    let d = dir.path();
    let o = probe(&["apcr", "--synth", s(&spec), "--bases", "2", "--out", s(&d.join("a.csv")), "--sets-dir", s(d), "--topk", "3"]);
    assert!(o.status.success());
    let set = d.join("seq_class0.json");
    let out = probe(&["ir", s(&set), s(&set)]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.0000");
}

#[test]
fn optimize_then_ir_against_sequential_set() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2.0);
    let d = dir.path();
    assert!(probe(&["apcr", "--synth", s(&spec), "--out", s(&d.join("a.csv")), "--sets-dir", s(d), "--topk", "1"]).status.success());
    let o = probe(&[
        "optimize", "--synth", s(&spec), "--class", "2", "--topk", "1", "--iters", "60",
        "--out", s(&d.join("o.json")), "--set", s(&d.join("opt.json")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let res: Value = serde_json::from_str(&std::fs::read_to_string(d.join("o.json")).unwrap()).unwrap();
    assert_eq!(res["objective_history"].as_array().unwrap().len(), 60);
    let out = probe(&["ir", s(&d.join("seq_class2.json")), s(&d.join("opt.json"))]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "1.0000");
}

#[test]
fn zero_strength_manipulation_repeats_the_base() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2.0);
    let d = dir.path();
    assert!(probe(&["apcr", "--synth", s(&spec), "--bases", "2", "--out", s(&d.join("a.csv")), "--sets-dir", s(d), "--topk", "2"]).status.success());
    let o = probe(&[
        "manipulate", "--synth", s(&spec), "--set", s(&d.join("seq_class0.json")), "--strength", "0",
        "--steps", "3", "--bases", "2", "--report", s(&d.join("r.json")), "--montage", s(&d.join("m.pgm")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    for row in report.as_array().unwrap() {
        let frames = row.as_array().unwrap();
        assert_eq!(frames.len(), 4);
        assert!(frames.iter().all(|f| f["probs"] == frames[0]["probs"]));
    }
    let pgm = std::fs::read(d.join("m.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n48 8\n255\n"), "{:?}", &pgm[..12]);
}

#[test]
fn impulse_on_control_dim_takes_over() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2.0);
    let d = dir.path();
    let o = probe(&["impulse", "--synth", s(&spec), "--dim", "7", "--bases", "5", "--report", s(&d.join("r.json"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    let rows = report.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r["positive_class"] == 2), "{report}");
}

#[test]
fn malformed_model_file_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lpwf");
    std::fs::write(&bad, b"XXXXnot a model").unwrap();
    let out = probe(&["apcr", "--gen", s(&bad), "--clf", s(&fixture("classifier.lpwf")), "--out", s(&dir.path().join("a.csv"))]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at byte 0"));

    let swapped = probe(&[
        "apcr", "--gen", s(&fixture("classifier.lpwf")), "--clf", s(&fixture("generator.lpwf")),
        "--out", s(&dir.path().join("a.csv")),
    ]);
    assert_ne!(swapped.status.code(), Some(0));
}

#[test]
fn saturated_synthetic_pixels_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 1e6);
    let out = probe(&["apcr", "--synth", s(&spec), "--bases", "1", "--steps", "1", "--out", s(&dir.path().join("a.csv"))]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn translate_reports_and_draws_montage() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), 2.0);
    let d = dir.path();
    let o = probe(&[
        "translate", "--synth", s(&spec), "--from", "0", "--to", "3", "--iters", "20", "--batch", "4",
        "--samples", "3", "--out", s(&d.join("t.json")), "--montage", s(&d.join("t.pgm")),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let res: Value = serde_json::from_str(&std::fs::read_to_string(d.join("t.json")).unwrap()).unwrap();
    assert_eq!(res["target"], 3);
    assert!(std::fs::read(d.join("t.pgm")).unwrap().starts_with(b"P5\n"));
}
