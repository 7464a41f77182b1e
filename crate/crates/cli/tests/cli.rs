use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn astprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_astprobe"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = astprobe(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> String {
    path.display().to_string()
}

/// Data rows of a report: everything after the `#` header and column line.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn synth(dir: &Path, family: &str, count: &str) -> String {
    ok(&["synth-gen", "--out-dir", &p(dir), "--family", family, "--count", count, "--seed", "1"]);
    p(&dir.join("manifest.json"))
}

#[test]
fn empty_manifest_exits_with_bad_input() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = tmp.path().join("manifest.json");
    fs::write(&manifest, r#"{"snippets": []}"#).unwrap();
    let out = astprobe(&["align", "--manifest", &p(&manifest), "--out-dir", &p(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty corpus"));
}

#[test]
fn missing_manifest_and_bad_values_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = p(&tmp.path().join("nope.json"));
    assert_eq!(astprobe(&["align", "--manifest", &missing]).status.code(), Some(2));
    let manifest = synth(&tmp.path().join("c"), "nary", "5");
    let out = astprobe(&["induce", "--manifest", &manifest, "--layer", "0", "--fn", "L1"]);
    assert_eq!(out.status.code(), Some(2), "L1 over attention is a source/function mismatch");
    let out = astprobe(&["induce", "--manifest", &manifest, "--layer", "0", "--source", "weights"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "colour = red\n").unwrap();
    let out = astprobe(&["--config", &p(&cfg), "report", "--out-dir", &p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key"));
}

#[test]
fn synthetic_syntactic_head_is_fully_aligned() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("c"), "nary", "40");
    let out = tmp.path().join("o");
    ok(&["align", "--manifest", &manifest, "--out-dir", &p(&out)]);
    let table = rows(&out.join("alignment.csv"));
    assert_eq!(table.len(), 6, "2 layers x 3 heads");
    let l0h0 = table.iter().find(|r| r[0] == "0" && r[1] == "0").unwrap();
    assert_eq!(l0h0[3], "1.000000");
    // The uniform head never crosses the threshold.
    let l0h2 = table.iter().find(|r| r[0] == "0" && r[1] == "2").unwrap();
    assert_eq!((l0h2[2].as_str(), l0h2[3].as_str()), ("0", ""));
    assert!(out.join("heatmaps/alignment_grid.svg").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("c"), "nary", "10");
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "# thresholds\nthreshold = 0.8\nmin-count = 1\n").unwrap();
    let out = tmp.path().join("o");
    let base = ["--config", &p(&cfg), "align", "--manifest", &manifest, "--out-dir", &p(&out)];
    ok(&base);
    let header = fs::read_to_string(out.join("alignment.csv")).unwrap();
    assert!(header.contains("# config threshold=0.8\n"));
    assert!(header.contains("# config min_count=1\n"));

    let mut flagged = base.to_vec();
    flagged.extend(["--threshold", "0.5"]);
    ok(&flagged);
    let header = fs::read_to_string(out.join("alignment.csv")).unwrap();
    assert!(header.contains("# config threshold=0.5\n"));
    assert!(header.contains("# config min_count=1\n"));
    assert!(!header.contains("manifest"), "paths stay out of report headers");
}

#[test]
fn binary_family_is_recovered_exactly() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("c"), "binary", "30");
    let out = tmp.path().join("o");
    let stdout = ok(&[
        "induce", "--manifest", &manifest, "--out-dir", &p(&out), "--source", "hidden", "--layer", "2", "--fn", "L1",
        "--lambda", "0", "--baselines", "true",
    ]);
    assert_eq!(stdout.trim(), "f1 1.000000");
    let table = rows(&out.join("induction_report.csv"));
    assert_eq!(table[0][..7], ["induced", "hidden", "L1", "2", "-", "0", "1.000000"]);
    let f1 = |name: &str| table.iter().find(|r| r[0] == name).unwrap()[6].parse::<f64>().unwrap();
    assert!(f1("right-branching") > f1("left-branching"));
    let trees = fs::read_to_string(out.join("trees.txt")).unwrap();
    assert_eq!(trees.lines().count(), 30);
}

#[test]
fn probe_round_trip_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = synth(&tmp.path().join("c"), "nary", "60");
    let out = tmp.path().join("o");
    ok(&["probe-train", "--manifest", &manifest, "--out-dir", &p(&out), "--layer", "1", "--epochs", "20"]);
    let report = fs::read_to_string(out.join("probe_report.csv")).unwrap();
    let dspr: f64 = report.lines().find_map(|l| l.strip_prefix("dspr,")).unwrap().trim_end_matches(',').parse().unwrap();
    assert!(dspr > 0.9, "planted layer gives DSpr {dspr}");

    let eval = tmp.path().join("e");
    ok(&["probe-eval", "--manifest", &manifest, "--out-dir", &p(&eval), "--model", &p(&out.join("probe.sct"))]);
    assert!(eval.join("probe_report.csv").exists());

    ok(&["report", "--out-dir", &p(&out)]);
    let summary = fs::read_to_string(out.join("summary.md")).unwrap();
    assert!(summary.contains("## Structural probe"));
}

#[test]
fn reports_do_not_depend_on_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let a = synth(&tmp.path().join("a"), "nary", "8");
    let b = synth(&tmp.path().join("deeper/b"), "nary", "8");
    for (m, o) in [(&a, "oa"), (&b, "ob")] {
        ok(&["variability", "--manifest", m, "--out-dir", &p(&tmp.path().join(o))]);
    }
    let read = |o: &str| fs::read(tmp.path().join(o).join("variability.csv")).unwrap();
    assert_eq!(read("oa"), read("ob"));
}
