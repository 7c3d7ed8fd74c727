use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn salet(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salet"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn files(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    v.sort();
    v
}

fn example() -> String {
    data("running_example.json").display().to_string()
}

#[test]
fn gen_is_reproducible_and_sized() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    for dir in [&a, &b] {
        let o = salet(dir.path(), &["--seed", "7", "gen", "--profile", "automotive", "--count", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let sets = files(a.path(), "-7.json");
    assert_eq!(sets.len(), 1);
    let doc: Value = serde_json::from_str(&fs::read_to_string(&sets[0]).unwrap()).unwrap();
    let n = doc["tasks"].as_array().unwrap().len();
    assert!((80..=100).contains(&n), "{n} tasks");
    for name in ["automotive-7.json", "automotive-8.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    assert_eq!(files(a.path(), ".manifest.json").len(), 2);
}

#[test]
fn invalid_profile_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let profile = dir.path().join("bad.toml");
    fs::write(&profile, "name = \"bad\"\nnum_cores = 0\n").unwrap();
    let o = salet(dir.path(), &["gen", "--profile", profile.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn analyze_running_example() {
    let dir = TempDir::new().unwrap();
    let o = salet(dir.path(), &["analyze", &example(), "--model", "let,wcrt,sa"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("let chain 0 [1->2->3]: alpha=15 delta=15"), "{text}");
    assert!(text.contains("wcrt chain 0 [1->2->3]: alpha=11 delta=8"), "{text}");
    assert!(text.contains("sa chain 0 [1->2->3]: alpha=11 delta=8"), "{text}");
    assert_eq!(files(dir.path(), ".json").len(), 4, "three reports and a manifest");

    let jlds = data("running_example.jlds.json").display().to_string();
    let o = salet(dir.path(), &["analyze", &example(), "--model", "sa", "--jlds", &jlds]);
    assert!(stdout(&o).contains("alpha=9 delta=9"));
}

#[test]
fn verify_passes_and_detects_mismatch() {
    let dir = TempDir::new().unwrap();
    let o = salet(dir.path(), &["verify", &example()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).matches(" ok").count(), 3);

    salet(dir.path(), &["analyze", &example(), "--model", "sa"]);
    let report: Value = serde_json::from_str(&fs::read_to_string(&files(dir.path(), ".sa.json")[0]).unwrap()).unwrap();
    let mut iv = report["intervals"].clone();
    iv["intervals"][2]["end"] = 3.into();
    let bad = dir.path().join("bad-intervals.json");
    fs::write(&bad, iv.to_string()).unwrap();
    let o = salet(dir.path(), &["verify", &example(), "--intervals", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("MISMATCH"));

    let o = salet(dir.path(), &["verify", &example(), "--horizon", "15"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn search_budget_zero_and_age() {
    let dir = TempDir::new().unwrap();
    let o = salet(dir.path(), &["search", &example(), "--budget-expansions", "0"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("alpha=11 delta=8"));
    let o = salet(dir.path(), &["search", &example(), "--objective", "age", "--budget-expansions", "200"]);
    let text = stdout(&o);
    let alpha: i64 = text.split("alpha=").nth(1).unwrap().split_whitespace().next().unwrap().parse().unwrap();
    assert!(alpha <= 9, "{text}");
    let search: Value = serde_json::from_str(&fs::read_to_string(&files(dir.path(), ".search.json")[0]).unwrap()).unwrap();
    assert_eq!(search["objective"], "age");
    assert!(!files(dir.path(), ".search.manifest.json").is_empty());
}

#[test]
fn infeasible_set_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let set = dir.path().join("over.json");
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(data("running_example.json")).unwrap()).unwrap();
    for t in doc["tasks"].as_array_mut().unwrap() {
        t["wcet"] = 2.into();
    }
    fs::write(&set, doc.to_string()).unwrap();
    let o = salet(&dir.path().join("out"), &["search", set.to_str().unwrap(), "--budget-expansions", "1"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn compare_normalizes_against_let() {
    let dir = TempDir::new().unwrap();
    let runs = dir.path().join("runs");
    let o = salet(&runs, &["search", &example(), "--budget-expansions", "200", "--baselines"]);
    assert!(o.status.success());
    let o = salet(dir.path(), &["compare", runs.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert!(csv.contains("chain,running-example,0,sa+search,alpha_norm,0.600000"), "{csv}");
    assert!(csv.contains("chain,running-example,0,sa,alpha_norm,0.733333"), "{csv}");
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("compare.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "compare");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 4);
}
