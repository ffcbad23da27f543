use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splmart"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .env_remove("SPLMART_SEED")
        .output()
        .unwrap()
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn gram_decay_reports_the_uniform_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&example("gram-decay.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let s = summary(tmp.path());
    assert_eq!(s["pass"], true);
    let fits = s["fitted"]["fits"].as_array().unwrap();
    assert_eq!(fits.len(), 5);
    for f in fits {
        let q = f["q_hat"].as_f64().unwrap();
        assert!((q - (2.0 - 3f64.sqrt())).abs() <= 0.02, "{q}");
    }
    assert!(tmp.path().join("plotdata/offset_maxima.csv").exists());
}

#[test]
fn tower_check_on_dyadic_knots_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&example("tower-check.json"), tmp.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# splmart results v1"));
    assert_eq!(lines.next().unwrap(), "experiment,n,dim,index,t,metric,value");
    let defects: Vec<f64> = csv
        .lines()
        .filter(|l| l.contains(",tower_defect,"))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    // all pairs of [7, 15, 31, 63]
    assert_eq!(defects.len(), 6);
    assert!(defects.iter().all(|&d| d <= 1e-9));
    // the verdict is the maximum of the rows
    let v = &summary(tmp.path())["verdicts"][0];
    assert_eq!(v["value"].as_f64().unwrap(), defects.iter().copied().fold(0.0, f64::max));
}

#[test]
fn malformed_config_exits_1_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("bad.json");
    let text = fs::read_to_string(example("tower-check.json"))
        .unwrap()
        .replace("[7, 15, 31, 63]", "[7, 31, 15]");
    fs::write(&config, text).unwrap();
    let out_dir = tmp.path().join("out");
    let out = run(&config, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:5:") && err.contains("strictly increasing"), "{err}");
    assert!(!out_dir.exists());

    fs::write(&config, "{\n  \"experiment\": \"gram-decay\",\n  \"k\": 2,,\n}").unwrap();
    let out = run(&config, &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json:3:"));
    assert!(!out_dir.exists());

    let out = run(&tmp.path().join("missing.json"), &out_dir, &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out_dir.exists());
}

#[test]
fn failing_verdicts_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("strict.json");
    // the left interval keeps infinitely many knots, so its truncation
    // certificate cannot vanish
    let text = fs::read_to_string(example("converge.json"))
        .unwrap()
        .replace("[0.55, 0.6,", "[0.3, 0.55, 0.6,");
    fs::write(&config, text).unwrap();
    let out = run(&config, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&tmp.path().join("out"));
    assert_eq!(s["pass"], false);
}

#[test]
fn numerical_failure_is_recorded_and_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("dense.json");
    // dyadic knots accumulate everywhere: no interval for a limit basis
    fs::write(
        &config,
        r#"{"experiment": "limit-construct", "k": 2, "family": "dyadic", "n_schedule": [3, 7], "function": {"name": "sin2pi"}}"#,
    )
    .unwrap();
    let out = run(&config, &tmp.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(2));
    let s = summary(&tmp.path().join("out"));
    assert!(s["error"].as_str().unwrap().contains("no interval"));
}

#[test]
fn runs_are_byte_identical_and_seeded() {
    let tmp = tempfile::tempdir().unwrap();
    let config = example("maximal.json");
    let read = |d: &str| fs::read(tmp.path().join(d).join("results.csv")).unwrap();
    run(&config, &tmp.path().join("a"), &["--seed", "7"]);
    run(&config, &tmp.path().join("b"), &["--seed", "7"]);
    run(&config, &tmp.path().join("c"), &["--seed", "8"]);
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    // the environment override gives the same run as the flag
    let out = bin()
        .args(["run"])
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("d"))
        .env("SPLMART_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read("a"), read("d"));
    assert_eq!(summary(&tmp.path().join("d"))["seed"], 7);
}

#[test]
fn every_example_config_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut names: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    names.sort();
    assert_eq!(names.len(), 9);
    for path in names {
        let out_dir = tmp.path().join(path.file_stem().unwrap());
        let out = run(&path, &out_dir, &[]);
        assert_eq!(out.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&out.stdout));
    }
}

#[test]
fn list_text_and_json() {
    let out = bin().arg("list").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("cantor-devil-staircase"));
    assert!(text.contains("geometric-to-point"));
    assert!(text.contains("side: left|right|both"));

    let out = bin().args(["list", "--format=json"]).output().unwrap();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let geo = v["knot_families"]
        .as_array()
        .unwrap()
        .iter()
        .find(|f| f["name"] == "geometric-to-point")
        .unwrap();
    assert!(geo["params"].as_array().unwrap().iter().any(|p| p["name"] == "side"));
    assert!(v["functions"].as_array().unwrap().iter().any(|f| f["name"] == "cantor-devil-staircase"));
    assert_eq!(v["experiments"].as_array().unwrap().len(), 9);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(bin().arg("frobnicate").output().unwrap().status.code(), Some(1));
    assert_eq!(bin().args(["list", "--format=yaml"]).output().unwrap().status.code(), Some(1));
}
