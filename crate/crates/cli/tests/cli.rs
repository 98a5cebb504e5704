use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_warpbank"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("warpbank-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], config: Option<&Path>, out: &Path) -> Output {
    let mut cmd = bin();
    cmd.args(args).arg("--out").arg(out);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.in.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn bands_match_reference_edges() {
    for (name, d, edges) in [
        ("u16", "[2]", &warpbank::reference::UNIFORM16_EDGES),
        (
            "n16",
            "[8,8,8,4,4,4,2,2,2,2,2,4,4,4,8,8]",
            &warpbank::reference::NONUNIFORM16_EDGES,
        ),
    ] {
        let dir = scratch(name);
        let cfg = write_config(
            &dir,
            &format!(r#"{{"bank": {{"M": 16, "mu": 0.5, "D": {d}}}}}"#),
        );
        let o = run(&["bands"], Some(&cfg), &dir);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let rows = csv_rows(&dir.join("bands.csv"));
        assert_eq!(rows.len(), 16);
        for (row, &(l, h)) in rows.iter().zip(edges.iter()) {
            assert!((row[1].parse::<f64>().unwrap() - l).abs() <= 1e-3);
            assert!((row[2].parse::<f64>().unwrap() - h).abs() <= 1e-3);
        }
        let echo = std::fs::read_to_string(dir.join("config.json")).unwrap();
        assert!(echo.contains("\"grid_n\": 512"), "defaults must be echoed");
    }
}

#[test]
fn design_then_evaluate_and_alias_free_sentinel() {
    let dir = scratch("design");
    let o = run(&["design"], None, &dir);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h: Vec<f64> = csv_rows(&dir.join("analysis.csv"))
        .iter()
        .map(|r| r[1].parse().unwrap())
        .collect();
    for (a, b) in h.iter().zip(warpbank::reference::UNIFORM16_ANALYSIS) {
        assert!((a - b).abs() <= 1e-2);
    }
    let o = run(&["evaluate"], None, &dir);
    assert!(o.status.success());
    assert!(dir.join("transfer.csv").exists());
    let sar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("sar.json")).unwrap()).unwrap();
    assert!(sar["overall_sar_db"].as_f64().unwrap() > 39.0);

    let free = scratch("free");
    let cfg = write_config(&free, r#"{"bank": {"M": 4, "mu": 0.0, "D": [1]}}"#);
    assert!(run(&["design"], Some(&cfg), &free).status.success());
    assert!(run(&["evaluate"], Some(&cfg), &free).status.success());
    for row in csv_rows(&free.join("sar_bands.csv")) {
        assert_eq!(row[3], "inf");
    }
}

#[test]
fn simulate_is_deterministic() {
    let dir = scratch("sim");
    let cfg = write_config(&dir, r#"{"sim": {"duration": 2.0, "adapt_start": 0.5}}"#);
    assert!(run(&["simulate", "--seed", "7"], Some(&cfg), &dir)
        .status
        .success());
    let first = std::fs::read(dir.join("erle.csv")).unwrap();
    assert!(run(&["simulate", "--seed", "7"], Some(&cfg), &dir)
        .status
        .success());
    assert_eq!(first, std::fs::read(dir.join("erle.csv")).unwrap());
}

#[test]
fn exit_codes() {
    let dir = scratch("codes");
    let bad = write_config(&dir, "{\n  \"design\": {\"grid\": 4}\n}");
    let o = run(&["bands"], Some(&bad), &dir);
    assert_eq!(o.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(msg.contains("grid") && msg.contains("line 2"), "{msg}");

    let o = run(&["evaluate", "--analysis", "missing.csv"], None, &dir);
    assert_eq!(o.status.code(), Some(2));

    let o = run(&["reproduce", "--only", "1,4,6"], None, &dir);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );

    let refs = scratch("refs");
    assert!(bin()
        .args(["reproduce", "--export-reference"])
        .arg(&refs)
        .status()
        .unwrap()
        .success());
    let path = refs.join("uniform16_synthesis.csv");
    let text = std::fs::read_to_string(&path).unwrap().replacen(
        "0.054888469644485",
        "0.104888469644485",
        1,
    );
    std::fs::write(&path, text).unwrap();
    let o = bin()
        .args(["reproduce", "--only", "4", "--reference"])
        .arg(&refs)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL 4a"));
}

#[test]
fn thread_cap_is_validated() {
    let dir = scratch("threads");
    let o = bin()
        .env("WARPBANK_THREADS", "zero")
        .args(["bands", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .env("WARPBANK_THREADS", "1")
        .args(["bands", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(o.status.success());
}
