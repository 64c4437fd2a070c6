use std::fs;
use std::path::Path;
use std::process::Command;

fn kplab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_kplab"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_owned())
        .collect()
}

#[test]
fn identity_pair_holds_with_zero_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "id.json",
        r#"{"source": {"points": [[0, 0], [1, 1], [2, -1]]},
            "target": {"points": [[0, 0], [1, 1], [2, -1]]}}"#,
    );
    let out = dir.path().join("out");
    let (code, err) = kplab(&[
        "kp-verify",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out.join("kp_verify.csv")).unwrap();
    let gaps = column(&csv, "gap");
    assert_eq!(gaps.len(), 15);
    assert!(
        gaps.iter().all(|g| g.parse::<f64>().unwrap() == 0.0),
        "{gaps:?}"
    );
    assert!(column(&csv, "verdict").iter().all(|v| v == "holds"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["command"], "kp-verify");
}

#[test]
fn malformed_json_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        "{\"source\": {\"points\": [[0]]},\n \"noises\": [1,\n",
    );
    let out = dir.path().join("out");
    let (code, err) = kplab(&["entropy", "-c", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line"), "{err}");
}

#[test]
fn unknown_fields_and_bad_pairs_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write(
        dir.path(),
        "u.json",
        r#"{"source": {"points": [[0]]}, "noise": [1]}"#,
    );
    let (code, err) = kplab(&["entropy", "-c", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("noise"), "{err}");
    // the target spreads the points, so it is not a contraction
    let cfg = write(
        dir.path(),
        "p.json",
        r#"{"source": {"points": [[0], [1]]}, "target": {"points": [[0], [2]]}}"#,
    );
    let (code, _) = kplab(&["kp-verify", "-c", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 1);
    let (code, _) = kplab(&["nonsense"]);
    assert_eq!(code, 1);
}

#[test]
fn monte_carlo_runs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mc.json",
        r#"{"source": {"points": [[0, 0, 0], [1, 0, 1], [0, 2, 0]]},
            "random_contraction": {"method": "any"},
            "orders": [0.5, 1], "noises": [1]}"#,
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let (code, err) = kplab(&[
            "kp-verify",
            "-c",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "42",
            "--samples",
            "20000",
            "--policy",
            "mc",
        ]);
        assert_eq!(code, 0, "{err}");
        fs::read(out.join("kp_verify.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    let text = String::from_utf8(a).unwrap();
    assert!(column(&text, "method").iter().all(|m| m == "monte-carlo"));
    assert!(column(&text, "seed").iter().all(|s| s == "42"));
}

#[test]
fn every_command_runs_on_the_shipped_configs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        "entropy",
        "kp-verify",
        "flow",
        "minty",
        "costa",
        "capacity",
        "volume",
    ] {
        let cfg = root.join(format!("{}.json", cmd.replace('-', "_")));
        let out = dir.path().join(cmd);
        let (code, err) = kplab(&[
            cmd,
            "-c",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0, "{cmd}: {err}");
        assert!(out.join("manifest.json").exists());
    }
}

#[test]
fn suite_subset_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite");
    let (code, err) = kplab(&["suite", "--only", "5,6,8", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(column(&summary, "passed"), vec!["true"; 3]);
}
