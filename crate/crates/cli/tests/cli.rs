use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn cmeasure(args: &[&str], out: &Path) -> (i32, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_cmeasure"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (
        output.status.code().expect("exit code"),
        String::from_utf8_lossy(&output.stdout).into_owned(),
    )
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn affine_martingale_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("affine_martingale.toml");
    let (code, stdout) = cmeasure(&["verify-martingale", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 0, "{stdout}");
    let s = summary(dir.path());
    let check = &s["checks"][0];
    assert_eq!(check["criterion_id"], "UNIT_MEAN");
    let mean = check["value"].as_f64().unwrap();
    let se = check["std_error"].as_f64().unwrap();
    assert!((mean - 1.0).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn geometric_births_explode() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("geometric_explosion.toml");
    let (code, _) = cmeasure(&["explosion", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 2);
    let s = summary(dir.path());
    assert_eq!(s["checks"][0]["verdict"], "convergent");
    let mass = &s["checks"][1];
    assert_eq!(mass["criterion_id"], "EXPLOSION_MASS");
    assert!(mass["value"].as_f64().unwrap() > 0.5);
}

#[test]
fn zero_rate_gives_empty_events() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("zero_rate.toml");
    let (code, _) = cmeasure(&["simulate", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 0);
    assert_eq!(
        fs::read_to_string(dir.path().join("events.csv")).unwrap(),
        "path_id,coordinate,time\n"
    );
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = scenario("affine_martingale.toml");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let (code, _) = cmeasure(&["weight", cfg.to_str().unwrap(), "--seed", "9"], dir.path());
        assert_eq!(code, 0);
    }
    for name in ["events.csv", "weights.csv", "paths.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
}

#[test]
fn bad_input_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "horizon = 1.0\n").unwrap();
    let (code, _) = cmeasure(&["check", bad.to_str().unwrap()], dir.path());
    assert_eq!(code, 1);
    let (code, _) = cmeasure(&["no-such-command", bad.to_str().unwrap()], dir.path());
    assert_eq!(code, 1);
    let (code, _) = cmeasure(&["check", "/nonexistent.toml"], dir.path());
    assert_eq!(code, 1);
}

#[test]
fn oracles_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("oracles.toml");
    let (code, stdout) = cmeasure(&["oracles", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code, 0, "{stdout}");
}
