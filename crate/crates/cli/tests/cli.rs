use std::fs;
use std::path::Path;
use std::process::Command;

fn otmatch(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_otmatch")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("cfg.json");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn runs_and_reruns_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"n": 64, "scan_points": 17}"#);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = otmatch(&["project-locate", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "project-locate");
    assert_eq!(manifest["seed"], 7);
    for art in manifest["artifacts"].as_array().unwrap() {
        let rel = art["path"].as_str().unwrap();
        assert_eq!(fs::read(a.join(rel)).unwrap(), fs::read(b.join(rel)).unwrap(), "{rel}");
    }
    assert_eq!(fs::read(a.join("manifest.json")).unwrap(), fs::read(b.join("manifest.json")).unwrap());
}

#[test]
fn bad_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"noise_levels": [3.0]}"#);
    let out = dir.path().join("out");
    let o = otmatch(&["deconvolve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("noise"));
}

#[test]
fn unknown_kind_is_rejected() {
    let o = otmatch(&["bogus", "--config", "x.json", "--out", "y"]);
    assert!(!o.status.success());
}
