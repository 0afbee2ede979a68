use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hpdg-bench"))
        .args(args)
        .output()
        .unwrap()
}

fn out_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("cli").join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

fn read(dir: &Path, file: &str) -> String {
    std::fs::read_to_string(dir.join(file)).unwrap_or_else(|e| panic!("{}: {e}", dir.join(file).display()))
}

#[test]
fn model_run_writes_tables_and_manifest() {
    let dir = out_dir("model");
    let out = bench(&["model", "--p", "1,2", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&read(&dir, "model.manifest.json")).unwrap();
    let outputs: Vec<&str> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(!outputs.is_empty());
    for f in outputs {
        assert!(read(&dir, f).lines().count() > 1, "{f} has no rows");
    }
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["experiment"]["kind"], "model");
}

#[test]
fn replay_reproduces_the_tables() {
    let dir = out_dir("cycles");
    let again = out_dir("cycles-replay");
    let out = bench(&["cycles", "--p", "2,3", "--levels", "2", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.join("cycles.manifest.json");
    let out = bench(&["replay", manifest.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(&dir, "cycles.csv"), read(&again, "cycles.csv"));
}

#[test]
fn settings_reach_the_manifest() {
    let dir = out_dir("convergence");
    let out = bench(&[
        "convergence",
        "--p",
        "1",
        "--levels",
        "1-2",
        "--theta",
        "-1",
        "--basis",
        "legendre",
        "--omega",
        "0.6",
        "--subdomains",
        "2",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_str(&read(&dir, "convergence.manifest.json")).unwrap();
    let s = &m["settings"];
    assert_eq!(s["theta"], -1.0);
    assert_eq!(s["omega"], 0.6);
    assert_eq!(s["subdomains"], 2);
    assert_eq!(m["experiment"]["levels"], serde_json::json!([1, 2]));
    assert_eq!(m["meshes"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_arguments_are_rejected() {
    for args in [
        &["history", "--p", "2,3"][..],
        &["cycles", "--coarse", "direct"],
        &["cycles", "--levels", "4-2"],
        &["model", "--levels", "2,3"],
    ] {
        let out = bench(args);
        assert!(!out.status.success(), "{args:?} was accepted");
    }
}
