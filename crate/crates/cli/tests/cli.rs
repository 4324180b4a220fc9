use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dualflow"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.stderr.is_empty() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn simulate_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    let out = run(bin().arg("simulate").arg(config("quadratic.toml")).arg("--out").arg(&dir));
    assert_eq!(out.status.code(), Some(0));
    for f in ["config.toml", "summary.json", "trajectory.json", "certificate.json", "report.txt", "snapshots/times.csv"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let s = summary(&dir);
    let hash = s["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(s["nodes"], 101);
    // atoms at +-e^{-1}
    let last = fs::read_to_string(dir.join("snapshots/s0_00100.csv")).unwrap();
    let xs: Vec<f64> = last.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!((xs[0] + (-1.0f64).exp()).abs() < 1e-8 && (xs[1] - (-1.0f64).exp()).abs() < 1e-8);

    // same config text, same hash; edited text, new hash
    let again = tmp.path().join("again");
    run(bin().arg("simulate").arg(config("quadratic.toml")).arg("--out").arg(&again));
    assert_eq!(summary(&again)["config_hash"], hash);
    let edited = tmp.path().join("edited.toml");
    fs::write(&edited, fs::read_to_string(config("quadratic.toml")).unwrap().replace("a = 1.0", "a = 2.0")).unwrap();
    let third = tmp.path().join("third");
    run(bin().arg("simulate").arg(&edited).arg("--out").arg(&third));
    assert_ne!(summary(&third)["config_hash"], hash);
}

#[test]
fn certify_flags_a_mismatched_system() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    assert_eq!(run(bin().arg("simulate").arg(config("quadratic.toml")).arg("--out").arg(&dir)).status.code(), Some(0));
    assert_eq!(run(bin().arg("certify").arg(&dir)).status.code(), Some(0));
    // the stored trajectory no longer solves the configured system
    let cfg = dir.join("config.toml");
    fs::write(&cfg, fs::read_to_string(&cfg).unwrap().replace("a = 1.0", "a = 3.0")).unwrap();
    let out = run(bin().arg("certify").arg(&dir));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn solver_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("cfl.toml");
    let text = fs::read_to_string(config("heat.toml")).unwrap().replace("horizon = 1.0", "horizon = 1.0\ndt = 0.5");
    fs::write(&bad, text).unwrap();
    let out = run(bin().arg("simulate").arg(&bad).arg("--out").arg(tmp.path().join("r")));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("CFL"));

    assert_eq!(run(bin().arg("simulate").arg(tmp.path().join("missing.toml"))).status.code(), Some(1));
    fs::write(&bad, "[kernel]\nentries = []\n").unwrap();
    assert_eq!(run(bin().arg("simulate").arg(&bad)).status.code(), Some(1));
    assert_eq!(run(bin().args(["scenario", "heat", "--param", "zzz=1"])).status.code(), Some(1));
}

#[test]
fn dual_writes_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin().arg("dual").arg(config("heat.toml")).arg("--out").arg(tmp.path()));
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(tmp.path().join("dual.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert_eq!(header, ["x", "psi_0", "psi_0.25", "psi_0.5", "psi_1"]);
    assert_eq!(csv.lines().count(), 257);
    assert!(tmp.path().join("dual_history.json").exists());
    // a config without a [dual] table is a configuration error
    assert_eq!(run(bin().arg("dual").arg(config("quadratic.toml"))).status.code(), Some(1));
}

#[test]
fn metrics_between_particle_files() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a.csv");
    let b = tmp.path().join("b.csv");
    fs::write(&a, "weight,x\n0.5,0\n0.5,1\n").unwrap();
    fs::write(&b, "weight,x\n1,3\n").unwrap();
    let out = run(bin().arg("metrics").arg(&a).arg(&b));
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    // d1 = (3 + 2) / 2, d2 = sqrt((9 + 4) / 2)
    assert!((v["d1"].as_f64().unwrap() - 2.5).abs() < 1e-12);
    assert!((v["d2"].as_f64().unwrap() - 6.5f64.sqrt()).abs() < 1e-12);

    fs::write(&b, "nonsense\n1\n").unwrap();
    assert_eq!(run(bin().arg("metrics").arg(&a).arg(&b)).status.code(), Some(1));
}

#[test]
fn scenario_reports_and_json() {
    let tmp = tempfile::tempdir().unwrap();
    let json = tmp.path().join("heat.json");
    let out = run(bin().args(["scenario", "heat", "--param", "d=0.05,cells=256", "--json"]).arg(&json));
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("heat: PASS"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["scenario"], "heat");
    assert_eq!(v["cells"], 256);
    assert_eq!(run(bin().args(["scenario", "unknown"])).status.code(), Some(1));
}
