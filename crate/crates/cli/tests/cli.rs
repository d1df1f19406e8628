use std::path::PathBuf;
use std::process::{Command, Output};

fn qmemsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmemsim")).args(args).output().unwrap()
}

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "scenarios", "v1", name, "config.toml"].iter().collect();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no `{key}` in\n{text}"));
    line[key.len()..].trim_start_matches(',').split([',', ' ']).find(|s| !s.is_empty()).unwrap().parse().unwrap()
}

#[test]
fn bad_usage_exits_one() {
    assert_eq!(qmemsim(&["chsh", "x.txt", "--bogus"]).status.code(), Some(1));
    assert_eq!(qmemsim(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(qmemsim(&["tomo", "reconstruct", "/no/such/file"]).status.code(), Some(1));
    assert_eq!(qmemsim(&["scenario", "run", "no-such-scenario"]).status.code(), Some(1));
    assert_eq!(qmemsim(&["--help"]).status.code(), Some(0));
}

#[test]
fn simulate_is_reproducible_per_seed() {
    let cfg = fixture("experiment-2");
    let run = |seed: &str| stdout(&qmemsim(&["simulate", &cfg, "--data", "chsh", "--stage", "output", "--seed", seed]));
    assert_eq!(run("7"), run("7"));
    assert_ne!(run("7"), run("8"));
}

#[test]
fn ideal_tomography_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("tomo.txt");
    let o = qmemsim(&["simulate", &fixture("ideal"), "--data", "tomo", "--exact", "-o", counts.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = qmemsim(&["tomo", "reconstruct", counts.to_str().unwrap(), "--target", "psi-plus"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!((field(&text, "fidelity_psi_plus,,") - 1.0).abs() < 1e-9);
    assert!((field(&text, "concurrence,,") - 1.0).abs() < 1e-9);
}

#[test]
fn ideal_chsh_reaches_tsirelson() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("chsh.txt");
    qmemsim(&["simulate", &fixture("ideal"), "--data", "chsh", "--exact", "-o", counts.to_str().unwrap()]);
    let o = qmemsim(&["chsh", counts.to_str().unwrap(), "--angles", "0,0.39269908169872414,0.7853981633974483,1.1780972450961724"]);
    assert!(o.status.success());
    let s = field(&stdout(&o), "S ");
    assert!((s.abs() - 8f64.sqrt()).abs() < 1e-6, "S = {s}");
    assert_eq!(qmemsim(&["chsh", counts.to_str().unwrap(), "--angles", "0,1"]).status.code(), Some(1));
}

#[test]
fn scenario_run_writes_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = qmemsim(&["scenario", "run", "experiment-2", "--csv", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(stdout(&o).contains("result PASS"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn failing_scenario_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(fixture("ideal"), dir.path().join("config.toml")).unwrap();
    std::fs::write(dir.path().join("expected.txt"), "# mode exact\nS_before 2.0 0.1 derived\n").unwrap();
    let o = qmemsim(&["scenario", "run", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn concurrence_from_table_values() {
    let o = qmemsim(&["analyze", "concurrence", "--p10", "4.59e-3", "--p01", "5.04e-3", "--p11", "1.6e-6", "--visibility", "0.869"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let c = text.lines().find_map(|l| l.strip_prefix("concurrence").map(str::trim)).unwrap();
    let c: f64 = c.trim_start_matches([',', ' ']).split([' ', ',']).next().unwrap().parse().unwrap();
    assert!((c - 5.8e-3).abs() < 2e-4, "C = {c}");
}

#[test]
fn incomplete_input_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("tomo.txt");
    std::fs::write(&p, "H H 10\n").unwrap();
    let o = qmemsim(&["tomo", "reconstruct", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}
