use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_espar-cr"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "[frame]\nt_f = 0.0016\nt_train = 0.001\n";

#[test]
fn unknown_key_exits_with_schema_code() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "bad.toml", "[antenna]\nsector = 8\n");
    let o = cli(&["solve", &c], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sector"));
}

#[test]
fn zero_trials_exits_with_schema_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["validate", "--trials", "0"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("validation.trials"));
}

#[test]
fn missing_config_file_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["sweep", "/nonexistent/cfg.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_writes_one_row_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "small.toml", &format!("{SMALL}[sweep]\np_bar_db = [0.0, 5.0]\n"));
    let out = tmp.path().join("out");
    let o = cli(&["solve", &c], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(
        lines[0],
        "P_bar_dB,I_bar_dB,n_b,M,m_PU,m_SR,C_LB,C_LB_omni,Lambda,P_out,P_e,T_sen_opt,converged"
    );
    assert!(lines[1].starts_with("12,-6,4,8,1,1,"));
    assert!(lines[1].ends_with(",true"));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(out.join("solutions/point_0000.json").exists());
}

#[test]
fn seed_flag_changes_hash_but_not_sweep() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "small.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(cli(&["solve", &c, "--seed", "1"], &a).status.code(), Some(0));
    assert_eq!(cli(&["solve", &c, "--seed", "2"], &b).status.code(), Some(0));
    let read = |d: &Path, f: &str| std::fs::read_to_string(d.join(f)).unwrap();
    assert_eq!(read(&a, "sweep.csv"), read(&b, "sweep.csv"));
    assert_ne!(read(&a, "manifest.json"), read(&b, "manifest.json"));
}

#[test]
fn starved_price_search_reports_nonconvergence() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(
        tmp.path(),
        "starved.toml",
        &format!("{SMALL}[solver]\nmax_price_iter = 1\nsubgradient_iters = 0\n"),
    );
    let out = tmp.path().join("out");
    let o = cli(&["solve", &c], &out);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().ends_with(",false"));
}

#[test]
fn too_few_trials_fail_validation() {
    let tmp = tempfile::tempdir().unwrap();
    let c = config(tmp.path(), "small.toml", SMALL);
    let out = tmp.path().join("out");
    let o = cli(&["validate", &c, "--trials", "500", "--metric-trials", "500"], &out);
    assert_eq!(o.status.code(), Some(4));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("FAIL"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("validation failed"));
    assert!(out.join("validation.json").exists());
}

#[test]
fn pattern_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let o = cli(&["pattern", "--samples", "36"], tmp.path());
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(tmp.path().join("pattern.csv")).unwrap();
    assert_eq!(csv.lines().count(), 37);
    assert!(csv.starts_with("angle_deg,beam_1,"));
}
