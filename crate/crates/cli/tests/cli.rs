use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_compsum"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn sweep_reproduces_anchor_column() {
    let cfg = configs().join("risk.cfg");
    let out = run(&[
        "sweep", "--config", cfg.to_str().unwrap(), "--c", "1.2:3.2:41", "--level", "10", "--horizon", "200", "--methods",
        "exact,ig,normal,qnormal",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# compsum sweep config="));
    assert_eq!(lines.next().unwrap(), "c,exact,ig,normal,qnormal");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 41);
    let at2 = rows.iter().find(|r| (r[0].parse::<f64>().unwrap() - 2.0).abs() < 1e-9).unwrap();
    assert!((at2[1].parse::<f64>().unwrap() - 0.699).abs() < 0.005);
    // Neither normal nor quasi-normal is defined at the critical premium.
    assert_eq!((at2[3].as_str(), at2[4].as_str()), ("", ""));
}

#[test]
fn simulate_is_deterministic() {
    let cfg = configs().join("risk.cfg");
    let go = |workers: &str| {
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--paths", "2e3", "--seed", "11", "--workers", workers]).stdout
    };
    let a = go("1");
    assert_eq!(a, go("1"));
    assert_eq!(a, go("2"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("seed=11"));
    assert_eq!(text.lines().nth(1), Some("crossed,n_inf,s_at_inf,s_at_sup"));
    assert_eq!(text.lines().count(), 2002);
}

#[test]
fn defective_simulation_stops_at_floor() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c4.cfg");
    std::fs::write(&p, "model = risk\nX = exp(2)\nY = exp(1)\nc = 4\n").unwrap();
    // Without the floor every uncrossed path would run to the cap.
    let start = std::time::Instant::now();
    let out = run(&["simulate", "--config", p.to_str().unwrap(), "--paths", "2000", "--cap", "100000000"]);
    assert!(start.elapsed().as_secs() < 20);
    let text = String::from_utf8(out.stdout).unwrap();
    let uncrossed = text.lines().filter(|l| l.starts_with("false,")).count();
    assert!(uncrossed > 1900);
}

#[test]
fn garbage_files_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("renewal.cfg");
    let go = |name: &str| {
        let prefix = dir.path().join(name);
        run(&["garbage", "--config", cfg.to_str().unwrap(), "--t", "1e4", "--paths", "1e4", "--seed", "7", "--out", prefix.to_str().unwrap()]);
        (
            std::fs::read(dir.path().join(format!("{name}_sample.csv"))).unwrap(),
            std::fs::read(dir.path().join(format!("{name}_limit.csv"))).unwrap(),
        )
    };
    let (a, b) = (go("a"), go("b"));
    assert_eq!(a, b);
    let limit = String::from_utf8(a.1).unwrap();
    assert_eq!(limit.lines().nth(1), Some("x,cdf,pdf"));
    assert_eq!(limit.lines().count(), 163);
}

#[test]
fn edgeworth_without_third_moments_fails() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.cfg");
    std::fs::write(&p, "model = moments\nmu_T = 1\nmu_X = 1\nvar_T = 1\nvar_X = 1\ncov_XT = 0\n").unwrap();
    let out = bin().args(["approx", "--method", "edgeworth", "--config", p.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("third-order moments"));
    assert!(out.stdout.is_empty());
}

#[test]
fn regime_errors_are_reported() {
    let cfg = configs().join("risk.cfg");
    let out = bin().args(["approx", "--method", "qnormal", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("regime error"));
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    std::fs::write(&p, "model = risk\nX = exp(2)\nY = weibull(1)\nc = 2\n").unwrap();
    let out = bin().args(["exact", "--config", p.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn modular_and_renewal_tables() {
    let out = run(&["modular", "--config", configs().join("markov.cfg").to_str().unwrap(), "--blocks", "2e4", "--replicates", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("quantity,value,std_error"));
    assert!(text.lines().any(|l| l == "return_time,2,"));
    let out = run(&["renewal", "--config", configs().join("renewal.cfg").to_str().unwrap(), "--paths", "1000"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().nth(2).unwrap().starts_with("30,30,30,"));
}
