use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_micromotion");

fn config() -> String {
    format!("{}/tests/data/pair.toml", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn design_writes_snapshot_modes_pulse_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["design", "--config", &config()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let snap = read(&dir.path().join("crystal.snap"));
    assert!(snap.contains("[B]") && snap.contains("[modes]"));
    for name in ["crystal.snap", "pulse.csv", "report.txt"] {
        let text = read(&dir.path().join(name));
        let head: Vec<&str> = text.lines().take(3).collect();
        assert!(head[0].ends_with("format 1"), "{name}");
        assert!(head[1].starts_with("# config_hash = "), "{name}");
        assert!(head[2].starts_with("# truncation = fourier_order 4"), "{name}");
    }
    let pulse = read(&dir.path().join("pulse.csv"));
    assert_eq!(pulse.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn unstable_trap_names_axis_and_leaves_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, read(Path::new(&config())).replace("q = [0.3, -0.3, 0.0]", "q = [0.0, 0.0, 0.0]")).unwrap();
    let out = dir.path().join("out");
    let o = run(&["design", "--config", cfg.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("along x"));
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn config_errors_use_their_own_code() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["scan", "--config", &config(), "--grid", "3:1:1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["design", "--config", "/nonexistent.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["scan", "--config", &config()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("scan.csv").exists());
}

#[test]
fn same_seed_gives_identical_snapshots() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["modes", "--config", &config(), "--seed", "11", "--threads", "1"], d.path());
        assert!(o.status.success());
    }
    assert_eq!(
        std::fs::read(a.path().join("crystal.snap")).unwrap(),
        std::fs::read(b.path().join("crystal.snap")).unwrap()
    );
}

#[test]
fn staged_run_equals_monolithic_run() {
    let (staged, mono) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for cmd in ["equilibrium", "modes", "design"] {
        assert!(run(&[cmd, "--config", &config()], staged.path()).status.success());
    }
    assert!(run(&["design", "--config", &config()], mono.path()).status.success());
    for name in ["crystal.snap", "pulse.csv", "report.txt"] {
        assert_eq!(read(&staged.path().join(name)), read(&mono.path().join(name)), "{name}");
    }
    let grid = ["--grid", "3.0e6:3.2e6:0.1e6"];
    let args = |cmd| [cmd, "--config", &config(), grid[0], grid[1]].map(String::from);
    let scan = args("scan");
    let scan: Vec<&str> = scan.iter().map(|s| s.as_str()).collect();
    assert!(run(&scan, staged.path()).status.success());
    let fresh = tempfile::tempdir().unwrap();
    assert!(run(&scan, fresh.path()).status.success());
    assert_eq!(read(&staged.path().join("scan.csv")), read(&fresh.path().join("scan.csv")));
}

#[test]
fn scan_robust_t0_and_md_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let c = config();
    assert!(run(&["scan", "--config", &c, "--grid", "2.9e6:3.3e6:0.1e6", "--threads", "2"], dir.path()).status.success());
    let scan = read(&dir.path().join("scan.csv"));
    let rows: Vec<&str> = scan.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "mu_rad_s,delta_F,Theta_rad,max_alpha_abs,status");
    assert_eq!(rows.len(), 6);
    assert!(rows[1..].iter().all(|r| r.ends_with(",ok")));

    assert!(run(&["robust", "--config", &c, "--starts", "4"], dir.path()).status.success());
    let sens = read(&dir.path().join("sensitivity.csv"));
    assert!(sens.lines().any(|l| l.starts_with("standard,")) && sens.lines().any(|l| l.starts_with("robust,")));
    assert!(dir.path().join("robust_pulse.csv").exists());

    // one RF period is 20 ns
    assert!(run(&["t0-scan", "--config", &c, "--grid", "0:2e-8:5e-9"], dir.path()).status.success());
    let t0 = read(&dir.path().join("t0_scan.csv"));
    let df: Vec<f64> = t0
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("t0_s"))
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(df.len(), 5);
    assert!((df[0] - df[4]).abs() < 1e-12 * df[0]);

    let o = run(&["verify-md", "--config", &c, "--periods", "10", "--steps-per-period", "200", "--mode", "5"], dir.path());
    assert!(o.status.success());
    let md = read(&dir.path().join("md_trace.csv"));
    assert!(md.lines().any(|l| l == "t,coordinate_md,coordinate_modes,difference"));
}
