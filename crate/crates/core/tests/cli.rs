use std::process::Command;

fn rome() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rome"))
}

#[test]
fn simulate_emits_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let out = rome()
        .args(["simulate", "--setting", "nonlinear", "--stages", "6", "--reps", "2", "--seed", "3"])
        .args(["--policies", "rome-blm,standard", "--traces", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["cum_regret.csv", "summary.csv", "pairwise.csv", "config.toml"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_dir(dir.path().join("traces")).unwrap().count(), 4);
    // The written config reproduces the run.
    let again = tempfile::tempdir().unwrap();
    let status = rome()
        .arg("simulate")
        .arg(dir.path().join("config.toml"))
        .arg("--out")
        .arg(again.path())
        .output()
        .unwrap();
    assert!(status.status.success());
    assert_eq!(
        std::fs::read(dir.path().join("summary.csv")).unwrap(),
        std::fs::read(again.path().join("summary.csv")).unwrap()
    );
}

#[test]
fn simulate_reads_toml_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "setting = \"heterogeneous\"\nstages = 4\nreplications = 1\n\n[[policies]]\nkind = \"rome\"\nlabel = \"RoME-t\"\ndist = { family = \"student-t\", nu = 4.0 }\n",
    )
    .unwrap();
    let out = rome().arg("simulate").arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("RoME-t,0,"));
}

#[test]
fn validate_exits_zero() {
    let out = rome().arg("validate").output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    assert!(text.contains("0 failed"));
}

#[test]
fn emit_truth_writes_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = rome()
        .args(["emit-truth", "--setting", "nonlinear", "--stages", "4", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let theta = std::fs::read_to_string(dir.path().join("theta.csv")).unwrap();
    assert_eq!(theta.lines().count(), 1 + 16);
    let grid = std::fs::read_to_string(dir.path().join("baseline_grid.csv")).unwrap();
    assert_eq!(grid.lines().count(), 1 + 101 * 101);
}

#[test]
fn ope_emits_estimate_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let mut text = String::new();
    for u in 0..6 {
        for t in 0..3 {
            let a = (u + t) % 2;
            text.push_str(&format!(
                "{{\"unit\":{u},\"time\":{t},\"context\":[{:.2},{:.2}],\"action\":{a},\"propensity\":0.5,\"reward\":{:.1}}}\n",
                0.1 * u as f64 - 0.3,
                0.2 * t as f64 - 0.2,
                1.0 + a as f64 * 0.5 - 0.1 * u as f64
            ));
        }
    }
    std::fs::write(&log, text).unwrap();
    let out = rome()
        .arg("ope")
        .arg(&log)
        .args(["--policy", "rome,ac", "--bootstrap", "5", "--out"])
        .arg(dir.path().join("ope"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let est = std::fs::read_to_string(dir.path().join("ope/estimates.csv")).unwrap();
    assert_eq!(est.lines().count(), 1 + 5 * 2);
    assert!(dir.path().join("ope/pvalues.csv").is_file());
}

#[test]
fn usage_errors_exit_nonzero() {
    assert!(!rome().arg("simulate").args(["--stages", "x"]).output().unwrap().status.success());
    assert!(!rome().args(["simulate", "--policies", "nope", "--stages", "3"]).output().unwrap().status.success());
    assert!(!rome().arg("frobnicate").output().unwrap().status.success());
    assert!(!rome().args(["ope", "/nonexistent.jsonl"]).output().unwrap().status.success());
}
