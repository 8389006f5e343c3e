use std::collections::HashMap;

use rome::env::{cumulative, stage_regret, Environment, EnvConfig, Setting};
use rome::experiment::{run_experiment, trace_path, ExperimentConfig, PolicySpec};
use rome::trace::{load_jsonl, TraceRecord};

fn config(policies: &[&str]) -> ExperimentConfig {
    ExperimentConfig {
        setting: Setting::Nonlinear,
        stages: 5,
        replications: 2,
        seed: 42,
        write_traces: true,
        policies: policies.iter().map(|p| PolicySpec::Name(p.to_string())).collect(),
        ..Default::default()
    }
}

fn read_rows(path: &std::path::Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

#[test]
fn smoke_run_writes_traces_and_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["rome", "standard"]);
    let res = run_experiment(&cfg, Some(dir.path())).unwrap();
    res.write_all(dir.path()).unwrap();
    let traces: Vec<_> = std::fs::read_dir(dir.path().join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 4);
    for name in ["cum_regret.csv", "summary.csv", "pairwise.csv"] {
        assert!(dir.path().join(name).is_file(), "{name}");
    }
    let header = std::fs::read_to_string(dir.path().join("cum_regret.csv")).unwrap();
    assert!(header.starts_with("policy,replication,stage,cum_regret\n"));
}

#[test]
fn rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config(&["rome-blm", "ac"]);
    for dir in [a.path(), b.path()] {
        run_experiment(&cfg, Some(dir)).unwrap().write_all(dir).unwrap();
    }
    for name in ["cum_regret.csv", "summary.csv", "pairwise.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap());
    }
    for p in ["RoME-BLM", "AC"] {
        for r in 0..2 {
            assert_eq!(
                std::fs::read(trace_path(a.path(), p, r)).unwrap(),
                std::fs::read(trace_path(b.path(), p, r)).unwrap()
            );
        }
    }
}

#[test]
fn win_percentages_recount_from_summary() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(&["rome", "standard", "intelpooling"]);
    cfg.replications = 4;
    cfg.write_traces = false;
    run_experiment(&cfg, None).unwrap().write_all(dir.path()).unwrap();
    let mut finals: HashMap<String, Vec<f64>> = HashMap::new();
    for row in read_rows(&dir.path().join("summary.csv")) {
        finals.entry(row[0].to_string()).or_default().push(row[2].parse().unwrap());
    }
    let rows = read_rows(&dir.path().join("pairwise.csv"));
    assert_eq!(rows.len(), 6);
    for row in rows {
        let (a, b) = (&finals[&row[0]], &finals[&row[1]]);
        let wins = a.iter().zip(b).filter(|(x, y)| x < y).count();
        let pct: f64 = row[2].parse().unwrap();
        assert_eq!(pct, 100.0 * wins as f64 / 4.0);
        let p: f64 = row[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}

#[test]
fn traces_reproduce_the_regret_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&["rome"]);
    let res = run_experiment(&cfg, Some(dir.path())).unwrap();
    for r in 0..2 {
        let records: Vec<TraceRecord> = load_jsonl(&trace_path(dir.path(), "RoME", r)).unwrap();
        assert_eq!(records.len(), 15);
        let env = Environment::new(EnvConfig::new(Setting::Nonlinear), 5, 5, 42 + r as u64).unwrap();
        let curve = cumulative(&stage_regret(&records, &env, 0.1, 0.9).unwrap());
        assert_eq!(curve, res.curves[0][r]);
        assert!(curve.windows(2).all(|w| w[1] >= w[0]));
    }
}

#[test]
fn rectangular_and_batched_runs() {
    let mut cfg = config(&["rome-blm", "nnr-linear"]);
    cfg.rectangular = Some(rome::experiment::Rectangular { users: 6, times: 3 });
    cfg.batch = true;
    cfg.write_traces = false;
    let res = run_experiment(&cfg, None).unwrap();
    // Stages run from 1 to N + T − 1.
    assert!(res.curves.iter().flatten().all(|c| c.len() == 8));
}

#[test]
fn unknown_policy_is_rejected() {
    assert!(run_experiment(&config(&["rome", "thompson"]), None).is_err());
}
