//! End-to-end acceptance run: one line per criterion, non-zero exit if any
//! criterion fails. Runs the full-scale regret and throughput experiments,
//! so expect a few minutes in an optimized build.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rome::validate::{self, Check};

fn timed(limit: Duration, f: impl FnOnce() -> Check) -> Check {
    let start = Instant::now();
    let mut c = f();
    let elapsed = start.elapsed();
    c.passed &= elapsed < limit;
    c.detail = format!("{}; {:.1} s (limit {} s)", c.detail, elapsed.as_secs_f64(), limit.as_secs());
    c
}

fn merge(name: &str, parts: Vec<Check>) -> Check {
    Check {
        name: name.to_string(),
        passed: parts.iter().all(|c| c.passed),
        detail: parts
            .iter()
            .map(|c| format!("{} {}: {}", if c.passed { "ok" } else { "FAILED" }, c.name, c.detail))
            .collect::<Vec<_>>()
            .join(" | "),
    }
}

type Criterion = (&'static str, Box<dyn FnOnce() -> Check>);

fn main() -> ExitCode {
    let seed = std::env::var("ROME_ACCEPTANCE_SEED")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let criteria: Vec<Criterion> = vec![
        ("double robustness", Box::new(move || timed(Duration::from_secs(10), || validate::double_robustness(seed)))),
        ("variance identity", Box::new(move || timed(Duration::from_secs(60), || validate::variance_identity(seed)))),
        ("estimator equivalence", Box::new(move || validate::estimator_equivalence(seed))),
        ("determinant bound", Box::new(move || validate::determinant_bound(seed))),
        ("laplacian identity", Box::new(move || validate::laplacian_identity(seed))),
        ("IPS/SNIPS unbiasedness", Box::new(move || validate::ips_unbiasedness(seed))),
        (
            "directional regret (K = 60, 10 replications)",
            Box::new(move || merge("directional regret", validate::directional_regret(60, 10, seed))),
        ),
        (
            "throughput (K = 200 RoME-BLM)",
            Box::new(move || validate::throughput(200, seed, Duration::from_secs(120))),
        ),
        ("schedule and regret bookkeeping", Box::new(move || validate::schedule_bookkeeping(seed))),
    ];
    let mut failed = 0;
    let total = criteria.len();
    for (label, run) in criteria {
        let c = run();
        if !c.passed {
            failed += 1;
        }
        println!("{} {label}: {}", if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    println!("acceptance: {} of {total} criteria passed", total - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
