//! Staggered recruitment: every user stays for a fixed number of times.
//!
//! `cargo run --release --example rectangular_schedule`

use rome::env::{rectangular_schedule, Setting};
use rome::experiment::{run_experiment, ExperimentConfig, Rectangular};

fn main() -> rome::Result<()> {
    let sched = rectangular_schedule(4, 3);
    for (k, stage) in sched.stages().enumerate() {
        let pts: Vec<String> = stage.iter().map(|p| format!("({},{})", p.user, p.time)).collect();
        println!("stage {}: {}", k + 1, pts.join(" "));
    }
    let cfg = ExperimentConfig {
        setting: Setting::Heterogeneous,
        rectangular: Some(Rectangular { users: 40, times: 10 }),
        replications: 3,
        ..Default::default()
    };
    let res = run_experiment(&cfg, None)?;
    for (p, name) in res.policies.iter().enumerate() {
        println!("{name:<20} {:>8.2}", res.mean_final(p));
    }
    Ok(())
}
