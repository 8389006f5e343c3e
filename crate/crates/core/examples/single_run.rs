//! One RoME run in the nonlinear setting, with its regret curve and the
//! first few trace records.
//!
//! `cargo run --release --example single_run -- [stages] [seed]`

use rome::baselines::PolicyKind;
use rome::env::{staged_schedule, Setting};
use rome::experiment::{run_replication, ExperimentConfig, PolicySpec};
use rome::runner::UpdateMode;

fn main() -> rome::Result<()> {
    let mut args = std::env::args().skip(1);
    let stages = args.next().and_then(|a| a.parse().ok()).unwrap_or(20);
    let seed = args.next().and_then(|a| a.parse().ok()).unwrap_or(0);
    let cfg = ExperimentConfig {
        setting: Setting::Nonlinear,
        stages,
        policies: vec![PolicySpec::from(PolicyKind::Rome)],
        ..Default::default()
    };
    let policy = &cfg.resolve_policies()?[0];
    let out = run_replication(policy, &cfg.env_config(), &staged_schedule(stages), seed, UpdateMode::Sequential)?;
    for r in out.trace.records.iter().take(5) {
        println!(
            "stage {:>2} user {:>2} time {:>2}  Ā={} A={} π₀={:.3} R={:+.3} R̃={:+.3}",
            r.stage,
            r.i,
            r.t,
            r.a_bar,
            r.action,
            r.pi0,
            r.reward,
            r.pseudo_reward.unwrap_or(f64::NAN)
        );
    }
    for (k, c) in out.cumulative_regret.iter().enumerate().step_by((stages / 10).max(1)) {
        println!("after stage {:>3}: cumulative regret {c:.3}", k + 1);
    }
    println!("final {:.3} over {} decisions", out.cumulative_regret.last().unwrap(), out.trace.len());
    Ok(())
}
