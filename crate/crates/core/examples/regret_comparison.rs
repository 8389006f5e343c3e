//! Mean final regret of every policy in each setting.
//!
//! `cargo run --release --example regret_comparison -- [stages] [reps]`

use rome::env::Setting;
use rome::experiment::{run_experiment, ExperimentConfig};

fn main() -> rome::Result<()> {
    let mut args = std::env::args().skip(1);
    let stages = args.next().and_then(|a| a.parse().ok()).unwrap_or(30);
    let reps = args.next().and_then(|a| a.parse().ok()).unwrap_or(4);
    for setting in Setting::ALL {
        let cfg = ExperimentConfig {
            setting,
            stages,
            replications: reps,
            ..Default::default()
        };
        let res = run_experiment(&cfg, None)?;
        println!("{setting} (K = {stages}, {reps} replications)");
        for (p, name) in res.policies.iter().enumerate() {
            println!("  {name:<20} {:>10.2}", res.mean_final(p));
        }
    }
    Ok(())
}
