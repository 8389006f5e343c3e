//! Bootstrapped SNIPS evaluation of several policies on a randomized log.
//!
//! `cargo run --release --example offline_evaluation`

use rand::{Rng, SeedableRng};
use rome::baselines::{Hyper, PolicyKind};
use rome::env::{EnvConfig, Environment, Setting};
use rome::ope::{bootstrap_eval, sort_log, LoggedRecord, PolicyEntry};
use rome::policy::SimRng;

fn main() -> rome::Result<()> {
    let (users, times) = (20, 8);
    let env = Environment::new(EnvConfig::new(Setting::Heterogeneous), users, times, 5)?;
    let mut rng = SimRng::seed_from_u64(5);
    let mut log = Vec::new();
    for i in 1..=users {
        for t in 1..=times {
            let p1 = 0.3 + 0.4 * rng.random::<f64>();
            let a = usize::from(rng.random::<f64>() < p1);
            log.push(LoggedRecord {
                unit: i,
                time: t,
                context: env.context(i, t)?.to_vec(),
                action: a,
                propensity: if a == 1 { p1 } else { 1.0 - p1 },
                reward: env.reward(i, t, a)?,
            });
        }
    }
    sort_log(&mut log);
    let policies: Vec<_> = [PolicyKind::Rome, PolicyKind::RomeSu, PolicyKind::Standard, PolicyKind::IntelPooling]
        .into_iter()
        .map(|kind| PolicyEntry {
            kind,
            label: kind.label().into(),
            hyper: Hyper::default(),
        })
        .collect();
    let res = bootstrap_eval(&log, &policies, 20, 0)?;
    println!("SNIPS value minus logging mean, 20 unit-level bootstrap replicates");
    for (p, name) in res.policies.iter().enumerate() {
        let col = res.column(p);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64).sqrt();
        println!("  {name:<14} {mean:+.4} ± {sd:.4}");
    }
    let m = res.pvalue_matrix()?;
    println!("one-sided p-values for \"row beats column\":");
    for (r, row) in m.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|p| if p.is_nan() { "   -  ".into() } else { format!("{p:.3} ") }).collect();
        println!("  {:<14} {}", res.policies[r], cells.join(" "));
    }
    Ok(())
}
