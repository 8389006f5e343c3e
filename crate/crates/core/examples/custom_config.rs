//! Experiment defined in TOML, including per-policy overrides.
//!
//! `cargo run --release --example custom_config`

use rome::experiment::ExperimentConfig;

const CONFIG: &str = r#"
setting = "nonlinear"
stages = 25
replications = 3
seed = 11

[hyper]
zeta = 1.0

[[policies]]
kind = "rome"

[[policies]]
kind = "rome"
label = "RoME-t5"
dist = { family = "student-t", nu = 5.0 }

[[policies]]
kind = "rome"
label = "RoME-ridge"
learner = { kind = "ridge", degree = 2, ridge = 0.01 }

[[policies]]
kind = "standard"
exploration = "posterior"
"#;

fn main() -> rome::Result<()> {
    let cfg = ExperimentConfig::from_toml(CONFIG)?;
    for p in cfg.resolve_policies()? {
        println!("{:<12} ζ={} dist={:?} learner={:?}", p.label, p.hyper.zeta, p.hyper.dist, p.hyper.learner);
    }
    let res = rome::experiment::run_experiment(&cfg, None)?;
    for (p, name) in res.policies.iter().enumerate() {
        println!("{name:<12} final regret {:>8.2}", res.mean_final(p));
    }
    Ok(())
}
