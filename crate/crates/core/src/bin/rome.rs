use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use rome::baselines::{Hyper, PolicyKind};
use rome::env::{EnvConfig, Environment, Setting};
use rome::experiment::{run_experiment, ExperimentConfig, PolicySpec, Rectangular};
use rome::ope::{bootstrap_eval, filter_propensities, sort_log, LoggedRecord, PolicyEntry};
use rome::trace::load_jsonl;
use rome::validate::{run_suite, SuiteScale};

#[derive(Parser)]
#[command(name = "rome", version, about = "Mixed-effects contextual bandit simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a replicated regret simulation and write CSV results.
    Simulate(SimulateArgs),
    /// Evaluate policies on a logged JSONL dataset with bootstrapped SNIPS.
    Ope(OpeArgs),
    /// Run the invariant suite; exits non-zero if any check fails.
    Validate(ValidateArgs),
    /// Write the ground-truth parameters and baseline grid of an environment.
    EmitTruth(TruthArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML experiment config; flags override its values.
    config: Option<PathBuf>,
    #[arg(long)]
    setting: Option<Setting>,
    #[arg(long)]
    stages: Option<usize>,
    /// Rectangular schedule as USERSxTIMES, e.g. 50x20.
    #[arg(long, value_parser = parse_rect)]
    rectangular: Option<Rectangular>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated policy names.
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    /// Decide a whole stage before observing its rewards.
    #[arg(long)]
    batch: bool,
    /// Also write one JSONL trace per policy and replication.
    #[arg(long)]
    traces: bool,
    #[arg(long, env = "ROME_THREADS")]
    threads: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct OpeArgs {
    /// JSONL log, one record per line.
    log: PathBuf,
    /// Policies to evaluate (comma-separated or repeated).
    #[arg(long = "policy", value_delimiter = ',', default_value = "rome")]
    policies: Vec<String>,
    /// TOML file with shared hyperparameters.
    #[arg(long)]
    hyper: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep records with extreme propensities instead of dropping them.
    #[arg(long)]
    keep_extreme: bool,
    #[arg(long, default_value = "ope")]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    /// Also run the regret-ordering and throughput checks (minutes).
    #[arg(long)]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TruthArgs {
    #[arg(long, default_value = "nonlinear")]
    setting: Setting,
    #[arg(long, default_value_t = 200)]
    stages: usize,
    #[arg(long, value_parser = parse_rect)]
    rectangular: Option<Rectangular>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "truth")]
    out: PathBuf,
}

fn parse_rect(s: &str) -> Result<Rectangular, String> {
    let (u, t) = s.split_once(['x', 'X']).ok_or("expected USERSxTIMES")?;
    Ok(Rectangular {
        users: u.trim().parse().map_err(|e| format!("users: {e}"))?,
        times: t.trim().parse().map_err(|e| format!("times: {e}"))?,
    })
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = a.setting {
        cfg.setting = s;
    }
    if let Some(k) = a.stages {
        cfg.stages = k;
        cfg.rectangular = None;
    }
    if a.rectangular.is_some() {
        cfg.rectangular = a.rectangular;
    }
    if let Some(r) = a.reps {
        cfg.replications = r;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(p) = a.policies {
        cfg.policies = p.into_iter().map(PolicySpec::Name).collect();
    }
    cfg.batch |= a.batch;
    cfg.write_traces |= a.traces;
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    if let Some(env) = cfg.env.as_mut() {
        env.setting = cfg.setting;
    }
    let result = run_experiment(&cfg, Some(&a.out))?;
    result.write_all(&a.out)?;
    std::fs::write(
        a.out.join("config.toml"),
        toml::to_string(&cfg).context("serializing config")?,
    )?;
    println!("{:<20} {:>14}", "policy", "final regret");
    for (p, name) in result.policies.iter().enumerate() {
        println!("{name:<20} {:>14.3}", result.mean_final(p));
    }
    println!("results written to {}", a.out.display());
    Ok(())
}

fn ope(a: OpeArgs) -> anyhow::Result<()> {
    let mut log: Vec<LoggedRecord> = load_jsonl(&a.log).with_context(|| format!("reading {}", a.log.display()))?;
    let total = log.len();
    if !a.keep_extreme {
        log = filter_propensities(&log);
    }
    if log.is_empty() {
        bail!("no usable records in {}", a.log.display());
    }
    sort_log(&mut log);
    let hyper = match &a.hyper {
        Some(p) => toml::from_str::<Hyper>(&std::fs::read_to_string(p)?).context("parsing hyperparameters")?,
        None => Hyper::default(),
    };
    let policies = a
        .policies
        .iter()
        .map(|name| {
            let kind: PolicyKind = name.parse()?;
            Ok(PolicyEntry {
                kind,
                label: kind.label().to_string(),
                hyper: hyper.clone(),
            })
        })
        .collect::<rome::Result<Vec<_>>>()?;
    let res = bootstrap_eval(&log, &policies, a.bootstrap, a.seed)?;
    std::fs::create_dir_all(&a.out)?;
    res.write_estimates(&a.out.join("estimates.csv"))?;
    res.write_pvalues(&a.out.join("pvalues.csv"))?;
    println!("{} of {total} records used, {} bootstrap replicates", log.len(), a.bootstrap);
    for (p, name) in res.policies.iter().enumerate() {
        let col = res.column(p);
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        println!("{name:<20} {mean:>10.4}");
    }
    println!("results written to {}", a.out.display());
    Ok(())
}

fn emit_truth(a: TruthArgs) -> anyhow::Result<()> {
    let (users, times) = match a.rectangular {
        Some(r) => (r.users, r.times),
        None => (a.stages, a.stages),
    };
    let env = Environment::new(EnvConfig::new(a.setting), users, times, a.seed)?;
    env.write_truth(&a.out)?;
    println!("ground truth written to {}", a.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Ope(a) => ope(a),
        Command::EmitTruth(a) => emit_truth(a),
        Command::Validate(a) => {
            let scale = if a.full { SuiteScale::full(a.seed) } else { SuiteScale::quick(a.seed) };
            let checks = run_suite(&scale);
            for c in &checks {
                println!("{c}");
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            println!("{} checks, {failed} failed", checks.len());
            return if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
