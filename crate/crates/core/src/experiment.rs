//! Replicated simulation experiments: configuration, parallel execution and
//! the CSV outputs consumed by downstream analysis.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{build_policy, BuildContext, Hyper, PolicyKind};
use crate::env::{rectangular_schedule, staged_schedule, EnvConfig, Environment, Schedule, Setting, CONTEXT_DIM};
use crate::error::{invalid, Error, Result};
use crate::graph::chain_graph;
use crate::layout::BlockRidges;
use crate::ope::{paired_ttest, Alternative};
use crate::policy::SimRng;
use crate::runner::{run_with_regret, RunOutcome, UpdateMode};

/// Environment variable consulted when no thread count is configured.
pub const THREADS_ENV: &str = "ROME_THREADS";

/// Users that stay for a fixed number of time points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rectangular {
    pub users: usize,
    pub times: usize,
}

/// A policy entry: either a bare kind (`"rome"`) or a table with a kind,
/// an optional label and hyperparameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicySpec {
    Name(String),
    Table {
        kind: String,
        #[serde(default)]
        label: Option<String>,
        #[serde(flatten)]
        overrides: toml::Table,
    },
}

impl From<PolicyKind> for PolicySpec {
    fn from(kind: PolicyKind) -> Self {
        PolicySpec::Name(kind.label().to_string())
    }
}

/// Policy with its hyperparameters fully resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedPolicy {
    pub kind: PolicyKind,
    pub label: String,
    pub hyper: Hyper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    /// Number of stages `K` of the staged schedule.
    pub stages: usize,
    /// Replaces the staged schedule when present.
    pub rectangular: Option<Rectangular>,
    pub replications: usize,
    pub seed: u64,
    /// Decisions within a stage share the stage-start state.
    pub batch: bool,
    pub write_traces: bool,
    pub threads: Option<usize>,
    /// Environment overrides; the setting always comes from `setting`.
    pub env: Option<EnvConfig>,
    /// Defaults shared by every policy. Block ridges left unset are derived
    /// from the environment's variance components.
    pub hyper: Hyper,
    pub policies: Vec<PolicySpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            setting: Setting::Heterogeneous,
            stages: 60,
            rectangular: None,
            replications: 10,
            seed: 0,
            batch: false,
            write_traces: false,
            threads: None,
            env: None,
            hyper: Hyper::default(),
            policies: [
                PolicyKind::Rome,
                PolicyKind::RomeBlm,
                PolicyKind::RomeSu,
                PolicyKind::Standard,
                PolicyKind::Ac,
                PolicyKind::IntelPooling,
                PolicyKind::NnrLinear,
                PolicyKind::FeatureMapLinear,
            ]
            .into_iter()
            .map(PolicySpec::from)
            .collect(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn schedule(&self) -> Schedule {
        match self.rectangular {
            Some(r) => rectangular_schedule(r.users, r.times),
            None => staged_schedule(self.stages),
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        let mut cfg = self.env.clone().unwrap_or_else(|| EnvConfig::new(self.setting));
        cfg.setting = self.setting;
        cfg
    }

    /// Resolves every policy entry against the shared defaults.
    pub fn resolve_policies(&self) -> Result<Vec<ResolvedPolicy>> {
        let schedule = self.schedule();
        let mut base = self.hyper.clone();
        if base.ridges.is_none() {
            base.ridges = Some(prior_ridges(&self.env_config(), schedule.num_times(), base.gamma));
        }
        let mut out: Vec<ResolvedPolicy> = Vec::new();
        for spec in &self.policies {
            let (kind, label, overrides) = match spec {
                PolicySpec::Name(name) => {
                    let kind: PolicyKind = name.parse()?;
                    (kind, kind.label().to_string(), None)
                }
                PolicySpec::Table { kind, label, overrides } => {
                    let kind: PolicyKind = kind.parse()?;
                    (kind, label.clone().unwrap_or_else(|| kind.label().to_string()), Some(overrides))
                }
            };
            let hyper = match overrides {
                Some(o) if !o.is_empty() => merge_hyper(&base, o)?,
                _ => base.clone(),
            };
            hyper.validate()?;
            if out.iter().any(|p| p.label == label) {
                return Err(invalid("policies", format!("duplicate label `{label}`")));
            }
            out.push(ResolvedPolicy { kind, label, hyper });
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replications", "must be positive"));
        }
        if self.schedule().is_empty() {
            return Err(invalid("schedule", "has no decision points"));
        }
        if self.policies.is_empty() {
            return Err(Error::Empty("policies"));
        }
        if self.threads == Some(0) {
            return Err(invalid("threads", "must be positive"));
        }
        self.resolve_policies().map(|_| ())
    }
}

fn merge_hyper(base: &Hyper, overrides: &toml::Table) -> Result<Hyper> {
    let mut table = toml::Table::try_from(base).map_err(|e| Error::Parse(e.to_string()))?;
    for (k, v) in overrides {
        table.insert(k.clone(), v.clone());
    }
    table.try_into().map_err(|e: toml::de::Error| Error::Parse(e.to_string()))
}

/// Block ridges set to the inverse second moments of the true effects:
/// `1/σ²` per block, floored at variance 0.01 when an effect is absent.
pub fn prior_ridges(cfg: &EnvConfig, num_times: usize, gamma: f64) -> BlockRidges {
    const FLOOR: f64 = 0.01;
    let user_var = if cfg.setting.has_user_effects() { cfg.user_sd.powi(2) } else { 0.0 };
    let time_var = if cfg.setting.has_time_effects() && num_times > 0 {
        let tau = cfg.time_decay.unwrap_or(num_times as f64 / 10.0).max(1e-9);
        let dir2 = cfg.time_direction.iter().map(|u| u * u).sum::<f64>() / cfg.time_direction.len() as f64;
        let decay2 = (1..=num_times).map(|t| (-2.0 * t as f64 / tau).exp()).sum::<f64>() / num_times as f64;
        cfg.time_scale.powi(2) * dir2 * decay2
    } else {
        0.0
    };
    BlockRidges {
        baseline: gamma,
        shared: gamma,
        user: 1.0 / user_var.max(FLOOR),
        time: 1.0 / time_var.max(FLOOR),
    }
}

fn label_hash(label: &str) -> u64 {
    // FNV-1a: stable across platforms and releases.
    label
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Regret curves of a finished experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub policies: Vec<String>,
    /// `curves[p][r][k]`: cumulative regret of policy `p` in replication `r`
    /// after stage `k + 1`.
    pub curves: Vec<Vec<Vec<f64>>>,
}

impl ExperimentResult {
    pub fn index(&self, label: &str) -> Option<usize> {
        self.policies.iter().position(|p| p == label)
    }

    /// Final cumulative regret per replication.
    pub fn finals(&self, p: usize) -> Vec<f64> {
        self.curves[p].iter().map(|c| c.last().copied().unwrap_or(0.0)).collect()
    }

    pub fn mean_final(&self, p: usize) -> f64 {
        let f = self.finals(p);
        f.iter().sum::<f64>() / f.len() as f64
    }

    pub fn mean_final_of(&self, label: &str) -> Option<f64> {
        self.index(label).map(|p| self.mean_final(p))
    }

    /// `policy,replication,stage,cum_regret`.
    pub fn write_cum_regret(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["policy", "replication", "stage", "cum_regret"])?;
        for (p, reps) in self.curves.iter().enumerate() {
            for (r, curve) in reps.iter().enumerate() {
                for (k, v) in curve.iter().enumerate() {
                    w.write_record([self.policies[p].clone(), r.to_string(), (k + 1).to_string(), v.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `policy,replication,final_regret`.
    pub fn write_summary(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["policy", "replication", "final_regret"])?;
        for p in 0..self.policies.len() {
            for (r, v) in self.finals(p).iter().enumerate() {
                w.write_record([self.policies[p].clone(), r.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// `row_policy,col_policy,win_pct,p_value`: how often the row policy had
    /// lower final regret, and a two-sided paired t-test on final regret.
    /// The p-value is empty with fewer than two replications.
    pub fn write_pairwise(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row_policy", "col_policy", "win_pct", "p_value"])?;
        let finals: Vec<_> = (0..self.policies.len()).map(|p| self.finals(p)).collect();
        for (a, fa) in finals.iter().enumerate() {
            for (b, fb) in finals.iter().enumerate() {
                if a == b {
                    continue;
                }
                let wins = fa.iter().zip(fb).filter(|(x, y)| x < y).count();
                let win_pct = 100.0 * wins as f64 / fa.len() as f64;
                let p = if fa.len() >= 2 {
                    paired_ttest(fa, fb, Alternative::TwoSided)?.to_string()
                } else {
                    String::new()
                };
                w.write_record([
                    self.policies[a].clone(),
                    self.policies[b].clone(),
                    win_pct.to_string(),
                    p,
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `cum_regret.csv`, `summary.csv` and `pairwise.csv`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        self.write_cum_regret(&dir.join("cum_regret.csv"))?;
        self.write_summary(&dir.join("summary.csv"))?;
        self.write_pairwise(&dir.join("pairwise.csv"))
    }
}

/// One replication of one policy: environment seed `seed`, the known user
/// graph, a chain time graph, and a policy stream derived from the label.
pub fn run_replication(
    policy: &ResolvedPolicy,
    env_cfg: &EnvConfig,
    schedule: &Schedule,
    seed: u64,
    mode: UpdateMode,
) -> Result<RunOutcome> {
    let env = Environment::new(env_cfg.clone(), schedule.num_users(), schedule.num_times(), seed)?;
    let user_graph = env.user_graph(policy.hyper.knn)?;
    let time_graph = chain_graph(schedule.num_times());
    let ctx = BuildContext {
        num_users: schedule.num_users(),
        num_times: schedule.num_times(),
        stages: schedule.num_stages(),
        context_dim: CONTEXT_DIM,
        user_graph: &user_graph,
        time_graph: &time_graph,
        seed: seed ^ label_hash(&policy.label),
        env: Some(&env),
    };
    let mut built = build_policy(policy.kind, &policy.label, &policy.hyper, &ctx)?;
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(label_hash(&policy.label));
    run_with_regret(
        built.as_mut(),
        &env,
        schedule,
        mode,
        (policy.hyper.pi_min, policy.hyper.pi_max),
        &mut rng,
    )
}

/// Path of the trace of `policy` in replication `rep`.
pub fn trace_path(dir: &Path, policy: &str, rep: usize) -> PathBuf {
    dir.join("traces").join(format!("{policy}_rep{rep}.jsonl"))
}

/// Runs every (replication, policy) pair. Replication `r` uses environment
/// seed `seed + r`; each policy draws from its own stream, so results do not
/// depend on the thread count or on which other policies are run. Traces are
/// written under `out` when `write_traces` is set.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let policies = cfg.resolve_policies()?;
    let threads = match cfg.threads {
        Some(n) => Some(n),
        None => std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0),
    };
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| invalid("threads", e.to_string()))?
    };
    let trace_dir = match (cfg.write_traces, out) {
        (true, Some(dir)) => {
            std::fs::create_dir_all(dir.join("traces"))?;
            Some(dir)
        }
        _ => None,
    };
    let schedule = cfg.schedule();
    let env_cfg = cfg.env_config();
    let mode = if cfg.batch { UpdateMode::Batched } else { UpdateMode::Sequential };
    let jobs: Vec<(usize, usize)> = (0..cfg.replications)
        .flat_map(|r| (0..policies.len()).map(move |p| (r, p)))
        .collect();
    let curves: Vec<Vec<f64>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, p)| {
                let seed = cfg.seed.wrapping_add(r as u64);
                let outcome = run_replication(&policies[p], &env_cfg, &schedule, seed, mode)?;
                if let Some(dir) = trace_dir {
                    outcome.trace.save(&trace_path(dir, &policies[p].label, r))?;
                }
                Ok(outcome.cumulative_regret)
            })
            .collect::<Result<_>>()
    })?;
    let mut grouped = vec![Vec::with_capacity(cfg.replications); policies.len()];
    for ((_, p), c) in jobs.into_iter().zip(curves) {
        grouped[p].push(c);
    }
    Ok(ExperimentResult {
        policies: policies.into_iter().map(|p| p.label).collect(),
        curves: grouped,
    })
}
