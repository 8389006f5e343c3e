//! Runs a policy through a schedule against an environment.

use crate::env::{arm_features, cumulative, stage_regret, Environment, Schedule};
use crate::error::{invalid, Result};
use crate::policy::{DecisionPoint, Policy, SimRng};
use crate::trace::{RunTrace, TraceRecord};

/// How decisions inside a stage see the learned state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateMode {
    /// Observe each reward before the next decision.
    #[default]
    Sequential,
    /// All decisions of a stage use the stage-start state.
    Batched,
}

/// Plays every decision point of `schedule` and records the trace.
pub fn run_policy(
    policy: &mut dyn Policy,
    env: &Environment,
    schedule: &Schedule,
    mode: UpdateMode,
    rng: &mut SimRng,
) -> Result<RunTrace> {
    if schedule.num_users() > env.num_users() || schedule.num_times() > env.num_times() {
        return Err(invalid("schedule", "larger than the environment"));
    }
    let mut trace = RunTrace::new(policy.name());
    trace.records.reserve(schedule.len());
    for stage in schedule.stages() {
        let contexts: Vec<&[f64]> = stage
            .iter()
            .map(|p| env.context(p.user, p.time))
            .collect::<Result<_>>()?;
        let arms: Vec<_> = contexts.iter().map(|s| arm_features(s)).collect();
        let point = |k: usize| DecisionPoint {
            stage: stage[k].stage,
            user: stage[k].user,
            time: stage[k].time,
            context: contexts[k],
            arms: &arms[k],
        };
        let mut decisions = Vec::with_capacity(stage.len());
        for k in 0..stage.len() {
            let p = point(k);
            let d = policy.decide(&p, rng)?;
            if mode == UpdateMode::Sequential {
                let reward = env.reward(p.user, p.time, d.action)?;
                let learned = policy.observe(&p, &d, reward, rng)?;
                trace.records.push(record(&p, &d, reward, learned));
            } else {
                decisions.push(d);
            }
        }
        for (k, d) in decisions.iter().enumerate() {
            let p = point(k);
            let reward = env.reward(p.user, p.time, d.action)?;
            let learned = policy.observe(&p, d, reward, rng)?;
            trace.records.push(record(&p, d, reward, learned));
        }
    }
    Ok(trace)
}

fn record(
    p: &DecisionPoint<'_>,
    d: &crate::policy::Decision,
    reward: f64,
    learned: crate::policy::Learned,
) -> TraceRecord {
    TraceRecord {
        stage: p.stage,
        i: p.user,
        t: p.time,
        context: p.context.to_vec(),
        arm_features: p.arms.iter().map(|x| x.iter().copied().collect()).collect(),
        a_bar: d.a_bar,
        action: d.action,
        pi0: d.pi0,
        reward,
        pseudo_reward: learned.pseudo_reward,
        weight: learned.weight,
    }
}

/// Trace plus its regret curve.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: RunTrace,
    pub stage_regret: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
}

impl RunOutcome {
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

/// [`run_policy`] followed by regret accounting against the environment.
pub fn run_with_regret(
    policy: &mut dyn Policy,
    env: &Environment,
    schedule: &Schedule,
    mode: UpdateMode,
    pi_bounds: (f64, f64),
    rng: &mut SimRng,
) -> Result<RunOutcome> {
    let trace = run_policy(policy, env, schedule, mode, rng)?;
    let per_stage = stage_regret(&trace.records, env, pi_bounds.0, pi_bounds.1)?;
    Ok(RunOutcome {
        cumulative_regret: cumulative(&per_stage),
        stage_regret: per_stage,
        trace,
    })
}
