//! Off-policy evaluation on logged bandit data: IPS and SNIPS estimators,
//! unit-level bootstrap, and paired one-sided t-tests.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::baselines::{build_policy, BuildContext, Hyper, PolicyKind};
use crate::env::features;
use crate::error::{invalid, Error, Result};
use crate::graph::{chain_graph, knn_graph, CohesionGraph};
use crate::policy::{Decision, DecisionPoint, Policy, SimRng};

/// Records whose logging propensity falls outside this range are dropped by
/// [`filter_propensities`].
pub const PROPENSITY_RANGE: (f64, f64) = (0.01, 0.99);

/// One logged decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedRecord {
    pub unit: usize,
    pub time: usize,
    pub context: Vec<f64>,
    pub action: usize,
    /// Logging probability of the logged action.
    pub propensity: f64,
    pub reward: f64,
}

impl LoggedRecord {
    /// Logging probability of the control action (binary actions).
    pub fn control_propensity(&self) -> f64 {
        if self.action == 0 {
            self.propensity
        } else {
            1.0 - self.propensity
        }
    }
}

/// Keeps records with propensity in [`PROPENSITY_RANGE`].
pub fn filter_propensities(log: &[LoggedRecord]) -> Vec<LoggedRecord> {
    log.iter()
        .filter(|r| (PROPENSITY_RANGE.0..=PROPENSITY_RANGE.1).contains(&r.propensity))
        .cloned()
        .collect()
}

/// Checks propensities, actions, rewards and context dimensions.
pub fn validate_log(log: &[LoggedRecord]) -> Result<()> {
    let first = log.first().ok_or(Error::Empty("log"))?;
    for r in log {
        if !(r.propensity > 0.0 && r.propensity < 1.0) {
            return Err(Error::InvalidPropensity(r.propensity));
        }
        if r.action > 1 {
            return Err(Error::InvalidAction { action: r.action, arm: 1 });
        }
        if !r.reward.is_finite() || r.context.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("logged record"));
        }
        if r.context.len() != first.context.len() {
            return Err(Error::DimensionMismatch {
                expected: first.context.len(),
                got: r.context.len(),
            });
        }
    }
    Ok(())
}

fn weights(log: &[LoggedRecord], target: &[f64]) -> Result<Vec<f64>> {
    if log.is_empty() {
        return Err(Error::Empty("log"));
    }
    if log.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: log.len(),
            got: target.len(),
        });
    }
    log.iter()
        .zip(target)
        .map(|(r, &pi)| {
            if !(r.propensity > 0.0 && r.propensity <= 1.0) {
                return Err(Error::InvalidPropensity(r.propensity));
            }
            if !(0.0..=1.0).contains(&pi) {
                return Err(invalid("target probability", format!("{pi} not in [0, 1]")));
            }
            Ok(pi / r.propensity)
        })
        .collect()
}

/// `(1/T) Σ (π_t/p_t) r_t`, where `target[t]` is the target probability of
/// the logged action.
pub fn ips(log: &[LoggedRecord], target: &[f64]) -> Result<f64> {
    let w = weights(log, target)?;
    Ok(w.iter().zip(log).map(|(w, r)| w * r.reward).sum::<f64>() / log.len() as f64)
}

/// `Σ w_t r_t / Σ w_t`.
pub fn snips(log: &[LoggedRecord], target: &[f64]) -> Result<f64> {
    let w = weights(log, target)?;
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(invalid("weights", "all importance weights are zero"));
    }
    Ok(w.iter().zip(log).map(|(w, r)| w * r.reward).sum::<f64>() / total)
}

/// Stable sort by `(time, unit)`: the order in which an online policy
/// replays the log.
pub fn sort_log(log: &mut [LoggedRecord]) {
    log.sort_by_key(|r| (r.time, r.unit));
}

/// A policy evaluated by replaying a log.
pub trait TargetPolicy {
    /// Target probability of the record's logged action, before learning
    /// from it.
    fn prob(&mut self, rec: &LoggedRecord, rng: &mut SimRng) -> Result<f64>;
    fn learn(&mut self, rec: &LoggedRecord, rng: &mut SimRng) -> Result<()>;
}

/// Stationary target given as a probability function.
pub struct FixedTarget<F>(pub F);

impl<F: FnMut(&LoggedRecord) -> f64> TargetPolicy for FixedTarget<F> {
    fn prob(&mut self, rec: &LoggedRecord, _: &mut SimRng) -> Result<f64> {
        Ok((self.0)(rec))
    }
    fn learn(&mut self, _: &LoggedRecord, _: &mut SimRng) -> Result<()> {
        Ok(())
    }
}

/// Adapts a bandit [`Policy`] to log replay. Units and times are renumbered
/// `1..N` and `1..T` in sorted order.
pub struct OnlineTarget {
    policy: Box<dyn Policy>,
    users: BTreeMap<usize, usize>,
    times: BTreeMap<usize, usize>,
}

impl OnlineTarget {
    /// Builds `kind` sized for `log`. The user graph links each unit to its
    /// nearest neighbours in mean logged context; the time graph is a chain.
    pub fn build(kind: PolicyKind, label: &str, hyper: &Hyper, log: &[LoggedRecord], seed: u64) -> Result<Self> {
        validate_log(log)?;
        let users: BTreeMap<usize, usize> = index_map(log.iter().map(|r| r.unit));
        let times: BTreeMap<usize, usize> = index_map(log.iter().map(|r| r.time));
        let dim = log[0].context.len();
        let mut means = vec![vec![0.0; dim]; users.len()];
        let mut counts = vec![0usize; users.len()];
        for r in log {
            let k = users[&r.unit] - 1;
            counts[k] += 1;
            for (m, v) in means[k].iter_mut().zip(&r.context) {
                *m += v;
            }
        }
        for (m, &c) in means.iter_mut().zip(&counts) {
            m.iter_mut().for_each(|v| *v /= c as f64);
        }
        let user_graph = if users.len() >= 2 {
            knn_graph(&means, hyper.knn.clamp(1, users.len() - 1))?
        } else {
            CohesionGraph::empty(users.len())
        };
        let time_graph = chain_graph(times.len());
        let ctx = BuildContext {
            num_users: users.len(),
            num_times: times.len(),
            stages: users.len().max(times.len()),
            context_dim: dim,
            user_graph: &user_graph,
            time_graph: &time_graph,
            seed,
            env: None,
        };
        Ok(Self {
            policy: build_policy(kind, label, hyper, &ctx)?,
            users,
            times,
        })
    }

    fn point<'a>(&self, rec: &'a LoggedRecord, arms: &'a [nalgebra::DVector<f64>]) -> Result<DecisionPoint<'a>> {
        let user = *self
            .users
            .get(&rec.unit)
            .ok_or_else(|| Error::OutOfRange(format!("unit {} not in the log", rec.unit)))?;
        let time = *self
            .times
            .get(&rec.time)
            .ok_or_else(|| Error::OutOfRange(format!("time {} not in the log", rec.time)))?;
        Ok(DecisionPoint {
            stage: time,
            user,
            time,
            context: &rec.context,
            arms,
        })
    }
}

fn index_map(keys: impl Iterator<Item = usize>) -> BTreeMap<usize, usize> {
    keys.collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(k, u)| (u, k + 1))
        .collect()
}

impl TargetPolicy for OnlineTarget {
    fn prob(&mut self, rec: &LoggedRecord, rng: &mut SimRng) -> Result<f64> {
        let arms = [features(&rec.context, 1)];
        let p = self.point(rec, &arms)?;
        let d = self.policy.decide(&p, rng)?;
        Ok(match rec.action {
            0 => d.pi0,
            a if a == d.a_bar => 1.0 - d.pi0,
            _ => 0.0,
        })
    }

    fn learn(&mut self, rec: &LoggedRecord, rng: &mut SimRng) -> Result<()> {
        let arms = [features(&rec.context, 1)];
        let p = self.point(rec, &arms)?;
        let d = Decision {
            a_bar: 1,
            action: rec.action,
            pi0: rec.control_propensity(),
        };
        self.policy.observe(&p, &d, rec.reward, rng)?;
        Ok(())
    }
}

/// Estimates for one replay.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub target_probs: Vec<f64>,
    pub ips: f64,
    pub snips: f64,
    /// Mean logged reward: the value of the logging policy.
    pub logging_value: f64,
}

/// Replays `log` (already in replay order) through `target`.
pub fn evaluate(log: &[LoggedRecord], target: &mut dyn TargetPolicy, rng: &mut SimRng) -> Result<Evaluation> {
    let mut probs = Vec::with_capacity(log.len());
    for rec in log {
        probs.push(target.prob(rec, rng)?);
        target.learn(rec, rng)?;
    }
    Ok(Evaluation {
        ips: ips(log, &probs)?,
        snips: snips(log, &probs)?,
        logging_value: log.iter().map(|r| r.reward).sum::<f64>() / log.len() as f64,
        target_probs: probs,
    })
}

/// Resamples units with replacement. The `k`-th drawn unit is renamed `k`,
/// so a unit drawn twice becomes two distinct units. Returned in replay order.
pub fn resample_units(log: &[LoggedRecord], rng: &mut impl Rng) -> Vec<LoggedRecord> {
    let mut by_unit: BTreeMap<usize, Vec<&LoggedRecord>> = BTreeMap::new();
    for r in log {
        by_unit.entry(r.unit).or_default().push(r);
    }
    let groups: Vec<_> = by_unit.into_values().collect();
    let mut out = Vec::with_capacity(log.len());
    for k in 0..groups.len() {
        for r in &groups[rng.random_range(0..groups.len())] {
            out.push(LoggedRecord { unit: k, ..(*r).clone() });
        }
    }
    sort_log(&mut out);
    out
}

fn replicate_rng(seed: u64, b: usize) -> SimRng {
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(b as u64 + 1);
    rng
}

/// `B` unit-level bootstrap replicates of `stat`, computed in parallel.
/// Replicate `b` gets its own resample and a fresh RNG stream.
pub fn bootstrap<F>(log: &[LoggedRecord], b: usize, seed: u64, stat: F) -> Result<Vec<f64>>
where
    F: Fn(&[LoggedRecord], &mut SimRng) -> Result<f64> + Sync,
{
    if log.is_empty() {
        return Err(Error::Empty("log"));
    }
    if b == 0 {
        return Err(invalid("bootstrap", "need at least one replicate"));
    }
    (0..b)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(seed, k);
            let sample = resample_units(log, &mut rng);
            stat(&sample, &mut rng)
        })
        .collect()
}

/// Policy to evaluate.
#[derive(Debug, Clone)]
pub struct PolicyEntry {
    pub kind: PolicyKind,
    pub label: String,
    pub hyper: Hyper,
}

/// Bootstrap estimates, `estimates[b][p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub policies: Vec<String>,
    pub estimates: Vec<Vec<f64>>,
}

impl BootstrapResult {
    pub fn column(&self, p: usize) -> Vec<f64> {
        self.estimates.iter().map(|row| row[p]).collect()
    }

    /// `m[r][c]`: one-sided p-value for "policy `r` beats policy `c`";
    /// diagonal is NaN.
    pub fn pvalue_matrix(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.policies.len();
        let cols: Vec<_> = (0..n).map(|p| self.column(p)).collect();
        let mut m = vec![vec![f64::NAN; n]; n];
        for r in 0..n {
            for c in 0..n {
                if r != c {
                    m[r][c] = paired_ttest(&cols[c], &cols[r], Alternative::Greater)?;
                }
            }
        }
        Ok(m)
    }

    /// `policy,replicate,estimate`.
    pub fn write_estimates(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["policy", "replicate", "estimate"])?;
        for (b, row) in self.estimates.iter().enumerate() {
            for (p, v) in row.iter().enumerate() {
                w.write_record([self.policies[p].clone(), b.to_string(), v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Square p-value matrix with a leading `policy` column.
    pub fn write_pvalues(&self, path: &Path) -> Result<()> {
        let m = self.pvalue_matrix()?;
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["policy".to_string()];
        header.extend(self.policies.iter().cloned());
        w.write_record(&header)?;
        for (r, row) in m.iter().enumerate() {
            let mut rec = vec![self.policies[r].clone()];
            rec.extend(row.iter().map(|v| if v.is_nan() { String::new() } else { v.to_string() }));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// For each replicate and policy: SNIPS of the replayed policy minus the
/// mean logged reward of the resample.
pub fn bootstrap_eval(log: &[LoggedRecord], policies: &[PolicyEntry], b: usize, seed: u64) -> Result<BootstrapResult> {
    validate_log(log)?;
    if policies.is_empty() {
        return Err(Error::Empty("policies"));
    }
    let rows: Vec<Vec<f64>> = (0..b)
        .into_par_iter()
        .map(|k| {
            let mut rng = replicate_rng(seed, k);
            let sample = resample_units(log, &mut rng);
            policies
                .iter()
                .map(|p| {
                    let policy_seed: u64 = rng.random();
                    let mut target = OnlineTarget::build(p.kind, &p.label, &p.hyper, &sample, policy_seed)?;
                    let e = evaluate(&sample, &mut target, &mut rng)?;
                    Ok(e.snips - e.logging_value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(invalid("bootstrap", "need at least one replicate"));
    }
    Ok(BootstrapResult {
        policies: policies.iter().map(|p| p.label.clone()).collect(),
        estimates: rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// `mean(b − a) > 0`.
    Greater,
    TwoSided,
}

/// Paired t-test on `b − a`. Zero-variance differences give `p = 1` when the
/// mean difference is `≤ 0` (`= 0` for two-sided) and `p = 0` otherwise.
pub fn paired_ttest(a: &[f64], b: &[f64], alt: Alternative) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(invalid("samples", "need at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var > 0.0) {
        let hit = match alt {
            Alternative::Greater => mean > 0.0,
            Alternative::TwoSided => mean != 0.0,
        };
        return Ok(if hit { 0.0 } else { 1.0 });
    }
    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).map_err(|e| invalid("t", e.to_string()))?;
    Ok(match alt {
        Alternative::Greater => dist.sf(t),
        Alternative::TwoSided => (2.0 * dist.sf(t.abs())).min(1.0),
    })
}
