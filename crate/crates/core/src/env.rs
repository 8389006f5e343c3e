//! Simulation environments, recruitment schedules, and regret accounting.
//!
//! Rewards follow `R = g(S) + x(S, A)ᵀθ_{i,t} + ε` with `x(s, a) = a·(1, s₁, s₂)`,
//! `S ~ U(−1, 1)²` and `ε ~ N(0, σ²)`. Contexts and noise are drawn once per
//! `(i, t)` when the environment is built, so every policy run against the
//! same environment sees the same context stream and the same noise.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{knn_graph, CohesionGraph};
use crate::policy::argmax_arm;
use crate::trace::TraceRecord;

/// Context dimension.
pub const CONTEXT_DIM: usize = 2;
/// Differential-feature dimension, `x(s, 1) = (1, s₁, s₂)`.
pub const FEATURE_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Linear baseline, one causal parameter for everybody.
    Homogeneous,
    /// Linear baseline, per-user causal parameters.
    Heterogeneous,
    /// Nonlinear baseline, per-user and per-time causal parameters.
    Nonlinear,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Homogeneous, Setting::Heterogeneous, Setting::Nonlinear];

    pub fn has_user_effects(self) -> bool {
        !matches!(self, Setting::Homogeneous)
    }

    pub fn has_time_effects(self) -> bool {
        matches!(self, Setting::Nonlinear)
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Homogeneous => "homogeneous",
            Setting::Heterogeneous => "heterogeneous",
            Setting::Nonlinear => "nonlinear",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "homogeneous" | "homogeneous-users" => Ok(Setting::Homogeneous),
            "heterogeneous" | "heterogeneous-users" => Ok(Setting::Heterogeneous),
            "nonlinear" => Ok(Setting::Nonlinear),
            other => Err(Error::Parse(format!("unknown setting `{other}`"))),
        }
    }
}

/// Numeric knobs of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub setting: Setting,
    pub theta: Vec<f64>,
    /// Standard deviation of the per-user perturbations.
    pub user_sd: f64,
    /// Amplitude `c` of the time effect `c·exp(−t/τ)·u`.
    pub time_scale: f64,
    pub time_direction: Vec<f64>,
    /// Decay constant `τ`; `None` uses a tenth of the number of time points.
    pub time_decay: Option<f64>,
    pub noise_sd: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self::new(Setting::Homogeneous)
    }
}

impl EnvConfig {
    pub fn new(setting: Setting) -> Self {
        Self {
            setting,
            theta: vec![1.0, 0.5, -4.0],
            user_sd: 1.0,
            time_scale: 2.0,
            time_direction: vec![-1.0, 0.5, 1.0],
            time_decay: None,
            noise_sd: 1.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.theta.len() != FEATURE_DIM || self.time_direction.len() != FEATURE_DIM {
            return Err(Error::DimensionMismatch {
                expected: FEATURE_DIM,
                got: self.theta.len().min(self.time_direction.len()),
            });
        }
        if !(self.user_sd >= 0.0 && self.noise_sd >= 0.0) {
            return Err(invalid("sd", "standard deviations must be non-negative"));
        }
        if let Some(tau) = self.time_decay {
            if !(tau > 0.0) {
                return Err(invalid("time_decay", "must be positive"));
            }
        }
        Ok(())
    }
}

/// `x(s, a) = a·(1, s₁, …)`.
pub fn features(s: &[f64], a: usize) -> DVector<f64> {
    let a = a as f64;
    DVector::from_fn(s.len() + 1, |j, _| if j == 0 { a } else { a * s[j - 1] })
}

/// Candidate features for the single non-baseline arm.
pub fn arm_features(s: &[f64]) -> Vec<DVector<f64>> {
    vec![features(s, 1)]
}

/// `S ~ U(−1, 1)²`.
pub fn sample_context(rng: &mut impl Rng) -> [f64; CONTEXT_DIM] {
    [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)]
}

/// `g(s) = 2 − 2s₁ + 3s₂`.
pub fn linear_baseline(s: &[f64]) -> f64 {
    2.0 - 2.0 * s[0] + 3.0 * s[1]
}

/// (amplitude, centre, standard deviations, rotation)
const BUMPS: [(f64, [f64; 2], [f64; 2], f64); 6] = [
    (4.0, [-0.5, 0.4], [0.35, 0.15], 0.6),
    (-3.5, [0.45, 0.55], [0.2, 0.4], -0.4),
    (3.0, [0.3, -0.5], [0.25, 0.25], 0.0),
    (-2.5, [-0.6, -0.6], [0.3, 0.12], 1.1),
    (2.0, [0.0, 0.0], [0.15, 0.5], 0.3),
    (2.5, [0.8, -0.1], [0.12, 0.3], -0.8),
];

/// Nonlinear baseline: six rotated anisotropic Gaussian bumps on top of a
/// two-level axis-aligned step function.
pub fn nonlinear_baseline(s: &[f64]) -> f64 {
    let step = if s[0] < -0.2 {
        if s[1] > 0.5 {
            3.0
        } else {
            1.5
        }
    } else if s[1] < -0.3 {
        -0.5
    } else {
        1.0
    };
    let bumps: f64 = BUMPS
        .iter()
        .map(|&(amp, c, sd, rot)| {
            let (dx, dy) = (s[0] - c[0], s[1] - c[1]);
            let (cos, sin) = (rot.cos(), rot.sin());
            let u = (cos * dx + sin * dy) / sd[0];
            let v = (-sin * dx + cos * dy) / sd[1];
            amp * (-0.5 * (u * u + v * v)).exp()
        })
        .sum();
    step + bumps
}

/// Upper bound on `|nonlinear_baseline|` over the plane.
pub fn nonlinear_baseline_bound() -> f64 {
    3.0 + BUMPS.iter().map(|b| b.0.abs()).sum::<f64>()
}

/// `c·exp(−t/τ)·u` with the default amplitude and direction and `τ = K/10`.
pub fn time_effect(t: usize, k: usize) -> DVector<f64> {
    let cfg = EnvConfig::new(Setting::Nonlinear);
    decaying_effect(&cfg, t, (k as f64 / 10.0).max(f64::MIN_POSITIVE))
}

fn decaying_effect(cfg: &EnvConfig, t: usize, tau: f64) -> DVector<f64> {
    DVector::from_column_slice(&cfg.time_direction) * (cfg.time_scale * (-(t as f64) / tau).exp())
}

/// Optimal clipped decision at one decision point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalDecision {
    /// 0 when the best arm does not beat control.
    pub a_star: usize,
    pub a_bar_star: usize,
    pub pi0_star: f64,
    /// `π*(Ā*)·x(S, Ā*)ᵀθ*`.
    pub value: f64,
}

/// Best arm and the clipped optimal probabilities. `Δ = 0` resolves to
/// control.
pub fn optimal_policy(arms: &[DVector<f64>], theta: &DVector<f64>, pi_min: f64, pi_max: f64) -> OptimalDecision {
    let a_bar = argmax_arm(arms.iter().map(|x| x.dot(theta))).expect("at least one arm");
    let delta = arms[a_bar - 1].dot(theta);
    let (a_star, pi0) = if delta > 0.0 { (a_bar, pi_min) } else { (0, pi_max) };
    OptimalDecision {
        a_star,
        a_bar_star: a_bar,
        pi0_star: pi0,
        value: (1.0 - pi0) * delta,
    }
}

/// `π*(Ā*)x*ᵀθ* − π(Ā)x(Ā)ᵀθ*` for one decision.
pub fn decision_regret(opt: &OptimalDecision, arms: &[DVector<f64>], theta: &DVector<f64>, a_bar: usize, pi0: f64) -> f64 {
    opt.value - (1.0 - pi0) * arms[a_bar - 1].dot(theta)
}

/// One decision point of a recruitment schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulePoint {
    pub stage: usize,
    pub user: usize,
    pub time: usize,
}

/// Ordered decision points, grouped by stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    points: Vec<SchedulePoint>,
    num_users: usize,
    num_times: usize,
    num_stages: usize,
}

impl Schedule {
    pub fn points(&self) -> &[SchedulePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_times(&self) -> usize {
        self.num_times
    }

    pub fn num_stages(&self) -> usize {
        self.num_stages
    }

    /// Decision points of each stage, in stage order.
    pub fn stages(&self) -> impl Iterator<Item = &[SchedulePoint]> {
        self.points.chunk_by(|a, b| a.stage == b.stage)
    }
}

/// Staged recruitment: user `k` enters at stage `k`; stage `k` visits
/// `(1, k), (2, k−1), …, (k, 1)`.
pub fn staged_schedule(k: usize) -> Schedule {
    rectangular_schedule(k, k).truncate_stages(k)
}

/// Staged entry where each user leaves after `times` observations.
pub fn rectangular_schedule(users: usize, times: usize) -> Schedule {
    let num_stages = if users == 0 || times == 0 { 0 } else { users + times - 1 };
    let mut points = Vec::with_capacity(users * times);
    for stage in 1..=num_stages {
        for user in 1..=users.min(stage) {
            let time = stage + 1 - user;
            if time <= times {
                points.push(SchedulePoint { stage, user, time });
            }
        }
    }
    Schedule {
        points,
        num_users: users,
        num_times: times,
        num_stages,
    }
}

impl Schedule {
    fn truncate_stages(mut self, k: usize) -> Self {
        self.points.retain(|p| p.stage <= k);
        self.num_stages = self.num_stages.min(k);
        self
    }
}

/// A fully drawn environment instance.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    num_users: usize,
    num_times: usize,
    tau: f64,
    user_effects: Vec<DVector<f64>>,
    contexts: Vec<[f64; CONTEXT_DIM]>,
    noise: Vec<f64>,
}

impl Environment {
    pub fn new(cfg: EnvConfig, num_users: usize, num_times: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if num_users == 0 || num_times == 0 {
            return Err(invalid("environment", "need at least one user and one time point"));
        }
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        let mut user_rng = stream(1);
        let user_dist = Normal::new(0.0, cfg.user_sd).map_err(|e| invalid("user_sd", e.to_string()))?;
        let user_effects = (0..num_users)
            .map(|_| {
                let draw = DVector::from_fn(FEATURE_DIM, |_, _| user_dist.sample(&mut user_rng));
                if cfg.setting.has_user_effects() {
                    draw
                } else {
                    DVector::zeros(FEATURE_DIM)
                }
            })
            .collect();
        let mut ctx_rng = stream(2);
        let contexts = (0..num_users * num_times).map(|_| sample_context(&mut ctx_rng)).collect();
        let mut noise_rng = stream(3);
        let noise_dist = Normal::new(0.0, cfg.noise_sd).map_err(|e| invalid("noise_sd", e.to_string()))?;
        let noise = (0..num_users * num_times).map(|_| noise_dist.sample(&mut noise_rng)).collect();
        let tau = cfg.time_decay.unwrap_or((num_times as f64 / 10.0).max(1e-9));
        Ok(Self {
            cfg,
            num_users,
            num_times,
            tau,
            user_effects,
            contexts,
            noise,
        })
    }

    /// Environment sized for the staged schedule with `k` stages.
    pub fn staged(setting: Setting, k: usize, seed: u64) -> Result<Self> {
        Self::new(EnvConfig::new(setting), k, k, seed)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn setting(&self) -> Setting {
        self.cfg.setting
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_times(&self) -> usize {
        self.num_times
    }

    fn index(&self, user: usize, time: usize) -> Result<usize> {
        if user == 0 || user > self.num_users || time == 0 || time > self.num_times {
            return Err(Error::OutOfRange(format!(
                "({user}, {time}) outside {}x{} environment",
                self.num_users, self.num_times
            )));
        }
        Ok((user - 1) * self.num_times + time - 1)
    }

    pub fn context(&self, user: usize, time: usize) -> Result<&[f64]> {
        Ok(&self.contexts[self.index(user, time)?])
    }

    pub fn user_effects(&self) -> &[DVector<f64>] {
        &self.user_effects
    }

    pub fn time_effect(&self, time: usize) -> DVector<f64> {
        if self.cfg.setting.has_time_effects() {
            decaying_effect(&self.cfg, time, self.tau)
        } else {
            DVector::zeros(FEATURE_DIM)
        }
    }

    /// `θ*_{i,t}`.
    pub fn theta(&self, user: usize, time: usize) -> Result<DVector<f64>> {
        self.index(user, time)?;
        Ok(DVector::from_column_slice(&self.cfg.theta) + &self.user_effects[user - 1] + self.time_effect(time))
    }

    pub fn baseline(&self, s: &[f64]) -> f64 {
        match self.cfg.setting {
            Setting::Nonlinear => nonlinear_baseline(s),
            _ => linear_baseline(s),
        }
    }

    pub fn mean_reward(&self, user: usize, time: usize, action: usize) -> Result<f64> {
        let s = self.context(user, time)?;
        Ok(self.baseline(s) + features(s, action).dot(&self.theta(user, time)?))
    }

    /// Observed reward; the noise draw is fixed per `(i, t)`.
    pub fn reward(&self, user: usize, time: usize, action: usize) -> Result<f64> {
        if action > 1 {
            return Err(Error::InvalidAction { action, arm: 1 });
        }
        Ok(self.mean_reward(user, time, action)? + self.noise[self.index(user, time)?])
    }

    pub fn optimal(&self, user: usize, time: usize, pi_min: f64, pi_max: f64) -> Result<OptimalDecision> {
        let arms = arm_features(self.context(user, time)?);
        Ok(optimal_policy(&arms, &self.theta(user, time)?, pi_min, pi_max))
    }

    /// The "known" user network: `k`-nearest neighbours of the true user
    /// perturbations.
    pub fn user_graph(&self, k: usize) -> Result<CohesionGraph> {
        if self.num_users < 2 {
            return Ok(CohesionGraph::empty(self.num_users));
        }
        let pts: Vec<Vec<f64>> = self.user_effects.iter().map(|u| u.iter().copied().collect()).collect();
        knn_graph(&pts, k.clamp(1, self.num_users - 1))
    }

    /// Writes `theta.csv` (θ* per decision point) and `baseline_grid.csv`
    /// (`g` on a 101 × 101 grid over `[−1, 1]²`).
    pub fn write_truth(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("theta.csv"))?;
        w.write_record(["user", "time", "theta_0", "theta_1", "theta_2"])?;
        for i in 1..=self.num_users {
            for t in 1..=self.num_times {
                let th = self.theta(i, t)?;
                let mut row = vec![i.to_string(), t.to_string()];
                row.extend(th.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        let mut w = csv::Writer::from_path(dir.join("baseline_grid.csv"))?;
        w.write_record(["s1", "s2", "g"])?;
        for a in 0..=100 {
            for b in 0..=100 {
                let s = [-1.0 + 0.02 * a as f64, -1.0 + 0.02 * b as f64];
                w.write_record(&[s[0].to_string(), s[1].to_string(), self.baseline(&s).to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Average regret of each stage (stages `1..=S`), measured against the
/// environment's ground truth.
pub fn stage_regret(trace: &[TraceRecord], env: &Environment, pi_min: f64, pi_max: f64) -> Result<Vec<f64>> {
    let stages = trace.iter().map(|r| r.stage).max().unwrap_or(0);
    let mut sum = vec![0.0; stages];
    let mut count = vec![0usize; stages];
    for r in trace {
        let s = env.context(r.i, r.t).map_err(|e| Error::Misaligned(e.to_string()))?;
        if s != r.context.as_slice() {
            return Err(Error::Misaligned(format!("context of ({}, {}) differs from ground truth", r.i, r.t)));
        }
        if r.stage == 0 {
            return Err(Error::Misaligned("stage 0 in trace".into()));
        }
        let arms: Vec<DVector<f64>> = r.arm_features.iter().map(|x| DVector::from_column_slice(x)).collect();
        if r.a_bar == 0 || r.a_bar > arms.len() {
            return Err(Error::Misaligned(format!("A_bar {} with {} arms", r.a_bar, arms.len())));
        }
        let theta = env.theta(r.i, r.t)?;
        let opt = optimal_policy(&arms, &theta, pi_min, pi_max);
        sum[r.stage - 1] += decision_regret(&opt, &arms, &theta, r.a_bar, r.pi0);
        count[r.stage - 1] += 1;
    }
    sum.iter()
        .zip(&count)
        .enumerate()
        .map(|(k, (&s, &n))| {
            if n == 0 {
                Err(Error::Misaligned(format!("stage {} has no decisions", k + 1)))
            } else {
                Ok(s / n as f64)
            }
        })
        .collect()
}

/// Running sum.
pub fn cumulative(values: &[f64]) -> Vec<f64> {
    values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(s: &Schedule) -> Vec<(usize, usize, usize)> {
        s.points().iter().map(|p| (p.stage, p.user, p.time)).collect()
    }

    #[test]
    fn staged_order() {
        assert_eq!(
            pairs(&staged_schedule(3)),
            vec![(1, 1, 1), (2, 1, 2), (2, 2, 1), (3, 1, 3), (3, 2, 2), (3, 3, 1)]
        );
        assert_eq!(staged_schedule(200).len(), 20_100);
        assert_eq!(pairs(&staged_schedule(1)), vec![(1, 1, 1)]);
        let s = staged_schedule(7);
        let mut seen = 0;
        for (k, stage) in s.stages().enumerate() {
            assert_eq!(stage.len(), k + 1);
            seen += stage.len();
            assert_eq!(seen, (k + 1) * (k + 2) / 2);
        }
    }

    #[test]
    fn rectangular_order() {
        assert_eq!(
            pairs(&rectangular_schedule(2, 2)),
            vec![(1, 1, 1), (2, 1, 2), (2, 2, 1), (3, 2, 2)]
        );
        let one = rectangular_schedule(1, 4);
        assert_eq!(one.points().iter().map(|p| p.time).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(rectangular_schedule(100, 100).len(), 10_000);
        let r = rectangular_schedule(5, 3);
        for i in 1..=5 {
            assert_eq!(r.points().iter().filter(|p| p.user == i).count(), 3);
        }
    }

    #[test]
    fn contexts_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let mut sum = [0.0; 2];
        for _ in 0..n {
            let s = sample_context(&mut rng);
            for j in 0..2 {
                assert!((-1.0..=1.0).contains(&s[j]));
                sum[j] += s[j];
            }
        }
        let se = (1.0f64 / 3.0 / n as f64).sqrt();
        for v in sum {
            assert!((v / n as f64).abs() < 3.0 * se);
        }
        assert_eq!(features(&[0.2, -0.3], 1).as_slice(), &[1.0, 0.2, -0.3]);
        assert_eq!(features(&[0.2, -0.3], 0).as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn homogeneous_rewards() {
        let env = Environment::staged(Setting::Homogeneous, 2, 0).unwrap();
        let th = env.theta(2, 1).unwrap();
        assert_eq!(th.as_slice(), &[1.0, 0.5, -4.0]);
        assert_eq!(linear_baseline(&[0.0, 0.0]), 2.0);
        assert_eq!(linear_baseline(&[0.0, 0.0]) + features(&[0.0, 0.0], 1).dot(&th), 3.0);
    }

    #[test]
    fn heterogeneous_users_differ_and_are_fixed() {
        let env = Environment::staged(Setting::Heterogeneous, 5, 3).unwrap();
        assert_ne!(env.theta(1, 1).unwrap(), env.theta(2, 1).unwrap());
        assert_eq!(env.theta(3, 1).unwrap(), env.theta(3, 2).unwrap());
        let again = Environment::staged(Setting::Heterogeneous, 5, 3).unwrap();
        assert_eq!(env.theta(4, 2).unwrap(), again.theta(4, 2).unwrap());
        assert_eq!(env.reward(2, 3, 1).unwrap(), again.reward(2, 3, 1).unwrap());
    }

    #[test]
    fn nonlinear_baseline_properties() {
        let bound = nonlinear_baseline_bound();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for a in 0..=100 {
            for b in 0..=100 {
                let s = [-1.0 + 0.02 * a as f64, -1.0 + 0.02 * b as f64];
                let g = nonlinear_baseline(&s);
                assert!(g.abs() <= bound);
                assert_eq!(g, nonlinear_baseline(&s));
                xs.push(s);
                ys.push(g);
            }
        }
        let n = ys.len();
        let x = nalgebra::DMatrix::from_fn(n, 3, |r, c| if c == 0 { 1.0 } else { xs[r][c - 1] });
        let y = DVector::from_vec(ys);
        let coef = (x.transpose() * &x).cholesky().unwrap().solve(&(x.transpose() * &y));
        let resid = &y - &x * coef;
        let mean = y.mean();
        let r2 = 1.0 - resid.norm_squared() / y.map(|v| (v - mean).powi(2)).sum();
        assert!(r2 < 0.8, "R² = {r2}");
    }

    #[test]
    fn time_effect_decays() {
        let k = 50;
        let mut prev = f64::INFINITY;
        for t in 1..=k {
            let n = time_effect(t, k).norm();
            assert!(n < prev);
            prev = n;
        }
        let ratio = time_effect(1, k).norm() / time_effect(k, k).norm();
        assert!((ratio - ((k as f64 - 1.0) / 5.0).exp()).abs() / ratio < 1e-12);
        assert!(time_effect(10_000, k).norm() < 1e-100);
    }

    #[test]
    fn optimal_policy_cases() {
        let th = DVector::from_vec(vec![1.0, 0.5, -4.0]);
        let o = optimal_policy(&arm_features(&[0.0, 0.0]), &th, 0.1, 0.9);
        assert_eq!((o.a_star, o.pi0_star), (1, 0.1));
        let o = optimal_policy(&arm_features(&[0.0, 1.0]), &th, 0.1, 0.9);
        assert_eq!((o.a_star, o.pi0_star), (0, 0.9));
        let zero = DVector::zeros(3);
        let o = optimal_policy(&arm_features(&[0.3, 0.3]), &zero, 0.1, 0.9);
        assert_eq!(o.a_star, 0);
    }

    #[test]
    fn regret_hand_example() {
        // x'θ = 2, optimal pi0 0.1, played pi0 0.3.
        let th = DVector::from_vec(vec![2.0, 0.0, 0.0]);
        let arms = arm_features(&[0.0, 0.0]);
        let o = optimal_policy(&arms, &th, 0.1, 0.9);
        assert!((decision_regret(&o, &arms, &th, 1, 0.3) - 0.4).abs() < 1e-12);
        assert_eq!(decision_regret(&o, &arms, &th, 1, 0.1), 0.0);
    }

    #[test]
    fn cumulative_sums() {
        assert_eq!(cumulative(&[1.0, 0.5, 0.0]), vec![1.0, 1.5, 1.5]);
    }

    #[test]
    fn setting_parsing() {
        for s in Setting::ALL {
            assert_eq!(s.to_string().parse::<Setting>().unwrap(), s);
        }
        assert!("linear".parse::<Setting>().is_err());
    }

    #[test]
    fn truth_export() {
        let dir = tempfile::tempdir().unwrap();
        let env = Environment::staged(Setting::Nonlinear, 3, 1).unwrap();
        env.write_truth(dir.path()).unwrap();
        let theta = std::fs::read_to_string(dir.path().join("theta.csv")).unwrap();
        assert_eq!(theta.lines().count(), 1 + 9);
        let grid = std::fs::read_to_string(dir.path().join("baseline_grid.csv")).unwrap();
        assert_eq!(grid.lines().count(), 1 + 101 * 101);
    }
}
