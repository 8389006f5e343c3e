//! Self-checks of the numerical and statistical invariants the simulator
//! relies on. Each check is an oracle comparison that reports the observed
//! discrepancy next to its tolerance.

use std::fmt;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::baselines::PolicyKind;
use crate::env::{features, staged_schedule, EnvConfig, Setting};
use crate::experiment::{run_experiment, run_replication, ExperimentConfig, PolicySpec, ResolvedPolicy};
use crate::graph::{chain_graph, cohesion_penalty, knn_graph, CohesionGraph};
use crate::layout::{BlockRidges, ParamLayout};
use crate::linalg::GramState;
use crate::ope::{ips, snips, LoggedRecord};
use crate::policy::{argmax_arm, RomePolicy, SimRng};
use crate::reward::{bagged_models, pseudo_reward_from, BaggingSpec, BaseLearner, CrossFitter, SplitMode};
use crate::runner::{run_policy, UpdateMode};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }

    fn from_result(name: &str, r: crate::Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => Self::new(name, passed, detail),
            Err(e) => Self::new(name, false, format!("error: {e}")),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

/// How much of the suite to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteScale {
    pub seed: u64,
    /// `(stages, replications)` of the regret-ordering experiment.
    pub regret: Option<(usize, usize)>,
    /// Stages of the throughput run.
    pub throughput: Option<usize>,
}

impl SuiteScale {
    /// Oracle and invariant checks only; a few seconds.
    pub fn quick(seed: u64) -> Self {
        Self {
            seed,
            regret: None,
            throughput: None,
        }
    }

    /// Adds the `K = 60` regret ordering and the `K = 200` throughput run.
    pub fn full(seed: u64) -> Self {
        Self {
            seed,
            regret: Some((60, 10)),
            throughput: Some(200),
        }
    }
}

/// Runs every check selected by `scale`.
pub fn run_suite(scale: &SuiteScale) -> Vec<Check> {
    let s = scale.seed;
    let mut out = vec![
        double_robustness(s),
        variance_identity(s),
        estimator_equivalence(s),
        determinant_bound(s),
        laplacian_identity(s),
        ips_unbiasedness(s),
        schedule_bookkeeping(s),
        graph_invariants(s),
        gram_invariants(s),
        working_model_bound(s),
        cross_fit_independence(s),
        trace_invariants(s),
        argmax_scale_invariance(s),
        experiment_determinism(s),
    ];
    if let Some((k, reps)) = scale.regret {
        out.extend(directional_regret(k, reps, s));
    }
    if let Some(k) = scale.throughput {
        out.push(throughput(k, s, Duration::from_secs(120)));
    }
    out
}

fn rng(seed: u64, stream: u64) -> SimRng {
    let mut r = SimRng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// A pseudo-reward problem at a single context.
struct PrConfig {
    mu_arm: f64,
    mu_control: f64,
    f_arm: f64,
    f_control: f64,
    pi0: f64,
    sigma: f64,
}

impl PrConfig {
    fn random(r: &mut SimRng) -> Self {
        let s = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let theta = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0), r.random_range(-4.0..4.0)];
        let g = crate::env::nonlinear_baseline(&s);
        let delta = theta[0] + theta[1] * s[0] + theta[2] * s[1];
        // An arbitrary bounded, deliberately wrong working model.
        let f = |a: f64| (2.0 * s[0] - s[1]).sin() * 3.0 + a * (s[0] * s[1] - 0.5);
        Self {
            mu_arm: g + delta,
            mu_control: g,
            f_arm: f(1.0),
            f_control: f(0.0),
            pi0: r.random_range(0.1..0.9),
            sigma: r.random_range(0.5..2.0),
        }
    }

    fn delta(&self) -> f64 {
        self.mu_arm - self.mu_control
    }

    fn sample(&self, r: &mut SimRng) -> crate::Result<f64> {
        let took_arm = r.random::<f64>() >= self.pi0;
        let eps: f64 = self.sigma * r.sample::<f64, _>(StandardNormal);
        let (action, mu) = if took_arm { (1, self.mu_arm) } else { (0, self.mu_control) };
        Ok(pseudo_reward_from(self.f_arm, self.f_control, 1, action, mu + eps, self.pi0)?.value)
    }

    /// `p e₁²/(1−p) + (1−p) e₀²/p + 2e₁e₀ + σ²/p + σ²/(1−p)` with
    /// `e_a = μ_a − f_a`.
    fn variance(&self) -> f64 {
        let p = self.pi0;
        let e1 = self.mu_arm - self.f_arm;
        let e0 = self.mu_control - self.f_control;
        p * e1 * e1 / (1.0 - p) + (1.0 - p) * e0 * e0 / p + 2.0 * e1 * e0 + self.sigma.powi(2) * (1.0 / p + 1.0 / (1.0 - p))
    }

    /// `(2σ² + 4M²)/π̃ + 8M²` with `π̃ = min(π_min, 1 − π_max)`.
    fn variance_bound(&self, pi_min: f64, pi_max: f64) -> f64 {
        let m = [self.mu_arm, self.mu_control, self.f_arm, self.f_control]
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        let pt = pi_min.min(1.0 - pi_max);
        (2.0 * self.sigma.powi(2) + 4.0 * m * m) / pt + 8.0 * m * m
    }
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Pseudo-rewards are unbiased for the differential reward whatever the
/// working model: exactly by two-point enumeration, and in Monte Carlo.
pub fn double_robustness(seed: u64) -> Check {
    Check::from_result("double robustness", (|| {
        let mut r = rng(seed, 11);
        let mut worst_enum = 0.0f64;
        for _ in 0..100 {
            let c = PrConfig::random(&mut r);
            let on = pseudo_reward_from(c.f_arm, c.f_control, 1, 1, c.mu_arm, c.pi0)?.value;
            let off = pseudo_reward_from(c.f_arm, c.f_control, 1, 0, c.mu_control, c.pi0)?.value;
            let expect = (1.0 - c.pi0) * on + c.pi0 * off;
            worst_enum = worst_enum.max((expect - c.delta()).abs());
        }
        let mut worst_z = 0.0f64;
        for _ in 0..3 {
            let c = PrConfig::random(&mut r);
            let xs = (0..100_000).map(|_| c.sample(&mut r)).collect::<crate::Result<Vec<_>>>()?;
            let (mean, var) = mean_var(&xs);
            worst_z = worst_z.max((mean - c.delta()).abs() / (var / xs.len() as f64).sqrt());
        }
        Ok((
            worst_enum <= 1e-12 && worst_z <= 3.0,
            format!("enumeration max |E - Δ| = {worst_enum:.2e} (tol 1e-12); Monte Carlo max |z| = {worst_z:.2} (tol 3) at N = 1e5"),
        ))
    })())
}

/// Monte Carlo variance of the pseudo-reward against its closed form, and
/// against the uniform bound `v₁²`.
pub fn variance_identity(seed: u64) -> Check {
    Check::from_result("variance identity", (|| {
        let mut r = rng(seed, 12);
        let (mut worst_rel, mut worst_ratio) = (0.0f64, 0.0f64);
        for _ in 0..5 {
            let c = PrConfig::random(&mut r);
            let xs = (0..1_000_000).map(|_| c.sample(&mut r)).collect::<crate::Result<Vec<_>>>()?;
            let (_, var) = mean_var(&xs);
            worst_rel = worst_rel.max((var - c.variance()).abs() / c.variance());
            worst_ratio = worst_ratio.max(var / c.variance_bound(0.1, 0.9));
        }
        Ok((
            worst_rel <= 0.05 && worst_ratio <= 1.0,
            format!("max relative error {worst_rel:.4} (tol 0.05) over 5 configs at N = 1e6; max Var/v1² = {worst_ratio:.4} (tol 1)"),
        ))
    })())
}

fn unit_ball(r: &mut SimRng, d: usize) -> DVector<f64> {
    let v = DVector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal));
    let radius: f64 = r.random_range(0.0..1.0);
    v.normalize() * radius
}

fn random_knn(r: &mut SimRng, n: usize, k: usize) -> crate::Result<CohesionGraph> {
    if n < 2 {
        return Ok(CohesionGraph::empty(n));
    }
    let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
    knn_graph(&pts, k.min(n - 1))
}

type Update = (usize, usize, DVector<f64>, f64, f64);

/// Staged updates `(i, t, x, weight, target)` with `‖x‖ ≤ 1` and weights
/// `π₀(1 − π₀)`.
fn staged_updates(r: &mut SimRng, k: usize, d: usize) -> Vec<Update> {
    staged_schedule(k)
        .points()
        .iter()
        .map(|p| {
            let pi0: f64 = r.random_range(0.1..0.9);
            (p.user, p.time, unit_ball(r, d), pi0 * (1.0 - pi0), r.random_range(-5.0..5.0))
        })
        .collect()
}

/// Incremental state against a dense penalized weighted least-squares
/// solve, and the Sherman–Morrison inverse against a dense inverse.
pub fn estimator_equivalence(seed: u64) -> Check {
    Check::from_result("estimator equivalence", (|| {
        let mut r = rng(seed, 13);
        let (k, d) = (10, 3);
        let mut worst_theta = 0.0f64;
        for _ in 0..5 {
            let layout = ParamLayout::staged(k, d);
            let ug = random_knn(&mut r, k, 3)?;
            let ridges = BlockRidges {
                baseline: 1.0,
                shared: r.random_range(0.5..2.0),
                user: r.random_range(0.5..5.0),
                time: r.random_range(0.5..5.0),
            };
            let pen = layout.penalty(ridges, r.random_range(0.0..2.0), Some(&ug), Some(&chain_graph(k)))?;
            let mut v = pen.to_dense();
            let mut b = DVector::zeros(layout.dim());
            let mut g = GramState::new(pen)?;
            for (i, t, x, w, y) in staged_updates(&mut r, k, d) {
                let phi = layout.selector(i, t)?.embed(&x);
                g.rank_one_update(&phi, w, y)?;
                let dense = phi.to_dense(layout.dim());
                v += &dense * dense.transpose() * w;
                b += dense * (w * y);
            }
            let oracle = v.cholesky().ok_or_else(|| crate::Error::Singular("oracle".into()))?.solve(&b);
            worst_theta = worst_theta.max(rel_err(&g.solve_theta(), &oracle));
        }
        // 10³ updates with no periodic rebuild.
        let layout = ParamLayout::staged(k, d);
        let pen = layout.penalty(BlockRidges::uniform(1.0), 1.0, Some(&chain_graph(k)), Some(&chain_graph(k)))?;
        let mut g = GramState::new(pen)?.with_recompute_every(usize::MAX);
        for _ in 0..1000 {
            let (i, t) = (r.random_range(1..=k), r.random_range(1..=k));
            let pi0: f64 = r.random_range(0.1..0.9);
            let phi = layout.selector(i, t)?.embed(&unit_ball(&mut r, d));
            g.rank_one_update(&phi, pi0 * (1.0 - pi0), r.random_range(-5.0..5.0))?;
        }
        let dense_inv = g.v().clone().try_inverse().ok_or_else(|| crate::Error::Singular("oracle".into()))?;
        let sm_err = (g.v_inv() - &dense_inv).abs().max() / dense_inv.abs().max();
        Ok((
            worst_theta <= 1e-8 && sm_err <= 1e-8,
            format!("θ̂ max relative error {worst_theta:.2e} (tol 1e-8, K = 10, d = 3); inverse after 1e3 updates {sm_err:.2e} (tol 1e-8)"),
        ))
    })())
}

/// `det V̲⁻¹ ≤ (3/γ)^d` and `0 ≤ log(det V̲⁻¹ / det Λ⁰) ≤
/// 2d·log(3k(k+1)/8 + γk + 2λe_k)` over random states.
pub fn determinant_bound(seed: u64) -> Check {
    Check::from_result("determinant bound", (|| {
        let mut r = rng(seed, 14);
        let d = 3;
        let lambda = 1.0;
        let (mut worst_det, mut worst_ratio, mut min_ratio) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::INFINITY);
        let mut states = 0;
        for gamma in [1.0, 2.0, 10.0] {
            for _ in 0..50 {
                let k_total = r.random_range(3..=12);
                let k = r.random_range(1..=k_total);
                let layout = ParamLayout::staged(k_total, d);
                let ug = random_knn(&mut r, k_total, 3)?;
                let tg = chain_graph(k_total);
                let pen = layout.penalty(BlockRidges::uniform(gamma), lambda, Some(&ug), Some(&tg))?;
                let mut g = GramState::new(pen)?;
                for (i, t, x, w, y) in staged_updates(&mut r, k, d) {
                    g.rank_one_update(&layout.selector(i, t)?.embed(&x), w, y)?;
                }
                let (i, t) = (r.random_range(1..=k), r.random_range(1..=k));
                let q = g.block_quantities(&layout.selector(i, t)?)?;
                let logdet = crate::linalg::log_det_spd(&q.cov)?;
                worst_det = worst_det.max(logdet - d as f64 * (3.0 / gamma).ln());
                let e_k = (ug.truncated(k).num_edges() + tg.truncated(k).num_edges()) as f64;
                let kf = k as f64;
                let bound = 2.0 * d as f64 * (3.0 * kf * (kf + 1.0) / 8.0 + gamma * kf + 2.0 * lambda * e_k).ln();
                worst_ratio = worst_ratio.max(q.logdet_ratio - bound);
                min_ratio = min_ratio.min(q.logdet_ratio);
                states += 1;
            }
        }
        Ok((
            worst_det <= 1e-9 && worst_ratio <= 1e-9 && min_ratio >= -1e-9,
            format!(
                "{states} states, γ ∈ {{1, 2, 10}}: max log det − d·log(3/γ) = {worst_det:.3}; \
                 min log-det ratio {min_ratio:.3} (≥ 0), max ratio − bound {worst_ratio:+.3} (≤ 0)"
            ),
        ))
    })())
}

/// Edge disagreement `Σ_{(i,j)∈E} ‖θ̂ᵢ − θ̂ⱼ‖²` of the user blocks.
fn edge_disagreement(layout: &ParamLayout, theta: &DVector<f64>, g: &CohesionGraph) -> f64 {
    g.edges()
        .iter()
        .map(|&(a, b)| {
            let oa = layout.user_offset(a + 1).expect("user block");
            let ob = layout.user_offset(b + 1).expect("user block");
            (0..layout.d).map(|j| (theta[oa + j] - theta[ob + j]).powi(2)).sum::<f64>()
        })
        .sum()
}

/// The cohesion penalty is `tr(ΘᵀLΘ)`, and raising `λ` never increases
/// the fitted edge disagreement.
pub fn laplacian_identity(seed: u64) -> Check {
    Check::from_result("laplacian identity", (|| {
        let mut r = rng(seed, 15);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let n = r.random_range(2..=15);
            let d = r.random_range(1..=4);
            let nn = r.random_range(1..=4);
            let g = random_knn(&mut r, n, nn)?;
            let blocks: Vec<DVector<f64>> = (0..n).map(|_| DVector::from_fn(d, |_, _| r.random_range(-3.0..3.0))).collect();
            let l = g.laplacian().to_dense();
            let theta = DMatrix::from_fn(n, d, |i, j| blocks[i][j]);
            let oracle = (theta.transpose() * l * &theta).trace();
            let got = cohesion_penalty(&blocks, &g.laplacian())?;
            worst = worst.max((got - oracle).abs() / oracle.abs().max(1.0));
        }
        let (n, d) = (10, 3);
        let layout = ParamLayout::new(d, n, 1).without_times();
        let g = random_knn(&mut r, n, 3)?;
        let data: Vec<(usize, DVector<f64>, f64)> = (0..200)
            .map(|_| (r.random_range(1..=n), unit_ball(&mut r, d), r.random_range(-5.0..5.0)))
            .collect();
        let mut sweep = Vec::new();
        for lambda in [0.0, 0.01, 0.1, 1.0, 10.0, 100.0, 1000.0] {
            let mut gs = GramState::new(layout.penalty(BlockRidges::uniform(1.0), lambda, Some(&g), None)?)?;
            for (i, x, y) in &data {
                gs.rank_one_update(&layout.selector(*i, 1)?.embed(x), 0.25, *y)?;
            }
            sweep.push(edge_disagreement(&layout, &gs.solve_theta(), &g));
        }
        let monotone = sweep.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
        Ok((
            worst <= 1e-10 && monotone,
            format!(
                "max relative |penalty − tr(ΘᵀLΘ)| = {worst:.2e} (tol 1e-10); λ-sweep disagreement {}",
                sweep.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(" ≥ ")
            ),
        ))
    })())
}

fn record(unit: usize, time: usize, action: usize, propensity: f64, reward: f64) -> LoggedRecord {
    LoggedRecord {
        unit,
        time,
        context: vec![0.0],
        action,
        propensity,
        reward,
    }
}

/// IPS is exactly unbiased under adaptive logging (enumerating every action
/// path for `T = 3`), and SNIPS satisfies its identities.
pub fn ips_unbiasedness(seed: u64) -> Check {
    Check::from_result("IPS/SNIPS identities", (|| {
        let mut r = rng(seed, 16);
        const T: usize = 3;
        let mut worst = 0.0f64;
        for _ in 0..20 {
            let rewards: Vec<[f64; 2]> = (0..T).map(|_| [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)]).collect();
            let target: Vec<f64> = (0..T).map(|_| r.random_range(0.0..1.0)).collect(); // P(A_t = 1)
            // Logging probability of action 1 depends on the history.
            let coef: Vec<f64> = (0..8).map(|_| r.random_range(0.05..0.95)).collect();
            let logging = |t: usize, hist: usize| coef[(hist * 3 + t) % 8];
            let value = (0..T)
                .map(|t| target[t] * rewards[t][1] + (1.0 - target[t]) * rewards[t][0])
                .sum::<f64>()
                / T as f64;
            let mut expectation = 0.0;
            for path in 0..(1usize << T) {
                let mut prob = 1.0;
                let mut log = Vec::new();
                let mut probs = Vec::new();
                let mut hist = 0;
                for t in 0..T {
                    let a = (path >> t) & 1;
                    let p1 = logging(t, hist);
                    let p = if a == 1 { p1 } else { 1.0 - p1 };
                    prob *= p;
                    log.push(record(0, t, a, p, rewards[t][a]));
                    probs.push(if a == 1 { target[t] } else { 1.0 - target[t] });
                    hist = hist * 2 + a;
                }
                expectation += prob * ips(&log, &probs)?;
            }
            worst = worst.max((expectation - value).abs());
        }
        // SNIPS identities.
        let log: Vec<LoggedRecord> = (0..50)
            .map(|u| {
                let a = r.random_range(0..2);
                record(u, u % 5, a, r.random_range(0.05..0.95), r.random_range(-2.0..2.0))
            })
            .collect();
        let own: Vec<f64> = log.iter().map(|x| x.propensity).collect();
        let mean = log.iter().map(|x| x.reward).sum::<f64>() / log.len() as f64;
        let target: Vec<f64> = (0..log.len()).map(|_| r.random_range(0.01..1.0)).collect();
        let constant: Vec<LoggedRecord> = log.iter().map(|x| LoggedRecord { reward: 0.7, ..x.clone() }).collect();
        let scaled: Vec<f64> = target.iter().map(|p| p * 0.37).collect();
        let mut perm: Vec<usize> = (0..log.len()).collect();
        perm.reverse();
        perm.rotate_left(7);
        let plog: Vec<LoggedRecord> = perm.iter().map(|&i| log[i].clone()).collect();
        let ptarget: Vec<f64> = perm.iter().map(|&i| target[i]).collect();
        let errs = [
            (snips(&log, &own)? - mean).abs(),
            (snips(&constant, &target)? - 0.7).abs(),
            (snips(&log, &scaled)? - snips(&log, &target)?).abs(),
            (snips(&plog, &ptarget)? - snips(&log, &target)?).abs(),
            (ips(&plog, &ptarget)? - ips(&log, &target)?).abs(),
        ];
        let snips_worst = errs.iter().fold(0.0f64, |a, &b| a.max(b));
        Ok((
            worst <= 1e-12 && snips_worst <= 1e-12,
            format!(
                "max |E[IPS] − V| = {worst:.2e} over 20 instances (T = 3, tol 1e-12); \
                 SNIPS on-policy/constant/scale/permutation max error {snips_worst:.2e}"
            ),
        ))
    })())
}

fn resolved(kind: PolicyKind, setting: Setting, num_times: usize) -> crate::Result<ResolvedPolicy> {
    let cfg = ExperimentConfig {
        setting,
        stages: num_times,
        policies: vec![PolicySpec::from(kind)],
        ..Default::default()
    };
    Ok(cfg.resolve_policies()?.remove(0))
}

/// `K = 3` visit order, zero oracle regret, clipped probabilities and
/// non-decreasing cumulative regret for every policy and setting.
pub fn schedule_bookkeeping(seed: u64) -> Check {
    Check::from_result("schedule and regret bookkeeping", (|| {
        let order: Vec<(usize, usize, usize)> = staged_schedule(3).points().iter().map(|p| (p.stage, p.user, p.time)).collect();
        let expected = vec![(1, 1, 1), (2, 1, 2), (2, 2, 1), (3, 1, 3), (3, 2, 2), (3, 3, 1)];
        let k = 12;
        let schedule = staged_schedule(k);
        let mut oracle_worst = 0.0f64;
        let mut violations = 0usize;
        let mut decisions = 0usize;
        let mut decreasing = 0usize;
        for setting in Setting::ALL {
            for kind in PolicyKind::ALL {
                let p = resolved(kind, setting, k)?;
                let out = run_replication(&p, &EnvConfig::new(setting), &schedule, seed, UpdateMode::Sequential)?;
                decisions += out.trace.len();
                violations += out
                    .trace
                    .records
                    .iter()
                    .filter(|r| !(p.hyper.pi_min..=p.hyper.pi_max).contains(&r.pi0))
                    .count();
                decreasing += out.cumulative_regret.windows(2).filter(|w| w[1] < w[0] - 1e-12).count();
                if kind == PolicyKind::Oracle {
                    oracle_worst = oracle_worst.max(out.final_regret().abs());
                }
            }
        }
        Ok((
            order == expected && oracle_worst <= 1e-12 && violations == 0 && decreasing == 0,
            format!(
                "K = 3 order {}; oracle |regret| ≤ {oracle_worst:.1e}; {violations} of {decisions} decisions outside [π_min, π_max]; \
                 {decreasing} decreasing steps in cumulative regret",
                if order == expected { "matches" } else { "differs" }
            ),
        ))
    })())
}

/// Laplacians are PSD with zero row sums; penalty matrices are exactly
/// symmetric and positive definite.
pub fn graph_invariants(seed: u64) -> Check {
    Check::from_result("graph and penalty invariants", (|| {
        let mut r = rng(seed, 17);
        let mut graphs = vec![chain_graph(9), CohesionGraph::empty(4)];
        for _ in 0..10 {
            let n = r.random_range(2..=20);
            let nn = r.random_range(1..=5);
            graphs.push(random_knn(&mut r, n, nn)?);
        }
        let (mut min_eig, mut max_row) = (f64::INFINITY, 0.0f64);
        let mut symmetric = true;
        let mut pd = true;
        for g in &graphs {
            let l = g.laplacian().to_dense();
            min_eig = min_eig.min(l.clone().symmetric_eigenvalues().min());
            max_row = max_row.max(l.row_iter().map(|row| row.sum().abs()).fold(0.0, f64::max));
            let n = g.num_vertices();
            let layout = ParamLayout::new(2, n, n);
            let (gamma, lambda) = (r.random_range(0.1..3.0), r.random_range(0.0..3.0));
            let pen = layout.penalty(BlockRidges::uniform(gamma), lambda, Some(g), Some(g))?;
            let dense = pen.to_dense();
            symmetric &= dense == dense.transpose();
            pd &= dense.cholesky().is_some();
        }
        Ok((
            min_eig >= -1e-10 && max_row <= 1e-12 && symmetric && pd,
            format!(
                "{} graphs: min Laplacian eigenvalue {min_eig:.2e}, max |row sum| {max_row:.1e}; V₀ symmetric: {symmetric}, positive definite: {pd}",
                graphs.len()
            ),
        ))
    })())
}

/// `V ≽ V₀`, exact symmetry of `V⁻¹`, the inverse residual, and the PSD
/// square root of `V̲⁻¹`.
pub fn gram_invariants(seed: u64) -> Check {
    Check::from_result("gram state invariants", (|| {
        let mut r = rng(seed, 18);
        let (k, d) = (8, 3);
        let layout = ParamLayout::staged(k, d);
        let ug = random_knn(&mut r, k, 3)?;
        let pen = layout.penalty(BlockRidges::uniform(1.0), 1.0, Some(&ug), Some(&chain_graph(k)))?;
        let v0 = pen.to_dense();
        let mut g = GramState::new(pen)?;
        let (mut min_gap, mut worst_sqrt, mut worst_sel) = (f64::INFINITY, 0.0f64, 0.0f64);
        let mut symmetric = true;
        for (n, (i, t, x, w, y)) in staged_updates(&mut r, k, d).into_iter().enumerate() {
            let sel = layout.selector(i, t)?;
            g.rank_one_update(&sel.embed(&x), w, y)?;
            symmetric &= g.v_inv() == &g.v_inv().transpose();
            if n % 6 == 0 {
                min_gap = min_gap.min((g.v() - &v0).symmetric_eigenvalues().min());
                let q = g.block_quantities(&sel)?;
                worst_sqrt = worst_sqrt.max((&q.sqrt * &q.sqrt - &q.cov).abs().max());
                let c = sel.to_dense();
                worst_sel = worst_sel.max((&c * g.v_inv() * c.transpose() - &q.cov).abs().max());
            }
        }
        let residual = g.inverse_residual();
        Ok((
            min_gap >= -1e-9 && symmetric && residual <= 1e-6 && worst_sqrt <= 1e-8 && worst_sel <= 1e-10,
            format!(
                "min eig(V − V₀) {min_gap:.2e}; V⁻¹ symmetric: {symmetric}; ‖VV⁻¹ − I‖ {residual:.1e}; \
                 ‖√Σ√Σ − Σ‖ {worst_sqrt:.1e}; ‖CV⁻¹Cᵀ − Σ‖ {worst_sel:.1e}"
            ),
        ))
    })())
}

/// Bagged working models never predict outside `[−M, M]`.
pub fn working_model_bound(seed: u64) -> Check {
    Check::from_result("working model bound", (|| {
        let mut r = rng(seed, 19);
        let heavy = Normal::new(0.0, 25.0).map_err(|e| crate::error::invalid("normal", e.to_string()))?;
        let mut worst = f64::NEG_INFINITY;
        for base in [BaseLearner::ridge(), BaseLearner::tree()] {
            for bound in [Some(1.5), None] {
                let spec = BaggingSpec { bound, ..BaggingSpec::new(base) };
                let mut models = bagged_models(spec, 2, 2, seed)?;
                for m in models.iter_mut() {
                    for _ in 0..400 {
                        let s = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
                        let a = r.random_range(0..2);
                        m.update(&s, a, 5.0 * s[0] * s[1] + heavy.sample(&mut r));
                    }
                    for _ in 0..400 {
                        let s = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
                        let p = m.predict(&s, r.random_range(0..2));
                        worst = worst.max(p.abs() - m.bound());
                    }
                }
            }
        }
        Ok((worst <= 0.0, format!("max |f| − M = {worst:.3} over ridge and tree bags (tol 0)")))
    })())
}

/// No fold model is trained on a unit whose predictions it serves.
pub fn cross_fit_independence(seed: u64) -> Check {
    Check::from_result("cross-fitting independence", (|| {
        let mut hits = 0usize;
        let mut units = 0usize;
        for mode in [SplitMode::ByDecision, SplitMode::ByUser] {
            let k = 10;
            let env = crate::env::Environment::staged(Setting::Nonlinear, k, seed)?;
            let layout = ParamLayout::staged(k, 3);
            let pen = layout.penalty(BlockRidges::uniform(1.0), 1.0, Some(&env.user_graph(5)?), Some(&chain_graph(k)))?;
            let models = bagged_models(BaggingSpec::new(BaseLearner::ridge()), 2, 2, seed)?;
            let mut policy = RomePolicy::new("audit", Default::default(), layout, pen, CrossFitter::new(mode, models)?, k)?;
            run_policy(&mut policy, &env, &staged_schedule(k), UpdateMode::Sequential, &mut rng(seed, 20))?;
            let fitter = policy.fitter();
            for j in 0..fitter.models().len() {
                for &(i, t) in fitter.training_units(j) {
                    units += 1;
                    if fitter.assignment().fold_of(i, t)? == j {
                        hits += 1;
                    }
                }
            }
        }
        Ok((hits == 0 && units > 0, format!("{hits} of {units} training records inside their own fold")))
    })())
}

/// Traces record `A ∈ {0, Ā}` and weight `π₀(1 − π₀)`, and replay is
/// bit-identical under a fixed seed.
pub fn trace_invariants(seed: u64) -> Check {
    Check::from_result("trace invariants", (|| {
        let k = 15;
        let p = resolved(PolicyKind::Rome, Setting::Nonlinear, k)?;
        let env = EnvConfig::new(Setting::Nonlinear);
        let a = run_replication(&p, &env, &staged_schedule(k), seed, UpdateMode::Sequential)?;
        let b = run_replication(&p, &env, &staged_schedule(k), seed, UpdateMode::Sequential)?;
        let bad = a
            .trace
            .records
            .iter()
            .filter(|r| {
                (r.action != 0 && r.action != r.a_bar)
                    || r.weight != Some(r.pi0 * (1.0 - r.pi0))
                    || !r.pseudo_reward.is_some_and(f64::is_finite)
            })
            .count();
        let same = a.trace == b.trace;
        Ok((
            bad == 0 && same,
            format!("{bad} malformed of {} records; identical replay: {same}", a.trace.len()),
        ))
    })())
}

/// Scaling the sampled parameter by `c > 0` never changes the chosen arm.
pub fn argmax_scale_invariance(seed: u64) -> Check {
    let mut r = rng(seed, 21);
    let mut changed = 0;
    for _ in 0..1000 {
        let q = r.random_range(1..=6);
        let arms: Vec<DVector<f64>> = (0..q).map(|_| DVector::from_fn(3, |_, _| r.random_range(-1.0..1.0))).collect();
        let theta = DVector::from_fn(3, |_, _| r.random_range(-4.0..4.0));
        let c = 10f64.powf(r.random_range(-3.0..3.0));
        let pick = |th: &DVector<f64>| argmax_arm(arms.iter().map(|x| x.dot(th)));
        if pick(&theta) != pick(&(&theta * c)) {
            changed += 1;
        }
    }
    // Features of the binary arm stay `(1, s)`.
    let x = features(&[0.2, -0.4], 1);
    let ok = changed == 0 && x.as_slice() == [1.0, 0.2, -0.4];
    Check::new("argmax scale invariance", ok, format!("{changed} of 1000 choices changed under rescaling"))
}

/// Two runs of the same configuration produce byte-identical CSVs.
pub fn experiment_determinism(seed: u64) -> Check {
    Check::from_result("experiment determinism", (|| {
        let cfg = ExperimentConfig {
            setting: Setting::Nonlinear,
            stages: 8,
            replications: 2,
            seed,
            policies: ["rome", "standard", "intelpooling"].iter().map(|s| PolicySpec::Name(s.to_string())).collect(),
            ..Default::default()
        };
        let base = std::env::temp_dir().join(format!("rome-validate-{}-{seed}", std::process::id()));
        let mut files = Vec::new();
        for (run, threads) in [(0, 1), (1, 3)] {
            let dir = base.join(run.to_string());
            let res = run_experiment(&ExperimentConfig { threads: Some(threads), ..cfg.clone() }, None)?;
            res.write_all(&dir)?;
            let mut bytes = Vec::new();
            for name in ["cum_regret.csv", "summary.csv", "pairwise.csv"] {
                bytes.push(std::fs::read(dir.join(name))?);
            }
            files.push(bytes);
        }
        std::fs::remove_dir_all(&base).ok();
        let same = files[0] == files[1];
        Ok((same, format!("CSV outputs identical across reruns and thread counts: {same}")))
    })())
}

/// Mean final regret of the policies relevant to each ordering claim.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretOrdering {
    pub setting: Setting,
    pub means: Vec<(String, f64)>,
}

fn mean_of(o: &RegretOrdering, label: &str) -> f64 {
    o.means.iter().find(|(l, _)| l == label).map(|m| m.1).unwrap_or(f64::NAN)
}

/// Regret orderings at `K` stages: RoME at least 20% below Standard and
/// below AC in the nonlinear setting, below RoME-SU with heterogeneous
/// users, and within 15% of IntelPooling with homogeneous users.
pub fn directional_regret(stages: usize, reps: usize, seed: u64) -> Vec<Check> {
    let plan = [
        (Setting::Nonlinear, vec!["RoME", "Standard", "AC"]),
        (Setting::Heterogeneous, vec!["RoME", "RoME-SU"]),
        (Setting::Homogeneous, vec!["RoME", "IntelPooling"]),
    ];
    let start = Instant::now();
    let mut orderings = Vec::new();
    for (setting, policies) in plan {
        let cfg = ExperimentConfig {
            setting,
            stages,
            replications: reps,
            seed,
            policies: policies.iter().map(|p| PolicySpec::Name(p.to_string())).collect(),
            ..Default::default()
        };
        match run_experiment(&cfg, None) {
            Ok(res) => orderings.push(RegretOrdering {
                setting,
                means: res.policies.iter().enumerate().map(|(p, l)| (l.clone(), res.mean_final(p))).collect(),
            }),
            Err(e) => return vec![Check::new("regret ordering", false, format!("error: {e}"))],
        }
    }
    let elapsed = start.elapsed();
    let scale = format!("K = {stages}, {reps} replications");
    let nl = &orderings[0];
    let (rome, std_, ac) = (mean_of(nl, "RoME"), mean_of(nl, "Standard"), mean_of(nl, "AC"));
    let het = &orderings[1];
    let (rome_h, su) = (mean_of(het, "RoME"), mean_of(het, "RoME-SU"));
    let hom = &orderings[2];
    let (rome_o, ip) = (mean_of(hom, "RoME"), mean_of(hom, "IntelPooling"));
    let gap = (rome_o - ip).abs() / ip;
    vec![
        Check::new(
            "nonlinear regret ordering",
            rome <= 0.8 * std_ && rome < ac,
            format!(
                "RoME {rome:.2} vs Standard {std_:.2} ({:+.1}%, need ≤ −20%) and AC {ac:.2} ({scale})",
                100.0 * (rome / std_ - 1.0)
            ),
        ),
        Check::new(
            "heterogeneous regret ordering",
            rome_h < su,
            format!("RoME {rome_h:.2} vs RoME-SU {su:.2} ({scale})"),
        ),
        Check::new(
            "homogeneous regret parity",
            gap <= 0.15,
            format!("RoME {rome_o:.2} vs IntelPooling {ip:.2}: gap {:.1}% (tol 15%)", 100.0 * gap),
        ),
        Check::new(
            "regret experiment runtime",
            elapsed < Duration::from_secs(15 * 60),
            format!("{:.1} s (limit 900 s)", elapsed.as_secs_f64()),
        ),
    ]
}

/// One RoME-BLM replication over `K` stages within `limit`.
pub fn throughput(stages: usize, seed: u64, limit: Duration) -> Check {
    Check::from_result("throughput", (|| {
        let p = resolved(PolicyKind::RomeBlm, Setting::Nonlinear, stages)?;
        let schedule = staged_schedule(stages);
        let start = Instant::now();
        let out = run_replication(&p, &EnvConfig::new(Setting::Nonlinear), &schedule, seed, UpdateMode::Sequential)?;
        let elapsed = start.elapsed();
        Ok((
            elapsed < limit && out.trace.len() == stages * (stages + 1) / 2,
            format!(
                "RoME-BLM, K = {stages}: {} decisions in {:.1} s (limit {} s)",
                out.trace.len(),
                elapsed.as_secs_f64(),
                limit.as_secs()
            ),
        ))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_variance_matches_enumeration_without_noise() {
        let mut r = rng(5, 0);
        for _ in 0..20 {
            let mut c = PrConfig::random(&mut r);
            c.sigma = 0.0;
            let on = pseudo_reward_from(c.f_arm, c.f_control, 1, 1, c.mu_arm, c.pi0).unwrap().value;
            let off = pseudo_reward_from(c.f_arm, c.f_control, 1, 0, c.mu_control, c.pi0).unwrap().value;
            let var = (1.0 - c.pi0) * (on - c.delta()).powi(2) + c.pi0 * (off - c.delta()).powi(2);
            assert!((var - c.variance()).abs() <= 1e-9 * var.max(1.0));
        }
    }

    #[test]
    fn quick_suite_passes() {
        for c in run_suite(&SuiteScale::quick(0)) {
            assert!(c.passed, "{c}");
        }
    }
}
