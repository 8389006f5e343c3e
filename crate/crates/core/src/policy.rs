//! The RoME decision rule: confidence radius, randomized parameter draw,
//! clipped control probability, and the decide/observe cycle shared by every
//! policy in the crate.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{invalid, Error, Result};
use crate::graph::PenaltyMatrix;
use crate::layout::{ParamLayout, Selector};
use crate::linalg::{BlockCovariance, GramState};
use crate::reward::{pseudo_reward_from, CrossFitter};

/// RNG used for every stochastic decision.
pub type SimRng = ChaCha8Rng;

/// Perturbation distribution for the randomized parameter draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TsDistribution {
    #[default]
    Gaussian,
    /// Multivariate Student-t with `nu` degrees of freedom (`nu > 2`).
    StudentT { nu: f64 },
}

impl TsDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TsDistribution::StudentT { nu } if !(nu > 2.0 && nu.is_finite()) => {
                Err(invalid("nu", format!("need a finite second moment (nu > 2), got {nu}")))
            }
            _ => Ok(()),
        }
    }

    /// Draws `η ∈ ℝ^d`.
    pub fn sample(&self, d: usize, rng: &mut impl Rng) -> DVector<f64> {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        match *self {
            TsDistribution::Gaussian => z,
            TsDistribution::StudentT { nu } => {
                let w: f64 = ChiSquared::new(nu).expect("validated nu").sample(rng);
                z / (w / nu).sqrt()
            }
        }
    }

    /// CDF of a one-dimensional projection `uᵀη / ‖u‖`.
    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            TsDistribution::Gaussian => Normal::standard().cdf(z),
            TsDistribution::StudentT { nu } => StudentsT::new(0.0, 1.0, nu).expect("validated nu").cdf(z),
        }
    }
}

/// Hyperparameters of the decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub pi_min: f64,
    pub pi_max: f64,
    pub delta: f64,
    /// Sub-Gaussian scale `v`.
    pub v: f64,
    pub zeta: f64,
    pub dist: TsDistribution,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            pi_min: 0.1,
            pi_max: 0.9,
            delta: 0.01,
            v: 1.0,
            zeta: 10.0,
            dist: TsDistribution::Gaussian,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pi_min > 0.0 && self.pi_min < self.pi_max && self.pi_max < 1.0) {
            return Err(invalid(
                "pi_min/pi_max",
                format!("need 0 < pi_min < pi_max < 1, got {} and {}", self.pi_min, self.pi_max),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("{} not in (0, 1)", self.delta)));
        }
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return Err(invalid("v", "must be finite and non-negative"));
        }
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(invalid("zeta", "must be finite and non-negative"));
        }
        self.dist.validate()
    }

    pub fn clip(&self, p: f64) -> f64 {
        p.clamp(self.pi_min, self.pi_max)
    }
}

/// `β = v·sqrt(2 log(2K(K+1)/δ) + logdet_ratio) + ζ·max(log^{3/4} K, 1)`.
///
/// Slightly negative ratios (round-off) are treated as zero.
pub fn beta(delta: f64, v: f64, zeta: f64, k: usize, logdet_ratio: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} not in (0, 1)")));
    }
    if k == 0 {
        return Err(invalid("K", "need at least one stage"));
    }
    if !logdet_ratio.is_finite() {
        return Err(Error::NonFinite("log-det ratio"));
    }
    let k = k as f64;
    let radius = (2.0 * (2.0 * k * (k + 1.0) / delta).ln() + logdet_ratio.max(0.0)).sqrt();
    Ok(v * radius + zeta * k.ln().powf(0.75).max(1.0))
}

/// Gaussian-style summary of the selected parameter `Cθ`.
#[derive(Debug, Clone)]
pub struct Posterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub sqrt: DMatrix<f64>,
}

impl Posterior {
    pub fn from_block(mean: DVector<f64>, block: &BlockCovariance) -> Self {
        Self {
            mean,
            cov: block.cov.clone(),
            sqrt: block.sqrt.clone(),
        }
    }
}

/// `θ̃ = Cθ̂ + β V̲^{-1/2} η`.
#[derive(Debug, Clone)]
pub struct ThetaDraw {
    pub theta: DVector<f64>,
    pub beta: f64,
    pub eta: DVector<f64>,
}

pub fn draw_theta(post: &Posterior, beta: f64, dist: TsDistribution, rng: &mut impl Rng) -> ThetaDraw {
    let eta = dist.sample(post.mean.len(), rng);
    let theta = &post.mean + beta * (&post.sqrt * &eta);
    ThetaDraw { theta, beta, eta }
}

/// `Pr(xᵀθ̃ < 0)` before clipping. With zero scale the probability is the
/// indicator `xᵀCθ̂ < 0`.
pub fn raw_control_probability(x: &DVector<f64>, post: &Posterior, beta: f64, dist: TsDistribution) -> f64 {
    let m = x.dot(&post.mean);
    let scale = beta * x.dot(&(&post.cov * x)).max(0.0).sqrt();
    if scale > 0.0 {
        dist.cdf(-m / scale)
    } else if m < 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Clipped probability of playing the control action.
pub fn control_probability(x: &DVector<f64>, post: &Posterior, beta: f64, cfg: &PolicyConfig) -> f64 {
    cfg.clip(raw_control_probability(x, post, beta, cfg.dist))
}

/// `0` with probability `pi0`, otherwise `a_bar`.
pub fn sample_action(pi0: f64, a_bar: usize, rng: &mut impl Rng) -> usize {
    if rng.random::<f64>() < pi0 {
        0
    } else {
        a_bar
    }
}

/// Index (1-based) of the largest score; ties go to the lowest index.
pub fn argmax_arm(scores: impl IntoIterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores.into_iter().enumerate() {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((k, s));
        }
    }
    best.map(|(k, _)| k + 1)
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub decision: Decision,
    pub draw: ThetaDraw,
}

/// Draws `θ̃`, picks `Ā = argmax xᵀθ̃`, evaluates the clipped control
/// probability at `x(S, Ā)`, and samples the action.
pub fn select_action(
    post: &Posterior,
    beta: f64,
    arms: &[DVector<f64>],
    cfg: &PolicyConfig,
    rng: &mut impl Rng,
) -> Result<Selection> {
    if arms.is_empty() {
        return Err(Error::Empty("candidate arms"));
    }
    if let Some(x) = arms.iter().find(|x| x.len() != post.mean.len()) {
        return Err(Error::DimensionMismatch {
            expected: post.mean.len(),
            got: x.len(),
        });
    }
    let draw = draw_theta(post, beta, cfg.dist, rng);
    let a_bar = argmax_arm(arms.iter().map(|x| x.dot(&draw.theta))).expect("non-empty arms");
    let pi0 = control_probability(&arms[a_bar - 1], post, beta, cfg);
    let action = sample_action(pi0, a_bar, rng);
    Ok(Selection {
        decision: Decision { a_bar, action, pi0 },
        draw,
    })
}

/// One decision point presented to a policy.
#[derive(Debug, Clone, Copy)]
pub struct DecisionPoint<'a> {
    pub stage: usize,
    /// 1-based user index.
    pub user: usize,
    /// 1-based time index.
    pub time: usize,
    pub context: &'a [f64],
    /// `x(S, a)` for arms `a = 1..q`; arm 0 has the zero feature vector.
    pub arms: &'a [DVector<f64>],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    /// Preselected non-baseline arm (1-based).
    pub a_bar: usize,
    /// Action actually taken: 0 or `a_bar`.
    pub action: usize,
    /// Probability of the control action.
    pub pi0: f64,
}

/// What a policy regressed on after an observation, for the trace.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Learned {
    pub pseudo_reward: Option<f64>,
    pub weight: Option<f64>,
}

/// Common interface of RoME and every competitor.
pub trait Policy: Send {
    fn name(&self) -> &str;

    /// Chooses an action. Must not change the learned state.
    fn decide(&mut self, point: &DecisionPoint<'_>, rng: &mut SimRng) -> Result<Decision>;

    /// Learns from the reward of `decision`. `decision.pi0` is the
    /// probability with which the control action was actually randomized.
    fn observe(
        &mut self,
        point: &DecisionPoint<'_>,
        decision: &Decision,
        reward: f64,
        rng: &mut SimRng,
    ) -> Result<Learned>;
}

/// RoME: mixed-effects differential-reward model fitted to cross-fitted
/// doubly-robust pseudo-rewards under a network-cohesion penalty.
pub struct RomePolicy {
    name: String,
    cfg: PolicyConfig,
    layout: ParamLayout,
    gram: GramState,
    fitter: CrossFitter,
    stages: usize,
}

impl RomePolicy {
    /// `stages` is the `K` entering the confidence radius.
    pub fn new(
        name: impl Into<String>,
        cfg: PolicyConfig,
        layout: ParamLayout,
        penalty: PenaltyMatrix,
        fitter: CrossFitter,
        stages: usize,
    ) -> Result<Self> {
        cfg.validate()?;
        if penalty.dim() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: penalty.dim(),
            });
        }
        if layout.baseline_width != 0 {
            return Err(invalid("layout", "the differential model has no baseline block"));
        }
        Ok(Self {
            name: name.into(),
            cfg,
            layout,
            gram: GramState::new(penalty)?,
            fitter,
            stages,
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn gram(&self) -> &GramState {
        &self.gram
    }

    pub fn fitter(&self) -> &CrossFitter {
        &self.fitter
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.cfg
    }

    /// Selected posterior summary and the radius at `(i, t)`.
    pub fn posterior(&self, user: usize, time: usize) -> Result<(Selector, Posterior, BlockCovariance, f64)> {
        let sel = self.layout.selector(user, time)?;
        let block = self.gram.block_quantities(&sel)?;
        let b = beta(self.cfg.delta, self.cfg.v, self.cfg.zeta, self.stages, block.logdet_ratio)?;
        let post = Posterior::from_block(self.gram.selected_theta(&sel), &block);
        Ok((sel, post, block, b))
    }
}

impl Policy for RomePolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, point: &DecisionPoint<'_>, rng: &mut SimRng) -> Result<Decision> {
        let (_, post, _, b) = self.posterior(point.user, point.time)?;
        Ok(select_action(&post, b, point.arms, &self.cfg, rng)?.decision)
    }

    fn observe(
        &mut self,
        point: &DecisionPoint<'_>,
        decision: &Decision,
        reward: f64,
        rng: &mut SimRng,
    ) -> Result<Learned> {
        let (i, t, s) = (point.user, point.time, point.context);
        let x = point
            .arms
            .get(decision.a_bar.wrapping_sub(1))
            .ok_or_else(|| Error::OutOfRange(format!("arm {} of {}", decision.a_bar, point.arms.len())))?;
        self.fitter.assign(i, t, rng);
        let f_arm = self.fitter.predict(i, t, s, decision.a_bar)?;
        let f_control = self.fitter.predict(i, t, s, 0)?;
        let pr = pseudo_reward_from(f_arm, f_control, decision.a_bar, decision.action, reward, decision.pi0)?;
        let phi = self.layout.selector(i, t)?.embed(x);
        self.gram.rank_one_update(&phi, pr.weight, pr.value)?;
        self.fitter.update(i, t, s, decision.action, reward)?;
        Ok(Learned {
            pseudo_reward: Some(pr.value),
            weight: Some(pr.weight),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn post(mean: &[f64], cov: DMatrix<f64>) -> Posterior {
        let sqrt = crate::linalg::psd_sqrt(&cov);
        Posterior {
            mean: DVector::from_column_slice(mean),
            cov,
            sqrt,
        }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(0.5, 0.0, 0.0, 5, 1.0).unwrap(), 0.0);
        assert!((beta(0.01, 0.0, 7.0, 1, 0.0).unwrap() - 7.0).abs() < 1e-12);
        assert!(beta(1.0, 1.0, 1.0, 1, 0.0).is_err());
        assert!(beta(4.0, 1.0, 1.0, 1, 0.0).is_err());
        // Negative round-off is clipped.
        assert_eq!(beta(0.1, 1.0, 0.0, 3, -1e-12).unwrap(), beta(0.1, 1.0, 0.0, 3, 0.0).unwrap());
    }

    #[test]
    fn beta_monotonicity() {
        let mut prev = beta(0.01, 1.0, 10.0, 50, 0.0).unwrap();
        for k in 1..50 {
            let b = beta(0.01, 1.0, 10.0, 50, k as f64 * 0.3).unwrap();
            assert!(b > prev);
            prev = b;
        }
        let mut prev = beta(0.001, 1.0, 10.0, 50, 1.0).unwrap();
        for k in 1..99 {
            let b = beta(0.001 + k as f64 * 0.01, 1.0, 10.0, 50, 1.0).unwrap();
            assert!(b < prev);
            prev = b;
        }
    }

    #[test]
    fn zero_beta_is_deterministic() {
        let p = post(&[1.0, -2.0], DMatrix::identity(2, 2));
        let mut rng = SimRng::seed_from_u64(0);
        let d = draw_theta(&p, 0.0, TsDistribution::Gaussian, &mut rng);
        assert_eq!(d.theta, p.mean);
    }

    #[test]
    fn control_probability_examples() {
        let cfg = PolicyConfig::default();
        let p = post(&[0.0, 0.0], DMatrix::identity(2, 2));
        let x = DVector::from_vec(vec![1.0, 1.0]);
        assert!((raw_control_probability(&x, &p, 1.0, cfg.dist) - 0.5).abs() < 1e-12);
        // Strongly positive mean: raw 0.05-ish, clipped to pi_min.
        let p = post(&[1.6449, 0.0], DMatrix::identity(2, 2));
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let raw = raw_control_probability(&x, &p, 1.0, cfg.dist);
        assert!((raw - 0.05).abs() < 1e-4);
        assert_eq!(control_probability(&x, &p, 1.0, &cfg), 0.1);
        // Degenerate scale.
        assert_eq!(raw_control_probability(&x, &p, 0.0, cfg.dist), 0.0);
        let neg = post(&[-1.0, 0.0], DMatrix::identity(2, 2));
        assert_eq!(raw_control_probability(&x, &neg, 0.0, cfg.dist), 1.0);
    }

    #[test]
    fn student_t_probability_is_heavier_tailed() {
        let p = post(&[2.0], DMatrix::identity(1, 1));
        let x = DVector::from_vec(vec![1.0]);
        let g = raw_control_probability(&x, &p, 1.0, TsDistribution::Gaussian);
        let t = raw_control_probability(&x, &p, 1.0, TsDistribution::StudentT { nu: 3.0 });
        assert!(t > g);
        assert!(TsDistribution::StudentT { nu: 2.0 }.validate().is_err());
    }

    #[test]
    fn argmax_and_selection() {
        assert_eq!(argmax_arm([2.0, 5.0]), Some(2));
        assert_eq!(argmax_arm([3.0, 3.0, 1.0]), Some(1));
        assert_eq!(argmax_arm(std::iter::empty()), None);

        let cfg = PolicyConfig::default();
        let p = post(&[1.0, 0.0], DMatrix::identity(2, 2));
        let mut rng = SimRng::seed_from_u64(1);
        let one = [DVector::from_vec(vec![1.0, 0.5])];
        for _ in 0..20 {
            let s = select_action(&p, 1.0, &one, &cfg, &mut rng).unwrap();
            assert_eq!(s.decision.a_bar, 1);
            assert!(s.decision.pi0 >= cfg.pi_min && s.decision.pi0 <= cfg.pi_max);
            assert!(s.decision.action == 0 || s.decision.action == 1);
        }
        let two = [DVector::from_vec(vec![2.0, 0.0]), DVector::from_vec(vec![5.0, 0.0])];
        let s = select_action(&p, 0.0, &two, &cfg, &mut rng).unwrap();
        assert_eq!(s.decision.a_bar, 2);
        assert!(select_action(&p, 1.0, &[], &cfg, &mut rng).is_err());
        assert!(select_action(&p, 1.0, &[DVector::zeros(3)], &cfg, &mut rng).is_err());
    }

    #[test]
    fn argmax_is_scale_invariant() {
        let mut rng = SimRng::seed_from_u64(8);
        for _ in 0..100 {
            let scores: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let c = rng.random_range(0.01..100.0);
            assert_eq!(argmax_arm(scores.iter().copied()), argmax_arm(scores.iter().map(|s| s * c)));
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = PolicyConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.pi_min = 0.95;
        assert!(cfg.validate().is_err());
        cfg = PolicyConfig { delta: 0.0, ..PolicyConfig::default() };
        assert!(cfg.validate().is_err());
    }
}
