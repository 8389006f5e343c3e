//! Competitor and ablation policies, and a factory that builds any policy
//! from its tag.
//!
//! The linear competitors all share [`LinearTs`]: a Gaussian linear model of
//! the raw (or action-centred) reward whose interaction block is sampled
//! Thompson-style. The action-0 probability is the clipped posterior
//! probability that the sampled differential reward is negative, exactly as
//! in RoME, so every policy produces comparable clipped decisions.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{invalid, Error, Result};
use crate::graph::CohesionGraph;
use crate::layout::{BlockRidges, ParamLayout, SparseVec};
use crate::linalg::{psd_sqrt, GramState};
use crate::policy::{
    beta, sample_action, select_action, Decision, DecisionPoint, Learned, Policy, PolicyConfig, Posterior, RomePolicy,
    SimRng, TsDistribution,
};
use crate::reward::{bagged_models, BaggingSpec, BaseLearner, CrossFitter, SplitMode};

/// Scale of the Thompson draw used by the linear competitors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Exploration {
    /// Draw from the posterior, scaled by the sub-Gaussian factor `v`.
    Posterior,
    /// Inflate by the same confidence radius `β` RoME uses, computed from
    /// the competitor's own Gram matrix.
    #[default]
    Radius,
}

/// Optional nonlinear map for the baseline block.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineMap {
    None,
    /// `(1, s₁, …, s_p)`.
    Linear,
    /// `(1, √(2/D)·cos(wₖᵀs + bₖ))`, random but fixed.
    Fourier { weights: Vec<Vec<f64>>, offsets: Vec<f64> },
}

impl BaselineMap {
    /// Random Fourier features approximating an RBF kernel of the given
    /// bandwidth.
    pub fn fourier(context_dim: usize, num: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        if num == 0 || !(bandwidth > 0.0) {
            return Err(invalid("feature_map", "need at least one feature and a positive bandwidth"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = Normal::new(0.0, 1.0 / bandwidth).expect("positive bandwidth");
        let weights = (0..num)
            .map(|_| (0..context_dim).map(|_| w.sample(&mut rng)).collect())
            .collect();
        let offsets = (0..num).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        Ok(BaselineMap::Fourier { weights, offsets })
    }

    pub fn width(&self, context_dim: usize) -> usize {
        match self {
            BaselineMap::None => 0,
            BaselineMap::Linear => 1 + context_dim,
            BaselineMap::Fourier { weights, .. } => 1 + weights.len(),
        }
    }

    pub fn eval(&self, s: &[f64], out: &mut Vec<f64>) {
        out.clear();
        match self {
            BaselineMap::None => {}
            BaselineMap::Linear => {
                out.push(1.0);
                out.extend_from_slice(s);
            }
            BaselineMap::Fourier { weights, offsets } => {
                out.push(1.0);
                let scale = (2.0 / weights.len() as f64).sqrt();
                for (w, b) in weights.iter().zip(offsets) {
                    let z: f64 = w.iter().zip(s).map(|(a, x)| a * x).sum();
                    out.push(scale * (z + b).cos());
                }
            }
        }
    }
}

/// Gaussian linear model `R ≈ b(s)ᵀα + x(s, A)ᵀ Cθ` with Thompson sampling
/// on the interaction part.
#[derive(Debug, Clone)]
pub struct LinearTs {
    layout: ParamLayout,
    gram: GramState,
    baseline: BaselineMap,
    buf: Vec<f64>,
}

impl LinearTs {
    pub fn new(
        layout: ParamLayout,
        baseline: BaselineMap,
        ridges: BlockRidges,
        lambda: f64,
        user_graph: Option<&CohesionGraph>,
        time_graph: Option<&CohesionGraph>,
    ) -> Result<Self> {
        let penalty = layout.penalty(ridges, lambda, user_graph, time_graph)?;
        Ok(Self {
            layout,
            gram: GramState::new(penalty)?,
            baseline,
            buf: Vec::new(),
        })
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn gram(&self) -> &GramState {
        &self.gram
    }

    /// Posterior of `Cθ` and the draw scale.
    pub fn posterior(
        &self,
        user: usize,
        time: usize,
        cfg: &PolicyConfig,
        exploration: Exploration,
        stages: usize,
    ) -> Result<(Posterior, f64)> {
        let sel = self.layout.selector(user, time)?;
        let mean = self.gram.selected_theta(&sel);
        match exploration {
            Exploration::Posterior => {
                let cov = self.gram.selected_covariance(&sel);
                let sqrt = psd_sqrt(&cov);
                Ok((Posterior { mean, cov, sqrt }, cfg.v))
            }
            Exploration::Radius => {
                let block = self.gram.block_quantities(&sel)?;
                let b = beta(cfg.delta, cfg.v, cfg.zeta, stages, block.logdet_ratio)?;
                Ok((Posterior::from_block(mean, &block), b))
            }
        }
    }

    /// Adds one weighted observation with baseline features `b(s)` (if the
    /// model has a baseline block) and interaction features `x`.
    pub fn update(
        &mut self,
        user: usize,
        time: usize,
        s: &[f64],
        x: Option<&DVector<f64>>,
        weight: f64,
        target: f64,
    ) -> Result<()> {
        let mut phi = SparseVec::with_capacity(self.layout.baseline_width + 3 * self.layout.d);
        if self.layout.baseline_width > 0 {
            self.baseline.eval(s, &mut self.buf);
            if self.buf.len() != self.layout.baseline_width {
                return Err(Error::DimensionMismatch {
                    expected: self.layout.baseline_width,
                    got: self.buf.len(),
                });
            }
            for (j, &v) in self.buf.iter().enumerate() {
                phi.push(j, v);
            }
        }
        if let Some(x) = x {
            let sel = self.layout.selector(user, time)?;
            phi.idx.reserve(x.len() * sel.offsets().len());
            let emb = sel.embed(x);
            phi.idx.extend(emb.idx);
            phi.val.extend(emb.val);
        }
        self.gram.rank_one_update(&phi, weight, target)
    }
}

/// Regression target of a linear competitor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    /// Raw reward with baseline and interaction features.
    Raw,
    /// Action-centred pseudo-reward `(A − p)R` on the interaction features only.
    ActionCentered,
}

/// `(A − p)·R` where `p` is the probability of the non-baseline arm.
pub fn action_centered_pseudo_reward(took_arm: bool, p_arm: f64, reward: f64) -> f64 {
    (f64::from(u8::from(took_arm)) - p_arm) * reward
}

/// A linear Thompson-sampling competitor, either one model per user or a
/// single pooled model.
pub struct LinearTsPolicy {
    name: String,
    cfg: PolicyConfig,
    exploration: Exploration,
    stages: usize,
    target: Target,
    per_user: bool,
    prototype: LinearTs,
    models: Vec<Option<LinearTs>>,
}

impl LinearTsPolicy {
    pub fn new(
        name: impl Into<String>,
        cfg: PolicyConfig,
        exploration: Exploration,
        stages: usize,
        target: Target,
        per_user: bool,
        prototype: LinearTs,
    ) -> Result<Self> {
        cfg.validate()?;
        if target == Target::ActionCentered && prototype.layout.baseline_width != 0 {
            return Err(invalid("layout", "the action-centred model has no baseline block"));
        }
        Ok(Self {
            name: name.into(),
            cfg,
            exploration,
            stages,
            target,
            per_user,
            prototype,
            models: Vec::new(),
        })
    }

    fn slot(&self, user: usize) -> usize {
        if self.per_user {
            user
        } else {
            0
        }
    }

    /// The model serving `user` (the pooled model when not per-user).
    pub fn model(&self, user: usize) -> &LinearTs {
        self.models
            .get(self.slot(user))
            .and_then(Option::as_ref)
            .unwrap_or(&self.prototype)
    }

    fn model_mut(&mut self, user: usize) -> &mut LinearTs {
        let k = self.slot(user);
        if self.models.len() <= k {
            self.models.resize_with(k + 1, || None);
        }
        self.models[k].get_or_insert_with(|| self.prototype.clone())
    }

    fn coords(&self, point: &DecisionPoint<'_>) -> (usize, usize) {
        if self.per_user {
            (1, 1)
        } else {
            (point.user, point.time)
        }
    }
}

impl Policy for LinearTsPolicy {
    fn name(&self) -> &str {
        &self.name
    }

    fn decide(&mut self, point: &DecisionPoint<'_>, rng: &mut SimRng) -> Result<Decision> {
        let (i, t) = self.coords(point);
        let (post, scale) = self
            .model(point.user)
            .posterior(i, t, &self.cfg, self.exploration, self.stages)?;
        Ok(select_action(&post, scale, point.arms, &self.cfg, rng)?.decision)
    }

    fn observe(
        &mut self,
        point: &DecisionPoint<'_>,
        decision: &Decision,
        reward: f64,
        _rng: &mut SimRng,
    ) -> Result<Learned> {
        let (i, t) = self.coords(point);
        let x = point
            .arms
            .get(decision.a_bar.wrapping_sub(1))
            .ok_or_else(|| Error::OutOfRange(format!("arm {}", decision.a_bar)))?
            .clone();
        let target = self.target;
        let model = self.model_mut(point.user);
        match target {
            Target::Raw => {
                let taken = (decision.action != 0).then_some(&x);
                model.update(i, t, point.context, taken, 1.0, reward)?;
                Ok(Learned::default())
            }
            Target::ActionCentered => {
                let p = 1.0 - decision.pi0;
                let w = p * (1.0 - p);
                let pr = action_centered_pseudo_reward(decision.action != 0, p, reward);
                model.update(i, t, point.context, Some(&x), w, pr / w)?;
                Ok(Learned {
                    pseudo_reward: Some(pr),
                    weight: Some(w),
                })
            }
        }
    }
}

/// Plays the clipped optimal policy using the environment's ground truth.
pub struct OraclePolicy {
    env: Environment,
    pi_min: f64,
    pi_max: f64,
}

impl OraclePolicy {
    pub fn new(env: Environment, pi_min: f64, pi_max: f64) -> Self {
        Self { env, pi_min, pi_max }
    }
}

impl Policy for OraclePolicy {
    fn name(&self) -> &str {
        "Oracle"
    }

    fn decide(&mut self, point: &DecisionPoint<'_>, rng: &mut SimRng) -> Result<Decision> {
        let theta = self.env.theta(point.user, point.time)?;
        let opt = crate::env::optimal_policy(point.arms, &theta, self.pi_min, self.pi_max);
        Ok(Decision {
            a_bar: opt.a_bar_star,
            action: sample_action(opt.pi0_star, opt.a_bar_star, rng),
            pi0: opt.pi0_star,
        })
    }

    fn observe(&mut self, _: &DecisionPoint<'_>, _: &Decision, _: f64, _: &mut SimRng) -> Result<Learned> {
        Ok(Learned::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PolicyKind {
    #[serde(rename = "rome")]
    Rome,
    #[serde(rename = "rome-blm")]
    RomeBlm,
    #[serde(rename = "rome-su")]
    RomeSu,
    #[serde(rename = "standard")]
    Standard,
    #[serde(rename = "ac")]
    Ac,
    #[serde(rename = "intelpooling")]
    IntelPooling,
    #[serde(rename = "nnr-linear")]
    NnrLinear,
    #[serde(rename = "feature-map-linear")]
    FeatureMapLinear,
    #[serde(rename = "oracle")]
    Oracle,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 9] = [
        PolicyKind::Rome,
        PolicyKind::RomeBlm,
        PolicyKind::RomeSu,
        PolicyKind::Standard,
        PolicyKind::Ac,
        PolicyKind::IntelPooling,
        PolicyKind::NnrLinear,
        PolicyKind::FeatureMapLinear,
        PolicyKind::Oracle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Rome => "RoME",
            PolicyKind::RomeBlm => "RoME-BLM",
            PolicyKind::RomeSu => "RoME-SU",
            PolicyKind::Standard => "Standard",
            PolicyKind::Ac => "AC",
            PolicyKind::IntelPooling => "IntelPooling",
            PolicyKind::NnrLinear => "NNR-Linear",
            PolicyKind::FeatureMapLinear => "FeatureMapLinear",
            PolicyKind::Oracle => "Oracle",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        PolicyKind::ALL
            .into_iter()
            .find(|k| {
                let label: String = k.label().chars().filter(|c| c.is_ascii_alphanumeric()).collect();
                label.to_ascii_lowercase() == norm
            })
            .ok_or_else(|| Error::UnknownPolicy(s.to_string()))
    }
}

/// Fully resolved hyperparameters of one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyper {
    pub pi_min: f64,
    pub pi_max: f64,
    pub delta: f64,
    pub v: f64,
    pub zeta: f64,
    pub dist: TsDistribution,
    /// Scalar ridge `γ`, used where no block ridges apply.
    pub gamma: f64,
    /// Cohesion weight `λ`.
    pub lambda: f64,
    /// Block-specific ridges shared by the pooled models; `None` uses `γ`
    /// everywhere.
    pub ridges: Option<BlockRidges>,
    /// Neighbours in the user graph.
    pub knn: usize,
    pub folds: usize,
    pub split: SplitMode,
    pub learner: Option<BaseLearner>,
    pub bags: usize,
    pub subsample: f64,
    /// Working-model bound `M`; `None` uses 10 × the largest `|R|` seen.
    pub bound: Option<f64>,
    pub exploration: Exploration,
    pub feature_map_dim: usize,
    pub feature_map_bandwidth: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        let p = PolicyConfig::default();
        Self {
            pi_min: p.pi_min,
            pi_max: p.pi_max,
            delta: p.delta,
            v: p.v,
            zeta: p.zeta,
            dist: p.dist,
            gamma: 1.0,
            lambda: 1.0,
            ridges: None,
            knn: 5,
            folds: 2,
            split: SplitMode::ByDecision,
            learner: None,
            bags: 10,
            subsample: 0.8,
            bound: None,
            exploration: Exploration::default(),
            feature_map_dim: 30,
            feature_map_bandwidth: 0.4,
        }
    }
}

impl Hyper {
    pub fn policy_config(&self) -> PolicyConfig {
        PolicyConfig {
            pi_min: self.pi_min,
            pi_max: self.pi_max,
            delta: self.delta,
            v: self.v,
            zeta: self.zeta,
            dist: self.dist,
        }
    }

    pub fn block_ridges(&self) -> BlockRidges {
        self.ridges.unwrap_or(BlockRidges::uniform(self.gamma))
    }

    pub fn validate(&self) -> Result<()> {
        self.policy_config().validate()?;
        if !(self.gamma > 0.0) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(self.lambda >= 0.0) {
            return Err(invalid("lambda", "must be non-negative"));
        }
        if let Some(r) = self.ridges {
            if !(r.baseline > 0.0 && r.shared > 0.0 && r.user > 0.0 && r.time > 0.0) {
                return Err(invalid("ridges", "all block ridges must be positive"));
            }
        }
        Ok(())
    }
}

/// Problem dimensions and graphs a policy is built against.
#[derive(Debug, Clone)]
pub struct BuildContext<'a> {
    pub num_users: usize,
    pub num_times: usize,
    /// `K` in the confidence radius.
    pub stages: usize,
    pub context_dim: usize,
    pub user_graph: &'a CohesionGraph,
    pub time_graph: &'a CohesionGraph,
    pub seed: u64,
    /// Ground truth, needed only by the oracle.
    pub env: Option<&'a Environment>,
}

/// Builds the policy `kind` named `label`.
pub fn build_policy(kind: PolicyKind, label: &str, h: &Hyper, ctx: &BuildContext<'_>) -> Result<Box<dyn Policy>> {
    h.validate()?;
    let cfg = h.policy_config();
    let d = ctx.context_dim + 1;
    let full = ParamLayout::new(d, ctx.num_users, ctx.num_times);
    let per_user = ParamLayout::new(d, 1, 1).without_users().without_times();
    let uniform = BlockRidges::uniform(h.gamma);
    let linear = |layout: ParamLayout, map: BaselineMap, ridges, lambda, ug, tg, target, pooled: bool| -> Result<Box<dyn Policy>> {
        let width = map.width(ctx.context_dim);
        let proto = LinearTs::new(layout.with_baseline(width), map, ridges, lambda, ug, tg)?;
        Ok(Box::new(LinearTsPolicy::new(
            label,
            cfg,
            h.exploration,
            ctx.stages,
            target,
            !pooled,
            proto,
        )?))
    };
    match kind {
        PolicyKind::Rome | PolicyKind::RomeBlm | PolicyKind::RomeSu => {
            let layout = if kind == PolicyKind::RomeSu { full.without_users() } else { full };
            let penalty = layout.penalty(h.block_ridges(), h.lambda, Some(ctx.user_graph), Some(ctx.time_graph))?;
            let base = h.learner.unwrap_or(if kind == PolicyKind::RomeBlm {
                BaseLearner::ridge()
            } else {
                BaseLearner::tree()
            });
            let spec = BaggingSpec {
                base,
                bags: h.bags,
                subsample: h.subsample,
                bound: h.bound,
            };
            let fitter = CrossFitter::new(h.split, bagged_models(spec, ctx.context_dim, h.folds, ctx.seed)?)?;
            Ok(Box::new(RomePolicy::new(label, cfg, layout, penalty, fitter, ctx.stages)?))
        }
        PolicyKind::Standard => linear(per_user, BaselineMap::Linear, uniform, 0.0, None, None, Target::Raw, false),
        PolicyKind::FeatureMapLinear => {
            // The map is part of the method, not of the replication.
            let map = BaselineMap::fourier(ctx.context_dim, h.feature_map_dim, h.feature_map_bandwidth, 0x5eed)?;
            linear(per_user, map, uniform, 0.0, None, None, Target::Raw, false)
        }
        PolicyKind::Ac => linear(per_user, BaselineMap::None, uniform, 0.0, None, None, Target::ActionCentered, false),
        PolicyKind::IntelPooling => linear(full, BaselineMap::Linear, h.block_ridges(), 0.0, None, None, Target::Raw, true),
        PolicyKind::NnrLinear => linear(
            full.without_times(),
            BaselineMap::Linear,
            h.block_ridges(),
            h.lambda,
            Some(ctx.user_graph),
            None,
            Target::Raw,
            true,
        ),
        PolicyKind::Oracle => {
            let env = ctx
                .env
                .ok_or_else(|| invalid("oracle", "needs the simulation ground truth"))?;
            Ok(Box::new(OraclePolicy::new(env.clone(), h.pi_min, h.pi_max)))
        }
    }
}
