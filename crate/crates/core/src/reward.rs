//! Working models for the conditional mean reward, sample splitting, and
//! doubly-robust pseudo-rewards.
//!
//! A working model only reduces the variance of the pseudo-reward; the
//! pseudo-reward stays unbiased for the differential reward whatever the
//! model predicts, provided the model for a decision point was not trained on
//! that decision point. [`CrossFitter`] enforces this by routing each unit to
//! a fold and training fold `j`'s model only on the other folds.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Bounded regression model of `E[R | s, a]`.
pub trait WorkingModel: Send + Sync {
    /// Prediction, clipped to `[-bound(), bound()]`.
    fn predict(&self, s: &[f64], a: usize) -> f64;
    fn update(&mut self, s: &[f64], a: usize, r: f64);
    fn bound(&self) -> f64;
}

/// `f ≡ c`, clipped to `[-m, m]`.
#[derive(Debug, Clone, Copy)]
pub struct ConstantModel {
    pub value: f64,
    pub m: f64,
}

impl ConstantModel {
    pub fn zero() -> Self {
        Self { value: 0.0, m: f64::INFINITY }
    }
}

impl WorkingModel for ConstantModel {
    fn predict(&self, _s: &[f64], _a: usize) -> f64 {
        self.value.clamp(-self.m, self.m)
    }
    fn update(&mut self, _s: &[f64], _a: usize, _r: f64) {}
    fn bound(&self) -> f64 {
        self.m
    }
}

/// One doubly-robust observation of the differential reward of `arm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoReward {
    pub value: f64,
    /// `π₀(1 − π₀)`.
    pub weight: f64,
    pub arm: usize,
}

/// Pseudo-reward from working-model predictions `f(s, ā)`, `f(s, 0)` and
/// `f(s, A)`.
pub fn pseudo_reward_from(
    f_arm: f64,
    f_control: f64,
    arm: usize,
    action: usize,
    reward: f64,
    pi0: f64,
) -> Result<PseudoReward> {
    if action != 0 && action != arm {
        return Err(Error::InvalidAction { action, arm });
    }
    if !(pi0 > 0.0 && pi0 < 1.0) {
        return Err(Error::InvalidPropensity(pi0));
    }
    if !reward.is_finite() || !f_arm.is_finite() || !f_control.is_finite() {
        return Err(Error::NonFinite("pseudo-reward inputs"));
    }
    let (f_taken, indicator) = if action == arm { (f_arm, 1.0) } else { (f_control, 0.0) };
    Ok(PseudoReward {
        value: (f_arm - f_control) + (reward - f_taken) / (indicator - pi0),
        weight: pi0 * (1.0 - pi0),
        arm,
    })
}

/// `R̃ = f(s,ā) − f(s,0) + (R − f(s,A)) / (1[A=ā] − π₀)`.
pub fn pseudo_reward(
    f: &dyn WorkingModel,
    s: &[f64],
    arm: usize,
    action: usize,
    reward: f64,
    pi0: f64,
) -> Result<PseudoReward> {
    pseudo_reward_from(f.predict(s, arm), f.predict(s, 0), arm, action, reward, pi0)
}

/// Sample-splitting granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    /// All of a user's decision points share a fold.
    ByUser,
    /// Each `(i, t)` is assigned independently.
    #[default]
    ByDecision,
}

impl SplitMode {
    fn key(self, user: usize, time: usize) -> (usize, usize) {
        match self {
            SplitMode::ByUser => (user, 0),
            SplitMode::ByDecision => (user, time),
        }
    }
}

/// Map from units to folds `0..J`.
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    mode: SplitMode,
    folds: usize,
    map: HashMap<(usize, usize), usize>,
}

impl FoldAssignment {
    pub fn new(mode: SplitMode, folds: usize) -> Result<Self> {
        if folds < 2 {
            return Err(invalid("folds", format!("need at least 2 folds, got {folds}")));
        }
        Ok(Self {
            mode,
            folds,
            map: HashMap::new(),
        })
    }

    pub fn mode(&self) -> SplitMode {
        self.mode
    }

    pub fn folds(&self) -> usize {
        self.folds
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn fold_of(&self, user: usize, time: usize) -> Result<usize> {
        self.map
            .get(&self.mode.key(user, time))
            .copied()
            .ok_or_else(|| Error::UnassignedUnit(format!("({user}, {time})")))
    }

    /// Existing fold of the unit, or a fresh uniform draw.
    pub fn assign(&mut self, user: usize, time: usize, rng: &mut impl Rng) -> usize {
        let folds = self.folds;
        *self
            .map
            .entry(self.mode.key(user, time))
            .or_insert_with(|| rng.random_range(0..folds))
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &j in self.map.values() {
            sizes[j] += 1;
        }
        sizes
    }
}

/// Uniform random fold assignment of the given `(user, time)` units.
pub fn assign_folds(
    mode: SplitMode,
    folds: usize,
    units: &[(usize, usize)],
    rng: &mut impl Rng,
) -> Result<FoldAssignment> {
    if units.is_empty() {
        return Err(Error::Empty("units"));
    }
    let mut out = FoldAssignment::new(mode, folds)?;
    for &(i, t) in units {
        out.assign(i, t, rng);
    }
    Ok(out)
}

/// `models[j].predict(s, a)` for the unit's fold `j`, clipped to the model bound.
pub fn cross_fitted_predict(
    models: &[Box<dyn WorkingModel>],
    assignment: &FoldAssignment,
    s: &[f64],
    a: usize,
    unit: (usize, usize),
) -> Result<f64> {
    let j = assignment.fold_of(unit.0, unit.1)?;
    let model = models
        .get(j)
        .ok_or_else(|| Error::OutOfRange(format!("fold {j} has no model")))?;
    let m = model.bound();
    Ok(model.predict(s, a).clamp(-m, m))
}

/// Per-fold working models trained on fold complements.
pub struct CrossFitter {
    assignment: FoldAssignment,
    models: Vec<Box<dyn WorkingModel>>,
    training_units: Vec<Vec<(usize, usize)>>,
}

impl CrossFitter {
    pub fn new(mode: SplitMode, models: Vec<Box<dyn WorkingModel>>) -> Result<Self> {
        let assignment = FoldAssignment::new(mode, models.len())?;
        let training_units = vec![Vec::new(); models.len()];
        Ok(Self {
            assignment,
            models,
            training_units,
        })
    }

    pub fn assignment(&self) -> &FoldAssignment {
        &self.assignment
    }

    pub fn models(&self) -> &[Box<dyn WorkingModel>] {
        &self.models
    }

    /// Units whose records were used to train model `j`.
    pub fn training_units(&self, j: usize) -> &[(usize, usize)] {
        &self.training_units[j]
    }

    pub fn assign(&mut self, user: usize, time: usize, rng: &mut impl Rng) -> usize {
        self.assignment.assign(user, time, rng)
    }

    /// The unit's own-fold model, which never saw the unit.
    pub fn model_for(&self, user: usize, time: usize) -> Result<&dyn WorkingModel> {
        let j = self.assignment.fold_of(user, time)?;
        Ok(self.models[j].as_ref())
    }

    pub fn predict(&self, user: usize, time: usize, s: &[f64], a: usize) -> Result<f64> {
        cross_fitted_predict(&self.models, &self.assignment, s, a, (user, time))
    }

    /// Feeds the record to every model except the unit's own fold.
    pub fn update(&mut self, user: usize, time: usize, s: &[f64], a: usize, r: f64) -> Result<()> {
        let own = self.assignment.fold_of(user, time)?;
        for (j, model) in self.models.iter_mut().enumerate() {
            if j != own {
                model.update(s, a, r);
                self.training_units[j].push((user, time));
            }
        }
        Ok(())
    }
}

/// Base learner inside a bagged ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaseLearner {
    /// Online ridge regression on `[p(s), a·p(s)]`, `p` = monomials of
    /// degree ≤ `degree`.
    Ridge { degree: usize, ridge: f64 },
    /// CART regression tree on `(s, a)`, refit whenever the bag grows by
    /// `growth`.
    Tree {
        max_depth: usize,
        min_leaf: usize,
        growth: f64,
    },
}

impl BaseLearner {
    pub fn ridge() -> Self {
        BaseLearner::Ridge { degree: 2, ridge: 1e-2 }
    }

    pub fn tree() -> Self {
        BaseLearner::Tree {
            max_depth: 7,
            min_leaf: 8,
            growth: 1.25,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            BaseLearner::Ridge { ridge, .. } if !(ridge > 0.0) => Err(invalid("ridge", "must be positive")),
            BaseLearner::Tree { min_leaf, growth, .. } if min_leaf == 0 || !(growth > 1.0) => {
                Err(invalid("tree", "min_leaf must be ≥ 1 and growth > 1"))
            }
            _ => Ok(()),
        }
    }

    fn build(&self, context_dim: usize) -> Box<dyn Learner> {
        match *self {
            BaseLearner::Ridge { degree, ridge } => Box::new(OnlineRidge::new(context_dim, degree, ridge)),
            BaseLearner::Tree {
                max_depth,
                min_leaf,
                growth,
            } => Box::new(RefitTree::new(max_depth, min_leaf, growth)),
        }
    }
}

/// Ensemble specification for [`BaggedRegressor`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaggingSpec {
    pub base: BaseLearner,
    pub bags: usize,
    /// Probability that an incoming record enters a given bag.
    pub subsample: f64,
    /// Fixed bound `M`; `None` uses 10 × the largest `|R|` seen.
    pub bound: Option<f64>,
}

impl BaggingSpec {
    pub fn new(base: BaseLearner) -> Self {
        Self {
            base,
            bags: 10,
            subsample: 0.8,
            bound: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bags == 0 {
            return Err(invalid("bags", "need at least one bag"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(invalid("subsample", format!("{} not in (0, 1]", self.subsample)));
        }
        if let Some(m) = self.bound {
            if !(m > 0.0) {
                return Err(invalid("bound", "must be positive"));
            }
        }
        self.base.validate()
    }
}

trait Learner: Send + Sync {
    fn update(&mut self, s: &[f64], a: usize, r: f64);
    fn predict(&self, s: &[f64], a: usize) -> f64;
    fn len(&self) -> usize;
}

/// Online bagging ensemble; prediction is the mean over non-empty bags.
pub struct BaggedRegressor {
    bags: Vec<Box<dyn Learner>>,
    subsample: f64,
    fixed_bound: Option<f64>,
    max_abs: f64,
    rng: ChaCha8Rng,
}

impl BaggedRegressor {
    pub fn new(spec: BaggingSpec, context_dim: usize, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            bags: (0..spec.bags).map(|_| spec.base.build(context_dim)).collect(),
            subsample: spec.subsample,
            fixed_bound: spec.bound,
            max_abs: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn bag_sizes(&self) -> Vec<usize> {
        self.bags.iter().map(|b| b.len()).collect()
    }
}

impl WorkingModel for BaggedRegressor {
    fn predict(&self, s: &[f64], a: usize) -> f64 {
        let (sum, n) = self
            .bags
            .iter()
            .filter(|b| b.len() > 0)
            .fold((0.0, 0usize), |(sum, n), b| (sum + b.predict(s, a), n + 1));
        if n == 0 {
            return 0.0;
        }
        let m = self.bound();
        (sum / n as f64).clamp(-m, m)
    }

    fn update(&mut self, s: &[f64], a: usize, r: f64) {
        if !r.is_finite() {
            return;
        }
        self.max_abs = self.max_abs.max(r.abs());
        for bag in &mut self.bags {
            if self.subsample >= 1.0 || self.rng.random::<f64>() < self.subsample {
                bag.update(s, a, r);
            }
        }
    }

    fn bound(&self) -> f64 {
        self.fixed_bound.unwrap_or(10.0 * self.max_abs)
    }
}

/// Exponents of all monomials of total degree ≤ `degree` in `n` variables,
/// constant first.
fn monomials(n: usize, degree: usize) -> Vec<Vec<u32>> {
    let mut out = vec![vec![0u32; n]];
    let mut frontier = out.clone();
    for _ in 0..degree {
        let mut next = Vec::new();
        for m in &frontier {
            // Only raise variables at or after the last nonzero one, so each
            // monomial is generated once.
            let start = m.iter().rposition(|&e| e > 0).unwrap_or(0);
            for v in start..n {
                let mut m2 = m.clone();
                m2[v] += 1;
                next.push(m2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

const INTERCEPT_RIDGE: f64 = 1e-8;

struct OnlineRidge {
    terms: Vec<Vec<u32>>,
    a_inv: nalgebra::DMatrix<f64>,
    c: nalgebra::DVector<f64>,
    coef: nalgebra::DVector<f64>,
    n: usize,
}

impl OnlineRidge {
    fn new(context_dim: usize, degree: usize, ridge: f64) -> Self {
        let terms = monomials(context_dim, degree);
        let p = 2 * terms.len();
        // The intercept is (almost) unpenalized so constant targets are fit exactly.
        let a_inv = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_fn(p, |j, _| {
            if j == 0 {
                1.0 / INTERCEPT_RIDGE
            } else {
                1.0 / ridge
            }
        }));
        Self {
            terms,
            a_inv,
            c: nalgebra::DVector::zeros(p),
            coef: nalgebra::DVector::zeros(p),
            n: 0,
        }
    }

    fn features(&self, s: &[f64], a: usize) -> nalgebra::DVector<f64> {
        let k = self.terms.len();
        let a = a as f64;
        let mut phi = nalgebra::DVector::zeros(2 * k);
        for (j, m) in self.terms.iter().enumerate() {
            let v: f64 = m.iter().zip(s).map(|(&e, &x)| x.powi(e as i32)).product();
            phi[j] = v;
            phi[k + j] = a * v;
        }
        phi
    }
}

impl Learner for OnlineRidge {
    fn update(&mut self, s: &[f64], a: usize, r: f64) {
        let phi = self.features(s, a);
        let u = &self.a_inv * &phi;
        let denom = 1.0 + phi.dot(&u);
        self.a_inv.ger(-1.0 / denom, &u, &u, 1.0);
        self.c.axpy(r, &phi, 1.0);
        self.coef = &self.a_inv * &self.c;
        self.n += 1;
    }

    fn predict(&self, s: &[f64], a: usize) -> f64 {
        self.features(s, a).dot(&self.coef)
    }

    fn len(&self) -> usize {
        self.n
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    fn eval(&self, z: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf(v) => return *v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if z[*feature] <= *threshold { left } else { right },
            }
        }
    }
}

/// Regression tree on stored records, refit on a geometric schedule.
struct RefitTree {
    max_depth: usize,
    min_leaf: usize,
    growth: f64,
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    sum: f64,
    next_fit: usize,
    root: Option<Node>,
}

impl RefitTree {
    fn new(max_depth: usize, min_leaf: usize, growth: f64) -> Self {
        Self {
            max_depth,
            min_leaf,
            growth,
            rows: Vec::new(),
            targets: Vec::new(),
            sum: 0.0,
            next_fit: 2 * min_leaf,
            root: None,
        }
    }

    fn input(s: &[f64], a: usize) -> Vec<f64> {
        let mut z = s.to_vec();
        z.push(a as f64);
        z
    }

    fn fit(&mut self) {
        let mut idx: Vec<usize> = (0..self.targets.len()).collect();
        self.root = Some(self.grow(&mut idx, 0));
    }

    fn grow(&self, idx: &mut [usize], depth: usize) -> Node {
        let n = idx.len();
        let total: f64 = idx.iter().map(|&k| self.targets[k]).sum();
        let mean = total / n as f64;
        if depth >= self.max_depth || n < 2 * self.min_leaf {
            return Node::Leaf(mean);
        }
        let p = self.rows[idx[0]].len();
        // Best split maximizes the between-group sum of squares.
        let mut best: Option<(f64, usize, f64)> = None;
        let base = total * total / n as f64;
        for f in 0..p {
            idx.sort_by(|&x, &y| self.rows[x][f].total_cmp(&self.rows[y][f]));
            let mut left_sum = 0.0;
            for split in 1..n {
                left_sum += self.targets[idx[split - 1]];
                if split < self.min_leaf || n - split < self.min_leaf {
                    continue;
                }
                let lo = self.rows[idx[split - 1]][f];
                let hi = self.rows[idx[split]][f];
                if lo == hi {
                    continue;
                }
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / split as f64 + right_sum * right_sum / (n - split) as f64 - base;
                if best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, f, 0.5 * (lo + hi)));
                }
            }
        }
        match best {
            Some((gain, feature, threshold)) if gain > 1e-12 => {
                let mid = partition(idx, |&k| self.rows[k][feature] <= threshold);
                let (l, r) = idx.split_at_mut(mid);
                Node::Split {
                    feature,
                    threshold,
                    left: Box::new(self.grow(l, depth + 1)),
                    right: Box::new(self.grow(r, depth + 1)),
                }
            }
            _ => Node::Leaf(mean),
        }
    }
}

fn partition<T>(items: &mut [T], pred: impl Fn(&T) -> bool) -> usize {
    let mut mid = 0;
    for k in 0..items.len() {
        if pred(&items[k]) {
            items.swap(mid, k);
            mid += 1;
        }
    }
    mid
}

impl Learner for RefitTree {
    fn update(&mut self, s: &[f64], a: usize, r: f64) {
        self.rows.push(Self::input(s, a));
        self.targets.push(r);
        self.sum += r;
        if self.targets.len() >= self.next_fit {
            self.fit();
            self.next_fit = ((self.targets.len() as f64 * self.growth).ceil() as usize).max(self.targets.len() + 1);
        }
    }

    fn predict(&self, s: &[f64], a: usize) -> f64 {
        match &self.root {
            Some(root) => root.eval(&Self::input(s, a)),
            None if self.targets.is_empty() => 0.0,
            None => self.sum / self.targets.len() as f64,
        }
    }

    fn len(&self) -> usize {
        self.targets.len()
    }
}

/// Builds `folds` independently seeded bagged regressors.
pub fn bagged_models(spec: BaggingSpec, context_dim: usize, folds: usize, seed: u64) -> Result<Vec<Box<dyn WorkingModel>>> {
    (0..folds)
        .map(|j| {
            BaggedRegressor::new(spec, context_dim, seed.wrapping_add(0x9e37_79b9 * (j as u64 + 1)))
                .map(|m| Box::new(m) as Box<dyn WorkingModel>)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn pseudo_reward_examples() {
        let f = ConstantModel::zero();
        let p = pseudo_reward(&f, &[0.0, 0.0], 1, 1, 3.0, 0.4).unwrap();
        assert!((p.value - 5.0).abs() < 1e-12);
        assert!((p.weight - 0.24).abs() < 1e-12);
        let p = pseudo_reward(&f, &[0.0, 0.0], 1, 0, 1.0, 0.4).unwrap();
        assert!((p.value + 2.5).abs() < 1e-12);
    }

    #[test]
    fn exact_model_gives_exact_difference() {
        // f(s, a) = 2 + 3a; noiseless rewards.
        let r = |a: usize| 2.0 + 3.0 * a as f64;
        for action in [0, 1] {
            let p = pseudo_reward_from(r(1), r(0), 1, action, r(action), 0.3).unwrap();
            assert!((p.value - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pseudo_reward_rejects_bad_inputs() {
        let f = ConstantModel::zero();
        assert!(matches!(
            pseudo_reward(&f, &[0.0], 1, 2, 1.0, 0.5),
            Err(Error::InvalidAction { .. })
        ));
        assert!(matches!(
            pseudo_reward(&f, &[0.0], 1, 1, 1.0, 1.0),
            Err(Error::InvalidPropensity(_))
        ));
        assert!(pseudo_reward(&f, &[0.0], 1, 1, f64::NAN, 0.5).is_err());
    }

    #[test]
    fn fold_assignment_partitions() {
        let units: Vec<_> = (1..=4).map(|i| (i, 1)).collect();
        let a = assign_folds(SplitMode::ByUser, 2, &units, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = assign_folds(SplitMode::ByUser, 2, &units, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for &(i, t) in &units {
            assert_eq!(a.fold_of(i, t).unwrap(), b.fold_of(i, t).unwrap());
            // By-user folds ignore time.
            assert_eq!(a.fold_of(i, t).unwrap(), a.fold_of(i, 7).unwrap());
        }
        assert_eq!(a.fold_sizes().iter().sum::<usize>(), 4);

        let pairs = [(1, 1), (1, 2), (2, 1)];
        let c = assign_folds(SplitMode::ByDecision, 3, &pairs, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(c.len(), 3);
        assert!(c.fold_of(2, 2).is_err());
        assert!(FoldAssignment::new(SplitMode::ByDecision, 1).is_err());
        assert!(assign_folds(SplitMode::ByDecision, 2, &[], &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn fold_histogram_is_binomial() {
        let units: Vec<_> = (0..10_000).map(|i| (i, 1)).collect();
        let a = assign_folds(SplitMode::ByDecision, 4, &units, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let sd = (10_000.0f64 * 0.25 * 0.75).sqrt();
        for n in a.fold_sizes() {
            assert!((n as f64 - 2500.0).abs() <= 3.0 * sd, "{n}");
        }
    }

    #[test]
    fn cross_fitted_prediction_clips_and_routes() {
        let models: Vec<Box<dyn WorkingModel>> = vec![
            Box::new(ConstantModel { value: 1.0, m: 5.0 }),
            Box::new(ConstantModel { value: 20.0, m: 5.0 }),
        ];
        let mut a = FoldAssignment::new(SplitMode::ByDecision, 2).unwrap();
        a.map.insert((1, 1), 0);
        a.map.insert((2, 1), 1);
        assert_eq!(cross_fitted_predict(&models, &a, &[0.0], 0, (1, 1)).unwrap(), 1.0);
        assert_eq!(cross_fitted_predict(&models, &a, &[0.0], 0, (2, 1)).unwrap(), 5.0);
        assert!(matches!(
            cross_fitted_predict(&models, &a, &[0.0], 0, (3, 1)),
            Err(Error::UnassignedUnit(_))
        ));
    }

    #[test]
    fn cross_fitter_never_trains_on_own_fold() {
        let models = bagged_models(BaggingSpec::new(BaseLearner::ridge()), 2, 3, 1).unwrap();
        let mut cf = CrossFitter::new(SplitMode::ByDecision, models).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for i in 1..=30 {
            for t in 1..=5 {
                cf.assign(i, t, &mut rng);
                cf.update(i, t, &[0.1, 0.2], 1, 1.0).unwrap();
            }
        }
        for j in 0..3 {
            for &(i, t) in cf.training_units(j) {
                assert_ne!(cf.assignment().fold_of(i, t).unwrap(), j);
            }
        }
    }

    #[test]
    fn monomial_count() {
        assert_eq!(monomials(2, 2).len(), 6);
        assert_eq!(monomials(3, 1).len(), 4);
        assert_eq!(monomials(2, 0).len(), 1);
    }

    #[test]
    fn single_bag_ridge_matches_dense_ridge() {
        let mut spec = BaggingSpec::new(BaseLearner::Ridge { degree: 1, ridge: 0.5 });
        spec.bags = 1;
        spec.subsample = 1.0;
        let mut m = BaggedRegressor::new(spec, 2, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        for _ in 0..200 {
            let s = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let a = rng.random_range(0..2usize);
            let y = 1.0 + 2.0 * s[0] - s[1] + a as f64 * (0.5 + s[1]) + noise.sample(&mut rng);
            m.update(&s, a, y);
            rows.push((s, a, y));
        }
        // Dense ridge on [1, s1, s2, a, a s1, a s2].
        let feats = |s: &[f64; 2], a: usize| {
            let a = a as f64;
            nalgebra::DVector::from_vec(vec![1.0, s[0], s[1], a, a * s[0], a * s[1]])
        };
        let mut xtx = nalgebra::DMatrix::identity(6, 6) * 0.5;
        xtx[(0, 0)] = INTERCEPT_RIDGE;
        let mut xty = nalgebra::DVector::zeros(6);
        for (s, a, y) in &rows {
            let f = feats(s, *a);
            xtx += &f * f.transpose();
            xty += &f * *y;
        }
        let coef = xtx.cholesky().unwrap().solve(&xty);
        let mut mse = 0.0;
        for (s, a, y) in &rows {
            let pred = m.predict(s, *a);
            assert!((pred - feats(s, *a).dot(&coef)).abs() < 1e-8);
            mse += (pred - y).powi(2);
        }
        assert!(mse / 200.0 < 0.02);
    }

    #[test]
    fn constant_target_is_learned() {
        for base in [BaseLearner::ridge(), BaseLearner::tree()] {
            let mut m = BaggedRegressor::new(BaggingSpec::new(base), 2, 9).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            for _ in 0..1000 {
                let s = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                m.update(&s, rng.random_range(0..2), 3.5);
            }
            assert!((m.predict(&[0.3, -0.2], 1) - 3.5).abs() < 1e-6);
            assert!((m.predict(&[0.3, -0.2], 0) - 3.5).abs() < 1e-6);
        }
    }

    #[test]
    fn bound_clips_predictions() {
        let mut spec = BaggingSpec::new(BaseLearner::ridge());
        spec.bound = Some(1.0);
        let mut m = BaggedRegressor::new(spec, 1, 0).unwrap();
        for _ in 0..50 {
            m.update(&[0.0], 0, 100.0);
        }
        assert_eq!(m.predict(&[0.0], 0), 1.0);
        assert_eq!(BaggedRegressor::new(BaggingSpec::new(BaseLearner::ridge()), 1, 0).unwrap().predict(&[0.0], 0), 0.0);
    }

    #[test]
    fn spec_validation() {
        let mut spec = BaggingSpec::new(BaseLearner::tree());
        spec.bags = 0;
        assert!(spec.validate().is_err());
        spec.bags = 2;
        spec.subsample = 0.0;
        assert!(spec.validate().is_err());
        spec.subsample = 1.0;
        assert!(spec.validate().is_ok());
        assert!(BaggingSpec::new(BaseLearner::Ridge { degree: 1, ridge: 0.0 }).validate().is_err());
    }
}
