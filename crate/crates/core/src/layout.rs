//! Block layout of the stacked parameter vector and the selector `C_{i,t}`.
//!
//! The vector is laid out as
//! `[baseline | shared | user_1 … user_N | time_1 … time_T]`. The baseline
//! prefix is empty for the differential-reward models; pooled competitors that
//! regress raw rewards keep their linear baseline coefficients there.
//!
//! Users and time points are 1-based throughout, matching the staged schedule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{CohesionGraph, PenaltyBlock, PenaltyMatrix};

/// Sparse vector as parallel index/value lists. Indices are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    pub idx: Vec<usize>,
    pub val: Vec<f64>,
}

impl SparseVec {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            idx: Vec::with_capacity(n),
            val: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, i: usize, v: f64) {
        self.idx.push(i);
        self.val.push(v);
    }

    pub fn nnz(&self) -> usize {
        self.idx.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.idx.iter().copied().zip(self.val.iter().copied())
    }

    pub fn dot(&self, dense: &DVector<f64>) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn to_dense(&self, dim: usize) -> DVector<f64> {
        let mut out = DVector::zeros(dim);
        for (i, v) in self.iter() {
            out[i] += v;
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.val.iter().all(|v| v.is_finite())
    }
}

/// Parameter layout for a mixed-effects differential-reward model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLayout {
    /// Width of each effect block (the differential feature dimension).
    pub d: usize,
    /// Width of the raw-reward baseline prefix (0 for pseudo-reward models).
    pub baseline_width: usize,
    pub num_users: usize,
    pub num_times: usize,
    pub user_blocks: bool,
    pub time_blocks: bool,
}

impl ParamLayout {
    /// Full layout for `K` stages: shared, `K` user blocks, `K` time blocks.
    pub fn staged(k: usize, d: usize) -> Self {
        Self::new(d, k, k)
    }

    pub fn new(d: usize, num_users: usize, num_times: usize) -> Self {
        Self {
            d,
            baseline_width: 0,
            num_users,
            num_times,
            user_blocks: true,
            time_blocks: true,
        }
    }

    pub fn without_users(mut self) -> Self {
        self.user_blocks = false;
        self
    }

    pub fn without_times(mut self) -> Self {
        self.time_blocks = false;
        self
    }

    pub fn with_baseline(mut self, width: usize) -> Self {
        self.baseline_width = width;
        self
    }

    pub fn shared_offset(&self) -> usize {
        self.baseline_width
    }

    fn user_count(&self) -> usize {
        if self.user_blocks {
            self.num_users
        } else {
            0
        }
    }

    fn time_count(&self) -> usize {
        if self.time_blocks {
            self.num_times
        } else {
            0
        }
    }

    /// Offset of user `i`'s block (1-based), if user blocks are present.
    pub fn user_offset(&self, i: usize) -> Option<usize> {
        (self.user_blocks && (1..=self.num_users).contains(&i)).then(|| self.baseline_width + self.d * i)
    }

    /// Offset of time `t`'s block (1-based), if time blocks are present.
    pub fn time_offset(&self, t: usize) -> Option<usize> {
        (self.time_blocks && (1..=self.num_times).contains(&t))
            .then(|| self.baseline_width + self.d * (1 + self.user_count() + t - 1))
    }

    pub fn dim(&self) -> usize {
        self.baseline_width + self.d * (1 + self.user_count() + self.time_count())
    }

    /// Selector for decision point `(i, t)`.
    pub fn selector(&self, i: usize, t: usize) -> Result<Selector> {
        if i == 0 || i > self.num_users || t == 0 || t > self.num_times {
            return Err(Error::OutOfRange(format!(
                "decision point ({i}, {t}) outside {} users x {} times",
                self.num_users, self.num_times
            )));
        }
        let mut offsets = vec![self.shared_offset()];
        offsets.extend(self.user_offset(i));
        offsets.extend(self.time_offset(t));
        Ok(Selector {
            d: self.d,
            dim: self.dim(),
            offsets,
        })
    }

    /// Penalty matrix matching this layout. The user and time blocks carry
    /// their Laplacian cohesion term when a graph is supplied.
    pub fn penalty(
        &self,
        ridges: BlockRidges,
        lambda: f64,
        user_graph: Option<&CohesionGraph>,
        time_graph: Option<&CohesionGraph>,
    ) -> Result<PenaltyMatrix> {
        let mut blocks = Vec::with_capacity(4);
        if self.baseline_width > 0 {
            blocks.push(PenaltyBlock::ridge(1, self.baseline_width, ridges.baseline));
        }
        blocks.push(PenaltyBlock::ridge(1, self.d, ridges.shared));
        let mut effect = |count: usize, ridge: f64, graph: Option<&CohesionGraph>| -> Result<()> {
            if count == 0 {
                return Ok(());
            }
            match graph {
                Some(g) => {
                    if g.num_vertices() != count {
                        return Err(Error::DimensionMismatch {
                            expected: count,
                            got: g.num_vertices(),
                        });
                    }
                    blocks.push(PenaltyBlock::with_cohesion(self.d, ridge, lambda, g.laplacian()));
                }
                None => blocks.push(PenaltyBlock::ridge(count, self.d, ridge)),
            }
            Ok(())
        };
        effect(self.user_count(), ridges.user, user_graph)?;
        effect(self.time_count(), ridges.time, time_graph)?;
        PenaltyMatrix::from_blocks(blocks)
    }
}

/// Ridge weight per block. A scalar `γ` uses the same value everywhere.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BlockRidges {
    pub baseline: f64,
    pub shared: f64,
    pub user: f64,
    pub time: f64,
}

impl BlockRidges {
    pub fn uniform(gamma: f64) -> Self {
        Self {
            baseline: gamma,
            shared: gamma,
            user: gamma,
            time: gamma,
        }
    }
}

/// The `d × dim` selector `C_{i,t}`: a sum of `d`-identity blocks placed at
/// the shared, user and time offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    d: usize,
    dim: usize,
    offsets: Vec<usize>,
}

impl Selector {
    pub fn from_offsets(d: usize, dim: usize, offsets: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = offsets.iter().find(|&&o| o + d > dim) {
            return Err(Error::OutOfRange(format!("block offset {bad} + {d} exceeds {dim}")));
        }
        Ok(Self { d, dim, offsets })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// `φ(x) = Cᵀ x`.
    pub fn embed(&self, x: &DVector<f64>) -> SparseVec {
        let mut out = SparseVec::with_capacity(self.offsets.len() * self.d);
        self.embed_into(x, 1.0, &mut out);
        out
    }

    pub(crate) fn embed_into(&self, x: &DVector<f64>, scale: f64, out: &mut SparseVec) {
        for &off in &self.offsets {
            for j in 0..self.d {
                if x[j] != 0.0 {
                    out.push(off + j, scale * x[j]);
                }
            }
        }
    }

    /// `C θ`.
    pub fn apply(&self, theta: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.d, |j, _| self.offsets.iter().map(|&o| theta[o + j]).sum())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.d, self.dim);
        for &off in &self.offsets {
            for j in 0..self.d {
                c[(j, off + j)] += 1.0;
            }
        }
        c
    }
}

/// Selector for the full staged layout with `K` stages, `1 ≤ i, t` and
/// `i + t − 1 ≤ K`.
pub fn build_selector(i: usize, t: usize, k: usize, d: usize) -> Result<Selector> {
    if i == 0 || t == 0 || i + t - 1 > k {
        return Err(Error::OutOfRange(format!("({i}, {t}) is not observed within {k} stages")));
    }
    ParamLayout::staged(k, d).selector(i, t)
}
