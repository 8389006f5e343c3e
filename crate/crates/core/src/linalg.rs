//! Penalized weighted Gram matrix with an incrementally maintained inverse.
//!
//! `V = V₀ + Σ σ̃² φ φᵀ` and `b = Σ σ̃² R̃ φ` are the complete sufficient
//! statistics of the weighted regularized least-squares fit. The inverse is
//! kept current with Sherman–Morrison and rebuilt from `V` every
//! `recompute_every` updates to bound floating-point drift.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::PenaltyMatrix;
use crate::layout::{Selector, SparseVec};

/// Default number of rank-one updates between exact inverse rebuilds.
pub const DEFAULT_RECOMPUTE_EVERY: usize = 5000;

const EIGEN_CLIP: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GramState {
    v0: PenaltyMatrix,
    v: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    b: DVector<f64>,
    update_count: usize,
    since_rebuild: usize,
    recompute_every: usize,
    scratch: DVector<f64>,
}

/// Per-decision quantities derived from `V⁻¹` and the selector.
#[derive(Debug, Clone)]
pub struct BlockCovariance {
    /// `V̲⁻¹ = C V⁻¹ Cᵀ`.
    pub cov: DMatrix<f64>,
    /// PSD square root of `cov`.
    pub sqrt: DMatrix<f64>,
    /// `Λ⁰ = C V⁻¹ V₀ V⁻¹ Cᵀ`.
    pub lambda0: DMatrix<f64>,
    /// `log det V̲⁻¹ − log det Λ⁰`.
    pub logdet_ratio: f64,
}

impl GramState {
    /// Starts from `V = V₀`, `b = 0`. The inverse is assembled block-wise.
    pub fn new(v0: PenaltyMatrix) -> Result<Self> {
        let v_inv = v0.inverse_dense()?;
        let dim = v0.dim();
        Ok(Self {
            v: v0.to_dense(),
            v_inv,
            b: DVector::zeros(dim),
            update_count: 0,
            since_rebuild: 0,
            recompute_every: DEFAULT_RECOMPUTE_EVERY,
            scratch: DVector::zeros(dim),
            v0,
        })
    }

    pub fn with_recompute_every(mut self, every: usize) -> Self {
        self.recompute_every = every.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.v0.dim()
    }

    pub fn v0(&self) -> &PenaltyMatrix {
        &self.v0
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn v_inv(&self) -> &DMatrix<f64> {
        &self.v_inv
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn update_count(&self) -> usize {
        self.update_count
    }

    /// `V += w φφᵀ`, `b += w r φ`, and the matching Sherman–Morrison step
    /// `V⁻¹ −= w (V⁻¹φ)(V⁻¹φ)ᵀ / (1 + w φᵀV⁻¹φ)`.
    pub fn rank_one_update(&mut self, phi: &SparseVec, weight: f64, target: f64) -> Result<()> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidParameter {
                name: "weight",
                reason: format!("must be finite and > 0, got {weight}"),
            });
        }
        if !target.is_finite() {
            return Err(Error::NonFinite("pseudo-reward"));
        }
        if !phi.is_finite() {
            return Err(Error::NonFinite("feature vector"));
        }
        let dim = self.dim();
        if let Some(&bad) = phi.idx.iter().find(|&&i| i >= dim) {
            return Err(Error::OutOfRange(format!("feature index {bad} >= {dim}")));
        }

        for (a, va) in phi.iter() {
            self.b[a] += weight * target * va;
            for (c, vc) in phi.iter() {
                self.v[(a, c)] += weight * va * vc;
            }
        }

        // u = V⁻¹ φ touches only the columns where φ is nonzero.
        let u = &mut self.scratch;
        u.fill(0.0);
        for (a, va) in phi.iter() {
            u.axpy(va, &self.v_inv.column(a), 1.0);
        }
        let quad = phi.dot(u);
        let coef = weight / (1.0 + weight * quad);
        let us = u.as_slice();
        for (j, mut col) in self.v_inv.column_iter_mut().enumerate() {
            let uj = us[j];
            if uj == 0.0 {
                continue;
            }
            for (x, &ui) in col.iter_mut().zip(us) {
                // coef * (ui * uj) is bit-symmetric in (i, j).
                *x -= coef * (ui * uj);
            }
        }

        self.update_count += 1;
        self.since_rebuild += 1;
        if self.since_rebuild >= self.recompute_every {
            self.rebuild_inverse()?;
        }
        Ok(())
    }

    /// Recomputes `V⁻¹` from `V` with a dense Cholesky factorization.
    pub fn rebuild_inverse(&mut self) -> Result<()> {
        let chol = self
            .v
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("accumulated Gram matrix lost positive definiteness".into()))?;
        let mut inv = chol.inverse();
        symmetrize(&mut inv);
        self.v_inv = inv;
        self.since_rebuild = 0;
        Ok(())
    }

    /// `‖V V⁻¹ − I‖_max`; O(dim³), for audits only.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.dim();
        (&self.v * &self.v_inv - DMatrix::identity(n, n)).abs().max()
    }

    /// Checks the maintained inverse and rebuilds it when the residual
    /// exceeds `tol`. Returns the residual observed before any rebuild.
    pub fn verify_inverse(&mut self, tol: f64) -> Result<f64> {
        let r = self.inverse_residual();
        if r > tol {
            self.rebuild_inverse()?;
        }
        Ok(r)
    }

    /// `θ̂ = V⁻¹ b`.
    pub fn solve_theta(&self) -> DVector<f64> {
        &self.v_inv * &self.b
    }

    /// `C θ̂` without forming the full `θ̂`.
    pub fn selected_theta(&self, sel: &Selector) -> DVector<f64> {
        let d = sel.d();
        DVector::from_fn(d, |j, _| {
            // V⁻¹ is symmetric, so a column stands in for the row.
            sel.offsets().iter().map(|&o| self.v_inv.column(o + j).dot(&self.b)).sum()
        })
    }

    /// `V⁻¹ Cᵀ` as a `dim × d` matrix.
    fn inv_times_selector_t(&self, sel: &Selector) -> DMatrix<f64> {
        let d = sel.d();
        let mut w = DMatrix::zeros(self.dim(), d);
        for j in 0..d {
            let mut col = w.column_mut(j);
            for &o in sel.offsets() {
                col += self.v_inv.column(o + j);
            }
        }
        w
    }

    /// `C V⁻¹ Cᵀ` only.
    pub fn selected_covariance(&self, sel: &Selector) -> DMatrix<f64> {
        let d = sel.d();
        let mut cov = DMatrix::zeros(d, d);
        for &oa in sel.offsets() {
            for &ob in sel.offsets() {
                cov += self.v_inv.view((oa, ob), (d, d));
            }
        }
        symmetrize(&mut cov);
        cov
    }

    /// `V̲⁻¹`, its square root, `Λ⁰`, and the log-determinant ratio.
    pub fn block_quantities(&self, sel: &Selector) -> Result<BlockCovariance> {
        if sel.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: sel.dim(),
            });
        }
        let d = sel.d();
        let w = self.inv_times_selector_t(sel);
        let cov = self.selected_covariance(sel);

        let mut v0w = DMatrix::zeros(self.dim(), d);
        for j in 0..d {
            self.v0.mul_into(w.column(j).as_slice(), v0w.column_mut(j).as_mut_slice());
        }
        let mut lambda0 = w.transpose() * v0w;
        symmetrize(&mut lambda0);

        let logdet_cov = log_det_spd(&cov)?;
        let logdet_l0 = log_det_spd(&lambda0).map_err(|_| Error::IllConditioned {
            condition: condition_estimate(&lambda0),
        })?;
        Ok(BlockCovariance {
            sqrt: psd_sqrt(&cov),
            cov,
            lambda0,
            logdet_ratio: logdet_cov - logdet_l0,
        })
    }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Symmetric PSD square root via eigendecomposition, clipping negative
/// eigenvalues at zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| if l > EIGEN_CLIP { l.sqrt() } else { 0.0 });
    let q = &eig.eigenvectors;
    let mut out = q * DMatrix::from_diagonal(&roots) * q.transpose();
    symmetrize(&mut out);
    out
}

/// `log det` of a symmetric positive-definite matrix via Cholesky.
pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Singular("matrix is not positive definite".into()))?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_v0, chain_graph, CohesionGraph, Laplacian, PenaltyBlock};
    use crate::layout::ParamLayout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dense_v(state: &GramState, updates: &[(SparseVec, f64, f64)]) -> (DMatrix<f64>, DVector<f64>) {
        let dim = state.dim();
        let mut v = state.v0().to_dense();
        let mut b = DVector::zeros(dim);
        for (phi, w, r) in updates {
            let x = phi.to_dense(dim);
            v += *w * &x * x.transpose();
            b += *w * *r * &x;
        }
        (v, b)
    }

    fn diag_v0(values: &[f64]) -> PenaltyMatrix {
        PenaltyMatrix::from_blocks(values.iter().map(|&g| PenaltyBlock::ridge(1, 1, g)).collect()).unwrap()
    }

    #[test]
    fn init_from_diagonal() {
        let s = GramState::new(diag_v0(&[2.0, 2.0, 2.0])).unwrap();
        assert_eq!(s.v_inv(), &DMatrix::from_diagonal_element(3, 3, 0.5));
        assert_eq!(s.b(), &DVector::zeros(3));
        assert_eq!(s.solve_theta(), DVector::zeros(3));
    }

    #[test]
    fn init_rejects_zero_ridge() {
        assert!(GramState::new(diag_v0(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn init_inverse_of_structured_v0() {
        let g = CohesionGraph::new(4, [(0, 1), (1, 2), (0, 3)]).unwrap();
        let v0 = build_v0(4, 2, 1.3, 0.7, &g.laplacian(), &chain_graph(4).laplacian()).unwrap();
        let s = GramState::new(v0).unwrap();
        assert!(s.inverse_residual() < 1e-10);
    }

    #[test]
    fn weighted_update_example() {
        let mut s = GramState::new(diag_v0(&[2.0, 2.0])).unwrap();
        let phi = SparseVec {
            idx: vec![0],
            val: vec![1.0],
        };
        s.rank_one_update(&phi, 0.25, 4.0).unwrap();
        assert_eq!(s.v(), &DMatrix::from_diagonal(&DVector::from_vec(vec![2.25, 2.0])));
        assert_eq!(s.b().as_slice(), &[1.0, 0.0]);
        assert!((s.v_inv()[(0, 0)] - 1.0 / 2.25).abs() < 1e-15);
        assert_eq!(s.v_inv()[(1, 1)], 0.5);
    }

    #[test]
    fn update_rejects_bad_inputs() {
        let mut s = GramState::new(diag_v0(&[1.0, 1.0])).unwrap();
        let phi = SparseVec {
            idx: vec![1],
            val: vec![1.0],
        };
        assert!(s.rank_one_update(&phi, 0.0, 1.0).is_err());
        assert!(s.rank_one_update(&phi, 0.1, f64::NAN).is_err());
        let bad = SparseVec {
            idx: vec![0],
            val: vec![f64::INFINITY],
        };
        assert!(s.rank_one_update(&bad, 0.1, 1.0).is_err());
        assert_eq!(s.update_count(), 0);
    }

    #[test]
    fn tiny_weight_update_stays_accurate() {
        let mut s = GramState::new(diag_v0(&[1.0, 3.0, 0.5])).unwrap();
        let phi = SparseVec {
            idx: vec![0, 2],
            val: vec![0.7, -1.1],
        };
        s.rank_one_update(&phi, 1e-12, 2.0).unwrap();
        let dense_inv = s.v().clone().try_inverse().unwrap();
        assert!((s.v_inv() - dense_inv).abs().max() < 1e-9);
    }

    #[test]
    fn many_random_updates_track_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let layout = ParamLayout::staged(6, 2);
        let users = CohesionGraph::new(6, [(0, 1), (2, 3), (3, 4), (1, 5)]).unwrap();
        let v0 = build_v0(6, 2, 1.0, 1.0, &users.laplacian(), &chain_graph(6).laplacian()).unwrap();
        let mut s = GramState::new(v0).unwrap();
        let mut log = Vec::new();
        for _ in 0..100 {
            let i = rng.random_range(1..=6);
            let t = rng.random_range(1..=6);
            let x = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let phi = layout.selector(i, t).unwrap().embed(&x);
            let w = rng.random_range(0.05..0.25);
            let r = rng.random_range(-3.0..3.0);
            s.rank_one_update(&phi, w, r).unwrap();
            log.push((phi, w, r));
        }
        let (v, b) = dense_v(&s, &log);
        assert!((s.v() - &v).abs().max() < 1e-12);
        let inv = v.clone().try_inverse().unwrap();
        assert!((s.v_inv() - &inv).abs().max() < 1e-8);
        assert_eq!(s.v_inv(), &s.v_inv().transpose());
        let theta = s.solve_theta();
        let direct = v.lu().solve(&b).unwrap();
        assert!((&theta - &direct).norm() / direct.norm().max(1e-300) < 1e-8);
    }

    #[test]
    fn periodic_rebuild_keeps_inverse() {
        let mut s = GramState::new(diag_v0(&[1.0, 1.0, 1.0])).unwrap().with_recompute_every(3);
        for k in 0..10 {
            let phi = SparseVec {
                idx: vec![k % 3, (k + 1) % 3],
                val: vec![1.0, 0.5],
            };
            s.rank_one_update(&phi, 0.2, 1.0).unwrap();
        }
        assert!(s.verify_inverse(1e-6).unwrap() < 1e-10);
    }

    #[test]
    fn duplicate_observation_equals_doubled_weight() {
        let v0 = diag_v0(&[1.0, 2.0, 1.5]);
        let phi = SparseVec {
            idx: vec![0, 1],
            val: vec![0.3, -0.8],
        };
        let mut a = GramState::new(v0.clone()).unwrap();
        a.rank_one_update(&phi, 0.2, 1.7).unwrap();
        a.rank_one_update(&phi, 0.2, 1.7).unwrap();
        let mut b = GramState::new(v0).unwrap();
        b.rank_one_update(&phi, 0.4, 1.7).unwrap();
        assert!((a.solve_theta() - b.solve_theta()).abs().max() < 1e-14);
    }

    #[test]
    fn block_quantities_match_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let layout = ParamLayout::staged(4, 3);
        let users = CohesionGraph::new(4, [(0, 1), (1, 2)]).unwrap();
        let v0 = build_v0(4, 3, 1.0, 2.0, &users.laplacian(), &chain_graph(4).laplacian()).unwrap();
        let v0_dense = v0.to_dense();
        let mut s = GramState::new(v0).unwrap();
        for _ in 0..30 {
            let x = DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0));
            let phi = layout.selector(rng.random_range(1..=4), rng.random_range(1..=4)).unwrap().embed(&x);
            s.rank_one_update(&phi, 0.2, rng.random_range(-1.0..1.0)).unwrap();
        }
        let sel = layout.selector(2, 3).unwrap();
        let c = sel.to_dense();
        let inv = s.v().clone().try_inverse().unwrap();
        let bq = s.block_quantities(&sel).unwrap();
        assert!((&bq.cov - &c * &inv * c.transpose()).abs().max() < 1e-10);
        assert!((&bq.lambda0 - &c * &inv * &v0_dense * &inv * c.transpose()).abs().max() < 1e-10);
        assert!((&bq.sqrt * &bq.sqrt - &bq.cov).abs().max() < 1e-8);
        assert!(bq.logdet_ratio > 0.0);
        let theta_sel = s.selected_theta(&sel);
        assert!((theta_sel - &c * s.solve_theta()).abs().max() < 1e-12);
    }

    #[test]
    fn logdet_ratio_zero_without_data() {
        let v0 = build_v0(3, 2, 2.0, 1.0, &chain_graph(3).laplacian(), &Laplacian::zeros(3)).unwrap();
        let s = GramState::new(v0).unwrap();
        let bq = s.block_quantities(&ParamLayout::staged(3, 2).selector(2, 1).unwrap()).unwrap();
        assert!(bq.logdet_ratio.abs() < 1e-10);
        assert!((&bq.cov - &bq.lambda0).abs().max() < 1e-12);
    }

    #[test]
    fn psd_sqrt_clips_negative_eigenvalues() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-14]);
        let r = psd_sqrt(&m);
        assert_eq!(r[(1, 1)], 0.0);
        assert!((r[(0, 0)] - 1.0).abs() < 1e-15);
    }
}
