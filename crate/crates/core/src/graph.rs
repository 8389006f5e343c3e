//! User and time networks, their incidence and Laplacian matrices, and the
//! block-diagonal penalty matrix that combines ridge and cohesion terms.
//!
//! Laplacians are kept in compressed row form. A user graph over a few hundred
//! participants has a handful of neighbours per row, so every product against
//! a Laplacian (or `L ⊗ I_d`) is linear in the number of edges.

use std::collections::BTreeSet;
use std::io::BufRead;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Undirected, unweighted graph without self-loops or duplicate edges.
///
/// Edges are stored as `(lo, hi)` with `lo < hi`, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohesionGraph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl CohesionGraph {
    /// Builds a graph from unordered pairs. Duplicates (in either orientation)
    /// are merged; self-loops and out-of-range vertices are rejected.
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            if i >= num_vertices || j >= num_vertices {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i}, {j}) references a vertex outside [0, {num_vertices})"
                )));
            }
            set.insert((i.min(j), i.max(j)));
        }
        Ok(Self {
            num_vertices,
            edges: set.into_iter().collect(),
        })
    }

    pub fn empty(num_vertices: usize) -> Self {
        Self {
            num_vertices,
            edges: Vec::new(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    /// Restriction to the first `n` vertices (edges touching later vertices are dropped).
    pub fn truncated(&self, n: usize) -> Self {
        Self {
            num_vertices: n.min(self.num_vertices),
            edges: self.edges.iter().copied().filter(|&(_, j)| j < n).collect(),
        }
    }

    /// Dense incidence matrix `Q` (vertices × edges). For edge `e = (j, i)` with
    /// `i > j`, `Q[i, e] = 1` and `Q[j, e] = -1`.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut q = DMatrix::zeros(self.num_vertices, self.edges.len());
        for (e, &(lo, hi)) in self.edges.iter().enumerate() {
            q[(hi, e)] = 1.0;
            q[(lo, e)] = -1.0;
        }
        q
    }

    pub fn laplacian(&self) -> Laplacian {
        laplacian(self)
    }

    /// Parses a whitespace-separated edge list, one 0-based `i j` pair per line.
    /// Blank lines and lines starting with `#` are skipped. When `num_vertices`
    /// is `None` it is inferred as one past the largest index.
    pub fn read_edge_list<R: BufRead>(reader: R, num_vertices: Option<usize>) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.ok_or_else(|| Error::Parse(format!("line {}: expected two indices", lineno + 1)))?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!("line {}: trailing tokens", lineno + 1)));
            }
            edges.push((i, j));
        }
        let n = num_vertices.unwrap_or_else(|| edges.iter().map(|&(i, j)| i.max(j) + 1).max().unwrap_or(0));
        Self::new(n, edges)
    }

    pub fn load_edge_list(path: impl AsRef<Path>, num_vertices: Option<usize>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_edge_list(std::io::BufReader::new(file), num_vertices)
    }
}

/// Sequential graph `0 ↔ 1 ↔ … ↔ n-1`, the default time network.
pub fn chain_graph(n: usize) -> CohesionGraph {
    CohesionGraph {
        num_vertices: n,
        edges: (1..n).map(|i| (i - 1, i)).collect(),
    }
}

/// Union k-nearest-neighbour graph under Euclidean distance.
///
/// Each vertex selects its `k` closest vertices (ties go to the lower index);
/// an edge exists when either endpoint selected the other.
pub fn knn_graph(features: &[Vec<f64>], k: usize) -> Result<CohesionGraph> {
    let n = features.len();
    if n < 2 {
        return Err(invalid("features", "need at least two users for a k-NN graph"));
    }
    if k == 0 || k >= n {
        return Err(invalid("k", format!("must satisfy 1 <= k < {n}, got {k}")));
    }
    let dim = features[0].len();
    if let Some(bad) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    let mut edges = Vec::with_capacity(n * k);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for (i, fi) in features.iter().enumerate() {
        order.clear();
        for (j, fj) in features.iter().enumerate() {
            if i != j {
                let d2: f64 = fi.iter().zip(fj).map(|(a, b)| (a - b) * (a - b)).sum();
                order.push((d2, j));
            }
        }
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        edges.extend(order.iter().take(k).map(|&(_, j)| (i, j)));
    }
    CohesionGraph::new(n, edges)
}

/// Symmetric sparse Laplacian `L = Q Qᵀ` in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Graph Laplacian: degree on the diagonal, `-1` for each edge.
pub fn laplacian(graph: &CohesionGraph) -> Laplacian {
    let n = graph.num_vertices();
    let deg = graph.degrees();
    let mut rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|i| if deg[i] > 0 { vec![(i, deg[i] as f64)] } else { Vec::new() })
        .collect();
    for &(i, j) in graph.edges() {
        rows[i].push((j, -1.0));
        rows[j].push((i, -1.0));
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for mut row in rows {
        row.sort_by_key(|&(c, _)| c);
        for (c, v) in row {
            cols.push(c);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    Laplacian { n, row_ptr, cols, vals }
}

impl Laplacian {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Trace of `L`, i.e. twice the edge count.
    pub fn trace(&self) -> f64 {
        (0..self.n).flat_map(|i| self.row(i).filter(move |&(j, _)| j == i)).map(|(_, v)| v).sum()
    }

    /// Largest degree, an upper bound on half of `λ_max(L)`.
    pub fn max_degree(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).filter(|&(j, _)| j == i).map(|(_, v)| v).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Network cohesion penalty `Σ_{(i,j)∈E} ‖θ_i − θ_j‖²` computed from the
/// Laplacian as `tr(Θᵀ L Θ)`, where row `i` of `Θ` is `blocks[i]`.
pub fn cohesion_penalty(blocks: &[DVector<f64>], lap: &Laplacian) -> Result<f64> {
    if blocks.len() != lap.size() {
        return Err(Error::DimensionMismatch {
            expected: lap.size(),
            got: blocks.len(),
        });
    }
    let d = blocks.first().map_or(0, |b| b.len());
    if let Some(bad) = blocks.iter().find(|b| b.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let mut total = 0.0;
    for i in 0..lap.size() {
        for (j, v) in lap.row(i) {
            total += v * blocks[i].dot(&blocks[j]);
        }
    }
    Ok(total.max(0.0))
}

/// One diagonal block `γ I_{n·w} + λ (L ⊗ I_w)` of a penalty matrix.
///
/// `vertices` is the number of stacked parameter vectors of width `width`. A
/// block without a Laplacian is a plain ridge.
#[derive(Debug, Clone)]
pub struct PenaltyBlock {
    pub vertices: usize,
    pub width: usize,
    pub ridge: f64,
    pub cohesion: f64,
    pub laplacian: Option<Laplacian>,
}

impl PenaltyBlock {
    pub fn ridge(vertices: usize, width: usize, ridge: f64) -> Self {
        Self {
            vertices,
            width,
            ridge,
            cohesion: 0.0,
            laplacian: None,
        }
    }

    pub fn with_cohesion(width: usize, ridge: f64, cohesion: f64, laplacian: Laplacian) -> Self {
        Self {
            vertices: laplacian.size(),
            width,
            ridge,
            cohesion,
            laplacian: Some(laplacian),
        }
    }

    pub fn dim(&self) -> usize {
        self.vertices * self.width
    }

    /// The `vertices × vertices` factor `γ I + λ L`.
    fn vertex_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(self.vertices, self.vertices) * self.ridge;
        if let Some(lap) = &self.laplacian {
            if self.cohesion != 0.0 {
                m += lap.to_dense() * self.cohesion;
            }
        }
        m
    }
}

/// Block-diagonal, symmetric penalty matrix `V₀`.
#[derive(Debug, Clone)]
pub struct PenaltyMatrix {
    blocks: Vec<PenaltyBlock>,
    offsets: Vec<usize>,
    dim: usize,
}

impl PenaltyMatrix {
    pub fn from_blocks(blocks: Vec<PenaltyBlock>) -> Result<Self> {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for b in &blocks {
            if !(b.ridge.is_finite() && b.ridge >= 0.0) {
                return Err(invalid("ridge", format!("must be finite and >= 0, got {}", b.ridge)));
            }
            if !(b.cohesion.is_finite() && b.cohesion >= 0.0) {
                return Err(invalid("cohesion", format!("must be finite and >= 0, got {}", b.cohesion)));
            }
            if let Some(lap) = &b.laplacian {
                if lap.size() != b.vertices {
                    return Err(Error::DimensionMismatch {
                        expected: b.vertices,
                        got: lap.size(),
                    });
                }
            }
            offsets.push(dim);
            dim += b.dim();
        }
        Ok(Self { blocks, offsets, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[PenaltyBlock] {
        &self.blocks
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Smallest ridge across blocks; a lower bound on every eigenvalue.
    pub fn min_ridge(&self) -> f64 {
        self.blocks.iter().map(|b| b.ridge).fold(f64::INFINITY, f64::min)
    }

    /// Loose upper bound on the largest eigenvalue (Gershgorin on each block).
    pub fn max_eigen_bound(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.ridge + 2.0 * b.cohesion * b.laplacian.as_ref().map_or(0.0, |l| l.max_degree()))
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            let w = b.width;
            for v in 0..b.vertices {
                for j in 0..w {
                    m[(off + v * w + j, off + v * w + j)] = b.ridge;
                }
            }
            if let (Some(lap), true) = (&b.laplacian, b.cohesion != 0.0) {
                for v in 0..b.vertices {
                    for (u, val) in lap.row(v) {
                        for j in 0..w {
                            m[(off + v * w + j, off + u * w + j)] += b.cohesion * val;
                        }
                    }
                }
            }
        }
        m
    }

    /// Sparse product `V₀ x`.
    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        self.mul_into(x.as_slice(), out.as_mut_slice());
        out
    }

    pub(crate) fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        for (b, &off) in self.blocks.iter().zip(&self.offsets) {
            let w = b.width;
            for k in off..off + b.dim() {
                out[k] = b.ridge * x[k];
            }
            if let (Some(lap), true) = (&b.laplacian, b.cohesion != 0.0) {
                for v in 0..b.vertices {
                    for (u, val) in lap.row(v) {
                        let s = b.cohesion * val;
                        for j in 0..w {
                            out[off + v * w + j] += s * x[off + u * w + j];
                        }
                    }
                }
            }
        }
    }

    /// Quadratic form `xᵀ V₀ x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(x))
    }

    /// Dense inverse assembled block by block; each block inverts only its
    /// `vertices × vertices` factor since `(A ⊗ I)⁻¹ = A⁻¹ ⊗ I`.
    pub fn inverse_dense(&self) -> Result<DMatrix<f64>> {
        let mut inv = DMatrix::zeros(self.dim, self.dim);
        for (idx, (b, &off)) in self.blocks.iter().zip(&self.offsets).enumerate() {
            if b.laplacian.is_none() || b.cohesion == 0.0 {
                if b.ridge <= 0.0 {
                    return Err(Error::Singular(format!("penalty block {idx} has zero ridge")));
                }
                for k in off..off + b.dim() {
                    inv[(k, k)] = 1.0 / b.ridge;
                }
                continue;
            }
            let chol = b.vertex_matrix().cholesky().ok_or_else(|| {
                Error::Singular(format!("penalty block {idx} (ridge {}) is not positive definite", b.ridge))
            })?;
            let mut vinv = chol.inverse();
            crate::linalg::symmetrize(&mut vinv);
            let w = b.width;
            for v in 0..b.vertices {
                for u in 0..b.vertices {
                    let val = vinv[(v, u)];
                    if val != 0.0 {
                        for j in 0..w {
                            inv[(off + v * w + j, off + u * w + j)] = val;
                        }
                    }
                }
            }
        }
        Ok(inv)
    }
}

/// Full penalty matrix for `K` stages and feature width `d`:
/// `diag(γ I_d, γ I_{Kd} + λ L_user ⊗ I_d, γ I_{Kd} + λ L_time ⊗ I_d)`.
pub fn build_v0(
    k: usize,
    d: usize,
    gamma: f64,
    lambda: f64,
    l_user: &Laplacian,
    l_time: &Laplacian,
) -> Result<PenaltyMatrix> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(invalid("gamma", format!("must be > 0, got {gamma}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    for lap in [l_user, l_time] {
        if lap.size() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: lap.size(),
            });
        }
    }
    PenaltyMatrix::from_blocks(vec![
        PenaltyBlock::ridge(1, d, gamma),
        PenaltyBlock::with_cohesion(d, gamma, lambda, l_user.clone()),
        PenaltyBlock::with_cohesion(d, gamma, lambda, l_time.clone()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> CohesionGraph {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        CohesionGraph::new(n, edges).unwrap()
    }

    #[test]
    fn path_laplacian() {
        let g = CohesionGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let l = g.laplacian().to_dense();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        assert_eq!(l, expected);
    }

    #[test]
    fn empty_graph_laplacian_is_zero() {
        let l = CohesionGraph::empty(3).laplacian().to_dense();
        assert_eq!(l, DMatrix::zeros(3, 3));
    }

    #[test]
    fn laplacian_matches_incidence_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = random_graph(6, 0.5, &mut rng);
        let q = g.incidence();
        for c in 0..q.ncols() {
            assert_eq!(q.column(c).sum(), 0.0);
        }
        let qqt = &q * q.transpose();
        assert_eq!(g.laplacian().to_dense(), qqt);
    }

    #[test]
    fn graph_rejects_self_loops_and_dedups() {
        assert!(CohesionGraph::new(3, [(1, 1)]).is_err());
        assert!(CohesionGraph::new(3, [(0, 3)]).is_err());
        let g = CohesionGraph::new(3, [(0, 1), (1, 0), (0, 1)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn cohesion_penalty_examples() {
        let g = CohesionGraph::new(2, [(0, 1)]).unwrap();
        let l = g.laplacian();
        let p = cohesion_penalty(&[DVector::from_element(1, 1.0), DVector::from_element(1, 3.0)], &l).unwrap();
        assert_eq!(p, 4.0);
        let same = vec![DVector::from_vec(vec![0.3, -1.0]); 2];
        assert_eq!(cohesion_penalty(&same, &l).unwrap(), 0.0);
        assert!(cohesion_penalty(&same[..1], &l).is_err());
    }

    #[test]
    fn cohesion_penalty_matches_edge_sum_and_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = random_graph(7, 0.4, &mut rng);
            let blocks: Vec<DVector<f64>> = (0..7)
                .map(|_| DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0)))
                .collect();
            let edge_sum: f64 = g.edges().iter().map(|&(i, j)| (&blocks[i] - &blocks[j]).norm_squared()).sum();
            let theta = DMatrix::from_fn(7, 3, |r, c| blocks[r][c]);
            let trace = (theta.transpose() * g.laplacian().to_dense() * &theta).trace();
            let p = cohesion_penalty(&blocks, &g.laplacian()).unwrap();
            assert!((p - edge_sum).abs() < 1e-10);
            assert!((p - trace).abs() < 1e-10);
        }
    }

    #[test]
    fn v0_without_edges_is_ridge() {
        let l = Laplacian::zeros(1);
        let v0 = build_v0(1, 1, 2.0, 1.0, &l, &l).unwrap();
        assert_eq!(v0.to_dense(), DMatrix::from_diagonal_element(3, 3, 2.0));
    }

    #[test]
    fn v0_hand_expansion() {
        let lu = CohesionGraph::new(2, [(0, 1)]).unwrap().laplacian();
        let lt = Laplacian::zeros(2);
        let v0 = build_v0(2, 1, 1.0, 1.0, &lu, &lt).unwrap().to_dense();
        let mut expected = DMatrix::from_diagonal_element(5, 5, 1.0);
        expected[(1, 1)] = 2.0;
        expected[(2, 2)] = 2.0;
        expected[(1, 2)] = -1.0;
        expected[(2, 1)] = -1.0;
        assert_eq!(v0, expected);
    }

    #[test]
    fn v0_errors() {
        let l2 = Laplacian::zeros(2);
        let l3 = Laplacian::zeros(3);
        assert!(build_v0(2, 1, 0.0, 1.0, &l2, &l2).is_err());
        assert!(build_v0(2, 1, -1.0, 1.0, &l2, &l2).is_err());
        assert!(build_v0(2, 1, 1.0, 1.0, &l3, &l2).is_err());
    }

    #[test]
    fn v0_eigenvalue_floor_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &gamma in &[0.5, 1.0, 4.0] {
            let lu = random_graph(5, 0.5, &mut rng).laplacian();
            let lt = chain_graph(5).laplacian();
            let v0 = build_v0(5, 2, gamma, 1.5, &lu, &lt).unwrap();
            let dense = v0.to_dense();
            assert_eq!(dense, dense.transpose());
            let min_eig = dense.clone().symmetric_eigen().eigenvalues.min();
            assert!(min_eig >= gamma - 1e-10);
            let inv = v0.inverse_dense().unwrap();
            let err = (&dense * &inv - DMatrix::identity(v0.dim(), v0.dim())).abs().max();
            assert!(err < 1e-10);
            let x = DVector::from_fn(v0.dim(), |i, _| (i as f64).sin());
            assert!((v0.mul_vec(&x) - &dense * &x).abs().max() < 1e-12);
        }
    }

    #[test]
    fn knn_examples() {
        let g = knn_graph(&[vec![0.0], vec![5.0]], 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1)]);
        let g = knn_graph(&[vec![0.0], vec![1.0], vec![10.0]], 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(knn_graph(&[vec![0.0]], 1).is_err());
        assert!(knn_graph(&[vec![0.0], vec![1.0]], 2).is_err());
    }

    #[test]
    fn knn_ties_go_to_lower_index() {
        // Vertex 1 is equidistant from 0 and 2.
        let g = knn_graph(&[vec![0.0], vec![1.0], vec![2.0]], 1).unwrap();
        assert!(g.edges().contains(&(0, 1)));
        assert!(g.edges().contains(&(1, 2)));
        assert_eq!(g.num_edges(), 2);
        let all_same = vec![vec![0.0, 0.0]; 4];
        let g = knn_graph(&all_same, 1).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn chain_graph_is_path() {
        let l = chain_graph(3).laplacian().to_dense();
        assert_eq!(l, CohesionGraph::new(3, [(0, 1), (1, 2)]).unwrap().laplacian().to_dense());
        assert_eq!(chain_graph(1).num_edges(), 0);
    }

    #[test]
    fn edge_list_parsing() {
        let text = "0 1\n\n# comment\n2   1\n1 0\n";
        let g = CohesionGraph::read_edge_list(text.as_bytes(), None).unwrap();
        assert_eq!(g.num_vertices(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        assert!(CohesionGraph::read_edge_list("0 x\n".as_bytes(), None).is_err());
        assert!(CohesionGraph::read_edge_list("0 1 2\n".as_bytes(), None).is_err());
        assert!(CohesionGraph::read_edge_list("0 5\n".as_bytes(), Some(3)).is_err());
    }
}
