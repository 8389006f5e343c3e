use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use rome::graph::{cohesion_penalty, CohesionGraph};
use rome::layout::{BlockRidges, ParamLayout};
use rome::linalg::GramState;
use rome::ope::{ips, snips, LoggedRecord};
use rome::reward::pseudo_reward_from;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudo_reward_is_unbiased(
        mu0 in -10.0..10.0f64, delta in -5.0..5.0f64,
        f0 in -10.0..10.0f64, f1 in -10.0..10.0f64, pi0 in 0.05..0.95f64,
    ) {
        let on = pseudo_reward_from(f1, f0, 1, 1, mu0 + delta, pi0).unwrap();
        let off = pseudo_reward_from(f1, f0, 1, 0, mu0, pi0).unwrap();
        let mean = (1.0 - pi0) * on.value + pi0 * off.value;
        prop_assert!((mean - delta).abs() <= 1e-9 * (1.0 + mean.abs()));
        prop_assert_eq!(on.weight, pi0 * (1.0 - pi0));
    }

    #[test]
    fn incremental_solution_matches_dense(
        updates in prop::collection::vec((1usize..=4, 1usize..=4, -1.0..1.0f64, -1.0..1.0f64, 0.05..0.25f64, -5.0..5.0f64), 1..40),
        lambda in 0.0..3.0f64,
    ) {
        let layout = ParamLayout::staged(4, 2);
        let chain = rome::graph::chain_graph(4);
        let pen = layout.penalty(BlockRidges::uniform(1.0), lambda, Some(&chain), Some(&chain)).unwrap();
        let mut v = pen.to_dense();
        let mut b = DVector::zeros(layout.dim());
        let mut g = GramState::new(pen).unwrap();
        for (i, t, x0, x1, w, y) in updates {
            let phi = layout.selector(i, t).unwrap().embed(&DVector::from_vec(vec![x0, x1]));
            g.rank_one_update(&phi, w, y).unwrap();
            let d = phi.to_dense(layout.dim());
            v += &d * d.transpose() * w;
            b += d * (w * y);
        }
        let oracle = v.cholesky().unwrap().solve(&b);
        assert_relative_eq!(g.solve_theta(), oracle, epsilon = 1e-10, max_relative = 1e-8);
    }

    #[test]
    fn penalty_is_laplacian_quadratic_form(
        edges in prop::collection::btree_set((0usize..6, 0usize..6), 0..12),
        values in prop::collection::vec(-3.0..3.0f64, 18),
    ) {
        let edges: Vec<_> = edges.into_iter().filter(|(a, b)| a < b).collect();
        let g = CohesionGraph::new(6, edges).unwrap();
        let blocks: Vec<DVector<f64>> = values.chunks(3).map(DVector::from_column_slice).collect();
        let theta = DMatrix::from_fn(6, 3, |i, j| blocks[i][j]);
        let oracle = (theta.transpose() * g.laplacian().to_dense() * &theta).trace();
        let got = cohesion_penalty(&blocks, &g.laplacian()).unwrap();
        prop_assert!((got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    }

    #[test]
    fn snips_is_scale_and_order_invariant(
        rows in prop::collection::vec((0usize..2, 0.05..0.95f64, -3.0..3.0f64, 0.01..1.0f64), 2..30),
        scale in 0.01..1.0f64,
        rotate in 0usize..30,
    ) {
        let log: Vec<LoggedRecord> = rows.iter().enumerate().map(|(k, &(a, p, r, _))| LoggedRecord {
            unit: k, time: 0, context: vec![], action: a, propensity: p, reward: r,
        }).collect();
        let target: Vec<f64> = rows.iter().map(|x| x.3).collect();
        let base = snips(&log, &target).unwrap();
        let scaled: Vec<f64> = target.iter().map(|t| t * scale).collect();
        prop_assert!((snips(&log, &scaled).unwrap() - base).abs() <= 1e-10);
        let k = rotate % log.len();
        let mut l2 = log.clone();
        let mut t2 = target.clone();
        l2.rotate_left(k);
        t2.rotate_left(k);
        prop_assert!((snips(&l2, &t2).unwrap() - base).abs() <= 1e-10);
        prop_assert!((ips(&l2, &t2).unwrap() - ips(&log, &target).unwrap()).abs() <= 1e-10);
    }
}
