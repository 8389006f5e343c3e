//! Incremental Gram-matrix updates against a dense re-solve.
//!
//! `cargo run --example sherman_morrison`

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rome::graph::chain_graph;
use rome::layout::{BlockRidges, ParamLayout};
use rome::linalg::GramState;
use rome::policy::SimRng;

fn main() -> rome::Result<()> {
    let k = 15;
    let layout = ParamLayout::staged(k, 2);
    let graph = chain_graph(k);
    let penalty = layout.penalty(BlockRidges::uniform(1.0), 1.0, Some(&graph), Some(&graph))?;
    let mut gram = GramState::new(penalty.clone())?;
    let mut rng = SimRng::seed_from_u64(1);
    let mut v = penalty.to_dense();
    let mut b = DVector::zeros(layout.dim());
    for n in 1..=200 {
        let (i, t) = (rng.random_range(1..=k), rng.random_range(1..=k));
        let x = DVector::from_vec(vec![1.0, rng.random_range(-1.0..1.0)]);
        let phi = layout.selector(i, t)?.embed(&x);
        let w = rng.random_range(0.09..0.25);
        let y = rng.random_range(-3.0..3.0);
        gram.rank_one_update(&phi, w, y)?;
        let dense = phi.to_dense(layout.dim());
        v += &dense * dense.transpose() * w;
        b += dense * (w * y);
        if n % 50 == 0 {
            let exact = v.clone().cholesky().expect("positive definite").solve(&b);
            println!(
                "{n:>4} updates: |θ̂ − θ_dense| = {:.2e}, |V V⁻¹ − I| = {:.2e}",
                (gram.solve_theta() - exact).amax(),
                gram.inverse_residual()
            );
        }
    }
    Ok(())
}
