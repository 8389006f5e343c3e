//! Laplacian cohesion on a kNN graph of user effects.
//!
//! `cargo run --example graph_cohesion`

use nalgebra::DVector;
use rome::env::{Environment, Setting};
use rome::graph::{cohesion_penalty, knn_graph};

fn main() -> rome::Result<()> {
    let env = Environment::staged(Setting::Heterogeneous, 12, 0)?;
    let effects: Vec<Vec<f64>> = env.user_effects().iter().map(|u| u.iter().copied().collect()).collect();
    let graph = knn_graph(&effects, 3)?;
    println!("{} users, {} edges, degrees {:?}", graph.num_vertices(), graph.num_edges(), graph.degrees());

    let lap = graph.laplacian();
    let smooth = cohesion_penalty(env.user_effects(), &lap)?;
    // Permuting users breaks the alignment between graph and effects.
    let mut shuffled = env.user_effects().to_vec();
    shuffled.reverse();
    let rough = cohesion_penalty(&shuffled, &lap)?;
    println!("tr(ΘᵀLΘ): true effects {smooth:.3}, reversed {rough:.3}");

    let direct: f64 = graph
        .edges()
        .iter()
        .map(|&(i, j)| (&effects_vec(&effects, i) - &effects_vec(&effects, j)).norm_squared())
        .sum();
    println!("sum of squared edge differences {direct:.3}");
    Ok(())
}

fn effects_vec(e: &[Vec<f64>], i: usize) -> DVector<f64> {
    DVector::from_column_slice(&e[i])
}
