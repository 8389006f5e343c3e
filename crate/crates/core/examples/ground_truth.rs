//! Writes an environment's true parameters and baseline surface.
//!
//! `cargo run --example ground_truth -- [out_dir]`

use std::path::PathBuf;

use rome::env::{Environment, Setting};

fn main() -> rome::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("rome-truth"));
    let env = Environment::staged(Setting::Nonlinear, 30, 0)?;
    env.write_truth(&out)?;
    println!("θ(1, 1) = {:?}", env.theta(1, 1)?.as_slice());
    println!("θ(1, 30) = {:?}", env.theta(1, 30)?.as_slice());
    println!("g(0, 0) = {:.3}", env.baseline(&[0.0, 0.0]));
    println!("files written to {}", out.display());
    Ok(())
}
