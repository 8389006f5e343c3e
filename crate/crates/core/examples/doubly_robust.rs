//! The pseudo-reward stays unbiased for the treatment effect whatever the
//! working model predicts; a good model only lowers its variance.
//!
//! `cargo run --example doubly_robust`

use rome::reward::pseudo_reward_from;

fn main() -> rome::Result<()> {
    let (mu0, mu1) = (2.0, 2.7);
    let pi0 = 0.4;
    println!("true effect {:.3}", mu1 - mu0);
    for (name, f0, f1) in [("exact", mu0, mu1), ("zero", 0.0, 0.0), ("wrong", 5.0, -3.0)] {
        // Rewards are deterministic here, so enumerating the action is exact.
        let on = pseudo_reward_from(f1, f0, 1, 1, mu1, pi0)?.value;
        let off = pseudo_reward_from(f1, f0, 1, 0, mu0, pi0)?.value;
        let mean = (1.0 - pi0) * on + pi0 * off;
        let var = (1.0 - pi0) * (on - mean).powi(2) + pi0 * (off - mean).powi(2);
        println!("{name:>6} model: mean {mean:.3}, variance {var:.3}");
    }
    Ok(())
}
