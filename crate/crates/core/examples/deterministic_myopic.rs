//! A myopic agent on a fixed instance: greedy iterative search against the
//! posted-price reduction.
//!
//! cargo run --example deterministic_myopic -- [K] [seed]

use repeated_delegation::agents::Myopic;
use repeated_delegation::engine::play;
use repeated_delegation::instances::random_deterministic;
use repeated_delegation::mechanisms::{iterative_search, Mechanism};
use repeated_delegation::rppm::{DelegationAdapter, KlPricer};

fn main() -> repeated_delegation::Result<()> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(12);
    let seed: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(7);
    let inst = random_deterministic(k, seed);
    let opt = inst.max_x().unwrap_or(0.0);
    println!("K={k}, max X = {opt:.4}");

    for horizon in [1_000usize, 100_000, 1 << 20] {
        let mut mechs: Vec<Box<dyn Mechanism>> =
            vec![Box::new(iterative_search()), Box::new(DelegationAdapter::new(KlPricer::new(horizon)?))];
        for mech in mechs.iter_mut() {
            let mut total = 0.0;
            play(&inst, mech.as_mut(), &mut Myopic, 0.9, false, horizon, 0, false, |r| {
                total += r.principal_utility
            })?;
            println!("T={horizon:<8} {:<40} regret {:.3}", mech.name(), horizon as f64 * opt - total);
        }
    }
    Ok(())
}
