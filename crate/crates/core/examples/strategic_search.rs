//! Delayed searches against an adversarial eps-best-responding agent on a
//! generated d-dense chain.

use repeated_delegation::agents::AdversarialEps;
use repeated_delegation::engine::play;
use repeated_delegation::instances::{check_d_dense, check_lipschitz, generate_deterministic_chain, ChainParams};
use repeated_delegation::mechanisms::{
    delayed_iterative_search, DelayedBinarySearch, DelayedProgressiveSearch, EpsilonSchedule, Mechanism,
};

fn main() -> repeated_delegation::Result<()> {
    let (gamma, y_min, horizon) = (0.9, 0.05, 100_000);
    let params = ChainParams { k: 40, d: 0.01, l1: 1.0, l2: 1.2, y_min, seed: 3 };
    let inst = generate_deterministic_chain(params.clone())?;
    let sols = inst.solutions().expect("chains are deterministic");
    assert!(check_d_dense(sols, params.d).is_ok() && check_lipschitz(sols, params.l1, params.l2).is_ok());
    let opt = inst.max_x().unwrap_or(0.0);
    println!("chain K={} d={} max X = {opt:.4}", params.k, params.d);

    let progressive = DelayedProgressiveSearch::new(gamma, params.l1, params.l2, params.d, 4.0, EpsilonSchedule::Fixed)?;
    let eps_progressive = progressive.alpha() * 4.0 * params.d;
    let runs: Vec<(Box<dyn Mechanism>, f64)> = vec![
        (Box::new(delayed_iterative_search(gamma, y_min)?), y_min / 2.0),
        (Box::new(DelayedBinarySearch::new(gamma, y_min, horizon)?), y_min / 2.0),
        (Box::new(progressive), eps_progressive),
    ];
    for (mut mech, eps) in runs {
        let mut total = 0.0;
        play(&inst, mech.as_mut(), &mut AdversarialEps { eps }, gamma, false, horizon, 0, false, |r| {
            total += r.principal_utility
        })?;
        let snap = mech.snapshot();
        println!(
            "{:<55} eps={eps:<8.4} regret {:>9.2}  final threshold {:.4}",
            mech.name(),
            horizon as f64 * opt - total,
            snap.tau.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
