//! Posted pricing to a buyer with a fixed value, and the same pricer run as a
//! delegation mechanism.

use repeated_delegation::agents::Myopic;
use repeated_delegation::engine::play;
use repeated_delegation::instances::InstanceModel;
use repeated_delegation::rppm::{run_rppm, ConstantPricer, DelegationAdapter, KlPricer, RppmEnvironment};

fn main() -> repeated_delegation::Result<()> {
    for value in [0.2, 0.73, 0.95] {
        for horizon in [1usize << 10, 1 << 16, 1 << 22] {
            let mut p = KlPricer::new(horizon)?;
            let run = run_rppm(&mut p, RppmEnvironment { value, horizon });
            println!(
                "v={value:<5} T=2^{:<2} regret {:>6.3} after {} phases, committed at {:.6}",
                horizon.trailing_zeros(),
                run.regret,
                p.phases(),
                p.committed_price().unwrap_or(f64::NAN)
            );
        }
    }
    let flat = run_rppm(&mut ConstantPricer(0.5), RppmEnvironment { value: 0.73, horizon: 1000 });
    println!("constant price 0.5 at v=0.73: regret {:.1}", flat.regret);

    // Delegation: the agent accepts the posted "price" whenever some solution clears it.
    let inst = InstanceModel::deterministic(&[(0.73, 0.2), (0.4, 0.9)])?;
    let horizon = 1 << 16;
    let mut total = 0.0;
    let mut mech = DelegationAdapter::new(KlPricer::new(horizon)?);
    play(&inst, &mut mech, &mut Myopic, 0.9, false, horizon, 0, false, |r| total += r.principal_utility)?;
    println!("adapter on {{(0.73, 0.2), (0.4, 0.9)}}: regret {:.3}", horizon as f64 * 0.73 - total);
    Ok(())
}
