//! UCB over a threshold grid on two complementary uniform solutions.

use std::sync::Arc;

use repeated_delegation::agents::AgentConfig;
use repeated_delegation::benchmark::{opt_threshold, BenchmarkSettings};
use repeated_delegation::engine::{replicate, SimulationConfig};
use repeated_delegation::instances::fixture;
use repeated_delegation::mechanisms::MechanismConfig;

fn main() -> repeated_delegation::Result<()> {
    let inst = fixture("TwoUniformComplement")?;
    let bench = Arc::new(opt_threshold(&inst, &BenchmarkSettings::default())?);
    println!("tau* = {:.5}, f(tau*) = {:.5} ({:?})", bench.tau_star, bench.opt_per_round, bench.estimator);
    let seeds: Vec<u64> = (0..10).collect();
    for horizon in [1_000usize, 10_000, 100_000] {
        let cfg = SimulationConfig {
            instance: inst.clone(),
            mechanism: MechanismConfig::UcbThreshold {},
            agent: AgentConfig::myopic(0.9),
            horizon,
            seed: 0,
        };
        let rep = replicate(&cfg, &seeds, 4, Arc::clone(&bench), None)?;
        let t = horizon as f64;
        println!(
            "T={horizon:<7} regret {:>8.1} +/- {:<6.1} regret/sqrt(T ln T) = {:.3}",
            rep.mean_regret,
            rep.stddev_regret,
            rep.mean_regret / (t * t.ln()).sqrt()
        );
    }
    Ok(())
}
