//! Delayed successive elimination against a strategic agent with stochastic
//! solutions bounded away from zero agent utility.

use repeated_delegation::agents::{AgentConfig, PolicyConfig};
use repeated_delegation::benchmark::{opt_threshold, BenchmarkSettings};
use repeated_delegation::engine::{run_summary, SimulationConfig};
use repeated_delegation::instances::fixture;
use repeated_delegation::mechanisms::{MechanismConfig, StochasticStrategicParams};

fn main() -> repeated_delegation::Result<()> {
    let (gamma, l1, y_min, horizon) = (0.9, 1.0, 0.05, 100_000);
    let params = StochasticStrategicParams::derive(gamma, l1, y_min, horizon)?;
    println!("{params:?}");

    let inst = fixture("TwoUniformComplementTruncated(0.05)")?;
    let bench = opt_threshold(&inst, &BenchmarkSettings::default())?;
    let cfg = SimulationConfig {
        instance: inst,
        mechanism: MechanismConfig::StochasticStrategic { gamma, l1, y_min },
        agent: AgentConfig::new(PolicyConfig::AdversarialEps { eps: params.eps }, gamma),
        horizon,
        seed: 11,
    };
    let run = run_summary(&cfg, &bench)?;
    println!("regret {:.1} against OPT {:.5}/round", run.regret, bench.opt_per_round);
    if let Some(arms) = &run.final_snapshot.arms {
        for i in 0..arms.thresholds.len() {
            println!(
                "  tau={:.2} pulls={:>6} mean={:.4} {}",
                arms.thresholds[i],
                arms.pulls[i],
                arms.means[i],
                if arms.active[i] { "active" } else { "eliminated" }
            );
        }
    }
    Ok(())
}
