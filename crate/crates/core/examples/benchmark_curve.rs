//! The threshold benchmark f(tau): closed form against Monte Carlo, written
//! as CSV for plotting.
//!
//! cargo run --example benchmark_curve -- curve.csv

use repeated_delegation::benchmark::{opt_threshold, BenchmarkSettings, EstimatorChoice};
use repeated_delegation::instances::fixture;

fn main() -> repeated_delegation::Result<()> {
    let inst = fixture("TwoUniformComplement")?;
    let analytic = opt_threshold(&inst, &BenchmarkSettings { grid_size: 200, ..BenchmarkSettings::default() })?;
    let mc = opt_threshold(
        &inst,
        &BenchmarkSettings {
            grid_size: 200,
            n_samples: 20_000,
            estimator: EstimatorChoice::MonteCarlo,
            ..BenchmarkSettings::default()
        },
    )?;
    println!("closed form: tau* = {:.5}, OPT = {:.5}", analytic.tau_star, analytic.opt_per_round);
    println!("monte carlo: tau* = {:.5}, OPT = {:.5}", mc.tau_star, mc.opt_per_round);
    let worst = analytic
        .f_curve
        .iter()
        .zip(&mc.f_curve)
        .map(|(a, m)| ((a.f - m.f) / m.stderr.max(1e-12)).abs())
        .fold(0.0, f64::max);
    println!("largest |closed form - MC| in standard errors: {worst:.2}");

    if let Some(path) = std::env::args().nth(1) {
        let file = std::fs::File::create(&path)?;
        mc.write_curve_csv(file)?;
        println!("wrote {path}");
    }
    Ok(())
}
