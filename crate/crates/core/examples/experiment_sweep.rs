//! Runs a JSON experiment spec the same way `delegate run` does.
//!
//! cargo run --example experiment_sweep -- [spec.json] [out_dir]

use std::path::PathBuf;

use repeated_delegation::experiment::{cmd_run, RunOptions};

fn main() {
    let mut args = std::env::args().skip(1);
    let spec = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/specs/sweep.json")));
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("delegate-example"));
    match cmd_run(&spec, &RunOptions { out: Some(out), ..RunOptions::default() }) {
        Ok(report) => {
            println!("{} traces under {}", report.trace_files, report.dir.display());
            for row in report.rows {
                println!("T={:<7} mean regret {:>9.3} (sd {:.3})", row.horizon, row.mean_regret, row.stddev);
            }
        }
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(e.code);
        }
    }
}
