use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use repeated_delegation::experiment::{
    cmd_run, fixtures_export, fixtures_list, fixtures_show, CommandError, RunOptions,
};
use repeated_delegation::verify::{run_suite, Suite};

#[derive(Parser)]
#[command(name = "delegate", version, about = "Simulate and verify repeated delegation mechanisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (T, seed) cell of an experiment spec.
    Run {
        /// JSON experiment spec.
        #[arg(long)]
        spec: PathBuf,
        /// Output root. Falls back to the spec's output_dir, then $DELEGATE_OUT_DIR, then ./runs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
        /// Comma-separated seeds replacing the spec's list.
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
    },
    /// Run the acceptance criteria and print one line per criterion.
    Verify {
        #[arg(long, default_value = "fast")]
        suite: Suite,
    },
    /// Inspect the built-in instance fixtures.
    Fixtures {
        #[command(subcommand)]
        action: FixtureAction,
    },
}

#[derive(Subcommand)]
enum FixtureAction {
    List,
    Show { name: String },
    Export { name: String, path: PathBuf },
}

fn run(cli: Cli) -> Result<(), CommandError> {
    match cli.command {
        Command::Run { spec, out, jobs, seed_override } => {
            let report = cmd_run(&spec, &RunOptions { out, jobs, seed_override })?;
            println!("wrote {} traces to {}", report.trace_files, report.dir.display());
            for row in &report.rows {
                println!("T={:<10} mean_regret={:.6} stddev={:.6}", row.horizon, row.mean_regret, row.stddev);
            }
            Ok(())
        }
        Command::Verify { suite } => {
            let reports = run_suite(suite, |r| println!("{r}"));
            let failed = reports.iter().filter(|r| !r.passed).count();
            println!("{} passed, {failed} failed", reports.len() - failed);
            if failed == 0 {
                Ok(())
            } else {
                Err(CommandError { code: CommandError::RUNTIME, message: format!("{failed} criteria failed") })
            }
        }
        Command::Fixtures { action } => match action {
            FixtureAction::List => {
                print!("{}", fixtures_list());
                Ok(())
            }
            FixtureAction::Show { name } => {
                print!("{}", fixtures_show(&name)?);
                Ok(())
            }
            FixtureAction::Export { name, path } => fixtures_export(&name, &path),
        },
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code.clamp(1, 255) as u8)
        }
    }
}
