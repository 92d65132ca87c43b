//! JSON experiment specs, output files, and the commands behind the `delegate` binary.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::agents::AgentConfig;
use crate::benchmark::{opt_threshold, BenchmarkSettings};
use crate::engine::{replicate, RunHook, RunResult, SimulationConfig};
use crate::error::Error;
use crate::instances::{
    generate_deterministic_chain, random_deterministic, ChainParams, Fixture, InstanceModel,
};
use crate::mechanisms::MechanismConfig;

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "DELEGATE_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "runs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Chain(ChainParams),
    Random { k: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    /// A fixture name such as `P1(0.1,1e-14)`.
    Fixture(String),
    Generator(GeneratorSpec),
    /// Path to an instance JSON document, relative to the spec file.
    File(PathBuf),
    Inline(InstanceModel),
}

impl InstanceSpec {
    pub fn resolve(&self, base: &Path) -> Result<InstanceModel, Error> {
        let model = match self {
            InstanceSpec::Fixture(name) => name.parse::<Fixture>()?.instance()?,
            InstanceSpec::Generator(GeneratorSpec::Chain(p)) => generate_deterministic_chain(*p)?,
            InstanceSpec::Generator(GeneratorSpec::Random { k, seed }) => random_deterministic(*k, *seed),
            InstanceSpec::File(path) => {
                let text = fs::read_to_string(base.join(path))?;
                serde_json::from_str(&text)?
            }
            InstanceSpec::Inline(model) => model.clone(),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub instance: InstanceSpec,
    pub mechanism: MechanismConfig,
    pub agent: AgentConfig,
    #[serde(rename = "T")]
    pub horizons: Vec<usize>,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Fills the `runtime` column of `summary.csv`; off by default so files are reproducible.
    #[serde(default)]
    pub record_runtime: bool,
    /// Write one trace CSV per `(T, seed)` cell.
    #[serde(default = "yes")]
    pub traces: bool,
    #[serde(default)]
    pub benchmark: BenchmarkSettings,
}

fn yes() -> bool {
    true
}

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub struct CommandError {
    pub code: i32,
    pub message: String,
}

impl CommandError {
    pub const RUNTIME: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const VALIDATION: i32 = 3;

    fn runtime(e: impl fmt::Display) -> Self {
        CommandError { code: Self::RUNTIME, message: e.to_string() }
    }

    fn validation(e: impl fmt::Display) -> Self {
        CommandError { code: Self::VALIDATION, message: e.to_string() }
    }
}

impl fmt::Display for CommandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CommandError {}

/// A spec whose names and parameters have all been resolved.
#[derive(Debug, Clone)]
pub struct ValidatedSpec {
    pub spec: ExperimentSpec,
    pub instance: InstanceModel,
}

impl ExperimentSpec {
    /// Syntax errors map to exit code 2, everything else to 3. Messages
    /// start with the path of the offending key.
    pub fn parse(text: &str) -> Result<Self, CommandError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            use serde_json::error::Category;
            let path = e.path().to_string();
            let inner = e.into_inner();
            let code = match inner.classify() {
                Category::Syntax | Category::Eof | Category::Io => CommandError::PARSE,
                Category::Data => CommandError::VALIDATION,
            };
            let key = if path == "." { "spec".to_string() } else { path };
            CommandError { code, message: format!("{key}: {inner}") }
        })?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<ValidatedSpec, CommandError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CommandError::runtime(format!("{}: {e}", path.display())))?;
        let spec = Self::parse(&text)?;
        spec.validate(path.parent().unwrap_or(Path::new(".")))
    }

    /// Resolves the instance and checks every parameter before anything runs.
    pub fn validate(self, base: &Path) -> Result<ValidatedSpec, CommandError> {
        let bad = |key: &str, e: &dyn fmt::Display| CommandError::validation(format!("{key}: {e}"));
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name == ".." {
            return Err(bad("name", &"must be a plain non-empty directory name"));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(bad("T", &"must be a non-empty list of positive horizons"));
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds", &"must not be empty"));
        }
        let instance = self.instance.resolve(base).map_err(|e| bad("instance", &e))?;
        self.agent.validate().map_err(|e| bad("agent", &e))?;
        for &t in &self.horizons {
            self.mechanism.validate(t).map_err(|e| bad("mechanism", &e))?;
        }
        if self.benchmark.grid_size < 2 {
            return Err(bad("benchmark.grid_size", &"must be at least 2"));
        }
        Ok(ValidatedSpec { spec: self, instance })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed_override: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub horizon: usize,
    pub mean_regret: f64,
    pub stddev: f64,
    pub runtime_secs: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub rows: Vec<SummaryRow>,
    pub trace_files: usize,
}

/// `--out`, then the spec's `output_dir`, then `$DELEGATE_OUT_DIR`, then `./runs`.
pub fn output_root(cli: Option<&Path>, spec: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| spec.map(Path::to_path_buf))
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Writes via a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".{}.{}.tmp", std::process::id(), COUNTER.fetch_add(1, Ordering::Relaxed)));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

fn trace_bytes(run: &RunResult) -> crate::Result<Vec<u8>> {
    let mut buf = Vec::new();
    run.write_trace_csv(&mut buf)?;
    Ok(buf)
}

/// Runs every `(T, seed)` cell of a validated spec and writes its outputs.
pub fn execute(v: &ValidatedSpec, opts: &RunOptions) -> Result<RunReport, CommandError> {
    let spec = &v.spec;
    let seeds = opts.seed_override.clone().unwrap_or_else(|| spec.seeds.clone());
    if seeds.is_empty() {
        return Err(CommandError::validation("seed-override: must not be empty"));
    }
    let jobs = opts.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let dir = output_root(opts.out.as_deref(), spec.output_dir.as_deref()).join(&spec.name);
    let traces = dir.join("traces");
    fs::create_dir_all(&traces).map_err(CommandError::runtime)?;

    let bench = Arc::new(opt_threshold(&v.instance, &spec.benchmark).map_err(CommandError::runtime)?);
    let mut rows = Vec::new();
    let mut trace_files = 0;
    for &horizon in &spec.horizons {
        let template = SimulationConfig {
            instance: v.instance.clone(),
            mechanism: spec.mechanism.clone(),
            agent: spec.agent.clone(),
            horizon,
            seed: 0,
        };
        let write_trace = |run: &RunResult| -> crate::Result<()> {
            let path = traces.join(format!("T{horizon}_seed{}.csv", run.seed));
            write_atomic(&path, &trace_bytes(run)?)?;
            Ok(())
        };
        let hook: Option<RunHook<'_>> = if spec.traces { Some(&write_trace) } else { None };
        let started = Instant::now();
        let rep = replicate(&template, &seeds, jobs, Arc::clone(&bench), hook)
        .map_err(CommandError::runtime)?;
        if spec.traces {
            trace_files += seeds.len();
        }
        rows.push(SummaryRow {
            horizon,
            mean_regret: rep.mean_regret,
            stddev: rep.stddev_regret,
            runtime_secs: spec.record_runtime.then(|| started.elapsed().as_secs_f64()),
        });
    }
    write_atomic(&dir.join("summary.csv"), &summary_csv(&rows).map_err(CommandError::runtime)?)
        .map_err(CommandError::runtime)?;
    write_atomic(&dir.join("regret_vs_T.dat"), plot_data(&rows).as_bytes()).map_err(CommandError::runtime)?;
    Ok(RunReport { dir, rows, trace_files })
}

pub fn summary_csv(rows: &[SummaryRow]) -> crate::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["T", "mean_regret", "stddev", "runtime"])?;
    for r in rows {
        w.write_record([
            r.horizon.to_string(),
            r.mean_regret.to_string(),
            r.stddev.to_string(),
            r.runtime_secs.map(|s| format!("{s:.3}")).unwrap_or_default(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Whitespace-separated `T mean_regret`, for log-log plotting.
pub fn plot_data(rows: &[SummaryRow]) -> String {
    let mut s = String::from("# T mean_regret\n");
    for r in rows {
        s.push_str(&format!("{} {}\n", r.horizon, r.mean_regret));
    }
    s
}

pub fn cmd_run(spec_path: &Path, opts: &RunOptions) -> Result<RunReport, CommandError> {
    let v = ExperimentSpec::load(spec_path)?;
    execute(&v, opts)
}

/// `fixtures list`: one line per fixture family.
pub fn fixtures_list() -> String {
    let mut s = String::new();
    for f in Fixture::catalogue() {
        let k = f.instance().map(|i| i.k()).unwrap_or(0);
        s.push_str(&format!("{:<36} K={k}  {}\n", f.to_string(), f.description()));
    }
    s
}

/// `fixtures show NAME`: the instance JSON plus the known optimum where one exists.
pub fn fixtures_show(name: &str) -> Result<String, CommandError> {
    let fixture: Fixture = name.parse().map_err(CommandError::validation)?;
    let inst = fixture.instance().map_err(CommandError::validation)?;
    let mut s = format!("{fixture}: {}\n", fixture.description());
    s.push_str(&serde_json::to_string_pretty(&inst).map_err(CommandError::runtime)?);
    s.push('\n');
    if let Some((tau, f)) = inst.sampler().and_then(|smp| smp.analytic_optimum()) {
        s.push_str(&format!("tau* = {tau:.5} (derived analytically)\n"));
        s.push_str(&format!("f(tau*) = {f:.5} (derived analytically)\n"));
        s.push_str("tau    f(tau)\n");
        let sampler = inst.sampler().expect("checked above");
        for i in 0..=10 {
            let t = f64::from(i) / 10.0;
            if let Some(v) = sampler.analytic_f(t) {
                s.push_str(&format!("{t:.1}    {v:.5}\n"));
            }
        }
    } else if let Some(x) = inst.max_x() {
        s.push_str(&format!("OPT = max X = {x}\n"));
    }
    Ok(s)
}

pub fn fixtures_export(name: &str, path: &Path) -> Result<(), CommandError> {
    let inst = name
        .parse::<Fixture>()
        .and_then(|f| f.instance())
        .map_err(CommandError::validation)?;
    let json = serde_json::to_string_pretty(&inst).map_err(CommandError::runtime)?;
    write_atomic(path, format!("{json}\n").as_bytes()).map_err(CommandError::runtime)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMOKE: &str = r#"{
        "name": "smoke",
        "instance": {"fixture": "P1(0.1, 1e-14)"},
        "mechanism": {"name": "delayed_binary_search", "params": {"gamma": 0.9, "y_min": 0.05}},
        "agent": {"name": "adversarial_eps", "params": {"eps": 0.025}, "gamma": 0.9},
        "T": [10000],
        "seeds": [1]
    }"#;

    #[test]
    fn parse_and_validate_smoke_spec() {
        let spec = ExperimentSpec::parse(SMOKE).unwrap();
        assert!(spec.traces && !spec.record_runtime);
        let v = spec.validate(Path::new(".")).unwrap();
        assert_eq!(v.instance.k(), 2);
    }

    #[test]
    fn error_codes() {
        assert_eq!(ExperimentSpec::parse("{").unwrap_err().code, 2);
        let unknown = SMOKE.replace("delayed_binary_search", "quantum_search");
        let e = ExperimentSpec::parse(&unknown).unwrap_err();
        assert_eq!(e.code, 3);
        assert!(e.message.contains("quantum_search"), "{}", e.message);
        let typo = SMOKE.replace("\"seeds\"", "\"seedz\"");
        let e = ExperimentSpec::parse(&typo).unwrap_err();
        assert_eq!(e.code, 3);
        assert!(e.message.contains("seedz"));
        let bad_fixture = SMOKE.replace("P1(0.1, 1e-14)", "P9");
        let e = ExperimentSpec::parse(&bad_fixture).unwrap().validate(Path::new(".")).unwrap_err();
        assert_eq!(e.code, 3);
        assert!(e.message.starts_with("instance"));
    }

    #[test]
    fn output_root_priority() {
        let cli = Path::new("/a");
        let spec = Path::new("/b");
        assert_eq!(output_root(Some(cli), Some(spec)), PathBuf::from("/a"));
        assert_eq!(output_root(None, Some(spec)), PathBuf::from("/b"));
    }

    #[test]
    fn summary_runtime_blank_by_default() {
        let rows = vec![SummaryRow { horizon: 10, mean_regret: 1.5, stddev: 0.0, runtime_secs: None }];
        let s = String::from_utf8(summary_csv(&rows).unwrap()).unwrap();
        assert_eq!(s, "T,mean_regret,stddev,runtime\n10,1.5,0,\n");
        assert_eq!(plot_data(&rows), "# T mean_regret\n10 1.5\n");
    }

    #[test]
    fn show_two_uniform_prints_derived_optimum() {
        let s = fixtures_show("TwoUniformComplement").unwrap();
        assert!(s.contains("tau* = 0.41421"));
        assert!(s.contains("f(tau*) = 0.55228"));
        assert_eq!(fixtures_show("Nope").unwrap_err().code, 3);
        for name in Fixture::NAMES {
            assert!(fixtures_list().contains(name));
        }
    }
}
