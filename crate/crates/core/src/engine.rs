//! The round loop and parallel replication.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{AgentConfig, AgentObservation, AgentPolicy};
use crate::benchmark::{opt_threshold, BenchmarkResult, BenchmarkSettings};
use crate::domain::{discount, History, RoundRecord};
use crate::error::{invalid, Result};
use crate::instances::InstanceModel;
use crate::mechanisms::{Mechanism, MechanismConfig, MechanismSnapshot};

/// Sub-stream of the root seed that drives instance realizations. Mechanisms
/// and agents in this crate are deterministic and draw nothing.
pub const REALIZATION_STREAM: u64 = 0;

/// Independent generator for one component of a run.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub instance: InstanceModel,
    pub mechanism: MechanismConfig,
    pub agent: AgentConfig,
    pub horizon: usize,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("T must be at least 1"));
        }
        self.instance.validate()?;
        self.agent.validate()?;
        self.mechanism.validate(self.horizon)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SimulationConfig { seed, ..self.clone() }
    }

    fn players(&self) -> Result<(Box<dyn Mechanism>, Box<dyn AgentPolicy>)> {
        let mechanism = self.mechanism.build(self.horizon)?;
        let agent = self.agent.build(&self.instance, &self.mechanism, self.horizon)?;
        Ok((mechanism, agent))
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub seed: u64,
    pub history: History,
    /// Entry `t - 1` is `t * opt - sum_{s <= t} principal_utility(s)`.
    pub regret_trace: Vec<f64>,
    pub agent_discounted_total: f64,
    pub benchmark: Arc<BenchmarkResult>,
    pub final_snapshot: MechanismSnapshot,
}

impl RunResult {
    pub fn regret(&self) -> f64 {
        self.regret_trace.last().copied().unwrap_or(0.0)
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            seed: self.seed,
            horizon: self.history.len(),
            regret: self.regret(),
            principal_total: self.history.records().iter().map(|r| r.principal_utility).sum(),
            agent_discounted_total: self.agent_discounted_total,
            final_snapshot: self.final_snapshot.clone(),
        }
    }

    /// Writes `t,tau_or_set_kind,proposal_x,proposal_y,accepted,principal_utility,cum_regret`.
    pub fn write_trace_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "tau_or_set_kind",
            "proposal_x",
            "proposal_y",
            "accepted",
            "principal_utility",
            "cum_regret",
        ])?;
        for (rec, regret) in self.history.records().iter().zip(&self.regret_trace) {
            let (px, py) = rec
                .proposed
                .map_or((String::new(), String::new()), |(x, y)| (x.to_string(), y.to_string()));
            w.write_record([
                rec.round.to_string(),
                rec.eligible.label(),
                px,
                py,
                rec.accepted.to_string(),
                rec.principal_utility.to_string(),
                regret.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-run totals, without the transcript.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub horizon: usize,
    pub regret: f64,
    pub principal_total: f64,
    pub agent_discounted_total: f64,
    pub final_snapshot: MechanismSnapshot,
}

/// Plays `horizon` rounds. `keep` decides whether records are stored and shown
/// to the agent; `on_round` sees every record either way.
pub fn play(
    instance: &InstanceModel,
    mechanism: &mut dyn Mechanism,
    agent: &mut dyn AgentPolicy,
    gamma: f64,
    knows_mechanism: bool,
    horizon: usize,
    seed: u64,
    keep: bool,
    mut on_round: impl FnMut(&RoundRecord),
) -> Result<(History, f64)> {
    let mut realizer = instance.realizer(stream_rng(seed, REALIZATION_STREAM));
    let description = knows_mechanism.then(|| mechanism.name());
    let mut history = History::with_capacity(if keep { horizon } else { 0 });
    let mut agent_total = 0.0;
    for t in 1..=horizon {
        let realization = realizer.realize(t);
        let eligible = mechanism.announce(t);
        let proposal = agent.propose(&AgentObservation {
            round: t,
            realization: &realization,
            eligible: &eligible,
            history: history.records(),
            mechanism: description.as_deref(),
        });
        let record = RoundRecord::new(t, eligible, &realization, proposal, gamma)?;
        agent_total += discount(gamma, t) * record.agent_utility_raw;
        mechanism.observe(&record);
        on_round(&record);
        if keep {
            history.push(record)?;
        }
    }
    Ok((history, agent_total))
}

/// Full run with the benchmark computed from default settings.
pub fn run_simulation(config: &SimulationConfig) -> Result<RunResult> {
    let bench = Arc::new(opt_threshold(&config.instance, &BenchmarkSettings::default())?);
    run_with_benchmark(config, bench)
}

pub fn run_with_benchmark(config: &SimulationConfig, benchmark: Arc<BenchmarkResult>) -> Result<RunResult> {
    config.validate()?;
    let (mut mechanism, mut agent) = config.players()?;
    let opt = benchmark.opt_per_round;
    let mut regret_trace = Vec::with_capacity(config.horizon);
    let mut cum = 0.0;
    let (history, agent_total) = play(
        &config.instance,
        mechanism.as_mut(),
        agent.as_mut(),
        config.agent.gamma,
        config.agent.knows_mechanism,
        config.horizon,
        config.seed,
        true,
        |rec| {
            cum += rec.principal_utility;
            regret_trace.push(rec.round as f64 * opt - cum);
        },
    )?;
    Ok(RunResult {
        seed: config.seed,
        history,
        regret_trace,
        agent_discounted_total: agent_total,
        benchmark,
        final_snapshot: mechanism.snapshot(),
    })
}

/// Constant-memory run: no transcript is stored and agents see no history.
pub fn run_summary(config: &SimulationConfig, benchmark: &BenchmarkResult) -> Result<RunSummary> {
    config.validate()?;
    let (mut mechanism, mut agent) = config.players()?;
    let mut principal_total = 0.0;
    let (_, agent_total) = play(
        &config.instance,
        mechanism.as_mut(),
        agent.as_mut(),
        config.agent.gamma,
        config.agent.knows_mechanism,
        config.horizon,
        config.seed,
        false,
        |rec| principal_total += rec.principal_utility,
    )?;
    Ok(RunSummary {
        seed: config.seed,
        horizon: config.horizon,
        regret: config.horizon as f64 * benchmark.opt_per_round - principal_total,
        principal_total,
        agent_discounted_total: agent_total,
        final_snapshot: mechanism.snapshot(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub runs: Vec<RunSummary>,
    pub mean_regret: f64,
    /// Sample standard deviation (0 for a single run).
    pub stddev_regret: f64,
    /// Pointwise mean and standard deviation of the regret traces.
    pub mean_trace: Vec<f64>,
    pub stddev_trace: Vec<f64>,
}

pub fn mean_stddev(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-run hook, called from worker threads.
pub type RunHook<'a> = &'a (dyn Fn(&RunResult) -> Result<()> + Sync);

/// Runs every seed on up to `parallelism` threads; results are in seed order.
pub fn replicate(
    template: &SimulationConfig,
    seeds: &[u64],
    parallelism: usize,
    benchmark: Arc<BenchmarkResult>,
    hook: Option<RunHook<'_>>,
) -> Result<Replication> {
    if seeds.is_empty() {
        return Err(invalid("replicate needs at least one seed"));
    }
    template.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let results: Vec<(RunSummary, Vec<f64>)> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let run = run_with_benchmark(&template.with_seed(seed), Arc::clone(&benchmark))?;
                if let Some(h) = hook {
                    h(&run)?;
                }
                Ok((run.summary(), run.regret_trace))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let regrets: Vec<f64> = results.iter().map(|(s, _)| s.regret).collect();
    let (mean_regret, stddev_regret) = mean_stddev(&regrets);
    let mut mean_trace = Vec::with_capacity(template.horizon);
    let mut stddev_trace = Vec::with_capacity(template.horizon);
    let mut column = vec![0.0; results.len()];
    for t in 0..template.horizon {
        for (c, (_, trace)) in column.iter_mut().zip(&results) {
            *c = trace[t];
        }
        let (m, s) = mean_stddev(&column);
        mean_trace.push(m);
        stddev_trace.push(s);
    }
    Ok(Replication {
        runs: results.into_iter().map(|(s, _)| s).collect(),
        mean_regret,
        stddev_regret,
        mean_trace,
        stddev_trace,
    })
}

/// Like [`replicate`] but in constant memory per run; traces are left empty.
pub fn replicate_summaries(
    template: &SimulationConfig,
    seeds: &[u64],
    parallelism: usize,
    benchmark: &BenchmarkResult,
) -> Result<Replication> {
    if seeds.is_empty() {
        return Err(invalid("replicate needs at least one seed"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let runs: Vec<RunSummary> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| run_summary(&template.with_seed(seed), benchmark))
            .collect::<Result<Vec<_>>>()
    })?;
    let regrets: Vec<f64> = runs.iter().map(|s| s.regret).collect();
    let (mean_regret, stddev_regret) = mean_stddev(&regrets);
    Ok(Replication {
        runs,
        mean_regret,
        stddev_regret,
        mean_trace: Vec::new(),
        stddev_trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::EligibleSet;

    fn two_solution(horizon: usize) -> SimulationConfig {
        SimulationConfig {
            instance: InstanceModel::deterministic(&[(0.3, 0.9), (0.7, 0.5)]).unwrap(),
            mechanism: MechanismConfig::IterativeSearch {},
            agent: AgentConfig::myopic(0.9),
            horizon,
            seed: 1,
        }
    }

    #[test]
    fn iterative_search_trace() {
        let run = run_simulation(&two_solution(100)).unwrap();
        assert!((run.regret() - 1.1).abs() < 1e-9);
        assert_eq!(
            run.history.records().last().unwrap().eligible,
            EligibleSet::ThresholdInclusive(0.7)
        );
        let total: f64 = run.history.records().iter().map(|r| r.principal_utility).sum();
        assert!((total + run.regret() - 100.0 * 0.7).abs() < 1e-9);
        let disc: f64 = run.history.records().iter().map(|r| r.agent_utility_discounted).sum();
        assert!((disc - run.agent_discounted_total).abs() < 1e-12);
    }

    #[test]
    fn empty_instance_has_zero_regret() {
        let cfg = SimulationConfig {
            instance: InstanceModel::deterministic(&[]).unwrap(),
            ..two_solution(50)
        };
        let run = run_simulation(&cfg).unwrap();
        assert!(run.history.records().iter().all(|r| r.proposal.is_null()));
        assert_eq!(run.regret(), 0.0);
    }

    #[test]
    fn summary_mode_matches_full_mode() {
        let cfg = SimulationConfig {
            instance: crate::instances::fixture("TwoUniformComplement").unwrap(),
            mechanism: MechanismConfig::UcbThreshold {},
            agent: AgentConfig::myopic(0.9),
            horizon: 2000,
            seed: 9,
        };
        let bench = Arc::new(opt_threshold(&cfg.instance, &BenchmarkSettings::default()).unwrap());
        let full = run_with_benchmark(&cfg, Arc::clone(&bench)).unwrap();
        let lean = run_summary(&cfg, &bench).unwrap();
        assert_eq!(full.summary(), lean);
    }

    #[test]
    fn replicate_is_schedule_independent() {
        let cfg = SimulationConfig {
            instance: crate::instances::fixture("TwoUniformComplement").unwrap(),
            mechanism: MechanismConfig::UcbThreshold {},
            agent: AgentConfig::myopic(0.9),
            horizon: 500,
            seed: 0,
        };
        let bench = Arc::new(opt_threshold(&cfg.instance, &BenchmarkSettings::default()).unwrap());
        let seeds: Vec<u64> = (0..8).collect();
        let a = replicate(&cfg, &seeds, 1, Arc::clone(&bench), None).unwrap();
        let b = replicate(&cfg, &seeds, 4, Arc::clone(&bench), None).unwrap();
        assert_eq!(a, b);
        assert!(a.stddev_regret > 0.0);
        let same = replicate(&cfg, &[3, 3], 2, bench, None).unwrap();
        assert_eq!(same.stddev_regret, 0.0);

        let det = replicate(&two_solution(100), &seeds, 3, Arc::new(opt_threshold(&two_solution(1).instance, &BenchmarkSettings::default()).unwrap()), None).unwrap();
        assert_eq!(det.stddev_regret, 0.0);
    }
}
