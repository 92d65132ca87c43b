//! The threshold benchmark: `f(tau)`, its maximiser, and Stackelberg regret.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::best_response;
use crate::domain::{EligibleSet, History, Realization, Solution};
use crate::error::{invalid, Result};
use crate::instances::{InstanceModel, Sampler};

pub const DEFAULT_GRID_SIZE: usize = 2000;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_SEED: u64 = 0x5eed_f00d;

/// How `f` is estimated on stochastic instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorChoice {
    /// Closed form where the sampler has one, Monte Carlo otherwise.
    #[default]
    Auto,
    MonteCarlo,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSettings {
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub estimator: EstimatorChoice,
}

fn default_grid() -> usize {
    DEFAULT_GRID_SIZE
}
fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for BenchmarkSettings {
    fn default() -> Self {
        BenchmarkSettings {
            grid_size: DEFAULT_GRID_SIZE,
            n_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            estimator: EstimatorChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    Exact,
    MonteCarlo { n_samples: usize, seed: u64 },
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub f: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkResult {
    pub tau_star: f64,
    pub opt_per_round: f64,
    pub f_curve: Vec<CurvePoint>,
    pub estimator: Estimator,
}

impl BenchmarkResult {
    /// Writes `tau,f_estimate,stderr,n_samples`.
    pub fn write_curve_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["tau", "f_estimate", "stderr", "n_samples"])?;
        for p in &self.f_curve {
            w.write_record([
                p.tau.to_string(),
                p.f.to_string(),
                p.stderr.to_string(),
                p.n_samples.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Mean and standard error of `f(tau)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

fn threshold(tau: f64, inclusive: bool) -> EligibleSet {
    if inclusive {
        EligibleSet::ThresholdInclusive(tau)
    } else {
        EligibleSet::ThresholdStrict(tau)
    }
}

fn response_x(solutions: &[Solution], set: &EligibleSet) -> f64 {
    let r = Realization::new(1, solutions.to_vec());
    r.get(best_response(&r, set)).map_or(0.0, Solution::x)
}

/// Principal utility of the myopic best response to the threshold; exact on
/// deterministic instances, a Monte Carlo mean otherwise.
pub fn f_tau(instance: &InstanceModel, tau: f64, inclusive: bool, n_samples: usize, seed: u64) -> Result<FEstimate> {
    let set = threshold(tau, inclusive);
    if let Some(solutions) = instance.solutions() {
        return Ok(FEstimate {
            mean: response_x(solutions, &set),
            stderr: 0.0,
            n_samples: 0,
        });
    }
    if n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    let sampler = instance.sampler().expect("stochastic instance has a sampler");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n_samples {
        let v = response_x(&sampler.sample(&mut rng), &set);
        sum += v;
        sq += v * v;
    }
    Ok(moments(sum, sq, n_samples))
}

fn moments(sum: f64, sq: f64, n: usize) -> FEstimate {
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 { ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0) } else { 0.0 };
    FEstimate {
        mean,
        stderr: (var / nf).sqrt(),
        n_samples: n,
    }
}

/// Largest `j` with `j / g <= x`.
fn last_index_at_most(x: f64, g: usize) -> usize {
    let mut j = (x * g as f64).floor().clamp(0.0, g as f64) as usize;
    while j < g && (j + 1) as f64 / g as f64 <= x {
        j += 1;
    }
    while j > 0 && j as f64 / g as f64 > x {
        j -= 1;
    }
    j
}

/// Monte Carlo `f` on the grid `{j / g}` with common random numbers.
///
/// For each draw, the best response to `E_tau` only changes where `tau`
/// crosses some `X_a`, so each draw adds a constant to a few grid ranges.
fn monte_carlo_curve(sampler: &Sampler, g: usize, n: usize, seed: u64) -> Vec<CurvePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; g + 2];
    let mut sq = vec![0.0; g + 2];
    for _ in 0..n {
        let mut sols = sampler.sample(&mut rng);
        sols.sort_by(|a, b| a.x().total_cmp(&b.x()));
        // best (y, x) over the suffix starting at each index
        let mut best = vec![(f64::NEG_INFINITY, 0.0); sols.len() + 1];
        for i in (0..sols.len()).rev() {
            let here = (sols[i].y(), sols[i].x());
            best[i] = if here >= best[i + 1] { here } else { best[i + 1] };
        }
        // grid points in (x_{i-1}, x_i] see exactly the suffix from i
        let mut start = 0usize;
        let mut i = 0;
        while i < sols.len() {
            let x = sols[i].x();
            let mut k = i;
            while k + 1 < sols.len() && sols[k + 1].x() == x {
                k += 1;
            }
            let end = last_index_at_most(x, g);
            if end >= start {
                let v = best[i].1;
                sum[start] += v;
                sum[end + 1] -= v;
                sq[start] += v * v;
                sq[end + 1] -= v * v;
                start = end + 1;
            }
            i = k + 1;
        }
    }
    let (mut s, mut q) = (0.0, 0.0);
    (0..=g)
        .map(|j| {
            s += sum[j];
            q += sq[j];
            let e = moments(s, q, n);
            CurvePoint {
                tau: j as f64 / g as f64,
                f: e.mean,
                stderr: e.stderr,
                n_samples: n,
            }
        })
        .collect()
}

/// First point attaining the maximum.
fn argmax(points: &[CurvePoint]) -> (f64, f64) {
    points
        .iter()
        .fold((0.0, f64::NEG_INFINITY), |(bt, bf), p| if p.f > bf { (p.tau, p.f) } else { (bt, bf) })
}

/// Best inclusive threshold on the grid `{j / grid_size}`.
///
/// On deterministic instances the curve is exact, and `tau*` is the smallest
/// solution `X` attaining `max_a X_a` (an empty instance has `OPT = 0`).
pub fn opt_threshold(instance: &InstanceModel, settings: &BenchmarkSettings) -> Result<BenchmarkResult> {
    let g = settings.grid_size;
    if g < 2 {
        return Err(invalid(format!("grid_size must be at least 2, got {g}")));
    }
    if let Some(solutions) = instance.solutions() {
        let f_curve = (0..=g)
            .map(|j| {
                let tau = j as f64 / g as f64;
                CurvePoint {
                    tau,
                    f: response_x(solutions, &EligibleSet::ThresholdInclusive(tau)),
                    stderr: 0.0,
                    n_samples: 0,
                }
            })
            .collect();
        let mut xs: Vec<f64> = solutions.iter().map(Solution::x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let candidates: Vec<CurvePoint> = xs
            .iter()
            .map(|&tau| CurvePoint {
                tau,
                f: response_x(solutions, &EligibleSet::ThresholdInclusive(tau)),
                stderr: 0.0,
                n_samples: 0,
            })
            .collect();
        let (tau_star, opt) = if candidates.is_empty() { (0.0, 0.0) } else { argmax(&candidates) };
        return Ok(BenchmarkResult {
            tau_star,
            opt_per_round: opt,
            f_curve,
            estimator: Estimator::Exact,
        });
    }
    let sampler = instance.sampler().expect("stochastic instance has a sampler");
    let analytic = sampler.analytic_f(0.0).is_some();
    let use_analytic = match settings.estimator {
        EstimatorChoice::Auto => analytic,
        EstimatorChoice::Analytic if !analytic => {
            return Err(invalid("this sampler has no closed-form curve"));
        }
        EstimatorChoice::Analytic => true,
        EstimatorChoice::MonteCarlo => false,
    };
    if use_analytic {
        let f_curve: Vec<CurvePoint> = (0..=g)
            .map(|j| {
                let tau = j as f64 / g as f64;
                CurvePoint {
                    tau,
                    f: sampler.analytic_f(tau).expect("checked above"),
                    stderr: 0.0,
                    n_samples: 0,
                }
            })
            .collect();
        let (tau_star, opt) = sampler.analytic_optimum().unwrap_or_else(|| argmax(&f_curve));
        return Ok(BenchmarkResult {
            tau_star,
            opt_per_round: opt,
            f_curve,
            estimator: Estimator::Analytic,
        });
    }
    if settings.n_samples == 0 {
        return Err(invalid("n_samples must be at least 1"));
    }
    let f_curve = monte_carlo_curve(sampler, g, settings.n_samples, settings.seed);
    let (tau_star, opt) = argmax(&f_curve);
    Ok(BenchmarkResult {
        tau_star,
        opt_per_round: opt,
        f_curve,
        estimator: Estimator::MonteCarlo {
            n_samples: settings.n_samples,
            seed: settings.seed,
        },
    })
}

/// `T * opt - sum_t principal_utility(t)`.
pub fn stackelberg_regret(history: &History, opt_per_round: f64) -> f64 {
    let total: f64 = history.records().iter().map(|r| r.principal_utility).sum();
    history.len() as f64 * opt_per_round - total
}

/// `max_j means_j - means_i`.
pub fn gaps(means: &[f64]) -> Result<Vec<f64>> {
    if means.is_empty() {
        return Err(invalid("gaps of an empty list"));
    }
    let best = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(means.iter().map(|m| best - m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Proposal, RoundRecord};
    use crate::instances::fixture;

    #[test]
    fn deterministic_f_and_opt() {
        let inst = InstanceModel::deterministic(&[(0.3, 0.9), (0.7, 0.5)]).unwrap();
        assert_eq!(f_tau(&inst, 0.0, true, 1, 0).unwrap().mean, 0.3);
        assert_eq!(f_tau(&inst, 0.5, true, 1, 0).unwrap().mean, 0.7);
        let b = opt_threshold(&inst, &BenchmarkSettings::default()).unwrap();
        assert_eq!((b.tau_star, b.opt_per_round), (0.7, 0.7));

        let one = InstanceModel::deterministic(&[(0.5, 0.5)]).unwrap();
        let b = opt_threshold(&one, &BenchmarkSettings::default()).unwrap();
        assert_eq!((b.tau_star, b.opt_per_round), (0.5, 0.5));

        let empty = InstanceModel::deterministic(&[]).unwrap();
        assert_eq!(opt_threshold(&empty, &BenchmarkSettings::default()).unwrap().opt_per_round, 0.0);
    }

    #[test]
    fn deterministic_opt_is_max_x() {
        for seed in 0..20 {
            let inst = crate::instances::random_deterministic(1 + seed as usize % 7, seed);
            let b = opt_threshold(&inst, &BenchmarkSettings { grid_size: 50, ..Default::default() }).unwrap();
            assert_eq!(b.opt_per_round, inst.max_x().unwrap());
            assert!(b.f_curve.iter().all(|p| p.f <= b.opt_per_round));
        }
    }

    #[test]
    fn monte_carlo_curve_matches_pointwise_estimator() {
        // same seed and draws: the sweep must agree with direct evaluation
        let s = Sampler::IndependentUniform { k: 4 };
        let inst = InstanceModel::stochastic(s.clone());
        let curve = monte_carlo_curve(&s, 10, 2000, 7);
        for p in &curve {
            let direct = f_tau(&inst, p.tau, true, 2000, 7).unwrap();
            assert!((direct.mean - p.f).abs() < 1e-12, "tau {} {} {}", p.tau, direct.mean, p.f);
            assert!((direct.stderr - p.stderr).abs() < 1e-9);
        }
    }

    #[test]
    fn two_uniform_monte_carlo_finds_optimum() {
        let inst = fixture("TwoUniformComplement").unwrap();
        let settings = BenchmarkSettings {
            estimator: EstimatorChoice::MonteCarlo,
            ..Default::default()
        };
        let b = opt_threshold(&inst, &settings).unwrap();
        let (ts, fs) = crate::instances::two_uniform_optimum();
        assert!((b.tau_star - ts).abs() < 0.02, "{}", b.tau_star);
        assert!((b.opt_per_round - fs).abs() < 0.01, "{}", b.opt_per_round);
        let a = opt_threshold(&inst, &BenchmarkSettings::default()).unwrap();
        assert_eq!(a.estimator, Estimator::Analytic);
        assert_eq!(a.opt_per_round, fs);
    }

    #[test]
    fn regret_and_gaps() {
        let r = Realization::new(1, vec![]);
        let recs: Vec<RoundRecord> = (1..=10)
            .map(|t| RoundRecord::new(t, EligibleSet::AcceptAll, &Realization { round: t, ..r.clone() }, Proposal::Null, 0.9).unwrap())
            .collect();
        let h = History::try_from(recs).unwrap();
        assert!((stackelberg_regret(&h, 0.7) - 7.0).abs() < 1e-12);
        assert_eq!(stackelberg_regret(&h, 0.0), 0.0);
        assert_eq!(gaps(&[0.2, 0.5, 0.5]).unwrap(), vec![0.3, 0.0, 0.0]);
        assert_eq!(gaps(&[0.4]).unwrap(), vec![0.0]);
        assert!(gaps(&[]).is_err());
    }

    #[test]
    fn curve_csv_header() {
        let inst = InstanceModel::deterministic(&[(0.5, 0.5)]).unwrap();
        let b = opt_threshold(&inst, &BenchmarkSettings { grid_size: 4, ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        b.write_curve_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("tau,f_estimate,stderr,n_samples\n"));
        assert_eq!(s.lines().count(), 6);
    }
}
