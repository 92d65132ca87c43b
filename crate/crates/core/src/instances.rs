//! Problem instances: deterministic solution sets, stochastic samplers,
//! assumption checkers (d-dense, Lipschitz) and the named fixtures.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Realization, Solution, Utility};
use crate::error::{invalid, Error, Result};

/// Slack for floating-point comparisons inside the assumption checkers.
pub const CHECK_TOLERANCE: f64 = 1e-12;

/// Declared properties of an instance. Absent fields are simply not claimed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default, rename = "L1", skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(default, rename = "L2", skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

/// Per-round random instance generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum Sampler {
    /// Two solutions, `X_i ~ U[0,1]`, `Y_i = 1 - X_i`.
    TwoUniformComplement,
    /// Two solutions, `X_i ~ U[0, 1 - y_min]`, `Y_i = 1 - X_i`.
    TwoUniformComplementTruncated { y_min: f64 },
    /// `k` solutions with independent uniform `X` and `Y`.
    IndependentUniform { k: usize },
}

impl Sampler {
    pub fn solution_count(&self) -> usize {
        match self {
            Sampler::TwoUniformComplement | Sampler::TwoUniformComplementTruncated { .. } => 2,
            Sampler::IndependentUniform { k } => *k,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Solution> {
        let complement = |i: u32, x: f64| Solution {
            id: i,
            x: Utility::new(x).expect("sampled x in range"),
            y: Utility::new(1.0 - x).expect("sampled y in range"),
        };
        match *self {
            Sampler::TwoUniformComplement => (0..2).map(|i| complement(i, rng.gen::<f64>())).collect(),
            Sampler::TwoUniformComplementTruncated { y_min } => (0..2)
                .map(|i| complement(i, rng.gen::<f64>() * (1.0 - y_min)))
                .collect(),
            Sampler::IndependentUniform { k } => (0..k as u32)
                .map(|i| Solution {
                    id: i,
                    x: Utility::new(rng.gen()).unwrap(),
                    y: Utility::new(rng.gen()).unwrap(),
                })
                .collect(),
        }
    }

    /// Closed-form threshold curve `f(tau)` where one is known.
    ///
    /// For two complementary uniforms the agent proposes the smallest eligible
    /// `X`, giving `f(tau) = 1/3 + tau - tau^2 - tau^3/3`. The truncated
    /// variant is the same curve rescaled to `[0, 1 - y_min]`.
    pub fn analytic_f(&self, tau: f64) -> Option<f64> {
        match *self {
            Sampler::TwoUniformComplement => Some(two_uniform_f(tau.clamp(0.0, 1.0))),
            Sampler::TwoUniformComplementTruncated { y_min } => {
                let c = 1.0 - y_min;
                if tau > c {
                    Some(0.0)
                } else {
                    Some(c * two_uniform_f((tau / c).max(0.0)))
                }
            }
            Sampler::IndependentUniform { .. } => None,
        }
    }

    /// `(tau*, f(tau*))` where known.
    pub fn analytic_optimum(&self) -> Option<(f64, f64)> {
        let (ts, fs) = two_uniform_optimum();
        match *self {
            Sampler::TwoUniformComplement => Some((ts, fs)),
            Sampler::TwoUniformComplementTruncated { y_min } => {
                let c = 1.0 - y_min;
                Some((c * ts, c * fs))
            }
            Sampler::IndependentUniform { .. } => None,
        }
    }
}

fn two_uniform_f(t: f64) -> f64 {
    // (1 - t)^2 (1 + 2t) / 3 + t (1 - t^2), factored so f(1) is exactly 0
    (1.0 - t) * ((1.0 - t) * (1.0 + 2.0 * t) / 3.0 + t * (1.0 + t))
}

/// `tau* = sqrt(2) - 1`, `f(tau*) = 4 (sqrt(2) - 1) / 3`.
pub fn two_uniform_optimum() -> (f64, f64) {
    let ts = std::f64::consts::SQRT_2 - 1.0;
    (ts, 4.0 * ts / 3.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceKind {
    Deterministic { solutions: Vec<Solution> },
    Stochastic { sampler: Sampler },
}

/// A deterministic solution set or a stochastic per-round sampler, plus metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceModel {
    #[serde(flatten)]
    pub kind: InstanceKind,
    pub metadata: Metadata,
}

impl InstanceModel {
    pub fn deterministic(points: &[(f64, f64)]) -> Result<Self> {
        let solutions = crate::domain::solutions_from_points(points)?;
        Ok(Self::from_solutions(solutions))
    }

    pub fn from_solutions(solutions: Vec<Solution>) -> Self {
        let k = solutions.len();
        InstanceModel {
            kind: InstanceKind::Deterministic { solutions },
            metadata: Metadata {
                k,
                ..Metadata::default()
            },
        }
    }

    pub fn stochastic(sampler: Sampler) -> Self {
        let k = sampler.solution_count();
        InstanceModel {
            kind: InstanceKind::Stochastic { sampler },
            metadata: Metadata {
                k,
                ..Metadata::default()
            },
        }
    }

    pub fn with_metadata(mut self, f: impl FnOnce(&mut Metadata)) -> Self {
        f(&mut self.metadata);
        self
    }

    pub fn k(&self) -> usize {
        match &self.kind {
            InstanceKind::Deterministic { solutions } => solutions.len(),
            InstanceKind::Stochastic { sampler } => sampler.solution_count(),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.kind, InstanceKind::Deterministic { .. })
    }

    pub fn solutions(&self) -> Option<&[Solution]> {
        match &self.kind {
            InstanceKind::Deterministic { solutions } => Some(solutions),
            InstanceKind::Stochastic { .. } => None,
        }
    }

    pub fn sampler(&self) -> Option<&Sampler> {
        match &self.kind {
            InstanceKind::Stochastic { sampler } => Some(sampler),
            InstanceKind::Deterministic { .. } => None,
        }
    }

    /// Largest principal utility of a deterministic instance (0 when empty).
    pub fn max_x(&self) -> Option<f64> {
        self.solutions()
            .map(|s| s.iter().map(Solution::x).fold(0.0, f64::max))
    }

    /// A per-run source of realizations.
    pub fn realizer(&self, rng: ChaCha8Rng) -> Realizer {
        match &self.kind {
            InstanceKind::Deterministic { solutions } => Realizer::Constant(solutions.clone().into()),
            InstanceKind::Stochastic { sampler } => Realizer::Sampled {
                sampler: sampler.clone(),
                rng,
            },
        }
    }

    /// Checks every declared metadata claim that has a checker.
    pub fn validate(&self) -> Result<()> {
        if self.metadata.k != self.k() {
            return Err(invalid(format!(
                "metadata K = {} but instance has {} solutions",
                self.metadata.k,
                self.k()
            )));
        }
        if let Some(solutions) = self.solutions() {
            if let Some(y_min) = self.metadata.y_min {
                if let Some(s) = solutions.iter().find(|s| s.y() <= y_min) {
                    return Err(invalid(format!(
                        "solution {} has y = {} <= declared y_min {y_min}",
                        s.id,
                        s.y()
                    )));
                }
            }
            if let Some(d) = self.metadata.d {
                if let Err(w) = check_d_dense(solutions, d) {
                    return Err(invalid(format!("declared d = {d} violated by pair {w:?}")));
                }
            }
            if let (Some(l1), Some(l2)) = (self.metadata.l1, self.metadata.l2) {
                if let Err(w) = check_lipschitz(solutions, l1, l2) {
                    return Err(invalid(format!(
                        "declared (L1, L2) = ({l1}, {l2}) violated by pair {w:?}"
                    )));
                }
            }
        }
        if let Some(Sampler::TwoUniformComplementTruncated { y_min }) = self.sampler() {
            if !(0.0..1.0).contains(y_min) {
                return Err(invalid(format!("truncation y_min {y_min} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// Produces the realization for each round of one run.
pub enum Realizer {
    Constant(Arc<[Solution]>),
    Sampled { sampler: Sampler, rng: ChaCha8Rng },
}

impl Realizer {
    pub fn realize(&mut self, round: usize) -> Realization {
        match self {
            Realizer::Constant(s) => Realization::new(round, Arc::clone(s)),
            Realizer::Sampled { sampler, rng } => Realization::new(round, sampler.sample(rng)),
        }
    }
}

/// A violating ordered pair of solution indices.
pub type Witness = (usize, usize);

fn dx(a: &Solution, b: &Solution) -> f64 {
    (a.x() - b.x()).abs()
}

fn dy(a: &Solution, b: &Solution) -> f64 {
    (a.y() - b.y()).abs()
}

/// d-dense check. For every ordered pair `(a, b)`: either `d_X(a,b) <= d`, or some
/// other solution `c` has `d_X(a,c) <= d` and `d_X(b,c) <= d_X(a,b)`.
pub fn check_d_dense(solutions: &[Solution], d: f64) -> Result<(), Witness> {
    for (i, a) in solutions.iter().enumerate() {
        for (j, b) in solutions.iter().enumerate() {
            if i == j {
                continue;
            }
            let dab = dx(a, b);
            if dab <= d + CHECK_TOLERANCE {
                continue;
            }
            let bridged = solutions.iter().enumerate().any(|(k, c)| {
                k != i && k != j && dx(a, c) <= d + CHECK_TOLERANCE && dx(b, c) <= dab + CHECK_TOLERANCE
            });
            if !bridged {
                return Err((i, j));
            }
        }
    }
    Ok(())
}

/// `L1 * d_X(a,b) <= d_Y(a,b) <= L2 * d_X(a,b)` for every pair.
pub fn check_lipschitz(solutions: &[Solution], l1: f64, l2: f64) -> Result<(), Witness> {
    for (i, a) in solutions.iter().enumerate() {
        for (j, b) in solutions.iter().enumerate().skip(i + 1) {
            let (x, y) = (dx(a, b), dy(a, b));
            if l1 * x > y + CHECK_TOLERANCE || y > l2 * x + CHECK_TOLERANCE {
                return Err((i, j));
            }
        }
    }
    Ok(())
}

/// Samples `n_samples` realizations and checks the lower Lipschitz bound within each.
pub fn check_stochastic_lipschitz(sampler: &Sampler, l1: f64, n_samples: usize, seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples).all(|_| {
        let sols = sampler.sample(&mut rng);
        sols.iter().enumerate().all(|(i, a)| {
            sols[i + 1..]
                .iter()
                .all(|b| l1 * dx(a, b) <= dy(a, b) + CHECK_TOLERANCE)
        })
    })
}

/// Parameters of the chain generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    #[serde(rename = "K")]
    pub k: usize,
    pub d: f64,
    #[serde(rename = "L1")]
    pub l1: f64,
    #[serde(rename = "L2")]
    pub l2: f64,
    pub y_min: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Random chain satisfying d-density, (L1, L2)-Lipschitz continuity and `Y > y_min`.
///
/// Consecutive `X` gaps are uniform in `(0, d]`; `Y` decreases along the chain
/// with per-link slopes uniform in `[L1, L2]`, so every pair's slope is a convex
/// combination of link slopes and stays inside the band.
pub fn generate_deterministic_chain(params: ChainParams) -> Result<InstanceModel> {
    let ChainParams { k, d, l1, l2, y_min, seed } = params;
    if !(d > 0.0) || !(l1 > 0.0) || l1 > l2 || !(0.0..1.0).contains(&y_min) {
        return Err(invalid(format!(
            "chain needs d > 0, 0 < L1 <= L2, 0 <= y_min < 1 (got d={d}, L1={l1}, L2={l2}, y_min={y_min})"
        )));
    }
    if k as f64 * d > 1.0 {
        return Err(invalid(format!("K*d = {} exceeds 1", k as f64 * d)));
    }
    let span = k.saturating_sub(1) as f64 * d;
    if y_min + l2 * span >= 1.0 {
        return Err(invalid(format!(
            "y_min + L2*(K-1)*d = {} leaves no room below 1",
            y_min + l2 * span
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaps: Vec<f64> = (1..k).map(|_| d * (1.0 - rng.gen::<f64>())).collect();
    let slopes: Vec<f64> = (1..k).map(|_| l1 + (l2 - l1) * rng.gen::<f64>()).collect();
    let total_gap: f64 = gaps.iter().sum();
    let rise: f64 = gaps.iter().zip(&slopes).map(|(g, s)| g * s).sum();

    let mut xs = Vec::with_capacity(k);
    let mut x = rng.gen::<f64>() * (1.0 - total_gap);
    for i in 0..k {
        xs.push(x);
        if i + 1 < k {
            x += gaps[i];
        }
    }
    let mut ys = vec![0.0; k];
    if k > 0 {
        let headroom = 1.0 - y_min - rise;
        ys[k - 1] = y_min + headroom * (1.0 - rng.gen::<f64>()) * 0.999;
        for i in (0..k.saturating_sub(1)).rev() {
            ys[i] = ys[i + 1] + slopes[i] * gaps[i];
        }
    }
    let solutions = xs
        .iter()
        .zip(&ys)
        .enumerate()
        .map(|(i, (&x, &y))| Solution::new(i as u32, x.min(1.0), y.min(1.0)))
        .collect::<Result<Vec<_>>>()?;
    let model = InstanceModel::from_solutions(solutions).with_metadata(|m| {
        m.y_min = Some(y_min);
        m.d = Some(d);
        m.l1 = Some(l1);
        m.l2 = Some(l2);
        m.notes = format!("chain seed={seed}");
    });
    Ok(model)
}

/// Uniformly random deterministic instance with `k` solutions.
pub fn random_deterministic(k: usize, seed: u64) -> InstanceModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let solutions = (0..k as u32)
        .map(|i| Solution {
            id: i,
            x: Utility::new(rng.gen()).unwrap(),
            y: Utility::new(rng.gen()).unwrap(),
        })
        .collect();
    InstanceModel::from_solutions(solutions)
}

/// Named fixtures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fixture {
    /// `{(d, 1), (2d, y)}`
    P1 { d: f64, y: f64 },
    /// `{(d, 1)}`
    P2 { d: f64 },
    /// `{(1/2, 1), (1, eps)}`
    AppendixK { eps: f64 },
    TwoUniformComplement,
    TwoUniformComplementTruncated { y_min: f64 },
}

impl Fixture {
    pub const NAMES: [&'static str; 5] = [
        "P1",
        "P2",
        "AppendixK",
        "TwoUniformComplement",
        "TwoUniformComplementTruncated",
    ];

    /// A representative instance of each fixture family.
    pub fn catalogue() -> Vec<Fixture> {
        vec![
            Fixture::P1 { d: 0.1, y: 1e-14 },
            Fixture::P2 { d: 0.1 },
            Fixture::AppendixK { eps: 0.1 },
            Fixture::TwoUniformComplement,
            Fixture::TwoUniformComplementTruncated { y_min: 0.05 },
        ]
    }

    pub fn description(&self) -> &'static str {
        match self {
            Fixture::P1 { .. } => "deterministic {(d, 1), (2d, y)}: the agent may hide the better solution",
            Fixture::P2 { .. } => "deterministic {(d, 1)}: indistinguishable from P1 while the agent hides",
            Fixture::AppendixK { .. } => "deterministic {(1/2, 1), (1, eps)}: non-discounting agent pretends to hold one solution",
            Fixture::TwoUniformComplement => "stochastic, two solutions X ~ U[0,1], Y = 1 - X",
            Fixture::TwoUniformComplementTruncated { .. } => "stochastic, two solutions X ~ U[0,1-y_min], Y = 1 - X",
        }
    }

    pub fn instance(&self) -> Result<InstanceModel> {
        let model = match *self {
            Fixture::P1 { d, y } => InstanceModel::deterministic(&[(d, 1.0), (2.0 * d, y)])?
                .with_metadata(|m| {
                    m.d = Some(d);
                    m.notes = self.to_string();
                }),
            Fixture::P2 { d } => InstanceModel::deterministic(&[(d, 1.0)])?.with_metadata(|m| {
                m.d = Some(d);
                m.notes = self.to_string();
            }),
            Fixture::AppendixK { eps } => InstanceModel::deterministic(&[(0.5, 1.0), (1.0, eps)])?
                .with_metadata(|m| m.notes = self.to_string()),
            Fixture::TwoUniformComplement => InstanceModel::stochastic(Sampler::TwoUniformComplement)
                .with_metadata(|m| {
                    m.l1 = Some(1.0);
                    m.notes = self.to_string();
                }),
            Fixture::TwoUniformComplementTruncated { y_min } => {
                if !(0.0..1.0).contains(&y_min) {
                    return Err(invalid(format!("y_min {y_min} outside [0, 1)")));
                }
                InstanceModel::stochastic(Sampler::TwoUniformComplementTruncated { y_min })
                    .with_metadata(|m| {
                        m.l1 = Some(1.0);
                        m.y_min = Some(y_min);
                        m.notes = self.to_string();
                    })
            }
        };
        Ok(model)
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fixture::P1 { d, y } => write!(f, "P1({d},{y:e})"),
            Fixture::P2 { d } => write!(f, "P2({d})"),
            Fixture::AppendixK { eps } => write!(f, "AppendixK({eps})"),
            Fixture::TwoUniformComplement => f.write_str("TwoUniformComplement"),
            Fixture::TwoUniformComplementTruncated { y_min } => {
                write!(f, "TwoUniformComplementTruncated({y_min})")
            }
        }
    }
}

impl FromStr for Fixture {
    type Err = Error;

    /// Accepts `Name` or `Name(arg, ...)`; missing arguments take the catalogue defaults.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s
                    .strip_suffix(')')
                    .ok_or_else(|| Error::UnknownFixture(s.to_string()))?;
                (&s[..open], &close[open + 1..])
            }
            None => (s, ""),
        };
        let args: Vec<f64> = args
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(|a| a.parse::<f64>().map_err(|_| Error::UnknownFixture(s.to_string())))
            .collect::<Result<_>>()?;
        let arg = |i: usize, default: f64| args.get(i).copied().unwrap_or(default);
        let fixture = match name.trim() {
            "P1" if args.len() <= 2 => Fixture::P1 { d: arg(0, 0.1), y: arg(1, 1e-14) },
            "P2" if args.len() <= 1 => Fixture::P2 { d: arg(0, 0.1) },
            "AppendixK" if args.len() <= 1 => Fixture::AppendixK { eps: arg(0, 0.1) },
            "TwoUniformComplement" if args.is_empty() => Fixture::TwoUniformComplement,
            "TwoUniformComplementTruncated" if args.len() <= 1 => {
                Fixture::TwoUniformComplementTruncated { y_min: arg(0, 0.05) }
            }
            _ => return Err(Error::UnknownFixture(s.to_string())),
        };
        Ok(fixture)
    }
}

/// Resolves a fixture name to its instance.
pub fn fixture(name: &str) -> Result<InstanceModel> {
    name.parse::<Fixture>()?.instance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line(xs: &[f64]) -> Vec<Solution> {
        let pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, 1.0 - x)).collect();
        crate::domain::solutions_from_points(&pts).unwrap()
    }

    #[test]
    fn d_dense_examples() {
        assert!(check_d_dense(&line(&[0.1, 0.15, 0.2, 0.25]), 0.05).is_ok());
        assert_eq!(check_d_dense(&line(&[0.1, 0.9]), 0.05), Err((0, 1)));
        let p1 = fixture("P1(0.1,1e-14)").unwrap();
        assert!(check_d_dense(p1.solutions().unwrap(), 0.1).is_ok());
    }

    #[test]
    fn d_dense_checks_both_orientations() {
        // 0.12 bridges 0.1 towards 0.9, but nothing sits within d of 0.9.
        assert!(check_d_dense(&line(&[0.1, 0.12, 0.9]), 0.05).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let sols = line(&[0.05, 0.3, 0.31, 0.8]);
        assert!(check_lipschitz(&sols, 1.0 - 1e-9, 1.0 + 1e-9).is_ok());
        let flat = crate::domain::solutions_from_points(&[(0.1, 0.5), (0.2, 0.5)]).unwrap();
        assert_eq!(check_lipschitz(&flat, 1e-6, 2.0), Err((0, 1)));
    }

    #[test]
    fn stochastic_lipschitz_examples() {
        assert!(check_stochastic_lipschitz(&Sampler::TwoUniformComplement, 1.0, 10_000, 1));
        assert!(!check_stochastic_lipschitz(&Sampler::IndependentUniform { k: 2 }, 1.0, 1_000, 1));
        assert!(check_stochastic_lipschitz(&Sampler::IndependentUniform { k: 1 }, 5.0, 100, 1));
    }

    #[test]
    fn chain_example_passes_checkers() {
        let p = ChainParams { k: 20, d: 0.02, l1: 0.9, l2: 1.1, y_min: 0.05, seed: 3 };
        let m = generate_deterministic_chain(p).unwrap();
        let s = m.solutions().unwrap();
        assert_eq!(s.len(), 20);
        assert!(check_d_dense(s, 0.02).is_ok());
        assert!(check_lipschitz(s, 0.9, 1.1).is_ok());
        assert!(s.iter().all(|s| s.y() > 0.05));
        m.validate().unwrap();
    }

    #[test]
    fn chain_edge_cases() {
        let one = ChainParams { k: 1, d: 0.02, l1: 0.9, l2: 1.1, y_min: 0.05, seed: 0 };
        let m = generate_deterministic_chain(one).unwrap();
        m.validate().unwrap();
        let too_long = ChainParams { k: 60, d: 0.02, ..one };
        assert!(matches!(
            generate_deterministic_chain(too_long),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn fixture_contents() {
        let p1 = fixture("P1(0.1, 1e-14)").unwrap();
        let s = p1.solutions().unwrap();
        assert_eq!((s[0].x(), s[0].y()), (0.1, 1.0));
        assert_eq!((s[1].x(), s[1].y()), (0.2, 1e-14));
        let k = fixture("AppendixK(0.1)").unwrap();
        let s = k.solutions().unwrap();
        assert_eq!((s[0].x(), s[0].y(), s[1].x(), s[1].y()), (0.5, 1.0, 1.0, 0.1));
        assert_eq!(fixture("P2").unwrap().k(), 1);
        assert!(matches!(fixture("P3"), Err(Error::UnknownFixture(_))));
        assert!(matches!(fixture("TwoUniformComplement(3)"), Err(Error::UnknownFixture(_))));
    }

    #[test]
    fn analytic_curve_endpoints_and_optimum() {
        let s = Sampler::TwoUniformComplement;
        assert!((s.analytic_f(0.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(s.analytic_f(1.0).unwrap().abs() < 1e-15);
        let (ts, fs) = s.analytic_optimum().unwrap();
        assert!((ts - 0.41421356).abs() < 1e-8);
        assert!((fs - 0.55228475).abs() < 1e-8);
        assert!((s.analytic_f(ts).unwrap() - fs).abs() < 1e-15);
        // f''(tau*) = -2 - 2 tau* < 0
        let h = 1e-4;
        let second = (s.analytic_f(ts + h).unwrap() - 2.0 * fs + s.analytic_f(ts - h).unwrap()) / (h * h);
        assert!((second - (-2.0 - 2.0 * ts)).abs() < 1e-4);
    }

    #[test]
    fn instance_json_roundtrip_shape() {
        let m = fixture("P2(0.1)").unwrap();
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["kind"], "deterministic");
        assert_eq!(v["solutions"][0]["x"], 0.1);
        assert_eq!(v["metadata"]["K"], 1);
        let s = fixture("TwoUniformComplementTruncated(0.05)").unwrap();
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["kind"], "stochastic");
        assert_eq!(v["sampler"]["name"], "two_uniform_complement_truncated");
        assert_eq!(v["sampler"]["params"]["y_min"], 0.05);
        let back: InstanceModel = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn realizations_are_uncorrelated_across_rounds() {
        let model = fixture("TwoUniformComplement").unwrap();
        let mut r = model.realizer(ChaCha8Rng::seed_from_u64(11));
        let xs: Vec<f64> = (1..=100_000).map(|t| r.realize(t).solutions[0].x()).collect();
        let n = (xs.len() - 1) as f64;
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        let cov = xs.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / n;
        assert!((cov / var).abs() < 0.01, "lag-1 correlation {}", cov / var);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn generated_chains_pass_their_checkers(
            k in 1usize..40, d in 0.002f64..0.02, l1 in 0.5f64..1.0, widen in 0.0f64..0.4, seed in any::<u64>()
        ) {
            let l2 = l1 + widen;
            let p = ChainParams { k, d, l1, l2, y_min: 0.05, seed };
            let m = generate_deterministic_chain(p).unwrap();
            let s = m.solutions().unwrap();
            prop_assert!(check_d_dense(s, d).is_ok());
            prop_assert!(check_lipschitz(s, l1, l2).is_ok());
            prop_assert!(s.iter().all(|s| s.y() > 0.05));
        }
    }
}
