//! Domain types shared by every other module: utilities, solutions,
//! per-round realizations, eligible sets, proposals and the round transcript.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when matching points of an [`EligibleSet::Explicit`] set.
pub const EXPLICIT_MATCH_TOLERANCE: f64 = 1e-12;

/// A utility value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Utility(f64);

impl Utility {
    pub const ZERO: Utility = Utility(0.0);
    pub const ONE: Utility = Utility(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Utility(value))
        } else {
            Err(Error::InvalidParameter(format!(
                "utility {value} outside [0, 1]"
            )))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Utility {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Utility::new(value)
    }
}

impl From<Utility> for f64 {
    fn from(u: Utility) -> f64 {
        u.0
    }
}

impl fmt::Display for Utility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One option of the agent: principal utility `x`, agent utility `y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    #[serde(default)]
    pub id: u32,
    pub x: Utility,
    pub y: Utility,
}

impl Solution {
    pub fn new(id: u32, x: f64, y: f64) -> Result<Self> {
        Ok(Solution {
            id,
            x: Utility::new(x)?,
            y: Utility::new(y)?,
        })
    }

    #[inline]
    pub fn x(&self) -> f64 {
        self.x.get()
    }

    #[inline]
    pub fn y(&self) -> f64 {
        self.y.get()
    }
}

/// Builds solutions with ids `0..n` from `(x, y)` pairs.
pub fn solutions_from_points(points: &[(f64, f64)]) -> Result<Vec<Solution>> {
    points
        .iter()
        .enumerate()
        .map(|(i, &(x, y))| Solution::new(i as u32, x, y))
        .collect()
}

/// The ex-post draw of every non-null solution for one round.
///
/// The null solution is implicit; proposing it is [`Proposal::Null`].
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub round: usize,
    pub solutions: Arc<[Solution]>,
}

impl Realization {
    pub fn new(round: usize, solutions: impl Into<Arc<[Solution]>>) -> Self {
        Realization {
            round,
            solutions: solutions.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn get(&self, proposal: Proposal) -> Option<&Solution> {
        match proposal {
            Proposal::Null => None,
            Proposal::Index(i) => self.solutions.get(i),
        }
    }
}

/// The principal's screening rule for one round.
#[derive(Debug, Clone, PartialEq)]
pub enum EligibleSet {
    /// `{a : X_a >= tau}`
    ThresholdInclusive(f64),
    /// `{a : X_a > tau}`
    ThresholdStrict(f64),
    AcceptAll,
    AcceptNone,
    /// A finite list of `(x, y)` points, matched within [`EXPLICIT_MATCH_TOLERANCE`].
    Explicit(Arc<[(f64, f64)]>),
}

impl EligibleSet {
    pub fn contains(&self, sol: &Solution) -> bool {
        is_eligible(self, sol)
    }

    /// The threshold value for threshold kinds (`AcceptAll` reports 0).
    pub fn threshold(&self) -> Option<f64> {
        match *self {
            EligibleSet::ThresholdInclusive(t) | EligibleSet::ThresholdStrict(t) => Some(t),
            EligibleSet::AcceptAll => Some(0.0),
            _ => None,
        }
    }

    /// Compact label used in trace files: `ge:0.7`, `gt:0.3`, `all`, `none`, `explicit:3`.
    pub fn label(&self) -> String {
        match self {
            EligibleSet::ThresholdInclusive(t) => format!("ge:{t}"),
            EligibleSet::ThresholdStrict(t) => format!("gt:{t}"),
            EligibleSet::AcceptAll => "all".to_string(),
            EligibleSet::AcceptNone => "none".to_string(),
            EligibleSet::Explicit(points) => format!("explicit:{}", points.len()),
        }
    }
}

impl fmt::Display for EligibleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The agent's submission: nothing, or one solution of the current realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Proposal {
    #[default]
    Null,
    Index(usize),
}

impl Proposal {
    pub fn is_null(self) -> bool {
        matches!(self, Proposal::Null)
    }
}

/// Membership test for an eligible set.
pub fn is_eligible(set: &EligibleSet, sol: &Solution) -> bool {
    let x = sol.x();
    match set {
        EligibleSet::ThresholdInclusive(tau) => x >= *tau,
        EligibleSet::ThresholdStrict(tau) => x > *tau,
        EligibleSet::AcceptAll => true,
        EligibleSet::AcceptNone => false,
        EligibleSet::Explicit(points) => points.iter().any(|&(px, py)| {
            (px - x).abs() <= EXPLICIT_MATCH_TOLERANCE
                && (py - sol.y()).abs() <= EXPLICIT_MATCH_TOLERANCE
        }),
    }
}

/// Resolved result of one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub accepted: bool,
    pub principal_utility: f64,
    pub agent_utility_raw: f64,
}

impl Outcome {
    pub const REJECTED: Outcome = Outcome {
        accepted: false,
        principal_utility: 0.0,
        agent_utility_raw: 0.0,
    };
}

/// Accepts the proposal iff it is non-null and eligible; otherwise both sides get 0.
pub fn round_outcome(
    set: &EligibleSet,
    realization: &Realization,
    proposal: Proposal,
) -> Result<Outcome> {
    match proposal {
        Proposal::Null => Ok(Outcome::REJECTED),
        Proposal::Index(i) => {
            let sol = realization
                .solutions
                .get(i)
                .ok_or(Error::InvalidProposal {
                    index: i,
                    len: realization.len(),
                })?;
            if is_eligible(set, sol) {
                Ok(Outcome {
                    accepted: true,
                    principal_utility: sol.x(),
                    agent_utility_raw: sol.y(),
                })
            } else {
                Ok(Outcome::REJECTED)
            }
        }
    }
}

/// One line of the game transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub eligible: EligibleSet,
    pub proposal: Proposal,
    /// Utilities of the proposed solution as observed by the principal, eligible or not.
    pub proposed: Option<(f64, f64)>,
    pub accepted: bool,
    pub principal_utility: f64,
    pub agent_utility_raw: f64,
    pub agent_utility_discounted: f64,
}

impl RoundRecord {
    pub fn new(
        round: usize,
        eligible: EligibleSet,
        realization: &Realization,
        proposal: Proposal,
        gamma: f64,
    ) -> Result<Self> {
        let outcome = round_outcome(&eligible, realization, proposal)?;
        let proposed = realization.get(proposal).map(|s| (s.x(), s.y()));
        Ok(RoundRecord {
            round,
            eligible,
            proposal,
            proposed,
            accepted: outcome.accepted,
            principal_utility: outcome.principal_utility,
            agent_utility_raw: outcome.agent_utility_raw,
            agent_utility_discounted: discount(gamma, round) * outcome.agent_utility_raw,
        })
    }
}

/// `gamma^(round - 1)`.
pub fn discount(gamma: f64, round: usize) -> f64 {
    gamma.powi(round.saturating_sub(1) as i32)
}

/// Ordered transcript; record `k` (1-based) has `round == k`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    records: Vec<RoundRecord>,
}

impl History {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        History {
            records: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, record: RoundRecord) -> Result<()> {
        let expected = self.records.len() + 1;
        if record.round != expected {
            return Err(Error::InvalidParameter(format!(
                "history out of order: expected round {expected}, got {}",
                record.round
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records with `round <= upto`.
    pub fn prefix(&self, upto: usize) -> &[RoundRecord] {
        &self.records[..upto.min(self.records.len())]
    }

    pub fn into_records(self) -> Vec<RoundRecord> {
        self.records
    }
}

impl TryFrom<Vec<RoundRecord>> for History {
    type Error = Error;

    fn try_from(records: Vec<RoundRecord>) -> Result<Self> {
        let mut h = History::with_capacity(records.len());
        for r in records {
            h.push(r)?;
        }
        Ok(h)
    }
}
