//! Principal-side mechanisms.
//!
//! Every mechanism is a state machine: [`Mechanism::announce`] emits the
//! eligible set for round `t` before the agent moves, and
//! [`Mechanism::observe`] delivers a finished round's record. The engine
//! delivers each record right after its round; [`DelayWrapper`] holds records
//! back so the inner mechanism only ever sees rounds `<= t - D` when deciding
//! round `t`.

mod bandit;
mod config;
mod delay;
mod search;

pub use bandit::{
    arm_grid_size, confidence_bounds, stochastic_strategic, successive_elimination_delayed,
    StochasticStrategicParams, SuccessiveElimination, UcbThreshold,
};
pub use config::{EpsilonSchedule, MechanismConfig};
pub use delay::{delay_for, DelayConfig, DelayWrapper};
pub use search::{
    delayed_iterative_search, iterative_search, DelayedBinarySearch, DelayedIterativeSearch,
    DelayedProgressiveSearch,
};

use serde::Serialize;

use crate::domain::{EligibleSet, RoundRecord};

pub trait Mechanism: Send {
    /// Short description, shown to agents that know the committed mechanism.
    fn name(&self) -> String;

    /// Eligible set for `round`. Called exactly once per round, in order.
    fn announce(&mut self, round: usize) -> EligibleSet;

    /// Feedback for a finished round. Records arrive in round order.
    fn observe(&mut self, record: &RoundRecord);

    fn snapshot(&self) -> MechanismSnapshot;

    fn clone_box(&self) -> Box<dyn Mechanism>;
}

impl Clone for Box<dyn Mechanism> {
    fn clone(&self) -> Self {
        self.clone_box()
    }
}

/// Per-arm statistics of the threshold bandits.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ArmStats {
    pub thresholds: Vec<f64>,
    /// Times each arm was announced.
    pub pulls: Vec<u64>,
    /// Feedback actually delivered per arm.
    pub observed: Vec<u64>,
    pub means: Vec<f64>,
    pub active: Vec<bool>,
    /// Arms in elimination order.
    pub eliminated: Vec<usize>,
}

/// Inspectable internal state, for diagnostics and invariant tests.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MechanismSnapshot {
    pub name: String,
    pub tau: Option<f64>,
    pub interval: Option<(f64, f64)>,
    pub committed: bool,
    pub delay: Option<usize>,
    pub pending_feedback: usize,
    pub arms: Option<ArmStats>,
}

/// Outcome of a single probe round as the principal sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum ProbeResult {
    Proposed { x: f64, y: f64 },
    Nothing,
}

impl ProbeResult {
    pub(crate) fn from_record(record: &RoundRecord) -> Self {
        if record.accepted {
            ProbeResult::Proposed {
                x: record.principal_utility,
                y: record.agent_utility_raw,
            }
        } else {
            ProbeResult::Nothing
        }
    }
}

/// Waits for the record of one specific round.
#[derive(Debug, Clone, Default)]
pub(crate) struct ProbeSlot {
    round: Option<usize>,
    result: Option<ProbeResult>,
}

impl ProbeSlot {
    pub(crate) fn arm(&mut self, round: usize) {
        self.round = Some(round);
        self.result = None;
    }

    pub(crate) fn observe(&mut self, record: &RoundRecord) {
        if self.round == Some(record.round) && self.result.is_none() {
            self.result = Some(ProbeResult::from_record(record));
        }
    }

    pub(crate) fn is_armed(&self) -> bool {
        self.round.is_some()
    }

    /// Consumes the result once it has arrived.
    pub(crate) fn take(&mut self) -> Option<ProbeResult> {
        let r = self.result.take();
        if r.is_some() {
            self.round = None;
        }
        r
    }

    pub(crate) fn pending(&self) -> usize {
        usize::from(self.round.is_some() && self.result.is_none())
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::*;
    use crate::agents::best_response;
    use crate::domain::{Proposal, Realization, RoundRecord};
    use crate::instances::InstanceModel;

    /// Runs a mechanism against the myopic agent on a deterministic instance.
    pub(crate) fn run_myopic(
        mech: &mut dyn Mechanism,
        instance: &InstanceModel,
        rounds: usize,
    ) -> Vec<RoundRecord> {
        let sols = instance.solutions().expect("deterministic").to_vec();
        let mut out = Vec::with_capacity(rounds);
        for t in 1..=rounds {
            let r = Realization::new(t, sols.clone());
            let set = mech.announce(t);
            let p: Proposal = best_response(&r, &set);
            let rec = RoundRecord::new(t, set, &r, p, 0.9).unwrap();
            mech.observe(&rec);
            out.push(rec);
        }
        out
    }
}
