use crate::domain::{discount, EligibleSet, Proposal, Realization, RoundRecord, Solution};
use crate::error::{invalid, Error, Result};
use crate::mechanisms::Mechanism;

use super::{AgentObservation, AgentPolicy};

pub const MAX_LOOKAHEAD_HORIZON: usize = 12;
pub const DEFAULT_NODE_LIMIT: u64 = 10_000_000;

/// Optimal proposal sequence against a mechanism on a deterministic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LookaheadPlan {
    pub proposals: Vec<Proposal>,
    /// Eligible set announced at each round along the plan.
    pub announced: Vec<EligibleSet>,
    /// `sum_t gamma^(t-1) y_t` along the plan.
    pub value: f64,
    pub nodes: u64,
}

struct Search<'a> {
    realization: Realization,
    solutions: &'a [Solution],
    gamma: f64,
    horizon: usize,
    limit: u64,
    nodes: u64,
}

impl Search<'_> {
    /// Best (value, plan) from `round` on, with plans stored in reverse.
    fn solve(&mut self, mech: &dyn Mechanism, round: usize) -> Result<(f64, Vec<(Proposal, EligibleSet)>)> {
        if round > self.horizon {
            return Ok((0.0, Vec::new()));
        }
        let mut announcer = mech.clone_box();
        let set = announcer.announce(round);
        let choices = (0..self.solutions.len()).map(Proposal::Index).chain([Proposal::Null]);
        let mut best: Option<(f64, Vec<(Proposal, EligibleSet)>)> = None;
        for p in choices {
            self.nodes += 1;
            if self.nodes > self.limit {
                return Err(Error::BudgetExceeded { limit: self.limit });
            }
            let mut realization = self.realization.clone();
            realization.round = round;
            let record = RoundRecord::new(round, set.clone(), &realization, p, self.gamma)?;
            let mut next = announcer.clone_box();
            next.observe(&record);
            let (rest, mut plan) = self.solve(next.as_ref(), round + 1)?;
            let value = record.agent_utility_discounted + rest;
            if best.as_ref().map_or(true, |(b, _)| value > *b) {
                plan.push((p, set.clone()));
                best = Some((value, plan));
            }
        }
        Ok(best.expect("at least the Null choice"))
    }
}

/// Exhaustive search over all `(K+1)^horizon` proposal sequences.
///
/// The mechanism is cloned at every node, so its current state is the root.
/// Ties keep the first sequence found, with solutions tried before Null.
pub fn lookahead(
    solutions: &[Solution],
    mechanism: &dyn Mechanism,
    gamma: f64,
    horizon: usize,
    node_limit: u64,
) -> Result<LookaheadPlan> {
    if horizon > MAX_LOOKAHEAD_HORIZON {
        return Err(invalid(format!(
            "lookahead horizon {horizon} exceeds {MAX_LOOKAHEAD_HORIZON}"
        )));
    }
    let mut search = Search {
        realization: Realization::new(1, solutions.to_vec()),
        solutions,
        gamma,
        horizon,
        limit: node_limit,
        nodes: 0,
    };
    let (value, mut plan) = search.solve(mechanism, 1)?;
    plan.reverse();
    let (proposals, announced) = plan.into_iter().unzip();
    Ok(LookaheadPlan {
        proposals,
        announced,
        value,
        nodes: search.nodes,
    })
}

/// Discounted agent utility of `policy` over `horizon` rounds, plus the transcript.
pub fn evaluate_policy(
    solutions: &[Solution],
    mechanism: &dyn Mechanism,
    policy: &mut dyn AgentPolicy,
    gamma: f64,
    horizon: usize,
) -> Result<(f64, Vec<RoundRecord>)> {
    let mut mech = mechanism.clone_box();
    let mut records: Vec<RoundRecord> = Vec::with_capacity(horizon);
    let mut value = 0.0;
    let name = mech.name();
    for t in 1..=horizon {
        let realization = Realization::new(t, solutions.to_vec());
        let set = mech.announce(t);
        let p = policy.propose(&AgentObservation {
            round: t,
            realization: &realization,
            eligible: &set,
            history: &records,
            mechanism: Some(&name),
        });
        let rec = RoundRecord::new(t, set, &realization, p, gamma)?;
        value += discount(gamma, t) * rec.agent_utility_raw;
        mech.observe(&rec);
        records.push(rec);
    }
    Ok((value, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Hiding, HidingKind, Myopic};
    use crate::domain::solutions_from_points;
    use crate::mechanisms::{iterative_search, DelayWrapper};

    #[test]
    fn single_solution_proposes_whenever_eligible() {
        let sols = solutions_from_points(&[(0.4, 0.6)]).unwrap();
        let plan = lookahead(&sols, &iterative_search(), 0.9, 8, DEFAULT_NODE_LIMIT).unwrap();
        for (p, set) in plan.proposals.iter().zip(&plan.announced) {
            if set.contains(&sols[0]) {
                assert_eq!(*p, Proposal::Index(0));
            }
        }
    }

    #[test]
    fn p1_hiding_beats_revealing_on_greedy_search() {
        let sols = solutions_from_points(&[(0.1, 1.0), (0.2, 1e-14)]).unwrap();
        let mech = iterative_search();
        let plan = lookahead(&sols, &mech, 0.9, 8, DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(plan.nodes, (3u64.pow(9) - 3) / 2);
        assert!(!plan.proposals.contains(&Proposal::Index(1)));
        let (hide, _) = evaluate_policy(&sols, &mech, &mut Hiding::new(HidingKind::P1, 0.9, 0), 0.9, 8).unwrap();
        let (reveal, _) = evaluate_policy(&sols, &mech, &mut Myopic, 0.9, 8).unwrap();
        assert!(hide > reveal);
        assert!((plan.value - hide).abs() < 1e-12);
    }

    #[test]
    fn node_budget_is_enforced() {
        let sols = solutions_from_points(&[(0.1, 1.0), (0.2, 0.5), (0.3, 0.2)]).unwrap();
        let err = lookahead(&sols, &iterative_search(), 0.9, 10, 1000).unwrap_err();
        assert!(matches!(err, Error::BudgetExceeded { limit: 1000 }));
        assert!(lookahead(&sols, &iterative_search(), 0.9, 13, DEFAULT_NODE_LIMIT).is_err());
    }

    #[test]
    fn works_through_boxed_wrappers() {
        let sols = solutions_from_points(&[(0.1, 1.0), (0.2, 0.3)]).unwrap();
        let mech = DelayWrapper::new(iterative_search(), 2);
        let plan = lookahead(&sols, &mech, 0.5, 6, DEFAULT_NODE_LIMIT).unwrap();
        assert_eq!(plan.proposals.len(), 6);
    }
}
