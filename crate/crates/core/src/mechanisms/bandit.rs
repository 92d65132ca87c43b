//! Threshold bandits for stochastic instances. Arm `i` (0-based) announces
//! `E_{(i+1)/Q}`; its reward is the round's realized principal utility.

use std::collections::VecDeque;

use super::delay::{delay_for, DelayWrapper};
use super::{ArmStats, Mechanism, MechanismSnapshot};
use crate::domain::{EligibleSet, RoundRecord};
use crate::error::{invalid, Result};

/// `Q = ceil((T / ln T)^(1/4))`.
pub fn arm_grid_size(horizon: usize) -> Result<usize> {
    if horizon < 2 {
        return Err(invalid(format!("horizon T must be at least 2, got {horizon}")));
    }
    let t = horizon as f64;
    Ok(((t / t.ln()).powf(0.25).ceil() as usize).max(1))
}

fn grid(q: usize) -> Vec<f64> {
    (1..=q).map(|i| i as f64 / q as f64).collect()
}

/// Running per-arm statistics plus the (round, arm) log used to route feedback.
#[derive(Debug, Clone)]
struct Arms {
    thresholds: Vec<f64>,
    pulls: Vec<u64>,
    observed: Vec<u64>,
    sums: Vec<f64>,
    in_flight: VecDeque<(usize, usize)>,
}

impl Arms {
    fn new(q: usize) -> Self {
        Arms {
            thresholds: grid(q),
            pulls: vec![0; q],
            observed: vec![0; q],
            sums: vec![0.0; q],
            in_flight: VecDeque::new(),
        }
    }

    fn pull(&mut self, round: usize, arm: usize) -> EligibleSet {
        self.pulls[arm] += 1;
        self.in_flight.push_back((round, arm));
        EligibleSet::ThresholdInclusive(self.thresholds[arm])
    }

    /// Returns the arm the record belonged to, if it was one of ours.
    fn observe(&mut self, record: &RoundRecord) -> Option<usize> {
        while let Some(&(round, arm)) = self.in_flight.front() {
            if round < record.round {
                self.in_flight.pop_front();
                continue;
            }
            if round == record.round {
                self.in_flight.pop_front();
                self.observed[arm] += 1;
                self.sums[arm] += record.principal_utility;
                return Some(arm);
            }
            break;
        }
        None
    }

    fn mean(&self, arm: usize) -> f64 {
        if self.observed[arm] == 0 {
            0.0
        } else {
            self.sums[arm] / self.observed[arm] as f64
        }
    }

    fn stats(&self, active: Vec<bool>, eliminated: Vec<usize>) -> ArmStats {
        ArmStats {
            thresholds: self.thresholds.clone(),
            pulls: self.pulls.clone(),
            observed: self.observed.clone(),
            means: (0..self.thresholds.len()).map(|i| self.mean(i)).collect(),
            active,
            eliminated,
        }
    }
}

/// UCB1 over the threshold grid.
#[derive(Debug, Clone)]
pub struct UcbThreshold {
    arms: Arms,
    bonus: bool,
}

impl UcbThreshold {
    /// Grid size from the horizon.
    pub fn new(horizon: usize) -> Result<Self> {
        Ok(Self::with_arms(arm_grid_size(horizon)?))
    }

    pub fn with_arms(q: usize) -> Self {
        UcbThreshold {
            arms: Arms::new(q.max(1)),
            bonus: true,
        }
    }

    /// Greedy on empirical means; used as a negative control.
    pub fn without_bonus(mut self) -> Self {
        self.bonus = false;
        self
    }

    pub fn arm_count(&self) -> usize {
        self.arms.thresholds.len()
    }

    fn index(&self, arm: usize, round: usize) -> f64 {
        let n = self.arms.observed[arm].max(1) as f64;
        let bonus = if self.bonus {
            (2.0 * (round as f64).ln() / n).sqrt()
        } else {
            0.0
        };
        self.arms.mean(arm) + bonus
    }
}

impl Mechanism for UcbThreshold {
    fn name(&self) -> String {
        format!("ucb_threshold(Q={})", self.arm_count())
    }

    fn announce(&mut self, round: usize) -> EligibleSet {
        let arm = match self.arms.pulls.iter().position(|&p| p == 0) {
            Some(first_unpulled) => first_unpulled,
            None => {
                let mut best = 0;
                let mut best_index = self.index(0, round);
                for i in 1..self.arm_count() {
                    let v = self.index(i, round);
                    if v > best_index {
                        best = i;
                        best_index = v;
                    }
                }
                best
            }
        };
        self.arms.pull(round, arm)
    }

    fn observe(&mut self, record: &RoundRecord) {
        self.arms.observe(record);
    }

    fn snapshot(&self) -> MechanismSnapshot {
        MechanismSnapshot {
            name: self.name(),
            pending_feedback: self.arms.in_flight.len(),
            arms: Some(self.arms.stats(vec![true; self.arm_count()], vec![])),
            ..MechanismSnapshot::default()
        }
    }

    fn clone_box(&self) -> Box<dyn Mechanism> {
        Box::new(self.clone())
    }
}

/// `(LCB, UCB) = mean -/+ (sqrt(2 ln T / max(n, 1)) + delta)`.
pub fn confidence_bounds(mean: f64, n: u64, horizon: usize, delta: f64) -> (f64, f64) {
    let width = (2.0 * (horizon as f64).ln() / n.max(1) as f64).sqrt() + delta;
    (mean - width, mean + width)
}

/// Successive elimination with perturbation slack `delta`.
///
/// Arms in the active set are pulled round-robin. After every full sweep the
/// active set is pruned using whatever feedback has been delivered so far; wrap
/// in a [`DelayWrapper`] to restrict that to rounds `<= t - D`.
#[derive(Debug, Clone)]
pub struct SuccessiveElimination {
    arms: Arms,
    horizon: usize,
    delta: f64,
    active: Vec<bool>,
    eliminated: Vec<usize>,
    sweep: VecDeque<usize>,
}

impl SuccessiveElimination {
    pub fn new(q: usize, delta: f64, horizon: usize) -> Result<Self> {
        if q == 0 {
            return Err(invalid("Q must be at least 1"));
        }
        if !(delta >= 0.0) {
            return Err(invalid(format!("delta must be non-negative, got {delta}")));
        }
        if horizon == 0 {
            return Err(invalid("horizon T must be at least 1"));
        }
        Ok(SuccessiveElimination {
            arms: Arms::new(q),
            horizon,
            delta,
            active: vec![true; q],
            eliminated: Vec::new(),
            sweep: VecDeque::new(),
        })
    }

    pub fn active_arms(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&i| self.active[i]).collect()
    }

    pub fn eliminated(&self) -> &[usize] {
        &self.eliminated
    }

    fn eliminate(&mut self) {
        if self.arms.observed.iter().all(|&n| n == 0) {
            return;
        }
        let bounds: Vec<(usize, f64, f64)> = self
            .active_arms()
            .into_iter()
            .map(|i| {
                let (lcb, ucb) =
                    confidence_bounds(self.arms.mean(i), self.arms.observed[i], self.horizon, self.delta);
                (i, lcb, ucb)
            })
            .collect();
        let best_lcb = bounds.iter().map(|b| b.1).fold(f64::NEG_INFINITY, f64::max);
        for &(i, _, ucb) in &bounds {
            if ucb < best_lcb {
                self.active[i] = false;
                self.eliminated.push(i);
            }
        }
    }
}

impl Mechanism for SuccessiveElimination {
    fn name(&self) -> String {
        format!(
            "successive_elimination(Q={}, delta={})",
            self.active.len(),
            self.delta
        )
    }

    fn announce(&mut self, round: usize) -> EligibleSet {
        if self.sweep.is_empty() {
            if round > 1 {
                self.eliminate();
            }
            self.sweep = self.active_arms().into();
        }
        let arm = self.sweep.pop_front().expect("active set is never empty");
        self.arms.pull(round, arm)
    }

    fn observe(&mut self, record: &RoundRecord) {
        self.arms.observe(record);
    }

    fn snapshot(&self) -> MechanismSnapshot {
        MechanismSnapshot {
            name: self.name(),
            pending_feedback: self.arms.in_flight.len(),
            arms: Some(self.arms.stats(self.active.clone(), self.eliminated.clone())),
            ..MechanismSnapshot::default()
        }
    }

    fn clone_box(&self) -> Box<dyn Mechanism> {
        Box::new(self.clone())
    }
}

pub fn successive_elimination_delayed(
    q: usize,
    delay: usize,
    delta: f64,
    horizon: usize,
) -> Result<DelayWrapper<SuccessiveElimination>> {
    Ok(DelayWrapper::new(SuccessiveElimination::new(q, delta, horizon)?, delay))
}

/// Resolved parameters of the stochastic strategic mechanism.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticStrategicParams {
    pub eps: f64,
    pub delay: usize,
    pub delta: f64,
    pub arms: usize,
}

impl StochasticStrategicParams {
    /// `eps = min(L1/T, y_min)`, `D` from `(gamma, eps)`, `delta = eps/L1`, `Q` from `T`.
    pub fn derive(gamma: f64, l1: f64, y_min: f64, horizon: usize) -> Result<Self> {
        if !(l1 > 0.0) || !(y_min > 0.0) {
            return Err(invalid(format!("L1 and y_min must be positive (got {l1}, {y_min})")));
        }
        let arms = arm_grid_size(horizon)?;
        let eps = (l1 / horizon as f64).min(y_min);
        Ok(StochasticStrategicParams {
            eps,
            delay: delay_for(gamma, eps)?,
            delta: eps / l1,
            arms,
        })
    }
}

pub fn stochastic_strategic(
    gamma: f64,
    l1: f64,
    y_min: f64,
    horizon: usize,
) -> Result<DelayWrapper<SuccessiveElimination>> {
    let p = StochasticStrategicParams::derive(gamma, l1, y_min, horizon)?;
    successive_elimination_delayed(p.arms, p.delay, p.delta, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{solutions_from_points, Proposal, Realization};

    #[test]
    fn grid_size_examples() {
        assert_eq!(arm_grid_size(10_000).unwrap(), 6);
        assert!(arm_grid_size(1).is_err());
        let u = UcbThreshold::new(10_000).unwrap();
        assert_eq!(u.arms.thresholds, vec![1.0 / 6.0, 2.0 / 6.0, 0.5, 4.0 / 6.0, 5.0 / 6.0, 1.0]);
    }

    #[test]
    fn confidence_bound_example() {
        let (lcb, _) = confidence_bounds(0.5, 100, 10_000, 0.01);
        assert!((lcb - 0.0608).abs() < 5e-5, "{lcb}");
    }

    #[test]
    fn stochastic_strategic_params_example() {
        let p = StochasticStrategicParams::derive(0.9, 1.0, 0.05, 10_000).unwrap();
        assert_eq!(p.eps, 1e-4);
        assert_eq!(p.delay, 116);
        assert_eq!(p.delta, 1e-4);
        assert_eq!(p.arms, 6);
        let big = StochasticStrategicParams::derive(0.9, 1e9, 0.05, 10_000).unwrap();
        assert_eq!(big.eps, 0.05);
    }

    /// Bernoulli-free driver: reward is a fixed function of the announced threshold.
    fn drive(m: &mut dyn Mechanism, rounds: usize, reward: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut taus = Vec::new();
        for t in 1..=rounds {
            let set = m.announce(t);
            let tau = set.threshold().unwrap();
            let x = reward(tau);
            let sols = solutions_from_points(&[(x, 0.5)]).unwrap();
            let r = Realization::new(t, sols);
            let p = if x >= tau { Proposal::Index(0) } else { Proposal::Null };
            m.observe(&RoundRecord::new(t, set, &r, p, 0.9).unwrap());
            taus.push(tau);
        }
        taus
    }

    #[test]
    fn ucb_converges_on_constant_rewards() {
        let mut u = UcbThreshold::with_arms(4);
        // arm 0.5 pays 0.6, the rest pay their threshold minus a gap
        let taus = drive(&mut u, 5000, |tau| if tau == 0.5 { 0.6 } else { 0.0 });
        assert_eq!(&taus[..4], &[0.25, 0.5, 0.75, 1.0]);
        let s = u.snapshot().arms.unwrap();
        assert_eq!(s.pulls.iter().sum::<u64>(), 5000);
        assert!(s.pulls[1] > 4800, "{:?}", s.pulls);
    }

    #[test]
    fn se_eliminates_bad_arm_only() {
        let mut se = SuccessiveElimination::new(2, 0.0, 10_000).unwrap();
        drive(&mut se, 2000, |tau| if tau == 0.5 { 0.9 } else { 0.1 });
        assert_eq!(se.eliminated(), &[1]);
        assert_eq!(se.active_arms(), vec![0]);
        let s = se.snapshot().arms.unwrap();
        assert!(s.pulls[1] < 150, "{:?}", s.pulls);
    }

    #[test]
    fn se_with_unit_delta_never_eliminates() {
        let mut se = SuccessiveElimination::new(3, 1.0, 10_000).unwrap();
        drive(&mut se, 3000, |tau| if tau == 1.0 { 1.0 } else { 0.0 });
        assert!(se.eliminated().is_empty());
    }

    #[test]
    fn se_elimination_is_monotone_under_delay() {
        let mut se = successive_elimination_delayed(5, 7, 0.0, 10_000).unwrap();
        let mut prev: Vec<bool> = vec![true; 5];
        for t in 1..=3000 {
            let set = se.announce(t);
            let tau = set.threshold().unwrap();
            let x = (1.0 - (tau - 0.6).abs()).clamp(0.0, 1.0);
            let r = Realization::new(t, solutions_from_points(&[(x, 0.5)]).unwrap());
            let p = if x >= tau { Proposal::Index(0) } else { Proposal::Null };
            se.observe(&RoundRecord::new(t, set, &r, p, 0.9).unwrap());
            let active = se.snapshot().arms.unwrap().active;
            for i in 0..5 {
                assert!(prev[i] || !active[i]);
            }
            prev = active;
        }
    }
}
