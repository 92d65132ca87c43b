//! Threshold searches for deterministic instances.

use super::delay::delay_for;
use super::{EpsilonSchedule, Mechanism, MechanismSnapshot, ProbeResult, ProbeSlot};
use crate::domain::{EligibleSet, RoundRecord};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum CyclePhase {
    Probe,
    Block { remaining: usize },
    Committed,
}

/// Iterative improvement with a delay block after every probe.
///
/// Each cycle announces `E^>_tau` once (the probe), then `E^>_tau` for `D` more
/// rounds, and only then moves `tau` to the proposed solution's `x`. When a
/// probe draws no proposal the mechanism commits to `E_tau` for good. With
/// `D = 0` this is the plain iterative search.
#[derive(Debug, Clone)]
pub struct DelayedIterativeSearch {
    tau: f64,
    delay: usize,
    phase: CyclePhase,
    probe: ProbeSlot,
    label: &'static str,
}

/// Iterative search for the myopic setting: tighten a strict threshold to each
/// proposal until nothing is proposed, then accept at that threshold forever.
pub fn iterative_search() -> DelayedIterativeSearch {
    DelayedIterativeSearch {
        label: "iterative_search",
        ..DelayedIterativeSearch::with_delay(0)
    }
}

/// Iterative search with `D = ceil(T_gamma ln(T_gamma / y_min))`.
pub fn delayed_iterative_search(gamma: f64, y_min: f64) -> Result<DelayedIterativeSearch> {
    if !(y_min > 0.0 && y_min <= 1.0) {
        return Err(invalid(format!("y_min must lie in (0, 1], got {y_min}")));
    }
    Ok(DelayedIterativeSearch::with_delay(delay_for(gamma, y_min)?))
}

impl DelayedIterativeSearch {
    pub fn with_delay(delay: usize) -> Self {
        DelayedIterativeSearch {
            tau: 0.0,
            delay,
            phase: CyclePhase::Probe,
            probe: ProbeSlot::default(),
            label: "delayed_iterative_search",
        }
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Mechanism for DelayedIterativeSearch {
    fn name(&self) -> String {
        format!("{}(D={})", self.label, self.delay)
    }

    fn announce(&mut self, round: usize) -> EligibleSet {
        loop {
            match self.phase {
                CyclePhase::Committed => return EligibleSet::ThresholdInclusive(self.tau),
                CyclePhase::Probe => {
                    self.probe.arm(round);
                    self.phase = CyclePhase::Block { remaining: self.delay };
                    return EligibleSet::ThresholdStrict(self.tau);
                }
                CyclePhase::Block { remaining } if remaining > 0 => {
                    self.phase = CyclePhase::Block { remaining: remaining - 1 };
                    return EligibleSet::ThresholdStrict(self.tau);
                }
                CyclePhase::Block { .. } => match self.probe.take() {
                    Some(ProbeResult::Proposed { x, .. }) => {
                        self.tau = x;
                        self.phase = CyclePhase::Probe;
                    }
                    Some(ProbeResult::Nothing) => self.phase = CyclePhase::Committed,
                    // probe feedback still in flight
                    None => return EligibleSet::ThresholdStrict(self.tau),
                },
            }
        }
    }

    fn observe(&mut self, record: &RoundRecord) {
        self.probe.observe(record);
    }

    fn snapshot(&self) -> MechanismSnapshot {
        MechanismSnapshot {
            name: self.name(),
            tau: Some(self.tau),
            committed: self.phase == CyclePhase::Committed,
            delay: Some(self.delay),
            pending_feedback: self.probe.pending(),
            ..MechanismSnapshot::default()
        }
    }

    fn clone_box(&self) -> Box<dyn Mechanism> {
        Box::new(self.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum IntervalPhase {
    /// Waiting for the first proposal under `AcceptAll`.
    Init,
    InitBlock { remaining: usize },
    Probe,
    /// Probe at `tau` issued; its outcome is read after `remaining` more rounds at `E_l`.
    Await { tau: f64, remaining: usize },
    Committed,
}

/// Bisection on `[l, r]` with strict probes and delay blocks at `E_l`.
#[derive(Debug, Clone)]
pub struct DelayedBinarySearch {
    l: f64,
    r: f64,
    resolution: f64,
    delay: usize,
    phase: IntervalPhase,
    probe: ProbeSlot,
}

impl DelayedBinarySearch {
    /// `D` from `(gamma, y_min)`, stopping once `r - l <= 1/T`.
    pub fn new(gamma: f64, y_min: f64, horizon: usize) -> Result<Self> {
        if !(y_min > 0.0 && y_min <= 1.0) {
            return Err(invalid(format!("y_min must lie in (0, 1], got {y_min}")));
        }
        Self::with_delay(delay_for(gamma, y_min)?, horizon)
    }

    pub fn with_delay(delay: usize, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("horizon T must be at least 1"));
        }
        Ok(DelayedBinarySearch {
            l: 0.0,
            r: 1.0,
            resolution: 1.0 / horizon as f64,
            delay,
            phase: IntervalPhase::Probe,
            probe: ProbeSlot::default(),
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.l, self.r)
    }

    pub fn delay(&self) -> usize {
        self.delay
    }
}

impl Mechanism for DelayedBinarySearch {
    fn name(&self) -> String {
        format!("delayed_binary_search(D={})", self.delay)
    }

    fn announce(&mut self, round: usize) -> EligibleSet {
        loop {
            match self.phase {
                IntervalPhase::Committed => return EligibleSet::ThresholdInclusive(self.l),
                IntervalPhase::Probe => {
                    if self.r - self.l > self.resolution {
                        let tau = (self.l + self.r) / 2.0;
                        self.probe.arm(round);
                        self.phase = IntervalPhase::Await { tau, remaining: self.delay };
                        return EligibleSet::ThresholdStrict(tau);
                    }
                    self.phase = IntervalPhase::Committed;
                }
                IntervalPhase::Await { tau, remaining } if remaining > 0 => {
                    self.phase = IntervalPhase::Await { tau, remaining: remaining - 1 };
                    return EligibleSet::ThresholdInclusive(self.l);
                }
                IntervalPhase::Await { tau, .. } => match self.probe.take() {
                    Some(ProbeResult::Proposed { .. }) => {
                        self.l = tau;
                        self.phase = IntervalPhase::Probe;
                    }
                    Some(ProbeResult::Nothing) => {
                        self.r = tau;
                        self.phase = IntervalPhase::Probe;
                    }
                    None => return EligibleSet::ThresholdInclusive(self.l),
                },
                IntervalPhase::Init | IntervalPhase::InitBlock { .. } => {
                    unreachable!("binary search starts at Probe")
                }
            }
        }
    }

    fn observe(&mut self, record: &RoundRecord) {
        self.probe.observe(record);
    }

    fn snapshot(&self) -> MechanismSnapshot {
        MechanismSnapshot {
            name: self.name(),
            tau: Some(self.l),
            interval: Some((self.l, self.r)),
            committed: self.phase == IntervalPhase::Committed,
            delay: Some(self.delay),
            pending_feedback: self.probe.pending(),
            ..MechanismSnapshot::default()
        }
    }

    fn clone_box(&self) -> Box<dyn Mechanism> {
        Box::new(self.clone())
    }
}

/// Interval search that uses d-density and (L1, L2)-Lipschitz continuity
/// instead of a known lower bound on the agent's utility.
///
/// Invariant: once initialised, `l` is the `x` of some proposed solution and
/// `y` is that solution's agent utility; `r` never exceeds `l + y / L1`.
#[derive(Debug, Clone)]
pub struct DelayedProgressiveSearch {
    gamma: f64,
    l1: f64,
    d: f64,
    beta: f64,
    alpha: f64,
    schedule: EpsilonSchedule,
    l: f64,
    r: f64,
    y: f64,
    eps: f64,
    delay: usize,
    phase: IntervalPhase,
    probe: ProbeSlot,
}

impl DelayedProgressiveSearch {
    pub fn new(
        gamma: f64,
        l1: f64,
        l2: f64,
        d: f64,
        beta: f64,
        schedule: EpsilonSchedule,
    ) -> Result<Self> {
        if !(beta >= 2.0) {
            return Err(invalid(format!("beta must be >= 2, got {beta}")));
        }
        if !(d > 0.0) || !(l1 > 0.0) || !(l2 > 0.0) {
            return Err(invalid("d, L1 and L2 must be positive"));
        }
        let alpha = l1 - (beta + 2.0) / (2.0 * beta) * l2;
        if !(alpha > 0.0) {
            return Err(invalid(format!(
                "alpha = L1 - (beta+2)/(2 beta) L2 = {alpha} must be positive"
            )));
        }
        // validates gamma early
        delay_for(gamma, alpha * beta * d)?;
        Ok(DelayedProgressiveSearch {
            gamma,
            l1,
            d,
            beta,
            alpha,
            schedule,
            l: 0.0,
            r: 1.0,
            y: 0.0,
            eps: 0.0,
            delay: 0,
            phase: IntervalPhase::Init,
            probe: ProbeSlot::default(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.l, self.r)
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    fn set_eps(&mut self, eps: f64) {
        self.eps = eps;
        self.delay = delay_for(self.gamma, eps).expect("parameters validated at construction");
    }
}

impl Mechanism for DelayedProgressiveSearch {
    fn name(&self) -> String {
        format!(
            "delayed_progressive_search(beta={}, alpha={:.6}, {:?})",
            self.beta, self.alpha, self.schedule
        )
    }

    fn announce(&mut self, round: usize) -> EligibleSet {
        loop {
            match self.phase {
                IntervalPhase::Init => {
                    match self.probe.take() {
                        Some(ProbeResult::Proposed { x, y }) => {
                            self.l = x;
                            self.y = y;
                            self.r = (self.l + y / self.l1).min(1.0);
                            if self.schedule == EpsilonSchedule::Fixed {
                                self.set_eps(self.alpha * self.beta * self.d);
                            }
                            // the result came from last round; wait out the delay
                            self.phase = IntervalPhase::InitBlock { remaining: self.delay.saturating_sub(1) };
                            continue;
                        }
                        Some(ProbeResult::Nothing) => {}
                        None if self.probe.is_armed() => return EligibleSet::AcceptAll,
                        None => {}
                    }
                    self.probe.arm(round);
                    return EligibleSet::AcceptAll;
                }
                IntervalPhase::InitBlock { remaining } if remaining > 0 => {
                    self.phase = IntervalPhase::InitBlock { remaining: remaining - 1 };
                    return EligibleSet::AcceptAll;
                }
                IntervalPhase::InitBlock { .. } => self.phase = IntervalPhase::Probe,
                IntervalPhase::Probe => {
                    if self.r - self.l > self.beta * self.d {
                        let tau = (self.l + self.r) / 2.0;
                        if self.schedule == EpsilonSchedule::Adaptive {
                            self.set_eps(self.alpha * (self.r - self.l));
                        }
                        self.probe.arm(round);
                        self.phase = IntervalPhase::Await { tau, remaining: self.delay };
                        return EligibleSet::ThresholdStrict(tau);
                    }
                    self.phase = IntervalPhase::Committed;
                }
                IntervalPhase::Await { tau, remaining } if remaining > 0 => {
                    self.phase = IntervalPhase::Await { tau, remaining: remaining - 1 };
                    return EligibleSet::ThresholdInclusive(self.l);
                }
                IntervalPhase::Await { tau, .. } => {
                    match self.probe.take() {
                        Some(ProbeResult::Proposed { x, y }) => {
                            self.l = x;
                            self.y = y;
                            // only reachable when the Lipschitz bound on r was violated
                            self.r = self.r.max(self.l);
                        }
                        Some(ProbeResult::Nothing) => self.r = tau,
                        None => return EligibleSet::ThresholdInclusive(self.l),
                    }
                    self.r = self.r.min(self.l + self.y / self.l1);
                    self.phase = IntervalPhase::Probe;
                }
                IntervalPhase::Committed => return EligibleSet::ThresholdInclusive(self.l),
            }
        }
    }

    fn observe(&mut self, record: &RoundRecord) {
        self.probe.observe(record);
    }

    fn snapshot(&self) -> MechanismSnapshot {
        let initialised = !matches!(self.phase, IntervalPhase::Init);
        MechanismSnapshot {
            name: self.name(),
            tau: Some(self.l),
            interval: initialised.then_some((self.l, self.r)),
            committed: self.phase == IntervalPhase::Committed,
            delay: Some(self.delay),
            pending_feedback: self.probe.pending(),
            ..MechanismSnapshot::default()
        }
    }

    fn clone_box(&self) -> Box<dyn Mechanism> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_deterministic_chain, ChainParams, InstanceModel};
    use crate::mechanisms::testing::run_myopic;

    fn strict(t: f64) -> EligibleSet {
        EligibleSet::ThresholdStrict(t)
    }
    fn incl(t: f64) -> EligibleSet {
        EligibleSet::ThresholdInclusive(t)
    }

    #[test]
    fn iterative_search_two_solution_trace() {
        let inst = InstanceModel::deterministic(&[(0.3, 0.9), (0.7, 0.5)]).unwrap();
        let recs = run_myopic(&mut iterative_search(), &inst, 100);
        let sets: Vec<_> = recs.iter().take(5).map(|r| r.eligible.clone()).collect();
        assert_eq!(sets, vec![strict(0.0), strict(0.3), strict(0.7), incl(0.7), incl(0.7)]);
        let total: f64 = recs.iter().map(|r| r.principal_utility).sum();
        assert!((100.0 * 0.7 - total - 1.1).abs() < 1e-9);
    }

    #[test]
    fn iterative_search_single_and_zero_solutions() {
        let inst = InstanceModel::deterministic(&[(0.5, 0.5)]).unwrap();
        let recs = run_myopic(&mut iterative_search(), &inst, 4);
        assert_eq!(recs[0].eligible, strict(0.0));
        assert_eq!(recs[0].principal_utility, 0.5);
        assert_eq!(recs[1].eligible, strict(0.5));
        assert!(!recs[1].accepted);
        assert_eq!(recs[2].eligible, incl(0.5));

        let zero = InstanceModel::deterministic(&[(0.0, 0.5)]).unwrap();
        let recs = run_myopic(&mut iterative_search(), &zero, 3);
        assert!(!recs[0].accepted);
        assert_eq!(recs[1].eligible, incl(0.0));
        assert!(recs[1].accepted && recs[2].accepted);
    }

    #[test]
    fn delayed_iterative_visits_same_thresholds_as_plain() {
        let inst = InstanceModel::deterministic(&[(0.3, 0.9), (0.5, 0.6), (0.7, 0.5)]).unwrap();
        let taus = |recs: &[RoundRecord]| {
            let mut v: Vec<f64> = recs.iter().filter_map(|r| r.eligible.threshold()).collect();
            v.dedup();
            v
        };
        let plain = run_myopic(&mut iterative_search(), &inst, 50);
        let delayed = run_myopic(&mut DelayedIterativeSearch::with_delay(4), &inst, 50);
        assert_eq!(taus(&plain), taus(&delayed));
        // probe, 4 block rounds, then the next probe
        assert_eq!(delayed[5].eligible, strict(0.3));
        assert_eq!(delayed[4].eligible, strict(0.0));
    }

    #[test]
    fn delayed_iterative_rejects_bad_y_min() {
        assert!(delayed_iterative_search(0.9, 0.0).is_err());
        assert_eq!(delayed_iterative_search(0.99, 0.01).unwrap().delay(), 922);
    }

    #[test]
    fn binary_search_halvings() {
        let inst = InstanceModel::deterministic(&[(0.73, 0.2)]).unwrap();
        let mut m = DelayedBinarySearch::with_delay(0, 8).unwrap();
        let recs = run_myopic(&mut m, &inst, 20);
        let probes = recs.iter().filter(|r| matches!(r.eligible, EligibleSet::ThresholdStrict(_))).count();
        assert_eq!(probes, 3);
        let (l, r) = m.interval();
        assert!(r - l <= 1.0 / 8.0);
        assert!(l <= 0.73 && 0.73 <= r);
    }

    #[test]
    fn binary_search_converges_within_resolution() {
        let inst = InstanceModel::deterministic(&[(0.73, 0.2), (0.4, 0.9)]).unwrap();
        let mut m = DelayedBinarySearch::with_delay(5, 1000).unwrap();
        run_myopic(&mut m, &inst, 500);
        let (l, _) = m.interval();
        assert!(l <= 0.73 && l >= 0.73 - 1e-3, "l = {l}");
        assert!(m.snapshot().committed);
    }

    #[test]
    fn binary_search_with_nothing_above_zero() {
        let inst = InstanceModel::deterministic(&[(0.0, 0.4)]).unwrap();
        let mut m = DelayedBinarySearch::with_delay(2, 64).unwrap();
        let recs = run_myopic(&mut m, &inst, 100);
        assert_eq!(m.interval().0, 0.0);
        assert_eq!(recs.last().unwrap().eligible, incl(0.0));
    }

    #[test]
    fn binary_search_interval_is_monotone() {
        let inst = InstanceModel::deterministic(&[(0.61, 0.3), (0.2, 0.8)]).unwrap();
        let mut m = DelayedBinarySearch::with_delay(3, 4096).unwrap();
        let sols = inst.solutions().unwrap().to_vec();
        let (mut pl, mut pr) = (0.0, 1.0);
        for t in 1..=200 {
            let r = crate::domain::Realization::new(t, sols.clone());
            let set = m.announce(t);
            let p = crate::agents::best_response(&r, &set);
            m.observe(&RoundRecord::new(t, set, &r, p, 0.9).unwrap());
            let (l, rr) = m.interval();
            assert!(l >= pl && rr <= pr && 0.0 <= l && l <= rr && rr <= 1.0);
            assert!(l <= 0.61 && 0.61 <= rr);
            (pl, pr) = (l, rr);
        }
    }

    #[test]
    fn progressive_alpha_and_validation() {
        let m = DelayedProgressiveSearch::new(0.9, 1.0, 1.2, 0.01, 4.0, EpsilonSchedule::Fixed).unwrap();
        assert!((m.alpha() - 0.1).abs() < 1e-12);
        assert!(DelayedProgressiveSearch::new(0.9, 1.0, 1.4, 0.01, 4.0, EpsilonSchedule::Fixed).is_err());
        assert!(DelayedProgressiveSearch::new(0.9, 1.0, 1.2, 0.01, 1.5, EpsilonSchedule::Fixed).is_err());
    }

    #[test]
    fn progressive_zero_agent_utility_commits_immediately() {
        let inst = InstanceModel::deterministic(&[(0.4, 0.0)]).unwrap();
        let mut m = DelayedProgressiveSearch::new(0.9, 1.0, 1.2, 0.01, 4.0, EpsilonSchedule::Fixed).unwrap();
        let recs = run_myopic(&mut m, &inst, 300);
        assert_eq!(m.interval(), (0.4, 0.4));
        assert!(!recs.iter().any(|r| matches!(r.eligible, EligibleSet::ThresholdStrict(_))));
        assert_eq!(recs.last().unwrap().eligible, incl(0.4));
    }

    #[test]
    fn progressive_finds_near_optimum_on_chain() {
        for schedule in [EpsilonSchedule::Fixed, EpsilonSchedule::Adaptive] {
            for seed in 0..5 {
                let p = ChainParams { k: 60, d: 0.01, l1: 1.0, l2: 1.2, y_min: 0.01, seed };
                let inst = generate_deterministic_chain(p).unwrap();
                let max_x = inst.max_x().unwrap();
                let mut m = DelayedProgressiveSearch::new(0.9, 1.0, 1.2, 0.01, 4.0, schedule).unwrap();
                let sols = inst.solutions().unwrap().to_vec();
                let proposed: Vec<f64> = {
                    let mut xs = vec![];
                    let mut prev = (0.0, 1.0);
                    for t in 1..=5000 {
                        let r = crate::domain::Realization::new(t, sols.clone());
                        let set = m.announce(t);
                        let pr = crate::agents::best_response(&r, &set);
                        let rec = RoundRecord::new(t, set, &r, pr, 0.9).unwrap();
                        if rec.accepted {
                            xs.push(rec.principal_utility);
                        }
                        m.observe(&rec);
                        if let Some((l, rr)) = m.snapshot().interval {
                            assert!(0.0 <= l && l <= rr && rr <= 1.0);
                            assert!(l >= prev.0 && (rr <= prev.1 || prev == (0.0, 1.0)));
                            assert!(xs.iter().any(|&x| x == l), "l must be a proposed x");
                            prev = (l, rr);
                        }
                    }
                    xs
                };
                assert!(!proposed.is_empty());
                let (l, _) = m.interval();
                assert!(max_x - l <= 0.04 + 1e-12, "{schedule:?} seed {seed}: gap {}", max_x - l);
            }
        }
    }
}
