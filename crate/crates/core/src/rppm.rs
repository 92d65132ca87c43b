//! Repeated posted pricing with a fixed buyer value, and the reduction that
//! runs any pricer as a delegation mechanism.

use crate::domain::{EligibleSet, RoundRecord};
use crate::error::{invalid, Result};
use crate::mechanisms::{Mechanism, MechanismSnapshot};

pub trait Pricer: Send {
    fn name(&self) -> String;

    fn post(&mut self, round: usize) -> f64;

    /// Whether the buyer bought at `round`. Arrives in round order.
    fn observe(&mut self, round: usize, sold: bool);

    /// Current `(lo, hi)` bracket on the value, if the pricer keeps one.
    fn bracket(&self) -> Option<(f64, f64)> {
        None
    }

    fn committed(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct ConstantPricer(pub f64);

impl Pricer for ConstantPricer {
    fn name(&self) -> String {
        format!("constant({})", self.0)
    }

    fn post(&mut self, _round: usize) -> f64 {
        self.0
    }

    fn observe(&mut self, _round: usize, _sold: bool) {}
}

/// Phased grid search with squared step sizes.
///
/// Each phase walks up from `lo` in steps of `step`. A sale raises `lo`; a
/// refusal sets `hi` to that price and squares the step (never below `1/T`),
/// so the `k`-th phase has step `2^(-2^k)` and costs O(1) regret. The pricer
/// commits to `lo` once `hi - lo <= 1/T`, or to `hi` after a sale at `hi`.
#[derive(Debug, Clone)]
pub struct KlPricer {
    lo: f64,
    hi: f64,
    hi_refused: bool,
    step: f64,
    floor: f64,
    pending: Option<(usize, f64)>,
    commit: Option<f64>,
    phases: usize,
}

impl KlPricer {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon < 2 {
            return Err(invalid(format!("horizon T must be at least 2, got {horizon}")));
        }
        Ok(KlPricer {
            lo: 0.0,
            hi: 1.0,
            hi_refused: false,
            step: 0.5,
            floor: 1.0 / horizon as f64,
            pending: None,
            commit: None,
            phases: 1,
        })
    }

    /// Number of step sizes used so far.
    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn committed_price(&self) -> Option<f64> {
        self.commit
    }

    fn next_phase(&mut self) {
        self.step = (self.step * self.step).max(self.floor);
        self.phases += 1;
    }
}

impl Pricer for KlPricer {
    fn name(&self) -> String {
        "kl_fixed_value_pricer".into()
    }

    fn post(&mut self, round: usize) -> f64 {
        if let Some(p) = self.commit {
            return p;
        }
        if self.pending.is_some() {
            return self.lo;
        }
        loop {
            if self.hi - self.lo <= self.floor {
                self.commit = Some(self.lo);
                return self.lo;
            }
            let p = self.lo + self.step;
            if self.hi_refused && p >= self.hi - 1e-12 {
                // the rest of this grid is known to be refused
                if self.step <= self.floor {
                    self.commit = Some(self.lo);
                    return self.lo;
                }
                self.next_phase();
                continue;
            }
            let p = p.min(self.hi);
            self.pending = Some((round, p));
            return p;
        }
    }

    fn observe(&mut self, round: usize, sold: bool) {
        let Some((probe_round, p)) = self.pending else {
            return;
        };
        if probe_round != round {
            return;
        }
        self.pending = None;
        if sold {
            self.lo = p;
            if p >= self.hi {
                self.commit = Some(p);
            }
        } else {
            self.hi = p;
            self.hi_refused = true;
            self.next_phase();
        }
    }

    fn bracket(&self) -> Option<(f64, f64)> {
        Some((self.lo, self.hi))
    }

    fn committed(&self) -> bool {
        self.commit.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RppmEnvironment {
    pub value: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RppmRun {
    pub prices: Vec<f64>,
    pub sold: Vec<bool>,
    pub revenue: f64,
    /// `T * v - revenue`.
    pub regret: f64,
}

impl RppmRun {
    pub fn revenue_trace(&self) -> impl Iterator<Item = f64> + '_ {
        self.prices
            .iter()
            .zip(&self.sold)
            .map(|(&p, &s)| if s { p } else { 0.0 })
    }
}

/// Buyer buys iff `v >= p`.
pub fn run_rppm(pricer: &mut dyn Pricer, env: RppmEnvironment) -> RppmRun {
    let mut prices = Vec::with_capacity(env.horizon);
    let mut sold = Vec::with_capacity(env.horizon);
    let mut revenue = 0.0;
    for t in 1..=env.horizon {
        let p = pricer.post(t);
        let buy = env.value >= p;
        pricer.observe(t, buy);
        if buy {
            revenue += p;
        }
        prices.push(p);
        sold.push(buy);
    }
    RppmRun {
        prices,
        sold,
        revenue,
        regret: env.horizon as f64 * env.value - revenue,
    }
}

/// Announces `E_p` for the posted price `p` and reports an accepted proposal as a sale.
#[derive(Debug, Clone)]
pub struct DelegationAdapter<P> {
    pricer: P,
}

impl<P: Pricer + Clone + 'static> DelegationAdapter<P> {
    pub fn new(pricer: P) -> Self {
        DelegationAdapter { pricer }
    }

    pub fn pricer(&self) -> &P {
        &self.pricer
    }
}

impl<P: Pricer + Clone + 'static> Mechanism for DelegationAdapter<P> {
    fn name(&self) -> String {
        format!("rppm_adapter({})", self.pricer.name())
    }

    fn announce(&mut self, round: usize) -> EligibleSet {
        EligibleSet::ThresholdInclusive(self.pricer.post(round))
    }

    fn observe(&mut self, record: &RoundRecord) {
        self.pricer.observe(record.round, record.accepted);
    }

    fn snapshot(&self) -> MechanismSnapshot {
        MechanismSnapshot {
            name: self.name(),
            tau: self.pricer.bracket().map(|b| b.0),
            interval: self.pricer.bracket(),
            committed: self.pricer.committed(),
            ..MechanismSnapshot::default()
        }
    }

    fn clone_box(&self) -> Box<dyn Mechanism> {
        Box::new(self.clone())
    }
}
