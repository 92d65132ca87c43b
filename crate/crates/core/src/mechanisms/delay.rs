use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{Mechanism, MechanismSnapshot};
use crate::domain::{EligibleSet, RoundRecord};
use crate::error::{invalid, Result};

/// `ceil(T_gamma * ln(T_gamma / eps))` with `T_gamma = 1 / (1 - gamma)`, floored at 0.
pub fn delay_for(gamma: f64, eps: f64) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    if !(eps > 0.0) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    let t_gamma = 1.0 / (1.0 - gamma);
    let d = (t_gamma * (t_gamma / eps).ln()).ceil();
    Ok(if d > 0.0 { d as usize } else { 0 })
}

/// A feedback delay, given directly or derived from `(gamma, eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelayConfig {
    Explicit(usize),
    Derived { gamma: f64, eps: f64 },
}

impl DelayConfig {
    pub fn resolve(&self) -> Result<usize> {
        match *self {
            DelayConfig::Explicit(d) => Ok(d),
            DelayConfig::Derived { gamma, eps } => delay_for(gamma, eps),
        }
    }
}

/// Makes any mechanism D-delayed: at round `t` the inner mechanism has been
/// shown exactly the records of rounds `1..=t-D`. Later records wait in a queue.
#[derive(Clone)]
pub struct DelayWrapper<M> {
    inner: M,
    delay: usize,
    queue: VecDeque<RoundRecord>,
}

impl<M: Mechanism + Clone + 'static> DelayWrapper<M> {
    pub fn new(inner: M, delay: usize) -> Self {
        DelayWrapper {
            inner,
            delay,
            queue: VecDeque::new(),
        }
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn delay(&self) -> usize {
        self.delay
    }
}

impl<M: Mechanism + Clone + 'static> Mechanism for DelayWrapper<M> {
    fn name(&self) -> String {
        format!("delay_wrapper(D={}, {})", self.delay, self.inner.name())
    }

    fn announce(&mut self, round: usize) -> EligibleSet {
        let visible = round.saturating_sub(self.delay);
        while self.queue.front().is_some_and(|r| r.round <= visible) {
            let rec = self.queue.pop_front().expect("front checked");
            self.inner.observe(&rec);
        }
        self.inner.announce(round)
    }

    fn observe(&mut self, record: &RoundRecord) {
        self.queue.push_back(record.clone());
    }

    fn snapshot(&self) -> MechanismSnapshot {
        let mut s = self.inner.snapshot();
        s.name = self.name();
        s.delay = Some(self.delay);
        s.pending_feedback = s.pending_feedback.max(self.queue.len());
        s
    }

    fn clone_box(&self) -> Box<dyn Mechanism> {
        Box::new(self.clone())
    }
}

impl Mechanism for Box<dyn Mechanism> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn announce(&mut self, round: usize) -> EligibleSet {
        (**self).announce(round)
    }

    fn observe(&mut self, record: &RoundRecord) {
        (**self).observe(record)
    }

    fn snapshot(&self) -> MechanismSnapshot {
        (**self).snapshot()
    }

    fn clone_box(&self) -> Box<dyn Mechanism> {
        (**self).clone_box()
    }
}
