use serde::{Deserialize, Serialize};

use super::bandit::{stochastic_strategic, successive_elimination_delayed, UcbThreshold};
use super::delay::{DelayConfig, DelayWrapper};
use super::search::{
    delayed_iterative_search, iterative_search, DelayedBinarySearch, DelayedIterativeSearch,
    DelayedProgressiveSearch,
};
use super::Mechanism;
use crate::error::{invalid, Result};
use crate::rppm::{DelegationAdapter, KlPricer};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSchedule {
    /// `eps = alpha * beta * d`, fixed once.
    #[default]
    Fixed,
    /// `eps = alpha * (r - l)`, recomputed before each probe.
    Adaptive,
}

fn default_beta() -> f64 {
    4.0
}

/// Serializable mechanism description, `{"name": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismConfig {
    IterativeSearch {},
    /// `delay` overrides the value derived from `(gamma, y_min)`.
    DelayedIterativeSearch {
        gamma: f64,
        y_min: f64,
        #[serde(default)]
        delay: Option<usize>,
    },
    DelayedBinarySearch {
        gamma: f64,
        y_min: f64,
        #[serde(default)]
        delay: Option<usize>,
    },
    DelayedProgressiveSearch {
        gamma: f64,
        #[serde(rename = "L1")]
        l1: f64,
        #[serde(rename = "L2")]
        l2: f64,
        d: f64,
        #[serde(default = "default_beta")]
        beta: f64,
        #[serde(default)]
        schedule: EpsilonSchedule,
    },
    UcbThreshold {},
    SuccessiveEliminationDelayed {
        arms: usize,
        delay: DelayConfig,
        #[serde(default)]
        delta: f64,
    },
    StochasticStrategic {
        gamma: f64,
        #[serde(rename = "L1")]
        l1: f64,
        y_min: f64,
    },
    /// The posted-price reduction with the phased pricer.
    RppmAdapter {},
    DelayWrapper {
        delay: DelayConfig,
        inner: Box<MechanismConfig>,
    },
}

impl MechanismConfig {
    /// Instantiates the mechanism for a run of `horizon` rounds.
    pub fn build(&self, horizon: usize) -> Result<Box<dyn Mechanism>> {
        let m: Box<dyn Mechanism> = match self {
            MechanismConfig::IterativeSearch {} => Box::new(iterative_search()),
            MechanismConfig::DelayedIterativeSearch { gamma, y_min, delay } => match delay {
                Some(d) => Box::new(DelayedIterativeSearch::with_delay(*d)),
                None => Box::new(delayed_iterative_search(*gamma, *y_min)?),
            },
            MechanismConfig::DelayedBinarySearch { gamma, y_min, delay } => match delay {
                Some(d) => Box::new(DelayedBinarySearch::with_delay(*d, horizon)?),
                None => Box::new(DelayedBinarySearch::new(*gamma, *y_min, horizon)?),
            },
            MechanismConfig::DelayedProgressiveSearch { gamma, l1, l2, d, beta, schedule } => Box::new(
                DelayedProgressiveSearch::new(*gamma, *l1, *l2, *d, *beta, *schedule)?,
            ),
            MechanismConfig::UcbThreshold {} => Box::new(UcbThreshold::new(horizon)?),
            MechanismConfig::SuccessiveEliminationDelayed { arms, delay, delta } => Box::new(
                successive_elimination_delayed(*arms, delay.resolve()?, *delta, horizon)?,
            ),
            MechanismConfig::StochasticStrategic { gamma, l1, y_min } => {
                Box::new(stochastic_strategic(*gamma, *l1, *y_min, horizon)?)
            }
            MechanismConfig::RppmAdapter {} => {
                Box::new(DelegationAdapter::new(KlPricer::new(horizon)?))
            }
            MechanismConfig::DelayWrapper { delay, inner } => {
                Box::new(DelayWrapper::new(inner.build(horizon)?, delay.resolve()?))
            }
        };
        Ok(m)
    }

    /// Checks parameters for a run of `horizon` rounds.
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if horizon == 0 {
            return Err(invalid("T must be at least 1"));
        }
        self.build(horizon).map(|_| ())
    }

    /// The configs the library ships, with representative parameters.
    pub fn catalogue(gamma: f64) -> Vec<MechanismConfig> {
        vec![
            MechanismConfig::IterativeSearch {},
            MechanismConfig::DelayedIterativeSearch { gamma, y_min: 0.05, delay: None },
            MechanismConfig::DelayedBinarySearch { gamma, y_min: 0.05, delay: None },
            MechanismConfig::DelayedProgressiveSearch {
                gamma,
                l1: 1.0,
                l2: 1.2,
                d: 0.01,
                beta: 4.0,
                schedule: EpsilonSchedule::Fixed,
            },
            MechanismConfig::DelayedProgressiveSearch {
                gamma,
                l1: 1.0,
                l2: 1.2,
                d: 0.01,
                beta: 4.0,
                schedule: EpsilonSchedule::Adaptive,
            },
            MechanismConfig::UcbThreshold {},
            MechanismConfig::SuccessiveEliminationDelayed {
                arms: 6,
                delay: DelayConfig::Explicit(5),
                delta: 0.0,
            },
            MechanismConfig::StochasticStrategic { gamma, l1: 1.0, y_min: 0.05 },
            MechanismConfig::RppmAdapter {},
            MechanismConfig::DelayWrapper {
                delay: DelayConfig::Explicit(4),
                inner: Box::new(MechanismConfig::UcbThreshold {}),
            },
        ]
    }
}
