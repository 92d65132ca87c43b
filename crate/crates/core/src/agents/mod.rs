//! Agent behaviour: myopic and adversarial epsilon best responses, the
//! scripted hiders of the lower-bound instances, and an exhaustive lookahead.

mod lookahead;

pub use lookahead::{evaluate_policy, lookahead, LookaheadPlan, DEFAULT_NODE_LIMIT, MAX_LOOKAHEAD_HORIZON};

use serde::{Deserialize, Serialize};

use crate::domain::{EligibleSet, Proposal, Realization, RoundRecord, Solution};
use crate::error::{invalid, Result};
use crate::instances::InstanceModel;
use crate::mechanisms::MechanismConfig;

/// What the agent sees when it moves.
#[derive(Debug, Clone, Copy)]
pub struct AgentObservation<'a> {
    pub round: usize,
    /// Full ex-post utilities of every solution this round.
    pub realization: &'a Realization,
    pub eligible: &'a EligibleSet,
    /// Earlier rounds. Empty when the engine runs without storing history.
    pub history: &'a [RoundRecord],
    /// Description of the committed mechanism, for agents that know it.
    pub mechanism: Option<&'a str>,
}

pub trait AgentPolicy: Send {
    fn name(&self) -> String;

    fn propose(&mut self, obs: &AgentObservation<'_>) -> Proposal;
}

fn eventual(realization: &Realization, eligible: &EligibleSet, p: Proposal) -> (f64, f64) {
    match realization.get(p) {
        Some(s) if eligible.contains(s) => (s.y(), s.x()),
        _ => (0.0, 0.0),
    }
}

/// Maximises agent utility among eligible solutions and Null; ties go to the
/// larger principal utility, and a solution beats Null on a full tie.
pub fn best_response(realization: &Realization, eligible: &EligibleSet) -> Proposal {
    let mut best = Proposal::Null;
    let mut best_val = (0.0, 0.0);
    for (i, s) in realization.solutions.iter().enumerate() {
        if !eligible.contains(s) {
            continue;
        }
        let val = (s.y(), s.x());
        if best.is_null() && val >= best_val || val > best_val {
            best = Proposal::Index(i);
            best_val = val;
        }
    }
    best
}

/// Eligible proposals within `eps` of the best eventual agent utility, in
/// solution order, followed by Null when the maximum itself is at most `eps`.
pub fn eps_best_response_set(realization: &Realization, eligible: &EligibleSet, eps: f64) -> Vec<Proposal> {
    let m = realization
        .solutions
        .iter()
        .filter(|s| eligible.contains(s))
        .map(Solution::y)
        .fold(0.0, f64::max);
    let mut out: Vec<Proposal> = realization
        .solutions
        .iter()
        .enumerate()
        .filter(|(_, s)| eligible.contains(s) && s.y() >= m - eps)
        .map(|(i, _)| Proposal::Index(i))
        .collect();
    if m <= eps {
        out.push(Proposal::Null);
    }
    out
}

/// The worst member of the epsilon best-response set for the principal.
pub fn adversarial_choice(realization: &Realization, eligible: &EligibleSet, eps: f64) -> Proposal {
    let mut best: Option<(Proposal, (f64, f64))> = None;
    for p in eps_best_response_set(realization, eligible, eps) {
        let (y, x) = eventual(realization, eligible, p);
        if best.map_or(true, |(_, b)| (x, y) < b) {
            best = Some((p, (x, y)));
        }
    }
    best.map_or(Proposal::Null, |(p, _)| p)
}

/// `y / (1 - gamma) >= gamma^k_budget`.
///
/// Revealing a hidden solution of agent utility `y` is worth at most
/// `y / (1 - gamma)` from now on, while hiding keeps the low-`x` solution for
/// `k_budget` more rounds; the round index cancels out.
pub fn should_reveal(_round: usize, k_budget: u32, gamma: f64, y: f64) -> bool {
    y / (1.0 - gamma) >= gamma.powf(f64::from(k_budget))
}

#[derive(Debug, Clone, Default)]
pub struct Myopic;

impl AgentPolicy for Myopic {
    fn name(&self) -> String {
        "myopic".into()
    }

    fn propose(&mut self, obs: &AgentObservation<'_>) -> Proposal {
        best_response(obs.realization, obs.eligible)
    }
}

#[derive(Debug, Clone)]
pub struct AdversarialEps {
    pub eps: f64,
}

impl AgentPolicy for AdversarialEps {
    fn name(&self) -> String {
        format!("adversarial_eps(eps={})", self.eps)
    }

    fn propose(&mut self, obs: &AgentObservation<'_>) -> Proposal {
        adversarial_choice(obs.realization, obs.eligible, self.eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HidingKind {
    /// Hides until revealing pays off under discounting.
    P1,
    /// Never reveals.
    NonDiscounting,
}

/// Pretends the highest-`y` solution is the only one.
#[derive(Debug, Clone)]
pub struct Hiding {
    kind: HidingKind,
    gamma: f64,
    k_budget: u32,
    revealed: bool,
}

impl Hiding {
    pub fn new(kind: HidingKind, gamma: f64, k_budget: u32) -> Self {
        Hiding {
            kind,
            gamma,
            k_budget,
            revealed: false,
        }
    }

    pub fn revealed(&self) -> bool {
        self.revealed
    }
}

/// Index of the max-`y` solution (ties to lower `x`), and the best `y` among the rest.
fn shown_and_hidden(r: &Realization) -> Option<(usize, f64)> {
    let (shown, _) = r.solutions.iter().enumerate().max_by(|(_, a), (_, b)| {
        a.y().total_cmp(&b.y()).then(b.x().total_cmp(&a.x()))
    })?;
    let hidden_y = r
        .solutions
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != shown)
        .map(|(_, s)| s.y())
        .fold(0.0, f64::max);
    Some((shown, hidden_y))
}

impl AgentPolicy for Hiding {
    fn name(&self) -> String {
        match self.kind {
            HidingKind::P1 => format!("hiding_p1(k_budget={})", self.k_budget),
            HidingKind::NonDiscounting => "hiding_non_discounting".into(),
        }
    }

    fn propose(&mut self, obs: &AgentObservation<'_>) -> Proposal {
        let Some((shown, hidden_y)) = shown_and_hidden(obs.realization) else {
            return Proposal::Null;
        };
        if self.kind == HidingKind::P1
            && !self.revealed
            && should_reveal(obs.round, self.k_budget, self.gamma, hidden_y)
        {
            self.revealed = true;
        }
        if self.revealed {
            return best_response(obs.realization, obs.eligible);
        }
        if obs.eligible.contains(&obs.realization.solutions[shown]) {
            Proposal::Index(shown)
        } else {
            Proposal::Null
        }
    }
}

/// Replays a fixed proposal sequence, then best-responds.
#[derive(Debug, Clone)]
pub struct Scripted {
    plan: Vec<Proposal>,
}

impl Scripted {
    pub fn new(plan: Vec<Proposal>) -> Self {
        Scripted { plan }
    }
}

impl AgentPolicy for Scripted {
    fn name(&self) -> String {
        format!("scripted(len={})", self.plan.len())
    }

    fn propose(&mut self, obs: &AgentObservation<'_>) -> Proposal {
        match self.plan.get(obs.round - 1) {
            Some(&p) if obs.realization.get(p).is_some() || p.is_null() => p,
            _ => best_response(obs.realization, obs.eligible),
        }
    }
}

/// Serializable agent behaviour, `{"name": ..., "params": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    Myopic {},
    AdversarialEps {
        eps: f64,
    },
    Hiding {
        kind: HidingKind,
        #[serde(default)]
        k_budget: u32,
    },
    /// Plays the exhaustive-search optimum for the first `horizon` rounds.
    Lookahead {
        horizon: usize,
        #[serde(default = "default_node_limit")]
        node_limit: u64,
    },
}

fn default_node_limit() -> u64 {
    DEFAULT_NODE_LIMIT
}

fn default_gamma() -> f64 {
    0.9
}

/// Agent section of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawAgentConfig", into = "RawAgentConfig")]
pub struct AgentConfig {
    pub policy: PolicyConfig,
    pub gamma: f64,
    pub knows_mechanism: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgentConfig {
    name: String,
    #[serde(default = "empty_params")]
    params: serde_json::Value,
    #[serde(default = "default_gamma")]
    gamma: f64,
    #[serde(default)]
    knows_mechanism: bool,
}

fn empty_params() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

impl TryFrom<RawAgentConfig> for AgentConfig {
    type Error = String;

    fn try_from(raw: RawAgentConfig) -> Result<Self, String> {
        let tagged = serde_json::json!({ "name": raw.name, "params": raw.params });
        let policy: PolicyConfig = serde_json::from_value(tagged).map_err(|e| format!("agent: {e}"))?;
        Ok(AgentConfig {
            policy,
            gamma: raw.gamma,
            knows_mechanism: raw.knows_mechanism,
        })
    }
}

impl From<AgentConfig> for RawAgentConfig {
    fn from(c: AgentConfig) -> Self {
        let tagged = serde_json::to_value(&c.policy).expect("policy config serializes");
        RawAgentConfig {
            name: tagged["name"].as_str().unwrap_or_default().to_string(),
            params: tagged.get("params").cloned().unwrap_or_else(empty_params),
            gamma: c.gamma,
            knows_mechanism: c.knows_mechanism,
        }
    }
}

impl AgentConfig {
    pub fn new(policy: PolicyConfig, gamma: f64) -> Self {
        AgentConfig {
            policy,
            gamma,
            knows_mechanism: false,
        }
    }

    pub fn myopic(gamma: f64) -> Self {
        Self::new(PolicyConfig::Myopic {}, gamma)
    }

    /// `T_gamma = 1 / (1 - gamma)`.
    pub fn t_gamma(&self) -> f64 {
        1.0 / (1.0 - self.gamma)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid(format!("agent gamma must lie in (0, 1), got {}", self.gamma)));
        }
        match self.policy {
            PolicyConfig::AdversarialEps { eps } if !(eps >= 0.0) => {
                Err(invalid(format!("eps must be non-negative, got {eps}")))
            }
            PolicyConfig::Lookahead { horizon, .. } if horizon > MAX_LOOKAHEAD_HORIZON => Err(invalid(
                format!("lookahead horizon {horizon} exceeds {MAX_LOOKAHEAD_HORIZON}"),
            )),
            _ => Ok(()),
        }
    }

    /// Builds the policy. The lookahead agent needs the instance and the
    /// mechanism to plan against.
    pub fn build(
        &self,
        instance: &InstanceModel,
        mechanism: &MechanismConfig,
        horizon: usize,
    ) -> Result<Box<dyn AgentPolicy>> {
        self.validate()?;
        Ok(match self.policy {
            PolicyConfig::Myopic {} => Box::new(Myopic),
            PolicyConfig::AdversarialEps { eps } => Box::new(AdversarialEps { eps }),
            PolicyConfig::Hiding { kind, k_budget } => Box::new(Hiding::new(kind, self.gamma, k_budget)),
            PolicyConfig::Lookahead { horizon: h, node_limit } => {
                let solutions = instance.solutions().ok_or(crate::error::Error::NotDeterministic)?;
                let mech = mechanism.build(horizon)?;
                let plan = lookahead(solutions, mech.as_ref(), self.gamma, h.min(horizon), node_limit)?;
                Box::new(Scripted::new(plan.proposals))
            }
        })
    }
}
