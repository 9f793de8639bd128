//! The arbiter chooses, step by step, between a random action, the learner's
//! greedy action and the advisor's suggestion.
//!
//! Three probabilistic checks drive it. The exploration check decays with
//! the episode index. The confidence check compares the learner's smoothed
//! loss with the largest loss seen so far. The consensus check tracks how
//! often learner and advisor agree. The baseline agent replaces all of this
//! with a plain epsilon-greedy schedule and never consults an advisor.

mod checks;
mod schedule;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checks::{p_conf, update_consensus, ConfMode, ConsensusConfig};
pub use schedule::{baseline_epsilon, p_explore, ScheduleConfig};

use crate::env::Action;
use crate::error::{Error, Result};

/// Which checks are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    /// Epsilon-greedy learner, no advisor.
    Baseline,
    /// Exploration and confidence checks; the consensus check always passes.
    ConfidenceOnly,
    ConfidenceAndConsensus,
}

impl AgentMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentMode::Baseline => "baseline",
            AgentMode::ConfidenceOnly => "confidence_only",
            AgentMode::ConfidenceAndConsensus => "confidence_and_consensus",
        }
    }

    pub fn uses_advice(self) -> bool {
        self != AgentMode::Baseline
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbiterConfig {
    pub mode: AgentMode,
    pub conf_mode: ConfMode,
    pub schedule: ScheduleConfig,
    pub consensus: ConsensusConfig,
}

impl Default for ArbiterConfig {
    fn default() -> Self {
        ArbiterConfig {
            mode: AgentMode::ConfidenceAndConsensus,
            conf_mode: ConfMode::Prose,
            schedule: ScheduleConfig::default(),
            consensus: ConsensusConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DecisionSource {
    Explore,
    ExploitDqn,
    ListenAdvisor,
}

impl DecisionSource {
    pub fn as_str(self) -> &'static str {
        match self {
            DecisionSource::Explore => "explore",
            DecisionSource::ExploitDqn => "exploit",
            DecisionSource::ListenAdvisor => "listen",
        }
    }
}

/// Pass probabilities of the three checks at one step. For the baseline,
/// `p_explore` is its epsilon and the other two are 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckProbabilities {
    pub p_explore: f64,
    pub p_conf: f64,
    pub p_cons: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub source: DecisionSource,
    pub action: Action,
    pub probabilities: CheckProbabilities,
    /// The advisor's suggestion, when it was asked and answered.
    pub advice: Option<Action>,
}

/// One pass through the decision rule with fixed check probabilities.
///
/// Draw `u1`; below `p_explore` pick a uniformly random action without
/// asking learner or advisor. Otherwise draw `u2` and `u3` independently and
/// keep the learner's action if `u2 < p_conf` and `u3 < p_cons`. Otherwise
/// ask the advisor, falling back to the learner's action on silence.
pub fn arbitrate<R, F>(
    probs: CheckProbabilities,
    a_dqn: Action,
    advice: F,
    rng: &mut R,
) -> Decision
where
    R: Rng + ?Sized,
    F: FnOnce() -> Option<Action>,
{
    let decision = |source, action, advice| Decision {
        source,
        action,
        probabilities: probs,
        advice,
    };
    if rng.random::<f64>() < probs.p_explore {
        let a = Action::ALL[rng.random_range(0..Action::COUNT)];
        return decision(DecisionSource::Explore, a, None);
    }
    let confident = rng.random::<f64>() < probs.p_conf;
    let consistent = rng.random::<f64>() < probs.p_cons;
    if confident && consistent {
        return decision(DecisionSource::ExploitDqn, a_dqn, None);
    }
    match advice() {
        Some(a) => decision(DecisionSource::ListenAdvisor, a, Some(a)),
        None => decision(DecisionSource::ExploitDqn, a_dqn, None),
    }
}

/// Mutable check state carried through a training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArbiterState {
    /// Current training episode.
    pub t: u64,
    pub p_cons: f64,
    /// Largest smoothed loss seen so far.
    pub l_max: f64,
    /// Most recent smoothed loss.
    pub l: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Arbiter {
    cfg: ArbiterConfig,
    state: ArbiterState,
}

impl Arbiter {
    pub fn new(cfg: ArbiterConfig) -> Self {
        Arbiter {
            state: ArbiterState {
                t: 0,
                p_cons: cfg.consensus.p_cons_init,
                l_max: 0.0,
                l: None,
            },
            cfg,
        }
    }

    pub fn config(&self) -> &ArbiterConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ArbiterState {
        &self.state
    }

    pub fn set_episode(&mut self, t: u64) {
        self.state.t = t;
    }

    /// Records a new smoothed loss, raising `l_max` if needed.
    pub fn observe_loss(&mut self, l: f64) -> Result<()> {
        if l < 0.0 || l.is_nan() {
            return Err(Error::NegativeLoss(l));
        }
        self.state.l_max = self.state.l_max.max(l);
        self.state.l = Some(l);
        Ok(())
    }

    /// Check probabilities for the current episode and loss.
    pub fn probabilities(&self) -> CheckProbabilities {
        let s = &self.state;
        match self.cfg.mode {
            AgentMode::Baseline => CheckProbabilities {
                p_explore: baseline_epsilon(s.t, &self.cfg.schedule),
                p_conf: 1.0,
                p_cons: 1.0,
            },
            mode => CheckProbabilities {
                p_explore: p_explore(s.t, &self.cfg.schedule),
                p_conf: p_conf(s.l.unwrap_or(s.l_max), s.l_max, self.cfg.conf_mode)
                    .expect("losses are validated on entry"),
                p_cons: if mode == AgentMode::ConfidenceAndConsensus {
                    s.p_cons
                } else {
                    1.0
                },
            },
        }
    }

    /// Decides the next action. `advice` is only invoked when the decision
    /// rule reaches the advisor; the consensus probability is updated only
    /// on such steps, comparing the advice with `a_dqn`.
    pub fn decide<R, F>(&mut self, a_dqn: Action, advice: F, rng: &mut R) -> Decision
    where
        R: Rng + ?Sized,
        F: FnOnce() -> Option<Action>,
    {
        let probs = self.probabilities();
        let decision = if self.cfg.mode == AgentMode::Baseline {
            arbitrate(probs, a_dqn, || None, rng)
        } else {
            arbitrate(probs, a_dqn, advice, rng)
        };
        if let (AgentMode::ConfidenceAndConsensus, Some(a)) = (self.cfg.mode, decision.advice) {
            self.state.p_cons = update_consensus(self.state.p_cons, a == a_dqn, &self.cfg.consensus);
        }
        decision
    }
}
