//! Off-policy Q-learning: a fully-connected network trained from replay, and
//! an exact tabular backend over latent states.

mod checkpoint;
mod dqn;
mod network;
mod replay;
mod tabular;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::Checkpoint;
pub use dqn::{td_target, train_step, DqnLearner};
pub use network::{greedy_action, Dense, Gradients, QNetwork};
pub use replay::{ReplayBuffer, Transition};
pub use tabular::{TabularLearner, TabularQ};

use crate::env::{Action, AgentState, GridMap, Observation};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Network,
    Tabular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub backend: Backend,
    pub gamma: f64,
    /// SGD step size of the network backend.
    pub alpha: f64,
    /// Step size of the tabular update.
    pub tabular_alpha: f64,
    pub hidden_sizes: Vec<usize>,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync_interval: u64,
    /// Decay of the exponential moving average of the training loss.
    pub loss_decay: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            backend: Backend::Network,
            gamma: 0.99,
            alpha: 1e-3,
            tabular_alpha: 0.1,
            hidden_sizes: vec![64, 64],
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync_interval: 200,
            loss_decay: 0.99,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("learner.gamma must be in (0, 1)");
        }
        if self.alpha.is_nan() || self.alpha <= 0.0 || !(0.0..=1.0).contains(&self.tabular_alpha) || self.tabular_alpha == 0.0 {
            return bad("learner.alpha must be > 0 and learner.tabular_alpha in (0, 1]");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("learner.hidden_sizes widths must be >= 1");
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return bad("learner.batch_size must be in 1..=replay_capacity");
        }
        if self.target_sync_interval == 0 {
            return bad("learner.target_sync_interval must be >= 1");
        }
        if !(0.0..1.0).contains(&self.loss_decay) {
            return bad("learner.loss_decay must be in [0, 1)");
        }
        Ok(())
    }
}

/// Exponential moving average of per-step training losses; the first loss
/// seeds the average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTracker {
    decay: f64,
    value: Option<f64>,
}

impl LossTracker {
    pub fn new(decay: f64) -> Self {
        LossTracker { decay, value: None }
    }

    pub fn record(&mut self, loss: f64) -> f64 {
        let next = match self.value {
            None => loss,
            Some(v) => self.decay * v + (1.0 - self.decay) * loss,
        };
        self.value = Some(next);
        next
    }

    pub fn value(&self) -> Option<f64> {
        self.value
    }
}

/// What the learner gets to see of a state. The tabular backend reads the
/// latent state, the network backend only the observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    pub state: AgentState,
    pub obs: Option<Observation>,
}

/// Either Q-learning backend behind one interface.
#[derive(Debug, Clone)]
pub enum Learner {
    Network(DqnLearner),
    Tabular(TabularLearner),
}

impl Learner {
    pub fn new<R: Rng + ?Sized>(cfg: &LearnerConfig, map: &GridMap, input_len: usize, rng: &mut R) -> Self {
        match cfg.backend {
            Backend::Network => Learner::Network(DqnLearner::new(input_len, cfg, rng)),
            Backend::Tabular => Learner::Tabular(TabularLearner::new(TabularQ::new(map), cfg)),
        }
    }

    /// Restores a learner from a checkpoint, with a fresh replay buffer.
    pub fn from_checkpoint(ckpt: Checkpoint, cfg: &LearnerConfig, map: &GridMap) -> Result<Self> {
        match ckpt {
            Checkpoint::Network(net) => Ok(Learner::Network(DqnLearner::from_network(net, cfg))),
            Checkpoint::Tabular(table) => {
                if !table.fits(map) {
                    return Err(Error::Checkpoint(format!(
                        "table is {:?}, map is {}x{}",
                        table.dims(),
                        map.width(),
                        map.height()
                    )));
                }
                Ok(Learner::Tabular(TabularLearner::new(table, cfg)))
            }
        }
    }

    pub fn checkpoint(&self) -> Checkpoint {
        match self {
            Learner::Network(l) => Checkpoint::Network(l.net.clone()),
            Learner::Tabular(l) => Checkpoint::Tabular(l.table.clone()),
        }
    }

    pub fn needs_observations(&self) -> bool {
        matches!(self, Learner::Network(_))
    }

    pub fn q_values(&self, map: &GridMap, p: &Percept) -> Result<[f64; Action::COUNT]> {
        match self {
            Learner::Network(l) => {
                let obs = p
                    .obs
                    .as_ref()
                    .expect("network learner requires observations");
                l.net.predict_q(&obs.features)
            }
            Learner::Tabular(l) => Ok(l.table.q(map, &p.state)),
        }
    }

    pub fn best_action(&self, map: &GridMap, p: &Percept) -> Result<(Action, [f64; Action::COUNT])> {
        let q = self.q_values(map, p)?;
        Ok((greedy_action(&q), q))
    }

    /// Learns from one environment transition. Returns the raw loss of the
    /// training step, if one was taken.
    #[allow(clippy::too_many_arguments)]
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        map: &GridMap,
        from: &Percept,
        action: Action,
        reward: f64,
        to: &Percept,
        done: bool,
        rng: &mut R,
    ) -> Result<Option<f64>> {
        match self {
            Learner::Network(l) => {
                let t = Transition {
                    obs: from.obs.clone().expect("network learner requires observations"),
                    action,
                    reward,
                    next_obs: to.obs.clone().expect("network learner requires observations"),
                    done,
                };
                l.observe(t, rng)
            }
            Learner::Tabular(l) => l
                .observe(map, &from.state, action, reward, &to.state, done)
                .map(Some),
        }
    }

    /// Smoothed training loss, `None` before the first training step.
    pub fn smoothed_loss(&self) -> Option<f64> {
        match self {
            Learner::Network(l) => l.loss.value(),
            Learner::Tabular(l) => l.loss.value(),
        }
    }
}
