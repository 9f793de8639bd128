use rand::Rng;

use crate::env::Action;
use crate::error::{Error, Result};

use super::network::QNetwork;
use super::replay::{ReplayBuffer, Transition};
use super::{LearnerConfig, LossTracker};

/// TD regression target: `r` for terminal transitions, otherwise
/// `r + gamma * max_a' Q_target(next_obs, a')`.
pub fn td_target(target_net: &QNetwork, t: &Transition, gamma: f64) -> Result<f64> {
    if t.done {
        return Ok(t.reward);
    }
    let q = target_net.predict_q(&t.next_obs.features)?;
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(t.reward + gamma * max)
}

/// One SGD step on the mean squared TD error of `batch`. Returns the loss
/// measured before the update.
pub fn train_step(
    net: &mut QNetwork,
    target_net: &QNetwork,
    batch: &[&Transition],
    cfg: &LearnerConfig,
) -> Result<f64> {
    assert!(!batch.is_empty(), "training batch must not be empty");
    let targets = batch
        .iter()
        .map(|t| td_target(target_net, t, cfg.gamma))
        .collect::<Result<Vec<_>>>()?;
    let samples: Vec<(&[f64], Action, f64)> = batch
        .iter()
        .zip(&targets)
        .map(|(t, &y)| (t.obs.features.as_slice(), t.action, y))
        .collect();
    let (loss, grads) = net.td_gradient(&samples)?;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    net.apply_gradients(&grads, cfg.alpha);
    if !net.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(loss)
}

/// Network backend: online and target networks plus replay memory.
#[derive(Debug, Clone)]
pub struct DqnLearner {
    pub(crate) net: QNetwork,
    target: QNetwork,
    replay: ReplayBuffer,
    cfg: LearnerConfig,
    updates: u64,
    pub(crate) loss: LossTracker,
}

impl DqnLearner {
    pub fn new<R: Rng + ?Sized>(input_len: usize, cfg: &LearnerConfig, rng: &mut R) -> Self {
        let net = QNetwork::new(input_len, &cfg.hidden_sizes, rng);
        Self::from_network(net, cfg)
    }

    pub fn from_network(net: QNetwork, cfg: &LearnerConfig) -> Self {
        DqnLearner {
            target: net.clone(),
            net,
            replay: ReplayBuffer::new(cfg.replay_capacity),
            cfg: cfg.clone(),
            updates: 0,
            loss: LossTracker::new(cfg.loss_decay),
        }
    }

    pub fn network(&self) -> &QNetwork {
        &self.net
    }

    pub fn replay(&self) -> &ReplayBuffer {
        &self.replay
    }

    /// Stores the transition and, once the buffer holds a full batch, trains
    /// on a uniform minibatch. Returns the batch loss when a step was taken.
    pub fn observe<R: Rng + ?Sized>(&mut self, t: Transition, rng: &mut R) -> Result<Option<f64>> {
        self.replay.push(t);
        if self.replay.len() < self.cfg.batch_size {
            return Ok(None);
        }
        let batch = self.replay.sample(self.cfg.batch_size, rng);
        let loss = train_step(&mut self.net, &self.target, &batch, &self.cfg)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.cfg.target_sync_interval) {
            self.target = self.net.clone();
        }
        self.loss.record(loss);
        Ok(Some(loss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Observation;
    use crate::qlearn::network::Dense;

    fn obs(features: Vec<f64>) -> Observation {
        Observation {
            features,
            view_angle_offset: 0.0,
        }
    }

    fn single_layer(weights: Vec<f64>, biases: Vec<f64>) -> QNetwork {
        QNetwork::from_layers(vec![Dense {
            inputs: 1,
            outputs: 4,
            weights,
            biases,
        }])
        .unwrap()
    }

    fn terminal(reward: f64) -> Transition {
        Transition {
            obs: obs(vec![1.0]),
            action: Action::MoveE,
            reward,
            next_obs: obs(vec![1.0]),
            done: true,
        }
    }

    #[test]
    fn zero_td_error_gives_zero_loss() {
        let mut net = single_layer(vec![0.0, 99.0, 0.0, 0.0], vec![0.0; 4]);
        let target = net.clone();
        let t = terminal(99.0);
        let loss = train_step(&mut net, &target, &[&t], &LearnerConfig::default()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net, target);
    }

    #[test]
    fn terminal_error_is_squared_reward() {
        let mut net = single_layer(vec![0.0; 4], vec![0.0; 4]);
        let target = net.clone();
        let t = terminal(99.0);
        let loss = train_step(&mut net, &target, &[&t], &LearnerConfig::default()).unwrap();
        assert_eq!(loss, 9801.0);
    }

    #[test]
    fn terminal_target_ignores_next_observation() {
        let target = single_layer(vec![5.0, 1.0, 2.0, 3.0], vec![0.0; 4]);
        let mut t = terminal(7.0);
        assert_eq!(td_target(&target, &t, 0.9).unwrap(), 7.0);
        t.next_obs = obs(vec![1e6]);
        assert_eq!(td_target(&target, &t, 0.9).unwrap(), 7.0);
        t.done = false;
        assert_eq!(td_target(&target, &t, 0.5).unwrap(), 7.0 + 0.5 * 5e6);
    }

    #[test]
    fn non_terminal_step_matches_finite_differences() {
        let mut net = crate::qlearn::network::tests::hand_net();
        let target = net.clone();
        let t = Transition {
            obs: obs(vec![1.0, 2.0]),
            action: Action::MoveS,
            reward: -1.0,
            next_obs: obs(vec![0.5, 1.0]),
            done: false,
        };
        let cfg = LearnerConfig {
            gamma: 0.9,
            alpha: 0.01,
            ..Default::default()
        };
        // next q = (0, 1.25, 1.75, 0.625) from the hand net, so
        // y = -1 + 0.9 * 1.75 = 0.575; q(s, S) = 4 and loss = 3.425^2
        let y = -1.0 + 0.9 * 1.75;
        let loss_at = |p: &[f64]| {
            let mut n = net.clone();
            n.set_parameters(p);
            let q = n.predict_q(&t.obs.features).unwrap()[Action::MoveS.index()];
            (q - y) * (q - y)
        };
        let before = net.parameters();
        let h = 1e-6;
        let fd: Vec<f64> = (0..before.len())
            .map(|i| {
                let (mut up, mut down) = (before.clone(), before.clone());
                up[i] += h;
                down[i] -= h;
                (loss_at(&up) - loss_at(&down)) / (2.0 * h)
            })
            .collect();
        let loss = train_step(&mut net, &target, &[&t], &cfg).unwrap();
        assert!((loss - 3.425 * 3.425).abs() < 1e-12);
        for ((after, b), g) in net.parameters().iter().zip(&before).zip(&fd) {
            let expected = b - cfg.alpha * g;
            assert!(
                (after - expected).abs() <= 1e-4 * expected.abs().max(1.0),
                "{after} vs {expected}"
            );
        }
    }

    #[test]
    fn divergence_is_reported() {
        let mut net = single_layer(vec![0.0; 4], vec![0.0; 4]);
        let target = net.clone();
        let t = terminal(f64::INFINITY);
        assert!(matches!(
            train_step(&mut net, &target, &[&t], &LearnerConfig::default()),
            Err(Error::NonFiniteLoss)
        ));
    }
}
