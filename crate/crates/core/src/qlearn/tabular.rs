use crate::env::{state_slot, Action, AgentState, GridMap};
use crate::error::{Error, Result};

use super::{LearnerConfig, LossTracker};

/// Lookup-table Q-function over latent agent states, updated in place with
/// the one-step Q-learning rule.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularQ {
    width: usize,
    height: usize,
    values: Vec<[f64; Action::COUNT]>,
}

impl TabularQ {
    /// All-zero table sized for `map`.
    pub fn new(map: &GridMap) -> Self {
        TabularQ {
            width: map.width(),
            height: map.height(),
            values: vec![[0.0; Action::COUNT]; map.width() * map.height() * 4],
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<[f64; Action::COUNT]>) -> Self {
        TabularQ {
            width,
            height,
            values,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn raw(&self) -> &[[f64; Action::COUNT]] {
        &self.values
    }

    pub fn fits(&self, map: &GridMap) -> bool {
        self.dims() == (map.width(), map.height())
    }

    pub fn q(&self, map: &GridMap, state: &AgentState) -> [f64; Action::COUNT] {
        self.values[state_slot(map, state)]
    }

    pub fn set(&mut self, map: &GridMap, state: &AgentState, q: [f64; Action::COUNT]) {
        self.values[state_slot(map, state)] = q;
    }

    /// `Q(s,a) += alpha * (r + gamma * max Q(s',.) - Q(s,a))`, with the
    /// bootstrap term dropped on terminal steps. Returns the squared TD error
    /// before the update.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        map: &GridMap,
        state: &AgentState,
        action: Action,
        reward: f64,
        next: &AgentState,
        done: bool,
        alpha: f64,
        gamma: f64,
    ) -> f64 {
        let bootstrap = if done {
            0.0
        } else {
            self.q(map, next).into_iter().fold(f64::NEG_INFINITY, f64::max)
        };
        let slot = state_slot(map, state);
        let td = reward + gamma * bootstrap - self.values[slot][action.index()];
        self.values[slot][action.index()] += alpha * td;
        td * td
    }
}

/// Tabular backend: one online update per environment transition.
#[derive(Debug, Clone)]
pub struct TabularLearner {
    pub(crate) table: TabularQ,
    pub(crate) alpha: f64,
    pub(crate) gamma: f64,
    pub(crate) loss: LossTracker,
}

impl TabularLearner {
    pub fn new(table: TabularQ, cfg: &LearnerConfig) -> Self {
        TabularLearner {
            table,
            alpha: cfg.tabular_alpha,
            gamma: cfg.gamma,
            loss: LossTracker::new(cfg.loss_decay),
        }
    }

    pub fn table(&self) -> &TabularQ {
        &self.table
    }

    /// Applies the update to one transition and returns its squared TD error.
    pub fn observe(
        &mut self,
        map: &GridMap,
        state: &AgentState,
        action: Action,
        reward: f64,
        next: &AgentState,
        done: bool,
    ) -> Result<f64> {
        let loss = self
            .table
            .update(map, state, action, reward, next, done, self.alpha, self.gamma);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        self.loss.record(loss);
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{enumerate_states, step, Rewards};
    use crate::qlearn::greedy_action;

    #[test]
    fn sweeps_recover_shortest_path_policy_on_a_line() {
        let map = GridMap::parse("line", "S.G").unwrap();
        let mut q = TabularQ::new(&map);
        let states = enumerate_states(&map);
        for _ in 0..200 {
            for s in &states {
                if s.cell() == map.goal() {
                    continue;
                }
                for a in Action::ALL {
                    let out = step(&map, *s, a, &Rewards::default()).unwrap();
                    q.update(&map, s, a, out.reward, &out.next_state, out.done, 0.5, 0.99);
                }
            }
        }
        for s in states.iter().filter(|s| s.cell() != map.goal()) {
            assert_eq!(greedy_action(&q.q(&map, s)), Action::MoveE, "{s:?}");
        }
    }

    #[test]
    fn terminal_update_ignores_successor() {
        let map = GridMap::parse("line", "S.G").unwrap();
        let mut q = TabularQ::new(&map);
        let s = AgentState::new(1, 0, crate::env::Cardinal::E);
        let g = AgentState::new(2, 0, crate::env::Cardinal::E);
        q.set(&map, &g, [1e9; 4]);
        let err = q.update(&map, &s, Action::MoveE, 99.0, &g, true, 1.0, 0.99);
        assert_eq!(err, 99.0 * 99.0);
        assert_eq!(q.q(&map, &s)[1], 99.0);
    }
}
