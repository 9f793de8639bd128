//! Exact solution of the latent grid MDP by Bellman sweeps. Serves as an
//! independent check on the advice oracle and on learned policies.

use std::collections::BTreeMap;

use crate::advice::ActionLabels;
use crate::env::{self, Action, AgentState, GridMap, Rewards};
use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-10;
const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone)]
pub struct ValueSolution {
    pub values: BTreeMap<AgentState, f64>,
    /// Actions whose one-step lookahead attains the optimal value.
    pub optimal_actions: BTreeMap<AgentState, ActionLabels>,
    /// Undiscounted return of the greedy policy from the start state.
    pub optimal_return: f64,
    /// Steps the greedy policy needs to reach the goal.
    pub path_len: usize,
}

fn is_goal(map: &GridMap, s: &AgentState) -> bool {
    s.cell() == map.goal()
}

fn lookahead(map: &GridMap, v: &BTreeMap<AgentState, f64>, s: AgentState, a: Action, rewards: &Rewards, gamma: f64) -> Result<f64> {
    let out = env::step(map, s, a, rewards)?;
    Ok(if out.done {
        out.reward
    } else {
        out.reward + gamma * v[&out.next_state]
    })
}

pub fn value_iteration(map: &GridMap, gamma: f64, rewards: &Rewards) -> Result<ValueSolution> {
    let dist = map.distances_to_goal();
    if dist[map.cell_index(map.start())].is_none() {
        return Err(Error::NoPath);
    }
    let states = env::enumerate_states(map);
    let mut v: BTreeMap<AgentState, f64> = states.iter().map(|s| (*s, 0.0)).collect();
    for _ in 0..MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        for &s in &states {
            if is_goal(map, &s) {
                continue;
            }
            let mut best = f64::NEG_INFINITY;
            for a in Action::ALL {
                best = best.max(lookahead(map, &v, s, a, rewards, gamma)?);
            }
            delta = delta.max((best - v[&s]).abs());
            v.insert(s, best);
        }
        if delta < TOLERANCE {
            break;
        }
    }

    let mut optimal_actions = BTreeMap::new();
    for &s in &states {
        let reachable = dist[map.cell_index(s.cell())].is_some();
        let labels = if is_goal(map, &s) {
            ActionLabels { good: [true; Action::COUNT] }
        } else if !reachable {
            ActionLabels { good: [false; Action::COUNT] }
        } else {
            let mut q = [0.0; Action::COUNT];
            for a in Action::ALL {
                q[a.index()] = lookahead(map, &v, s, a, rewards, gamma)?;
            }
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut good = [false; Action::COUNT];
            for (g, qa) in good.iter_mut().zip(q) {
                *g = best - qa < 1e-6;
            }
            ActionLabels { good }
        };
        optimal_actions.insert(s, labels);
    }

    // Follow the first optimal action from the start to measure the
    // undiscounted return.
    let mut s = env::reset(map);
    let mut ret = 0.0;
    let mut path_len = 0;
    while !is_goal(map, &s) {
        if path_len > states.len() {
            return Err(Error::NoPath);
        }
        let a = optimal_actions[&s].good_actions().next().ok_or(Error::NoPath)?;
        let out = env::step(map, s, a, rewards)?;
        ret += out.reward;
        path_len += 1;
        s = out.next_state;
    }
    Ok(ValueSolution {
        values: v,
        optimal_actions,
        optimal_return: ret,
        path_len,
    })
}
