use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::map::GridMap;
use super::state::{Action, AgentState, Cardinal};

/// Per-step and goal-pickup rewards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    pub step: f64,
    pub goal: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Rewards {
            step: -1.0,
            goal: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: AgentState,
    pub reward: f64,
    pub done: bool,
}

/// Start-of-episode state: the start cell, facing north.
pub fn reset(map: &GridMap) -> AgentState {
    let (x, z) = map.start();
    AgentState::new(x, z, Cardinal::N)
}

/// Applies one move. The agent turns to face the commanded direction even if
/// the move is blocked; every step costs `rewards.step` and entering the goal
/// adds `rewards.goal` and ends the episode.
pub fn step(
    map: &GridMap,
    state: AgentState,
    action: Action,
    rewards: &Rewards,
) -> Result<StepOutcome> {
    if !map.is_walkable(state.x, state.z) {
        return Err(Error::InvalidState {
            x: state.x,
            z: state.z,
        });
    }
    let (x, z) = map.neighbor(state.cell(), action).unwrap_or(state.cell());
    let next_state = AgentState::new(x, z, action.direction());
    let done = (x, z) == map.goal();
    let reward = if done {
        rewards.step + rewards.goal
    } else {
        rewards.step
    };
    Ok(StepOutcome {
        next_state,
        reward,
        done,
    })
}

/// Every (walkable cell, facing) pair, cells in row-major order and facings
/// N, E, S, W within each cell.
pub fn enumerate_states(map: &GridMap) -> Vec<AgentState> {
    map.walkable_cells()
        .into_iter()
        .flat_map(|(x, z)| Cardinal::ALL.map(|f| AgentState::new(x, z, f)))
        .collect()
}

/// Dense index of a state within a table of `map.cell_count() * 4` slots.
pub(crate) fn state_slot(map: &GridMap, state: &AgentState) -> usize {
    map.cell_index(state.cell()) * 4 + state.facing.index()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> GridMap {
        GridMap::parse("line", "S.G").unwrap()
    }

    #[test]
    fn reset_places_agent_at_start_facing_north() {
        let map = line();
        assert_eq!(reset(&map), AgentState::new(0, 0, Cardinal::N));
        assert_eq!(reset(&map), reset(&map));
        let hard = GridMap::bundled("hard").unwrap();
        assert_eq!(reset(&hard).cell(), hard.start());
    }

    #[test]
    fn step_and_goal_rewards() {
        let map = line();
        let r = Rewards::default();
        let out = step(&map, reset(&map), Action::MoveE, &r).unwrap();
        assert_eq!(out.next_state, AgentState::new(1, 0, Cardinal::E));
        assert_eq!(out.reward, -1.0);
        assert!(!out.done);
        let out = step(&map, out.next_state, Action::MoveE, &r).unwrap();
        assert_eq!(out.next_state.cell(), (2, 0));
        assert_eq!(out.reward, 99.0);
        assert!(out.done);
    }

    #[test]
    fn blocked_move_turns_but_stays() {
        let map = GridMap::parse_layout("split", "S#G").unwrap();
        let out = step(&map, reset(&map), Action::MoveE, &Rewards::default()).unwrap();
        assert_eq!(out.next_state, AgentState::new(0, 0, Cardinal::E));
        assert_eq!(out.reward, -1.0);
        assert!(!out.done);
        // Off the edge of the grid.
        let out = step(&map, reset(&map), Action::MoveN, &Rewards::default()).unwrap();
        assert_eq!(out.next_state, AgentState::new(0, 0, Cardinal::N));
    }

    #[test]
    fn invalid_state_is_rejected() {
        let map = GridMap::parse("x", "S#G\n...").unwrap();
        let bad = AgentState::new(1, 0, Cardinal::N);
        assert!(matches!(
            step(&map, bad, Action::MoveS, &Rewards::default()),
            Err(Error::InvalidState { x: 1, z: 0 })
        ));
    }

    #[test]
    fn state_enumeration_counts() {
        assert_eq!(enumerate_states(&line()).len(), 12);
        let split = GridMap::parse_layout("split", "S#G").unwrap();
        assert_eq!(enumerate_states(&split).len(), 8);
        let hard = GridMap::bundled("hard").unwrap();
        assert_eq!(enumerate_states(&hard).len(), 49 * 4);
        let states = enumerate_states(&hard);
        let mut sorted = states.clone();
        sorted.sort_by_key(|s| (s.z, s.x, s.facing));
        assert_eq!(states, sorted);
    }

    #[test]
    fn trajectory_returns() {
        let map = GridMap::bundled("easy").unwrap();
        let r = Rewards::default();
        let plan = [
            Action::MoveE,
            Action::MoveE,
            Action::MoveE,
            Action::MoveE,
            Action::MoveS,
            Action::MoveS,
            Action::MoveS,
            Action::MoveS,
        ];
        let mut s = reset(&map);
        let mut total = 0.0;
        for (i, a) in plan.iter().enumerate() {
            let out = step(&map, s, *a, &r).unwrap();
            total += out.reward;
            s = out.next_state;
            assert_eq!(out.done, i == plan.len() - 1);
        }
        assert_eq!(total, 100.0 - plan.len() as f64);
    }
}
