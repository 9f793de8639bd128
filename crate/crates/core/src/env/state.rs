use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the four directions the agent may face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Cardinal {
    N,
    E,
    S,
    W,
}

impl Cardinal {
    pub const ALL: [Cardinal; 4] = [Cardinal::N, Cardinal::E, Cardinal::S, Cardinal::W];

    /// Unit step `(dx, dz)`; north decreases the row index.
    pub fn delta(self) -> (i64, i64) {
        match self {
            Cardinal::N => (0, -1),
            Cardinal::E => (1, 0),
            Cardinal::S => (0, 1),
            Cardinal::W => (-1, 0),
        }
    }

    /// Unit step to the agent's right when facing this way.
    pub fn right(self) -> (i64, i64) {
        match self {
            Cardinal::N => (1, 0),
            Cardinal::E => (0, 1),
            Cardinal::S => (-1, 0),
            Cardinal::W => (0, -1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_char(self) -> char {
        match self {
            Cardinal::N => 'N',
            Cardinal::E => 'E',
            Cardinal::S => 'S',
            Cardinal::W => 'W',
        }
    }
}

/// Absolute movement actions. The numeric order (N, E, S, W) is the order of
/// every per-action vector in the crate: Q-values, advice labels and the
/// `good` array of the wire protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    MoveN,
    MoveE,
    MoveS,
    MoveW,
}

impl Action {
    pub const COUNT: usize = 4;
    pub const ALL: [Action; 4] = [Action::MoveN, Action::MoveE, Action::MoveS, Action::MoveW];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    pub fn direction(self) -> Cardinal {
        Cardinal::ALL[self.index()]
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// The latent agent state: cell position plus facing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AgentState {
    pub x: usize,
    pub z: usize,
    pub facing: Cardinal,
}

impl AgentState {
    pub fn new(x: usize, z: usize, facing: Cardinal) -> Self {
        AgentState { x, z, facing }
    }

    pub fn cell(&self) -> (usize, usize) {
        (self.x, self.z)
    }
}
