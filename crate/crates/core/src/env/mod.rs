//! Maze environment: map loading, deterministic dynamics and noisy egocentric
//! observations.

mod dynamics;
mod map;
mod observe;
mod state;

pub use dynamics::{enumerate_states, reset, step, Rewards, StepOutcome};
pub(crate) use dynamics::state_slot;
pub use map::{CellKind, GridMap, BUNDLED_MAPS};
pub use observe::{observe, render, Observation, ObservationConfig};
pub use state::{Action, AgentState, Cardinal};
