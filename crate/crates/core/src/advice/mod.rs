//! Advice sources and the action advisor that turns per-action good/bad
//! labels into a single suggested action.

mod inbox;
mod oracle;

use std::time::Duration;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use inbox::{HumanInbox, StateKey};
pub use oracle::{OracleConfig, OracleTable};

use crate::env::{Action, AgentState};

/// One good/bad judgement per action, in [`Action`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionLabels {
    pub good: [bool; Action::COUNT],
}

impl ActionLabels {
    pub fn only(action: Action) -> Self {
        let mut good = [false; Action::COUNT];
        good[action.index()] = true;
        ActionLabels { good }
    }

    pub fn good_actions(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.good[a.index()])
    }
}

/// Picks one of the actions labelled good uniformly at random; `None` when
/// every action is labelled bad.
pub fn select_advice<R: Rng + ?Sized>(labels: &ActionLabels, rng: &mut R) -> Option<Action> {
    let good: Vec<Action> = labels.good_actions().collect();
    good.choose(rng).copied()
}

/// The moment the trainer asks about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdviceQuery {
    pub key: StateKey,
    pub state: AgentState,
}

/// Anything that can be asked for per-action labels. `None` is silence.
pub trait AdviceSource: Send {
    fn labels(&mut self, query: &AdviceQuery) -> Option<ActionLabels>;
}

/// Ground-truth table corrupted by an [`OracleConfig`].
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    table: OracleTable,
    cfg: OracleConfig,
    rng: ChaCha8Rng,
}

impl SyntheticOracle {
    pub fn new(table: OracleTable, cfg: OracleConfig, seed: u64) -> Self {
        SyntheticOracle {
            table,
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl AdviceSource for SyntheticOracle {
    fn labels(&mut self, query: &AdviceQuery) -> Option<ActionLabels> {
        // States outside the table (never produced by the environment) read
        // as silence.
        self.table
            .query(&self.cfg, &query.state, &mut self.rng)
            .ok()
            .flatten()
    }
}

/// Reads labels a live human left in a [`HumanInbox`].
#[derive(Debug, Clone)]
pub struct HumanAdvisor {
    inbox: HumanInbox,
    /// When set, block this long for a submission before treating the
    /// human as silent.
    wait: Option<Duration>,
}

impl HumanAdvisor {
    pub fn new(inbox: HumanInbox, wait: Option<Duration>) -> Self {
        HumanAdvisor { inbox, wait }
    }
}

impl AdviceSource for HumanAdvisor {
    fn labels(&mut self, query: &AdviceQuery) -> Option<ActionLabels> {
        match self.wait {
            Some(t) => self.inbox.wait_take(&query.key, t),
            None => self.inbox.take(&query.key),
        }
    }
}

/// Asks `primary` first and falls back to `fallback` on silence.
pub struct Layered<A, B> {
    pub primary: A,
    pub fallback: B,
}

impl<A: AdviceSource, B: AdviceSource> AdviceSource for Layered<A, B> {
    fn labels(&mut self, query: &AdviceQuery) -> Option<ActionLabels> {
        self.primary
            .labels(query)
            .or_else(|| self.fallback.labels(query))
    }
}

/// Never answers. Used by the baseline agent.
#[derive(Debug, Clone, Copy, Default)]
pub struct Silent;

impl AdviceSource for Silent {
    fn labels(&mut self, _: &AdviceQuery) -> Option<ActionLabels> {
        None
    }
}

/// Queries an advice source and reduces its labels to one action.
pub struct ActionAdvisor {
    source: Box<dyn AdviceSource>,
    rng: ChaCha8Rng,
    queries: u64,
}

impl ActionAdvisor {
    pub fn new(source: Box<dyn AdviceSource>, seed: u64) -> Self {
        ActionAdvisor {
            source,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queries: 0,
        }
    }

    pub fn suggest(&mut self, query: &AdviceQuery) -> Option<Action> {
        self.queries += 1;
        let labels = self.source.labels(query)?;
        select_advice(&labels, &mut self.rng)
    }

    /// Number of times the advice source has been asked.
    pub fn queries(&self) -> u64 {
        self.queries
    }
}
