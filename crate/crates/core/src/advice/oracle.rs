use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{enumerate_states, Action, AgentState, GridMap};
use crate::error::{Error, Result};

use super::ActionLabels;

/// Ground-truth labels: for every latent state, the actions that start a
/// shortest path to the goal.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    labels: BTreeMap<AgentState, ActionLabels>,
}

/// Noise model of the synthetic oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Probability that each per-action label is reported truthfully.
    pub accuracy: f64,
    /// Probability that the oracle answers at all.
    pub availability: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            accuracy: 1.0,
            availability: 1.0,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.accuracy) || !(0.0..=1.0).contains(&self.availability) {
            return Err(Error::Config(
                "oracle.accuracy and oracle.availability must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

impl OracleTable {
    /// Labels every state by backward BFS from the goal. An action is good
    /// exactly when it moves the agent one step closer to the goal. Facing
    /// does not affect movement, so all four facings of a cell share labels.
    /// Goal states are terminal; all actions are labelled good there.
    pub fn build(map: &GridMap) -> Result<Self> {
        let dist = map.distances_to_goal();
        let at = |cell| dist[map.cell_index(cell)];
        if at(map.start()).is_none() {
            return Err(Error::NoPath);
        }
        let mut labels = BTreeMap::new();
        for state in enumerate_states(map) {
            let here = at(state.cell());
            let good = match here {
                Some(0) => [true; Action::COUNT],
                Some(d) => Action::ALL.map(|a| {
                    map.neighbor(state.cell(), a)
                        .is_some_and(|n| at(n) == Some(d - 1))
                }),
                // Cut off from the goal: no move helps.
                None => [false; Action::COUNT],
            };
            labels.insert(state, ActionLabels { good });
        }
        Ok(OracleTable { labels })
    }

    pub fn labels(&self, state: &AgentState) -> Option<&ActionLabels> {
        self.labels.get(state)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&AgentState, &ActionLabels)> {
        self.labels.iter()
    }

    /// Samples a possibly corrupted answer. With probability
    /// `1 - availability` the oracle stays silent; otherwise each label is
    /// flipped independently with probability `1 - accuracy`.
    pub fn query<R: Rng + ?Sized>(
        &self,
        cfg: &OracleConfig,
        state: &AgentState,
        rng: &mut R,
    ) -> Result<Option<ActionLabels>> {
        let truth = self.labels(state).ok_or(Error::UnknownState {
            x: state.x,
            z: state.z,
            facing: state.facing.as_char(),
        })?;
        if rng.random::<f64>() >= cfg.availability {
            return Ok(None);
        }
        let good = truth
            .good
            .map(|g| if rng.random::<f64>() < cfg.accuracy { g } else { !g });
        Ok(Some(ActionLabels { good }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::Cardinal;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn good(a: &[Action]) -> ActionLabels {
        let mut good = [false; 4];
        for x in a {
            good[x.index()] = true;
        }
        ActionLabels { good }
    }

    #[test]
    fn line_map_labels() {
        let map = GridMap::parse("line", "S.G").unwrap();
        let table = OracleTable::build(&map).unwrap();
        for f in Cardinal::ALL {
            assert_eq!(table.labels(&AgentState::new(0, 0, f)), Some(&good(&[Action::MoveE])));
            assert_eq!(table.labels(&AgentState::new(1, 0, f)), Some(&good(&[Action::MoveE])));
        }
    }

    #[test]
    fn two_equal_routes_are_both_optimal() {
        // Brute-force distance oracle: Manhattan distance on an open grid.
        let map = GridMap::parse("open", "S..\n...\n..G").unwrap();
        let table = OracleTable::build(&map).unwrap();
        for (state, labels) in table.iter() {
            let d = |x: usize, z: usize| (2 - x) + (2 - z);
            if state.cell() == map.goal() {
                continue;
            }
            let here = d(state.x, state.z);
            for a in Action::ALL {
                let expected = map
                    .neighbor(state.cell(), a)
                    .is_some_and(|(x, z)| d(x, z) + 1 == here);
                assert_eq!(labels.good[a.index()], expected, "{state:?} {a}");
            }
        }
        let corner = table.labels(&AgentState::new(0, 0, Cardinal::N)).unwrap();
        assert_eq!(corner, &good(&[Action::MoveE, Action::MoveS]));
    }

    #[test]
    fn labels_are_shortest_path_moves_on_bundled_maps() {
        for name in crate::env::BUNDLED_MAPS {
            let map = GridMap::bundled(name).unwrap();
            let table = OracleTable::build(&map).unwrap();
            assert_eq!(table.iter().count(), enumerate_states(&map).len());
            for (s, labels) in table.iter() {
                assert!(labels.good.iter().any(|g| *g));
                if s.cell() == map.goal() {
                    continue;
                }
                let d = map.distance_to_goal(s.cell()).unwrap();
                for a in labels.good_actions() {
                    let n = map.neighbor(s.cell(), a).unwrap();
                    assert_eq!(map.distance_to_goal(n), Some(d - 1));
                }
            }
        }
    }

    #[test]
    fn degenerate_noise_settings() {
        let map = GridMap::bundled("easy").unwrap();
        let table = OracleTable::build(&map).unwrap();
        let s = crate::env::reset(&map);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let truthful = OracleConfig::default();
        for _ in 0..100 {
            assert_eq!(
                table.query(&truthful, &s, &mut rng).unwrap().as_ref(),
                table.labels(&s)
            );
        }
        let silent = OracleConfig {
            availability: 0.0,
            ..truthful
        };
        for _ in 0..100 {
            assert_eq!(table.query(&silent, &s, &mut rng).unwrap(), None);
        }
    }

    #[test]
    fn coin_flip_accuracy() {
        // Monte-Carlo: at accuracy 0.5 labels agree with the truth half the time.
        let map = GridMap::bundled("hard").unwrap();
        let table = OracleTable::build(&map).unwrap();
        let s = crate::env::reset(&map);
        let truth = table.labels(&s).unwrap().good;
        let cfg = OracleConfig {
            accuracy: 0.5,
            availability: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let queries = 10_000;
        let mut agree = 0;
        for _ in 0..queries {
            let got = table.query(&cfg, &s, &mut rng).unwrap().unwrap();
            agree += got.good.iter().zip(&truth).filter(|(a, b)| a == b).count();
        }
        let rate = agree as f64 / (queries * 4) as f64;
        assert!((0.49..=0.51).contains(&rate), "{rate}");
    }

    #[test]
    fn unknown_state() {
        let map = GridMap::bundled("easy").unwrap();
        let table = OracleTable::build(&map).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let wall = AgentState::new(0, 0, Cardinal::N);
        assert!(matches!(
            table.query(&OracleConfig::default(), &wall, &mut rng),
            Err(Error::UnknownState { .. })
        ));
    }
}
