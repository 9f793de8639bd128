use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::map::{CellKind, GridMap};
use super::state::AgentState;

/// Shape and noise of the egocentric view.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationConfig {
    /// Rows of cells ahead of the agent.
    pub depth: usize,
    /// Columns across the view; must be odd so the agent sits in the middle.
    pub width: usize,
    pub noise_sigma: f64,
    /// Bound on the random view-angle perturbation, in degrees.
    pub max_angle_deg: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig {
            depth: 5,
            width: 3,
            noise_sigma: 0.02,
            max_angle_deg: 2.0,
        }
    }
}

impl ObservationConfig {
    /// Length of every feature vector produced with this configuration.
    pub fn feature_len(&self) -> usize {
        self.depth * self.width * CellKind::COUNT
    }
}

/// A noisy first-person feature vector. The agent's true state is not
/// recoverable from it in general: cells with identical surroundings alias.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub features: Vec<f64>,
    pub view_angle_offset: f64,
}

/// Noiseless features for a given view-angle offset (degrees).
///
/// The window covers `depth` rows starting one cell ahead and `width` columns
/// centred on the agent, rotated into its facing frame, one-hot encoded row by
/// row from left to right. A non-zero offset shears each row sideways by
/// `tan(offset) * distance` cells, blending every cell with its lateral
/// neighbour in proportion to the shift.
pub fn render(map: &GridMap, state: &AgentState, cfg: &ObservationConfig, offset_deg: f64) -> Vec<f64> {
    let (fx, fz) = state.facing.delta();
    let (rx, rz) = state.facing.right();
    let half = (cfg.width / 2) as i64;
    let tan = offset_deg.to_radians().tan();
    let mut features = vec![0.0; cfg.feature_len()];
    let kind_at = |ahead: i64, lateral: i64| {
        map.kind_at(
            state.x as i64 + fx * ahead + rx * lateral,
            state.z as i64 + fz * ahead + rz * lateral,
        )
    };
    for row in 0..cfg.depth {
        let ahead = row as i64 + 1;
        let shift = (tan * ahead as f64).clamp(-1.0, 1.0);
        let toward = if shift >= 0.0 { 1 } else { -1 };
        for col in 0..cfg.width {
            let lateral = col as i64 - half;
            let base = (row * cfg.width + col) * CellKind::COUNT;
            features[base + kind_at(ahead, lateral).index()] += 1.0 - shift.abs();
            features[base + kind_at(ahead, lateral + toward).index()] += shift.abs();
        }
    }
    features
}

/// Draws a view-angle offset uniformly in `[-max_angle, max_angle]`, renders
/// the view and adds zero-mean Gaussian noise.
pub fn observe<R: Rng + ?Sized>(
    map: &GridMap,
    state: &AgentState,
    cfg: &ObservationConfig,
    rng: &mut R,
) -> Observation {
    let offset = if cfg.max_angle_deg > 0.0 {
        rng.random_range(-cfg.max_angle_deg..=cfg.max_angle_deg)
    } else {
        0.0
    };
    let mut features = render(map, state, cfg, offset);
    if cfg.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_sigma).expect("sigma is positive");
        for f in &mut features {
            *f += noise.sample(rng);
        }
    }
    Observation {
        features,
        view_angle_offset: offset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{enumerate_states, Cardinal};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn argmax_blocks(features: &[f64]) -> Vec<usize> {
        features
            .chunks(CellKind::COUNT)
            .map(|b| {
                b.iter()
                    .enumerate()
                    .fold((0, f64::MIN), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
                    .0
            })
            .collect()
    }

    #[test]
    fn noiseless_open_window_is_exact_one_hot() {
        let map = GridMap::parse("open", "...\n...\n...\n.S.\n..G").unwrap();
        let cfg = ObservationConfig {
            depth: 3,
            width: 3,
            noise_sigma: 0.0,
            max_angle_deg: 0.0,
        };
        let state = AgentState::new(1, 3, Cardinal::N);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = observe(&map, &state, &cfg, &mut rng);
        assert_eq!(obs.view_angle_offset, 0.0);
        let floor = CellKind::Floor.index();
        for (i, v) in obs.features.iter().enumerate() {
            let expected = if i % CellKind::COUNT == floor { 1.0 } else { 0.0 };
            assert_eq!(*v, expected, "feature {i}");
        }
    }

    #[test]
    fn view_rotates_with_facing() {
        // Goal directly east of the agent.
        let map = GridMap::parse("x", "SG").unwrap();
        let cfg = ObservationConfig {
            depth: 1,
            width: 3,
            ..Default::default()
        };
        let east = render(&map, &AgentState::new(0, 0, Cardinal::E), &cfg, 0.0);
        assert_eq!(argmax_blocks(&east), vec![1, 3, 1]);
        let west = render(&map, &AgentState::new(0, 0, Cardinal::W), &cfg, 0.0);
        assert_eq!(argmax_blocks(&west), vec![1, 1, 1]);
    }

    #[test]
    fn angle_offset_blends_neighbouring_columns() {
        let map = GridMap::bundled("hard").unwrap();
        let cfg = ObservationConfig::default();
        let state = AgentState::new(1, 1, Cardinal::E);
        let skewed = render(&map, &state, &cfg, 2.0);
        for block in skewed.chunks(CellKind::COUNT) {
            assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(
            argmax_blocks(&skewed),
            argmax_blocks(&render(&map, &state, &cfg, 0.0))
        );
        assert_ne!(skewed, render(&map, &state, &cfg, 0.0));
    }

    #[test]
    fn noisy_views_keep_the_cell_reading() {
        // Monte-Carlo over 10,000 draws: noise never flips a one-hot block.
        let map = GridMap::bundled("hard").unwrap();
        let cfg = ObservationConfig::default();
        let state = AgentState::new(4, 3, Cardinal::S);
        let clean = argmax_blocks(&render(&map, &state, &cfg, 0.0));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let first = observe(&map, &state, &cfg, &mut rng);
        let second = observe(&map, &state, &cfg, &mut rng);
        assert_ne!(first.features, second.features);
        let draws = 10_000;
        let same = (0..draws)
            .filter(|_| argmax_blocks(&observe(&map, &state, &cfg, &mut rng).features) == clean)
            .count();
        assert!(same as f64 / draws as f64 >= 0.99, "{same}/{draws}");
    }

    #[test]
    fn aliased_corridor_cells_render_identically() {
        let map = GridMap::parse("corridor", "#########\nS.......G\n#########").unwrap();
        let cfg = ObservationConfig {
            depth: 3,
            ..Default::default()
        };
        let a = render(&map, &AgentState::new(1, 1, Cardinal::E), &cfg, 0.0);
        let b = render(&map, &AgentState::new(2, 1, Cardinal::E), &cfg, 0.0);
        assert_eq!(a, b);
    }

    #[test]
    fn feature_length_is_constant() {
        let map = GridMap::bundled("hard").unwrap();
        let cfg = ObservationConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in enumerate_states(&map) {
            let obs = observe(&map, &s, &cfg, &mut rng);
            assert_eq!(obs.features.len(), cfg.feature_len());
            assert!(obs.features.iter().all(|f| f.is_finite()));
            assert!(obs.view_angle_offset.abs() <= 2.0);
        }
    }
}
