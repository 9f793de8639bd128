use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the confidence check maps relative loss to a probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfMode {
    /// Trust the learner more as its loss falls relative to the worst loss
    /// seen: `1 - 1 / (1 - ln sqrt(l / l_max))`.
    Prose,
    /// `-1 / (ln sqrt(l / l_max) - 1)`, which grows with the loss.
    Literal,
}

/// Probability of passing the confidence check.
///
/// Before any loss has been seen (`l_max == 0`) the result is the
/// `l == l_max` limit: 1 for [`ConfMode::Literal`], 0 for [`ConfMode::Prose`].
pub fn p_conf(l: f64, l_max: f64, mode: ConfMode) -> Result<f64> {
    if l < 0.0 || l.is_nan() {
        return Err(Error::NegativeLoss(l));
    }
    if l_max < 0.0 || l_max.is_nan() {
        return Err(Error::NegativeLoss(l_max));
    }
    let ratio = if l_max == 0.0 { 1.0 } else { (l / l_max).min(1.0) };
    // -1 / (ln sqrt(r) - 1) == 1 / (1 - ln(r) / 2); ln 0 = -inf gives 0.
    let literal = 1.0 / (1.0 - 0.5 * ratio.ln());
    Ok(match mode {
        ConfMode::Literal => literal,
        ConfMode::Prose => 1.0 - literal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsensusConfig {
    /// Multiplier applied on agreement; must exceed 1.
    pub f1: f64,
    /// Multiplier applied on disagreement; must be below 1.
    pub f2: f64,
    /// Drift factor while `p_cons < 0.5`.
    pub d_low: f64,
    /// Drift factor while `p_cons > 0.5`.
    pub d_high: f64,
    pub p_cons_init: f64,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        ConsensusConfig {
            f1: 1.004,
            f2: 0.998,
            d_low: 1.001,
            d_high: 0.999,
            p_cons_init: 0.5,
        }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.f1 > 1.0 && self.f2 < 1.0 && self.f2 > 0.0) {
            return Err(Error::Config("arbiter.f1 must be > 1 and arbiter.f2 in (0, 1)".into()));
        }
        if !(self.d_low > 0.0 && self.d_high > 0.0) {
            return Err(Error::Config("arbiter.d_low and arbiter.d_high must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.p_cons_init) {
            return Err(Error::Config("arbiter.p_cons_init must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One step of the consensus recurrence: scale by `f1` on agreement or `f2`
/// on disagreement, times the drift `d` that pulls towards 0.5, clamped to
/// `[0, 1]`. Exactly at 0.5 there is no drift.
pub fn update_consensus(p_prev: f64, agree: bool, cfg: &ConsensusConfig) -> f64 {
    let d = if p_prev < 0.5 {
        cfg.d_low
    } else if p_prev > 0.5 {
        cfg.d_high
    } else {
        1.0
    };
    let f = if agree { cfg.f1 } else { cfg.f2 };
    (p_prev * f * d).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const E2: f64 = 0.1353352832366127; // e^-2

    #[test]
    fn literal_points() {
        assert_eq!(p_conf(7.0, 7.0, ConfMode::Literal).unwrap(), 1.0);
        assert!((p_conf(7.0 * E2, 7.0, ConfMode::Literal).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(p_conf(0.0, 7.0, ConfMode::Literal).unwrap(), 0.0);
    }

    #[test]
    fn prose_is_complement() {
        assert_eq!(p_conf(7.0, 7.0, ConfMode::Prose).unwrap(), 0.0);
        assert!((p_conf(7.0 * E2, 7.0, ConfMode::Prose).unwrap() - 0.5).abs() < 1e-12);
        assert!(p_conf(1e-300, 7.0, ConfMode::Prose).unwrap() > 0.99);
        assert_eq!(p_conf(0.0, 7.0, ConfMode::Prose).unwrap(), 1.0);
    }

    #[test]
    fn untrained_limit() {
        assert_eq!(p_conf(0.0, 0.0, ConfMode::Literal).unwrap(), 1.0);
        assert_eq!(p_conf(0.0, 0.0, ConfMode::Prose).unwrap(), 0.0);
    }

    #[test]
    fn negative_loss_is_an_error() {
        assert!(matches!(p_conf(-1.0, 2.0, ConfMode::Prose), Err(Error::NegativeLoss(_))));
        assert!(matches!(p_conf(1.0, -2.0, ConfMode::Prose), Err(Error::NegativeLoss(_))));
    }

    #[test]
    fn consensus_examples() {
        let c = ConsensusConfig::default();
        assert!((update_consensus(0.4, true, &c) - 0.4 * 1.004 * 1.001).abs() < 1e-12);
        assert!((update_consensus(0.4, true, &c) - 0.402_001_6).abs() < 1e-9);
        assert!((update_consensus(0.6, false, &c) - 0.598_201_2).abs() < 1e-9);
        assert_eq!(update_consensus(1.0, true, &c), 1.0);
        assert_eq!(update_consensus(0.5, true, &c), 0.502);
    }

    #[test]
    fn iterated_agreement_saturates() {
        let c = ConsensusConfig::default();
        let mut p = 0.5;
        let mut steps = 0;
        while p < 1.0 {
            p = update_consensus(p, true, &c);
            steps += 1;
            assert!(steps < 10_000);
        }
        assert_eq!(p, 1.0);
    }

    proptest! {
        #[test]
        fn checks_are_probabilities(l in 0.0f64..1e6, extra in 0.0f64..1e6, p in 0.0f64..=1.0, agree: bool) {
            let l_max = l + extra;
            for mode in [ConfMode::Prose, ConfMode::Literal] {
                let v = p_conf(l, l_max, mode).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let next = update_consensus(p, agree, &ConsensusConfig::default());
            prop_assert!((0.0..=1.0).contains(&next));
        }

        #[test]
        fn literal_increases_with_loss(a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let f = |l| p_conf(l, 1.0, ConfMode::Literal).unwrap();
            prop_assert!(f(lo) <= f(hi));
            let g = |l| p_conf(l, 1.0, ConfMode::Prose).unwrap();
            prop_assert!(g(lo) >= g(hi));
        }
    }
}
