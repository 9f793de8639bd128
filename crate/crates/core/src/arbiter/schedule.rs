use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Episode window over which exploration decays, and the floors it decays to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    pub t_min: u64,
    pub t_max: u64,
    /// Final probability of the exploration check.
    pub explore_floor: f64,
    /// Final epsilon of the baseline agent.
    pub baseline_floor: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            t_min: 600,
            t_max: 2000,
            explore_floor: 0.01,
            baseline_floor: 0.0001,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_min >= self.t_max {
            return Err(Error::Config("schedule.t_min must be < schedule.t_max".into()));
        }
        let open = |p: f64| p > 0.0 && p < 1.0;
        if !open(self.explore_floor) || !open(self.baseline_floor) {
            return Err(Error::Config("schedule floors must be in (0, 1)".into()));
        }
        Ok(())
    }

    fn progress(&self, t: u64) -> f64 {
        (t - self.t_min) as f64 / (self.t_max - self.t_min) as f64
    }
}

/// Probability of passing the exploration check in episode `t`: 1 before
/// `t_min`, exponential decay to `explore_floor` at `t_max`, flat after.
pub fn p_explore(t: u64, cfg: &ScheduleConfig) -> f64 {
    if t < cfg.t_min {
        1.0
    } else if t < cfg.t_max {
        (cfg.explore_floor.ln() * cfg.progress(t)).exp()
    } else {
        cfg.explore_floor
    }
}

/// Epsilon of the baseline agent: 1 before `t_min`, linear decay to
/// `baseline_floor` at `t_max`, flat after.
pub fn baseline_epsilon(t: u64, cfg: &ScheduleConfig) -> f64 {
    if t < cfg.t_min {
        1.0
    } else if t < cfg.t_max {
        1.0 - (1.0 - cfg.baseline_floor) * cfg.progress(t)
    } else {
        cfg.baseline_floor
    }
}
