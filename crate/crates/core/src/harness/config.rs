//! Run configuration and its flat `key = value` text format.
//!
//! One setting per line, `#` starts a comment, keys are dotted
//! (`arbiter.f1 = 1.004`). Unknown keys and unparsable values are errors.

use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::advice::OracleConfig;
use crate::arbiter::{AgentMode, ArbiterConfig, ConfMode};
use crate::env::{GridMap, ObservationConfig, Rewards};
use crate::error::{Error, Result};
use crate::qlearn::{Backend, LearnerConfig};

/// Settings of the live session service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    /// Training steps per second.
    pub speed: f64,
    /// Messages a client may fall behind before it is disconnected.
    pub queue_bound: usize,
    /// Advice older than this many steps is dropped.
    pub staleness_steps: u64,
    /// Block the trainer when it wants advice and none has arrived.
    pub pause_on_advice_request: bool,
    /// How long such a block lasts before the human counts as silent.
    pub advice_timeout_secs: f64,
    /// Fall back to the synthetic oracle when the human is silent.
    pub synthetic_fallback: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            speed: 1.0,
            queue_bound: 256,
            staleness_steps: 2,
            pause_on_advice_request: false,
            advice_timeout_secs: 10.0,
            synthetic_fallback: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Bundled map name or path to a map file.
    pub map: String,
    /// `None` picks the map's default limit.
    pub episode_step_limit: Option<usize>,
    pub total_episodes: u64,
    pub eval_noiseless: bool,
    pub seed: u64,
    pub sessions: usize,
    pub moving_average_window: usize,
    /// Consecutive optimal evaluations that count as convergence.
    pub convergence_window: usize,
    pub rewards: Rewards,
    pub observation: ObservationConfig,
    pub learner: LearnerConfig,
    pub oracle: OracleConfig,
    pub arbiter: ArbiterConfig,
    pub service: ServiceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            map: "easy".into(),
            episode_step_limit: None,
            total_episodes: 3000,
            eval_noiseless: false,
            seed: 0,
            sessions: 20,
            moving_average_window: 50,
            convergence_window: 10,
            rewards: Rewards::default(),
            observation: ObservationConfig::default(),
            learner: LearnerConfig::default(),
            oracle: OracleConfig::default(),
            arbiter: ArbiterConfig::default(),
            service: ServiceConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got {value:?}"))),
    }
}

impl FromStr for AgentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(AgentMode::Baseline),
            "confidence_only" => Ok(AgentMode::ConfidenceOnly),
            "confidence_and_consensus" => Ok(AgentMode::ConfidenceAndConsensus),
            _ => Err(Error::Config(format!("unknown agent mode {s:?}"))),
        }
    }
}

impl RunConfig {
    /// Every recognised key, in file order.
    pub const KEYS: &'static [&'static str] = &[
        "run.map",
        "run.mode",
        "run.episode_step_limit",
        "run.total_episodes",
        "run.eval_noiseless",
        "run.seed",
        "run.sessions",
        "run.moving_average_window",
        "run.convergence_window",
        "env.step_reward",
        "env.goal_reward",
        "observation.depth",
        "observation.width",
        "observation.noise_sigma",
        "observation.max_angle",
        "learner.backend",
        "learner.gamma",
        "learner.alpha",
        "learner.tabular_alpha",
        "learner.hidden_sizes",
        "learner.replay_capacity",
        "learner.batch_size",
        "learner.target_sync_interval",
        "learner.loss_decay",
        "oracle.accuracy",
        "oracle.availability",
        "schedule.t_min",
        "schedule.t_max",
        "schedule.explore_floor",
        "schedule.baseline_floor",
        "arbiter.conf_mode",
        "arbiter.f1",
        "arbiter.f2",
        "arbiter.d_low",
        "arbiter.d_high",
        "arbiter.p_cons_init",
        "service.speed",
        "service.queue_bound",
        "service.staleness_steps",
        "service.pause_on_advice_request",
        "service.advice_timeout_secs",
        "service.synthetic_fallback",
    ];

    pub fn mode(&self) -> AgentMode {
        self.arbiter.mode
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "run.map" => self.map = v.to_string(),
            "run.mode" => self.arbiter.mode = v.parse()?,
            "run.episode_step_limit" => {
                self.episode_step_limit = if v == "auto" { None } else { Some(parse(key, v)?) }
            }
            "run.total_episodes" => self.total_episodes = parse(key, v)?,
            "run.eval_noiseless" => self.eval_noiseless = parse_bool(key, v)?,
            "run.seed" => self.seed = parse(key, v)?,
            "run.sessions" => self.sessions = parse(key, v)?,
            "run.moving_average_window" => self.moving_average_window = parse(key, v)?,
            "run.convergence_window" => self.convergence_window = parse(key, v)?,
            "env.step_reward" => self.rewards.step = parse(key, v)?,
            "env.goal_reward" => self.rewards.goal = parse(key, v)?,
            "observation.depth" => self.observation.depth = parse(key, v)?,
            "observation.width" => self.observation.width = parse(key, v)?,
            "observation.noise_sigma" => self.observation.noise_sigma = parse(key, v)?,
            "observation.max_angle" => self.observation.max_angle_deg = parse(key, v)?,
            "learner.backend" => {
                self.learner.backend = match v {
                    "network" => Backend::Network,
                    "tabular" => Backend::Tabular,
                    _ => return Err(Error::Config(format!("{key}: unknown backend {v:?}"))),
                }
            }
            "learner.gamma" => self.learner.gamma = parse(key, v)?,
            "learner.alpha" => self.learner.alpha = parse(key, v)?,
            "learner.tabular_alpha" => self.learner.tabular_alpha = parse(key, v)?,
            "learner.hidden_sizes" => {
                self.learner.hidden_sizes = if v.is_empty() {
                    Vec::new()
                } else {
                    v.split(',')
                        .map(|w| parse(key, w.trim()))
                        .collect::<Result<_>>()?
                }
            }
            "learner.replay_capacity" => self.learner.replay_capacity = parse(key, v)?,
            "learner.batch_size" => self.learner.batch_size = parse(key, v)?,
            "learner.target_sync_interval" => self.learner.target_sync_interval = parse(key, v)?,
            "learner.loss_decay" => self.learner.loss_decay = parse(key, v)?,
            "oracle.accuracy" => self.oracle.accuracy = parse(key, v)?,
            "oracle.availability" => self.oracle.availability = parse(key, v)?,
            "schedule.t_min" => self.arbiter.schedule.t_min = parse(key, v)?,
            "schedule.t_max" => self.arbiter.schedule.t_max = parse(key, v)?,
            "schedule.explore_floor" => self.arbiter.schedule.explore_floor = parse(key, v)?,
            "schedule.baseline_floor" => self.arbiter.schedule.baseline_floor = parse(key, v)?,
            "arbiter.conf_mode" => {
                self.arbiter.conf_mode = match v {
                    "prose" => ConfMode::Prose,
                    "literal" => ConfMode::Literal,
                    _ => return Err(Error::Config(format!("{key}: unknown mode {v:?}"))),
                }
            }
            "arbiter.f1" => self.arbiter.consensus.f1 = parse(key, v)?,
            "arbiter.f2" => self.arbiter.consensus.f2 = parse(key, v)?,
            "arbiter.d_low" => self.arbiter.consensus.d_low = parse(key, v)?,
            "arbiter.d_high" => self.arbiter.consensus.d_high = parse(key, v)?,
            "arbiter.p_cons_init" => self.arbiter.consensus.p_cons_init = parse(key, v)?,
            "service.speed" => self.service.speed = parse(key, v)?,
            "service.queue_bound" => self.service.queue_bound = parse(key, v)?,
            "service.staleness_steps" => self.service.staleness_steps = parse(key, v)?,
            "service.pause_on_advice_request" => {
                self.service.pause_on_advice_request = parse_bool(key, v)?
            }
            "service.advice_timeout_secs" => self.service.advice_timeout_secs = parse(key, v)?,
            "service.synthetic_fallback" => self.service.synthetic_fallback = parse_bool(key, v)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Current value of `key`, formatted as the file format expects.
    pub fn get(&self, key: &str) -> Option<String> {
        let s = match key {
            "run.map" => self.map.clone(),
            "run.mode" => self.arbiter.mode.as_str().to_string(),
            "run.episode_step_limit" => self
                .episode_step_limit
                .map_or("auto".to_string(), |v| v.to_string()),
            "run.total_episodes" => self.total_episodes.to_string(),
            "run.eval_noiseless" => self.eval_noiseless.to_string(),
            "run.seed" => self.seed.to_string(),
            "run.sessions" => self.sessions.to_string(),
            "run.moving_average_window" => self.moving_average_window.to_string(),
            "run.convergence_window" => self.convergence_window.to_string(),
            "env.step_reward" => self.rewards.step.to_string(),
            "env.goal_reward" => self.rewards.goal.to_string(),
            "observation.depth" => self.observation.depth.to_string(),
            "observation.width" => self.observation.width.to_string(),
            "observation.noise_sigma" => self.observation.noise_sigma.to_string(),
            "observation.max_angle" => self.observation.max_angle_deg.to_string(),
            "learner.backend" => match self.learner.backend {
                Backend::Network => "network".into(),
                Backend::Tabular => "tabular".into(),
            },
            "learner.gamma" => self.learner.gamma.to_string(),
            "learner.alpha" => self.learner.alpha.to_string(),
            "learner.tabular_alpha" => self.learner.tabular_alpha.to_string(),
            "learner.hidden_sizes" => self
                .learner
                .hidden_sizes
                .iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "learner.replay_capacity" => self.learner.replay_capacity.to_string(),
            "learner.batch_size" => self.learner.batch_size.to_string(),
            "learner.target_sync_interval" => self.learner.target_sync_interval.to_string(),
            "learner.loss_decay" => self.learner.loss_decay.to_string(),
            "oracle.accuracy" => self.oracle.accuracy.to_string(),
            "oracle.availability" => self.oracle.availability.to_string(),
            "schedule.t_min" => self.arbiter.schedule.t_min.to_string(),
            "schedule.t_max" => self.arbiter.schedule.t_max.to_string(),
            "schedule.explore_floor" => self.arbiter.schedule.explore_floor.to_string(),
            "schedule.baseline_floor" => self.arbiter.schedule.baseline_floor.to_string(),
            "arbiter.conf_mode" => match self.arbiter.conf_mode {
                ConfMode::Prose => "prose".into(),
                ConfMode::Literal => "literal".into(),
            },
            "arbiter.f1" => self.arbiter.consensus.f1.to_string(),
            "arbiter.f2" => self.arbiter.consensus.f2.to_string(),
            "arbiter.d_low" => self.arbiter.consensus.d_low.to_string(),
            "arbiter.d_high" => self.arbiter.consensus.d_high.to_string(),
            "arbiter.p_cons_init" => self.arbiter.consensus.p_cons_init.to_string(),
            "service.speed" => self.service.speed.to_string(),
            "service.queue_bound" => self.service.queue_bound.to_string(),
            "service.staleness_steps" => self.service.staleness_steps.to_string(),
            "service.pause_on_advice_request" => self.service.pause_on_advice_request.to_string(),
            "service.advice_timeout_secs" => self.service.advice_timeout_secs.to_string(),
            "service.synthetic_fallback" => self.service.synthetic_fallback.to_string(),
            _ => return None,
        };
        Some(s)
    }

    /// Applies a `key=value` override as given on the command line.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        self.set(k, v)
    }

    /// Parses a configuration file body on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", n + 1))
            })?;
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Serialises every key; parsing the result gives back an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            out.push_str(&format!("{key} = {}\n", self.get(key).unwrap()));
        }
        out
    }

    /// Resolves `map` to a bundled map or reads it from disk.
    pub fn load_map(&self) -> Result<GridMap> {
        if let Some(map) = GridMap::bundled(&self.map) {
            return Ok(map);
        }
        let text = std::fs::read_to_string(&self.map)
            .map_err(|e| Error::Config(format!("cannot read map {:?}: {e}", self.map)))?;
        let name = Path::new(&self.map)
            .file_stem()
            .map_or(self.map.clone(), |s| s.to_string_lossy().into_owned());
        GridMap::parse(name, &text)
    }

    /// Step limit for `map`: the configured value, else 200 on the easy map,
    /// 500 on the hard map and ten times the shortest path elsewhere.
    pub fn step_limit(&self, map: &GridMap) -> usize {
        self.episode_step_limit.unwrap_or(match map.name() {
            "easy" => 200,
            "hard" => 500,
            _ => 10 * map.shortest_path_len(),
        })
    }

    pub fn validate(&self, map: &GridMap) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.total_episodes == 0 {
            return bad("run.total_episodes must be >= 1".into());
        }
        if self.sessions == 0 {
            return bad("run.sessions must be >= 1".into());
        }
        if self.moving_average_window == 0 || self.convergence_window == 0 {
            return bad("run windows must be >= 1".into());
        }
        let limit = self.step_limit(map);
        if limit < map.shortest_path_len() {
            return bad(format!(
                "run.episode_step_limit {limit} is below the shortest path {}",
                map.shortest_path_len()
            ));
        }
        if self.observation.width.is_multiple_of(2) || self.observation.depth == 0 {
            return bad("observation.width must be odd and observation.depth >= 1".into());
        }
        if self.observation.noise_sigma.is_nan() || self.observation.noise_sigma < 0.0 || !(0.0..45.0).contains(&self.observation.max_angle_deg) {
            return bad("observation.noise_sigma must be >= 0 and observation.max_angle in [0, 45)".into());
        }
        if self.service.speed.is_nan() || self.service.speed <= 0.0 || self.service.queue_bound == 0 {
            return bad("service.speed must be > 0 and service.queue_bound >= 1".into());
        }
        if self.service.advice_timeout_secs.is_nan() || self.service.advice_timeout_secs < 0.0 {
            return bad("service.advice_timeout_secs must be >= 0".into());
        }
        self.learner.validate()?;
        self.oracle.validate()?;
        self.arbiter.schedule.validate()?;
        self.arbiter.consensus.validate()?;
        Ok(())
    }
}
