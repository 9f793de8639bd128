use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::advice::{
    ActionAdvisor, AdviceQuery, AdviceSource, OracleTable, Silent, StateKey, SyntheticOracle,
};
use crate::arbiter::{Arbiter, CheckProbabilities, Decision, DecisionSource};
use crate::env::{self, AgentState, GridMap, ObservationConfig};
use crate::error::{Error, Result};
use crate::qlearn::{Checkpoint, Learner, Percept};

use super::config::RunConfig;

/// Per-episode training and evaluation summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub train_return: f64,
    pub eval_return: f64,
    pub n_explore: u64,
    pub n_exploit: u64,
    pub n_listen: u64,
    /// Exploration probability in effect during the episode.
    pub p_explore: f64,
    /// Mean confidence-check probability over the episode's steps.
    pub p_conf_mean: f64,
    /// Consensus probability at the end of the episode.
    pub p_cons: f64,
    /// Smoothed training loss at the end of the episode.
    pub loss: Option<f64>,
}

impl EpisodeRecord {
    pub fn steps(&self) -> u64 {
        self.n_explore + self.n_exploit + self.n_listen
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub records: Vec<EpisodeRecord>,
    /// Best achievable evaluation return on the map.
    pub optimal_return: f64,
    /// Evaluation hit the optimum for `convergence_window` episodes in a row.
    pub converged: bool,
    /// First episode whose evaluation reached the optimum.
    pub episodes_to_optimal: Option<u64>,
    /// Set when training diverged; `records` then ends at the failure.
    pub failure: Option<String>,
    /// Learner parameters at the end of the run.
    #[serde(skip)]
    pub checkpoint: Option<Checkpoint>,
}

impl SessionResult {
    pub fn from_records(records: Vec<EpisodeRecord>, optimal_return: f64, window: usize) -> Self {
        let hits: Vec<bool> = records.iter().map(|r| r.eval_return == optimal_return).collect();
        let episodes_to_optimal = hits.iter().position(|h| *h).map(|i| records[i].episode);
        let converged = hits.windows(window).any(|w| w.iter().all(|h| *h));
        SessionResult {
            records,
            optimal_return,
            converged,
            episodes_to_optimal,
            failure: None,
            checkpoint: None,
        }
    }

    pub fn eval_returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eval_return).collect()
    }

    pub fn final_eval_return(&self) -> Option<f64> {
        self.records.last().map(|r| r.eval_return)
    }
}

/// What happened on one training step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Key of the state the decision was taken in.
    pub key: StateKey,
    pub decision: Decision,
    pub state: AgentState,
    pub next_state: AgentState,
    pub reward: f64,
    /// Training return of the episode so far, including this step.
    pub episode_return: f64,
    /// The episode ended, by reaching the goal or the step limit.
    pub episode_over: bool,
}

#[derive(Debug, Default, Clone, Copy)]
struct EpisodeTally {
    ret: f64,
    counts: [u64; 3],
    p_conf_sum: f64,
}

/// Stream layout inside a session: one independent ChaCha stream per
/// consumer, so changing how often one consumer draws does not shift the
/// others.
const STREAM_ENV: u64 = 1;
const STREAM_ARBITER: u64 = 2;
const STREAM_LEARNER: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_INIT: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Seeds of the advisor's random draws for a session seed.
pub fn advisor_seeds(seed: u64) -> (u64, u64) {
    (seed ^ 0x9e37_79b9_7f4a_7c15, seed ^ 0xbf58_476d_1ce4_e5b9)
}

/// One training run: environment, learner, arbiter and advisor, advanced a
/// step at a time.
pub struct Session {
    cfg: RunConfig,
    map: GridMap,
    step_limit: usize,
    optimal_return: f64,
    learner: Learner,
    arbiter: Arbiter,
    advisor: ActionAdvisor,
    env_rng: ChaCha8Rng,
    arbiter_rng: ChaCha8Rng,
    learner_rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
    episode: u64,
    step: u64,
    percept: Percept,
    tally: EpisodeTally,
    records: Vec<EpisodeRecord>,
}

impl Session {
    /// Session with the advice source implied by the agent mode: none for
    /// the baseline, the synthetic oracle otherwise.
    pub fn new(cfg: &RunConfig, seed: u64) -> Result<Self> {
        let map = cfg.load_map()?;
        let source: Box<dyn AdviceSource> = if cfg.mode().uses_advice() {
            let table = OracleTable::build(&map)?;
            Box::new(SyntheticOracle::new(table, cfg.oracle, advisor_seeds(seed).0))
        } else {
            Box::new(Silent)
        };
        Self::with_source(cfg, map, seed, source)
    }

    pub fn with_source(
        cfg: &RunConfig,
        map: GridMap,
        seed: u64,
        source: Box<dyn AdviceSource>,
    ) -> Result<Self> {
        cfg.validate(&map)?;
        let mut init_rng = stream(seed, STREAM_INIT);
        let learner = Learner::new(&cfg.learner, &map, cfg.observation.feature_len(), &mut init_rng);
        let optimal_return = cfg.rewards.goal + cfg.rewards.step * map.shortest_path_len() as f64;
        let mut session = Session {
            step_limit: cfg.step_limit(&map),
            optimal_return,
            learner,
            arbiter: Arbiter::new(cfg.arbiter),
            advisor: ActionAdvisor::new(source, advisor_seeds(seed).1),
            env_rng: stream(seed, STREAM_ENV),
            arbiter_rng: stream(seed, STREAM_ARBITER),
            learner_rng: stream(seed, STREAM_LEARNER),
            eval_rng: stream(seed, STREAM_EVAL),
            episode: 0,
            step: 0,
            percept: Percept {
                state: env::reset(&map),
                obs: None,
            },
            tally: EpisodeTally::default(),
            records: Vec::new(),
            cfg: cfg.clone(),
            map,
        };
        session.percept = session.perceive(env::reset(&session.map), false);
        Ok(session)
    }

    /// Replaces the learner, e.g. with one restored from a checkpoint.
    pub fn set_learner(&mut self, learner: Learner) {
        self.learner = learner;
        let state = self.percept.state;
        self.percept = self.perceive(state, false);
    }

    fn perceive(&mut self, state: AgentState, for_eval: bool) -> Percept {
        if !self.learner.needs_observations() {
            return Percept { state, obs: None };
        }
        let obs = if for_eval && self.cfg.eval_noiseless {
            env::Observation {
                features: env::render(&self.map, &state, &self.cfg.observation, 0.0),
                view_angle_offset: 0.0,
            }
        } else {
            let rng = if for_eval {
                &mut self.eval_rng
            } else {
                &mut self.env_rng
            };
            env::observe(&self.map, &state, &self.cfg.observation, rng)
        };
        Percept {
            state,
            obs: Some(obs),
        }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn learner(&self) -> &Learner {
        &self.learner
    }

    pub fn arbiter(&self) -> &Arbiter {
        &self.arbiter
    }

    pub fn optimal_return(&self) -> f64 {
        self.optimal_return
    }

    pub fn step_limit(&self) -> usize {
        self.step_limit
    }

    /// Index of the episode in progress.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    /// Steps taken so far in the episode in progress.
    pub fn step_in_episode(&self) -> u64 {
        self.step
    }

    pub fn current_key(&self) -> StateKey {
        StateKey::new(self.episode, self.step)
    }

    pub fn agent_state(&self) -> AgentState {
        self.percept.state
    }

    pub fn episode_return(&self) -> f64 {
        self.tally.ret
    }

    pub fn probabilities(&self) -> CheckProbabilities {
        self.arbiter.probabilities()
    }

    pub fn records(&self) -> &[EpisodeRecord] {
        &self.records
    }

    pub fn advice_queries(&self) -> u64 {
        self.advisor.queries()
    }

    pub fn checkpoint(&self) -> Checkpoint {
        self.learner.checkpoint()
    }

    /// Takes one training step in the current episode.
    pub fn train_step(&mut self) -> Result<StepReport> {
        self.arbiter.set_episode(self.episode);
        let key = self.current_key();
        let state = self.percept.state;
        let (a_dqn, _) = self.learner.best_action(&self.map, &self.percept)?;
        let advisor = &mut self.advisor;
        let decision = self.arbiter.decide(
            a_dqn,
            || advisor.suggest(&AdviceQuery { key, state }),
            &mut self.arbiter_rng,
        );
        let out = env::step(&self.map, state, decision.action, &self.cfg.rewards)?;
        let next = self.perceive(out.next_state, false);
        let loss = self.learner.learn(
            &self.map,
            &self.percept,
            decision.action,
            out.reward,
            &next,
            out.done,
            &mut self.learner_rng,
        )?;
        if loss.is_some() {
            let smoothed = self.learner.smoothed_loss().ok_or(Error::NonFiniteLoss)?;
            if !smoothed.is_finite() {
                return Err(Error::NonFiniteLoss);
            }
            self.arbiter.observe_loss(smoothed)?;
        }
        self.percept = next;
        self.step += 1;
        self.tally.ret += out.reward;
        self.tally.p_conf_sum += decision.probabilities.p_conf;
        let slot = match decision.source {
            DecisionSource::Explore => 0,
            DecisionSource::ExploitDqn => 1,
            DecisionSource::ListenAdvisor => 2,
        };
        self.tally.counts[slot] += 1;
        Ok(StepReport {
            key,
            decision,
            state,
            next_state: out.next_state,
            reward: out.reward,
            episode_return: self.tally.ret,
            episode_over: out.done || self.step as usize >= self.step_limit,
        })
    }

    /// Return of one greedy episode: argmax actions only, no exploration,
    /// no advice and no learning.
    pub fn evaluate(&mut self) -> Result<f64> {
        let mut percept = self.perceive(env::reset(&self.map), true);
        let mut ret = 0.0;
        for _ in 0..self.step_limit {
            let (action, _) = self.learner.best_action(&self.map, &percept)?;
            let out = env::step(&self.map, percept.state, action, &self.cfg.rewards)?;
            ret += out.reward;
            if out.done {
                break;
            }
            percept = self.perceive(out.next_state, true);
        }
        Ok(ret)
    }

    /// Closes the current training episode: evaluates the greedy policy,
    /// records the episode and resets the environment for the next one.
    pub fn finish_episode(&mut self) -> Result<EpisodeRecord> {
        let eval_return = self.evaluate()?;
        let probs = self.arbiter.probabilities();
        let steps = self.step.max(1) as f64;
        let record = EpisodeRecord {
            episode: self.episode,
            train_return: self.tally.ret,
            eval_return,
            n_explore: self.tally.counts[0],
            n_exploit: self.tally.counts[1],
            n_listen: self.tally.counts[2],
            p_explore: probs.p_explore,
            p_conf_mean: self.tally.p_conf_sum / steps,
            p_cons: probs.p_cons,
            loss: self.learner.smoothed_loss(),
        };
        self.records.push(record.clone());
        self.episode += 1;
        self.step = 0;
        self.tally = EpisodeTally::default();
        self.arbiter.set_episode(self.episode);
        self.percept = self.perceive(env::reset(&self.map), false);
        Ok(record)
    }

    /// One training episode followed by its evaluation.
    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        while !self.train_step()?.episode_over {}
        self.finish_episode()
    }

    /// Runs the configured number of episodes. Divergence ends the session
    /// early and is reported in [`SessionResult::failure`].
    pub fn run(mut self) -> SessionResult {
        let mut failure = None;
        while self.episode < self.cfg.total_episodes {
            if let Err(e) = self.run_episode() {
                failure = Some(e.to_string());
                break;
            }
        }
        self.into_result(failure)
    }

    pub fn into_result(self, failure: Option<String>) -> SessionResult {
        let checkpoint = self.learner.checkpoint();
        let mut result =
            SessionResult::from_records(self.records, self.optimal_return, self.cfg.convergence_window);
        result.failure = failure;
        result.checkpoint = Some(checkpoint);
        result
    }
}

/// Runs one full session from a fresh learner.
pub fn run_session(cfg: &RunConfig, seed: u64) -> Result<SessionResult> {
    Ok(Session::new(cfg, seed)?.run())
}

/// Observation settings with noise and view-angle jitter removed.
pub fn noiseless(cfg: &ObservationConfig) -> ObservationConfig {
    ObservationConfig {
        noise_sigma: 0.0,
        max_angle_deg: 0.0,
        ..*cfg
    }
}
