use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::session::{run_session, SessionResult};
use super::stats;
use crate::error::{Error, Result};

/// Seed of session `index` in an experiment seeded with `base`
/// (SplitMix64 finaliser, so neighbouring indices get unrelated seeds).
pub fn session_seed(base: u64, index: usize) -> u64 {
    let mut z = base.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-episode statistics of evaluation return across sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: Vec<f64>,
    pub p10: Vec<f64>,
    pub p90: Vec<f64>,
    /// Trailing moving average of `mean`.
    pub moving_average: Vec<f64>,
    pub window: usize,
}

impl Aggregate {
    /// Aggregates per-session series. Episode `i` uses every session that
    /// reached it, so a session that failed early stops contributing.
    pub fn from_series(series: &[Vec<f64>], window: usize) -> Self {
        let len = series.iter().map(Vec::len).max().unwrap_or(0);
        let (mut mean, mut p10, mut p90) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..len {
            let col: Vec<f64> = series.iter().filter_map(|s| s.get(i).copied()).collect();
            mean.push(stats::mean(&col).unwrap_or(f64::NAN));
            p10.push(stats::percentile(&col, 10.0).unwrap_or(f64::NAN));
            p90.push(stats::percentile(&col, 90.0).unwrap_or(f64::NAN));
        }
        let moving_average = moving_average(&mean, window);
        Aggregate {
            mean,
            p10,
            p90,
            moving_average,
            window,
        }
    }

    pub fn from_sessions(sessions: &[SessionResult], window: usize) -> Self {
        let series: Vec<Vec<f64>> = sessions.iter().map(SessionResult::eval_returns).collect();
        Self::from_series(&series, window)
    }
}

/// Trailing mean over at most `window` points ending at each index.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for i in 0..values.len() {
        sum += values[i];
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub sessions: Vec<SessionResult>,
    pub aggregate: Aggregate,
}

impl ExperimentResult {
    pub fn summary(&self) -> Summary {
        Summary::new(&self.sessions)
    }
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Runs `n_sessions` independent sessions, at most `jobs` at a time
/// (`None` uses every core). Results are ordered by session index.
pub fn run_experiment(cfg: &RunConfig, n_sessions: usize, jobs: Option<usize>) -> Result<ExperimentResult> {
    if n_sessions == 0 {
        return Err(Error::Config("at least one session is required".into()));
    }
    let map = cfg.load_map()?;
    cfg.validate(&map)?;
    let sessions = pool(jobs)?.install(|| {
        (0..n_sessions)
            .into_par_iter()
            .map(|i| run_session(cfg, session_seed(cfg.seed, i)))
            .collect::<Result<Vec<_>>>()
    })?;
    let aggregate = Aggregate::from_sessions(&sessions, cfg.moving_average_window);
    Ok(ExperimentResult { sessions, aggregate })
}

/// One experiment per oracle accuracy, all sharing the same session seeds.
pub fn accuracy_sweep(
    cfg: &RunConfig,
    accuracies: &[f64],
    n_sessions: usize,
    jobs: Option<usize>,
) -> Result<Vec<(f64, ExperimentResult)>> {
    accuracies
        .iter()
        .map(|&acc| {
            let mut c = cfg.clone();
            c.oracle.accuracy = acc;
            run_experiment(&c, n_sessions, jobs).map(|r| (acc, r))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub sessions: usize,
    pub failed_sessions: usize,
    pub converged_sessions: usize,
    pub final_return_mean: Option<f64>,
    pub final_return_p10: Option<f64>,
    pub final_return_p90: Option<f64>,
    /// Median first episode with an optimal evaluation, among sessions that
    /// reached one.
    pub episodes_to_optimal_median: Option<f64>,
    pub episodes_to_optimal_mean: Option<f64>,
    pub reached_optimal_sessions: usize,
}

impl Summary {
    pub fn new(sessions: &[SessionResult]) -> Self {
        let finals: Vec<f64> = sessions.iter().filter_map(SessionResult::final_eval_return).collect();
        let eto: Vec<f64> = sessions
            .iter()
            .filter_map(|s| s.episodes_to_optimal.map(|e| e as f64))
            .collect();
        Summary {
            sessions: sessions.len(),
            failed_sessions: sessions.iter().filter(|s| s.failure.is_some()).count(),
            converged_sessions: sessions.iter().filter(|s| s.converged).count(),
            final_return_mean: stats::mean(&finals),
            final_return_p10: stats::percentile(&finals, 10.0),
            final_return_p90: stats::percentile(&finals, 90.0),
            episodes_to_optimal_median: stats::median(&eto),
            episodes_to_optimal_mean: stats::mean(&eto),
            reached_optimal_sessions: eto.len(),
        }
    }
}

/// Episodes to optimal for a statistical comparison. Sessions that never
/// reached the optimum are censored at `total_episodes + 1`, which ranks
/// them behind every session that did.
pub fn censored_episodes_to_optimal(sessions: &[SessionResult], total_episodes: u64) -> Vec<f64> {
    sessions
        .iter()
        .map(|s| s.episodes_to_optimal.unwrap_or(total_episodes + 1) as f64)
        .collect()
}
