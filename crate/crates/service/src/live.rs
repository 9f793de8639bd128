//! The trainer loop: steps one session at the configured pace, applies
//! control commands and publishes snapshots.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use arbiter_core::advice::{
    ActionLabels, AdviceQuery, AdviceSource, HumanInbox, OracleTable, StateKey, SyntheticOracle,
};
use arbiter_core::harness::metrics::{MetricsRow, MetricsWriter};
use arbiter_core::harness::session::advisor_seeds;
use arbiter_core::harness::{RunConfig, Session, StepReport};

use crate::hub::Hub;
use crate::protocol::{ControlCommand, RunStatus, ServerMessage, SessionSnapshot};
use crate::ServiceError;

/// Counters shared between the trainer and the client handlers.
#[derive(Debug, Default)]
pub struct Counters {
    pub advice_accepted: AtomicU64,
    pub advice_stale: AtomicU64,
    pub malformed: AtomicU64,
    pub steps: AtomicU64,
    pub episodes: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ServiceStats {
    pub advice_accepted: u64,
    pub advice_stale: u64,
    pub malformed: u64,
    pub steps: u64,
    pub episodes: u64,
}

impl Counters {
    pub fn snapshot(&self) -> ServiceStats {
        let get = |c: &AtomicU64| c.load(Ordering::SeqCst);
        ServiceStats {
            advice_accepted: get(&self.advice_accepted),
            advice_stale: get(&self.advice_stale),
            malformed: get(&self.malformed),
            steps: get(&self.steps),
            episodes: get(&self.episodes),
        }
    }
}

/// State visible to client handlers.
pub struct Shared {
    pub inbox: HumanInbox,
    pub current_key: Mutex<StateKey>,
    pub counters: Counters,
    pub stopping: AtomicBool,
    /// Set once the service is shutting down; the accept loop exits.
    pub closed: AtomicBool,
    pub staleness: u64,
}

impl Shared {
    /// Forwards a command to the trainer. A stop also cuts short any wait
    /// for advice.
    pub fn send_command(&self, tx: &std::sync::mpsc::Sender<ControlCommand>, cmd: ControlCommand) {
        if cmd == ControlCommand::Stop {
            self.stopping.store(true, Ordering::SeqCst);
        }
        let _ = tx.send(cmd);
    }

    /// Files advice for `key` unless it is older than the staleness window
    /// (or refers to another episode or the future).
    pub fn offer_advice(&self, key: StateKey, labels: ActionLabels) -> bool {
        let current = *self.current_key.lock().unwrap();
        match key.age(&current) {
            Some(age) if age <= self.staleness => {
                self.inbox.submit(key, labels);
                self.counters.advice_accepted.fetch_add(1, Ordering::SeqCst);
                true
            }
            _ => {
                log::info!("dropping stale advice for {key} (trainer at {current})");
                self.counters.advice_stale.fetch_add(1, Ordering::SeqCst);
                false
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainerOptions {
    pub session_id: String,
    pub seed: u64,
    pub metrics_path: Option<PathBuf>,
    pub checkpoint_path: Option<PathBuf>,
}

/// Human advice from the inbox, optionally waiting for it, with the
/// synthetic oracle as an optional fallback.
struct LiveAdvisor {
    shared: Arc<Shared>,
    wait: Option<Duration>,
    fallback: Option<SyntheticOracle>,
    notify: Box<dyn FnMut(&AdviceQuery) + Send>,
}

impl AdviceSource for LiveAdvisor {
    fn labels(&mut self, query: &AdviceQuery) -> Option<ActionLabels> {
        let mut got = self.shared.inbox.take(&query.key);
        if got.is_none() {
            if let Some(wait) = self.wait {
                (self.notify)(query);
                let deadline = Instant::now() + wait;
                while got.is_none() && !self.shared.stopping.load(Ordering::SeqCst) {
                    let now = Instant::now();
                    if now >= deadline {
                        break;
                    }
                    let slice = (deadline - now).min(Duration::from_millis(50));
                    got = self.shared.inbox.wait_take(&query.key, slice);
                }
            }
        }
        got.or_else(|| self.fallback.as_mut().and_then(|f| f.labels(query)))
    }
}

struct Publisher {
    hub: Hub,
    session_id: String,
    map_name: String,
    last: Arc<Mutex<SessionSnapshot>>,
}

impl Publisher {
    fn emit(&self, snap: SessionSnapshot) {
        let frame = ServerMessage::Snapshot(snap.clone()).to_json();
        *self.last.lock().unwrap() = snap;
        self.hub.broadcast(frame.into(), true);
    }

    fn snapshot(&self, session: &Session, status: RunStatus, last: Option<&StepReport>) -> SessionSnapshot {
        let state = session.agent_state();
        let probs = session.probabilities();
        SessionSnapshot {
            session_id: self.session_id.clone(),
            t: session.episode(),
            step: session.step_in_episode(),
            state_key: session.current_key().to_string(),
            x: state.x,
            z: state.z,
            facing: state.facing.as_char(),
            map_name: self.map_name.clone(),
            last_source: last.map(|r| r.decision.source.as_str().to_string()),
            last_action: last.map(|r| format!("{:?}", r.decision.action)),
            last_key: last.map(|r| r.key.to_string()),
            last_reward: last.map(|r| r.reward),
            episode_return: session.episode_return(),
            p_explore: probs.p_explore,
            p_conf: probs.p_conf,
            p_cons: probs.p_cons,
            status,
            awaiting_advice: false,
        }
    }
}

pub struct Trainer {
    session: Session,
    shared: Arc<Shared>,
    publisher: Publisher,
    commands: Receiver<ControlCommand>,
    opts: TrainerOptions,
    speed: f64,
}

impl Trainer {
    pub fn new(
        cfg: &RunConfig,
        shared: Arc<Shared>,
        hub: Hub,
        commands: Receiver<ControlCommand>,
        opts: TrainerOptions,
    ) -> Result<Self, ServiceError> {
        let map = cfg.load_map()?;
        let svc = &cfg.service;
        let fallback = if svc.synthetic_fallback {
            let table = OracleTable::build(&map)?;
            Some(SyntheticOracle::new(table, cfg.oracle, advisor_seeds(opts.seed).0))
        } else {
            None
        };
        let last = Arc::new(Mutex::new(placeholder(&opts.session_id, map.name())));
        let notify = {
            let hub = hub.clone();
            let last = last.clone();
            Box::new(move |_: &AdviceQuery| {
                let mut snap = last.lock().unwrap().clone();
                snap.status = RunStatus::Paused;
                snap.awaiting_advice = true;
                hub.broadcast(ServerMessage::Snapshot(snap).to_json().into(), true);
            })
        };
        let advisor = LiveAdvisor {
            shared: shared.clone(),
            wait: svc
                .pause_on_advice_request
                .then(|| Duration::from_secs_f64(svc.advice_timeout_secs)),
            fallback,
            notify,
        };
        let publisher = Publisher {
            hub,
            session_id: opts.session_id.clone(),
            map_name: map.name().to_string(),
            last,
        };
        let session = Session::with_source(cfg, map, opts.seed, Box::new(advisor))?;
        Ok(Trainer {
            session,
            shared,
            publisher,
            commands,
            speed: svc.speed,
            opts,
        })
    }

    /// Runs until the configured episodes are done or a stop command
    /// arrives. Starts paused.
    pub fn run(mut self) -> Result<Session, ServiceError> {
        let mut metrics = match &self.opts.metrics_path {
            Some(p) => Some(MetricsWriter::new(std::io::BufWriter::new(std::fs::File::create(p)?))),
            None => None,
        };
        let mut status = RunStatus::Paused;
        let mut last: Option<StepReport> = None;
        self.publish(status, last.as_ref());
        let mut next_tick = Instant::now();
        let result = loop {
            let timeout = match status {
                RunStatus::Running => next_tick.saturating_duration_since(Instant::now()),
                _ => Duration::from_millis(100),
            };
            match self.commands.recv_timeout(timeout) {
                Ok(ControlCommand::Stop) => break Ok(()),
                Ok(ControlCommand::Pause) => {
                    status = RunStatus::Paused;
                    self.publish(status, last.as_ref());
                    continue;
                }
                Ok(ControlCommand::Resume) => {
                    if status == RunStatus::Paused {
                        next_tick = Instant::now();
                    }
                    status = RunStatus::Running;
                    self.publish(status, last.as_ref());
                    continue;
                }
                Ok(ControlCommand::SetSpeed(s)) => {
                    self.speed = s;
                    next_tick = next_tick.min(Instant::now() + self.period());
                    continue;
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break Ok(()),
            }
            if status != RunStatus::Running || Instant::now() < next_tick {
                continue;
            }
            next_tick = (next_tick + self.period()).max(Instant::now());
            match self.advance(&mut metrics) {
                Ok((report, finished)) => {
                    last = Some(report);
                    if finished {
                        break Ok(());
                    }
                    self.publish(status, last.as_ref());
                }
                Err(e) => break Err(e),
            }
        };
        self.shared.stopping.store(true, Ordering::SeqCst);
        if let Some(w) = metrics.as_mut() {
            w.flush()?;
        }
        if let Some(path) = &self.opts.checkpoint_path {
            self.session.checkpoint().save(path)?;
        }
        self.publish(RunStatus::Finished, last.as_ref());
        result.map(|()| self.session)
    }

    fn period(&self) -> Duration {
        Duration::from_secs_f64(1.0 / self.speed)
    }

    fn publish(&self, status: RunStatus, last: Option<&StepReport>) {
        self.publisher
            .emit(self.publisher.snapshot(&self.session, status, last));
    }

    /// One training step, closing the episode if it ended. Returns whether
    /// the run is complete.
    fn advance(
        &mut self,
        metrics: &mut Option<MetricsWriter<std::io::BufWriter<std::fs::File>>>,
    ) -> Result<(StepReport, bool), ServiceError> {
        let report = self.session.train_step()?;
        self.shared.counters.steps.fetch_add(1, Ordering::SeqCst);
        if report.episode_over {
            let record = self.session.finish_episode()?;
            self.shared.counters.episodes.fetch_add(1, Ordering::SeqCst);
            let msg = ServerMessage::EpisodeEnd {
                t: record.episode,
                eval_return: record.eval_return,
            };
            self.publisher.hub.broadcast(msg.to_json().into(), false);
            if let Some(w) = metrics.as_mut() {
                w.write(&MetricsRow::new(0, &record))?;
            }
        }
        let key = self.session.current_key();
        *self.shared.current_key.lock().unwrap() = key;
        self.shared.inbox.purge_stale(&key, self.shared.staleness);
        let done = self.session.episode() >= self.session.config().total_episodes;
        Ok((report, done))
    }
}

fn placeholder(session_id: &str, map_name: &str) -> SessionSnapshot {
    SessionSnapshot {
        session_id: session_id.into(),
        t: 0,
        step: 0,
        state_key: StateKey::new(0, 0).to_string(),
        x: 0,
        z: 0,
        facing: 'N',
        map_name: map_name.into(),
        last_source: None,
        last_action: None,
        last_key: None,
        last_reward: None,
        episode_return: 0.0,
        p_explore: 1.0,
        p_conf: 0.0,
        p_cons: 0.0,
        status: RunStatus::Paused,
        awaiting_advice: false,
    }
}
