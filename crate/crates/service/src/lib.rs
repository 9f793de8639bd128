//! Hosts one live training session behind a WebSocket. Clients receive
//! snapshots of the trainer, may pause, resume, stop or re-pace it, and
//! may label actions for the state the trainer is about to decide in.
//!
//! ```no_run
//! use arbiter_core::harness::RunConfig;
//! use arbiter_service::{serve, ServiceOptions};
//!
//! let handle = serve(RunConfig::default(), ServiceOptions::new("127.0.0.1:8765")).unwrap();
//! println!("listening on ws://{}", handle.local_addr());
//! handle.wait().unwrap();
//! ```

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/service.md")]
mod book {}

pub mod hub;
pub mod live;
pub mod protocol;
mod server;

use std::net::{SocketAddr, TcpListener};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use arbiter_core::advice::{HumanInbox, StateKey};
use arbiter_core::harness::{RunConfig, Session};

pub use live::ServiceStats;
pub use protocol::{ClientMessage, ControlCommand, RunStatus, ServerMessage, SessionSnapshot};

use hub::Hub;
use live::{Counters, Shared, Trainer, TrainerOptions};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] arbiter_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trainer thread panicked")]
    Panicked,
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub bind: String,
    pub session_id: String,
    /// Per-episode metrics CSV, flushed when the run stops.
    pub metrics_path: Option<PathBuf>,
    /// Learner checkpoint written when the run stops.
    pub checkpoint_path: Option<PathBuf>,
}

impl ServiceOptions {
    pub fn new(bind: impl Into<String>) -> Self {
        ServiceOptions {
            bind: bind.into(),
            session_id: "live".into(),
            metrics_path: None,
            checkpoint_path: None,
        }
    }
}

/// A running service. Dropping it without [`ServiceHandle::shutdown`] or
/// [`ServiceHandle::wait`] leaves the threads running until the process ends.
pub struct ServiceHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    hub: Hub,
    commands: Sender<ControlCommand>,
    trainer: JoinHandle<Result<Session, ServiceError>>,
    acceptor: JoinHandle<()>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> ServiceStats {
        self.shared.counters.snapshot()
    }

    pub fn connected_clients(&self) -> usize {
        self.hub.client_count()
    }

    /// Clients disconnected because their queue filled up or they left.
    pub fn dropped_clients(&self) -> u64 {
        self.hub.dropped_clients()
    }

    /// Sends a control command as if a client had.
    pub fn command(&self, cmd: ControlCommand) {
        self.shared.send_command(&self.commands, cmd);
    }

    /// Advice currently filed and not yet consumed or purged.
    pub fn pending_advice(&self) -> usize {
        self.shared.inbox.len()
    }

    /// Blocks until the run finishes or is stopped, then closes every
    /// connection. Returns the trained session.
    pub fn wait(self) -> Result<Session, ServiceError> {
        let result = self.trainer.join().map_err(|_| ServiceError::Panicked)?;
        self.shared.closed.store(true, Ordering::SeqCst);
        self.hub.close_all();
        server::wake(self.addr);
        let _ = self.acceptor.join();
        result
    }

    pub fn shutdown(self) -> Result<Session, ServiceError> {
        self.command(ControlCommand::Stop);
        self.wait()
    }
}

/// Binds `opts.bind` and starts the trainer (paused) and the accept loop.
pub fn serve(cfg: RunConfig, opts: ServiceOptions) -> Result<ServiceHandle, ServiceError> {
    let map = cfg.load_map()?;
    cfg.validate(&map)?;
    let listener = TcpListener::bind(&opts.bind)?;
    let addr = listener.local_addr()?;
    let hub = Hub::new(
        cfg.service.queue_bound,
        ServerMessage::map(&map).to_json().into(),
    );
    let shared = Arc::new(Shared {
        inbox: HumanInbox::new(),
        current_key: Mutex::new(StateKey::new(0, 0)),
        counters: Counters::default(),
        stopping: AtomicBool::new(false),
        closed: AtomicBool::new(false),
        staleness: cfg.service.staleness_steps,
    });
    let (tx, rx) = channel();
    let trainer = Trainer::new(
        &cfg,
        shared.clone(),
        hub.clone(),
        rx,
        TrainerOptions {
            session_id: opts.session_id.clone(),
            seed: cfg.seed,
            metrics_path: opts.metrics_path.clone(),
            checkpoint_path: opts.checkpoint_path.clone(),
        },
    )?;
    let trainer = std::thread::Builder::new()
        .name("arbiter-trainer".into())
        .spawn(move || trainer.run())?;
    let acceptor = server::Acceptor {
        listener,
        hub: hub.clone(),
        shared: shared.clone(),
        commands: tx.clone(),
    }
    .spawn()?;
    log::info!("serving on ws://{addr}");
    Ok(ServiceHandle {
        addr,
        shared,
        hub,
        commands: tx,
        trainer,
        acceptor,
    })
}
