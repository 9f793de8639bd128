//! Fan-out of server messages to connected clients.

use std::sync::mpsc::{sync_channel, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Mutex};

/// Messages are shared, immutable JSON text.
pub type Frame = Arc<str>;

struct Client {
    id: u64,
    tx: SyncSender<Frame>,
}

#[derive(Default)]
struct State {
    clients: Vec<Client>,
    next_id: u64,
    latest_snapshot: Option<Frame>,
    dropped: u64,
}

/// Broadcasts frames to per-client bounded queues. A client whose queue is
/// full is dropped; the sender never blocks.
#[derive(Clone)]
pub struct Hub {
    bound: usize,
    map_frame: Frame,
    state: Arc<Mutex<State>>,
}

impl Hub {
    pub fn new(bound: usize, map_frame: Frame) -> Self {
        Hub {
            bound: bound.max(2),
            map_frame,
            state: Arc::default(),
        }
    }

    /// Registers a client. Its queue starts with the latest snapshot (if
    /// any) and the map, ahead of every later broadcast.
    pub fn subscribe(&self) -> (u64, Receiver<Frame>) {
        let (tx, rx) = sync_channel(self.bound);
        let mut st = self.state.lock().unwrap();
        if let Some(snap) = &st.latest_snapshot {
            let _ = tx.try_send(snap.clone());
        }
        let _ = tx.try_send(self.map_frame.clone());
        let id = st.next_id;
        st.next_id += 1;
        st.clients.push(Client { id, tx });
        (id, rx)
    }

    pub fn unsubscribe(&self, id: u64) {
        self.state.lock().unwrap().clients.retain(|c| c.id != id);
    }

    /// Queues `frame` for every client, disconnecting clients that cannot
    /// keep up. Snapshots are also kept for clients that join later.
    pub fn broadcast(&self, frame: Frame, is_snapshot: bool) {
        let mut st = self.state.lock().unwrap();
        if is_snapshot {
            st.latest_snapshot = Some(frame.clone());
        }
        let before = st.clients.len();
        st.clients.retain(|c| match c.tx.try_send(frame.clone()) {
            Ok(()) => true,
            Err(TrySendError::Full(_)) => {
                log::warn!("client {} fell behind; disconnecting", c.id);
                false
            }
            Err(TrySendError::Disconnected(_)) => false,
        });
        st.dropped += (before - st.clients.len()) as u64;
    }

    /// Disconnects every client; their handlers close the sockets.
    pub fn close_all(&self) {
        self.state.lock().unwrap().clients.clear();
    }

    pub fn client_count(&self) -> usize {
        self.state.lock().unwrap().clients.len()
    }

    /// Clients removed because they fell behind or went away.
    pub fn dropped_clients(&self) -> u64 {
        self.state.lock().unwrap().dropped
    }
}
