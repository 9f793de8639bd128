//! WebSocket front end: accepts clients, forwards their frames and routes
//! their messages to the trainer.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::Ordering;
use std::sync::mpsc::{Sender, TryRecvError};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use arbiter_core::advice::{ActionLabels, StateKey};
use tungstenite::{Message, WebSocket};

use crate::hub::Hub;
use crate::live::Shared;
use crate::protocol::{ClientMessage, ControlCommand};

const POLL: Duration = Duration::from_millis(20);

pub(crate) struct Acceptor {
    pub listener: TcpListener,
    pub hub: Hub,
    pub shared: Arc<Shared>,
    pub commands: Sender<ControlCommand>,
}

impl Acceptor {
    pub fn spawn(self) -> std::io::Result<JoinHandle<()>> {
        std::thread::Builder::new()
            .name("arbiter-accept".into())
            .spawn(move || self.run())
    }

    fn run(self) {
        for stream in self.listener.incoming() {
            if self.shared.closed.load(Ordering::SeqCst) {
                break;
            }
            let stream = match stream {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let client = Client {
                hub: self.hub.clone(),
                shared: self.shared.clone(),
                commands: self.commands.clone(),
            };
            let spawned = std::thread::Builder::new()
                .name("arbiter-client".into())
                .spawn(move || client.serve(stream));
            if let Err(e) = spawned {
                log::warn!("could not start client thread: {e}");
            }
        }
    }
}

struct Client {
    hub: Hub,
    shared: Arc<Shared>,
    commands: Sender<ControlCommand>,
}

impl Client {
    fn serve(self, stream: TcpStream) {
        let peer = stream.peer_addr().ok();
        let _ = stream.set_nodelay(true);
        let mut ws = match tungstenite::accept(stream) {
            Ok(ws) => ws,
            Err(e) => {
                log::info!("handshake with {peer:?} failed: {e}");
                return;
            }
        };
        let _ = ws.get_ref().set_read_timeout(Some(POLL));
        let _ = ws.get_ref().set_write_timeout(Some(Duration::from_secs(5)));
        let (id, rx) = self.hub.subscribe();
        log::info!("client {id} connected from {peer:?}");
        let reason = loop {
            if let Err(reason) = self.pump(&mut ws, &rx) {
                break reason;
            }
            match ws.read() {
                Ok(Message::Text(text)) => self.handle(text.as_str()),
                Ok(Message::Close(_)) => break "closed by peer",
                Ok(_) => {}
                Err(tungstenite::Error::Io(e))
                    if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
                Err(_) => break "connection error",
            }
        };
        self.hub.unsubscribe(id);
        let _ = ws.close(None);
        let _ = ws.flush();
        log::info!("client {id} disconnected: {reason}");
    }

    /// Writes every queued frame.
    fn pump(
        &self,
        ws: &mut WebSocket<TcpStream>,
        rx: &std::sync::mpsc::Receiver<crate::hub::Frame>,
    ) -> Result<(), &'static str> {
        loop {
            match rx.try_recv() {
                Ok(frame) => ws
                    .write(Message::text(frame.to_string()))
                    .map_err(|_| "write failed")?,
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return Err("dropped by server"),
            }
        }
        ws.flush().map_err(|_| "write failed")
    }

    fn handle(&self, text: &str) {
        let parsed = ClientMessage::parse(text).ok().and_then(|msg| match msg {
            ClientMessage::Advice { state_key, good } => {
                let key: StateKey = state_key.parse().ok()?;
                self.shared.offer_advice(key, ActionLabels { good });
                Some(())
            }
            ClientMessage::Control { kind, speed } => {
                let cmd = ControlCommand::from_message(kind, speed).ok()?;
                self.shared.send_command(&self.commands, cmd);
                Some(())
            }
        });
        if parsed.is_none() {
            log::info!("ignoring malformed message: {text}");
            self.shared.counters.malformed.fetch_add(1, Ordering::SeqCst);
        }
    }
}

/// Unblocks the accept loop so it can observe shutdown.
pub(crate) fn wake(addr: SocketAddr) {
    let _ = TcpStream::connect_timeout(&addr, Duration::from_millis(200));
}
