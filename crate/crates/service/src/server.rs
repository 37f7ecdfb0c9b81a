//! Live sessions over WebSocket.
//!
//! One stepping task owns the [`Session`] and the controller token. It wakes
//! at the publish rate, applies every command received since the last wake,
//! advances the simulation by one publish period and broadcasts a snapshot.
//! Late wake-ups are skipped, never caught up. Connections run on their own
//! tasks and talk to the stepping task through channels.

use crate::config::Model;
use crate::control::{Command, CommandError};
use crate::protocol::{parse_client, Role, ServerBody, ServerMessage, PROTOCOL_VERSION};
use crate::session::Session;
use futures_util::{SinkExt, StreamExt};
use phasta_core::scenario::Cue;
use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::{Duration, Instant};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::task::JoinHandle;
use tokio::time::MissedTickBehavior;
use tokio_tungstenite::tungstenite::Message;

type ConnId = u64;

enum Inbound {
    Connect { id: ConnId, replies: mpsc::UnboundedSender<ServerBody> },
    Disconnect { id: ConnId },
    Command { id: ConnId, seq: u64, command: Command },
}

#[derive(Clone, Debug)]
enum Broadcast {
    Snapshot(Arc<ServerBody>),
    Error(Arc<ServerBody>),
}

/// A running server.
pub struct ServerHandle {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<()>,
}

impl ServerHandle {
    pub async fn shutdown(mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        let _ = self.task.await;
    }
}

/// Binds `addr` and serves `model` until the handle is shut down.
pub async fn spawn(model: Arc<Model>, seed: u64, addr: &str) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(addr).await?;
    let addr = listener.local_addr()?;
    let session = Session::new(model, seed).map_err(std::io::Error::other)?;
    let (tx, rx) = oneshot::channel();
    let task = tokio::spawn(run(listener, session, async {
        let _ = rx.await;
    }));
    Ok(ServerHandle { addr, shutdown: Some(tx), task })
}

/// Serves until `shutdown` resolves.
pub async fn run(listener: TcpListener, session: Session, shutdown: impl Future<Output = ()>) {
    let (inbound_tx, inbound_rx) = mpsc::unbounded_channel();
    let (bcast, _) = broadcast::channel(16);
    let stepper = tokio::spawn(step_loop(session, inbound_rx, bcast.clone()));
    let mut next_id: ConnId = 0;
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            _ = &mut shutdown => break,
            accepted = listener.accept() => match accepted {
                Ok((stream, peer)) => {
                    next_id += 1;
                    log::info!("connection {next_id} from {peer}");
                    tokio::spawn(connection(next_id, stream, inbound_tx.clone(), bcast.subscribe()));
                }
                Err(e) => log::warn!("accept failed: {e}"),
            },
        }
    }
    stepper.abort();
}

struct Stepper {
    session: Session,
    clients: Vec<(ConnId, mpsc::UnboundedSender<ServerBody>)>,
    controller: Option<ConnId>,
    dirty: bool,
}

impl Stepper {
    fn reply(&self, id: ConnId, body: ServerBody) {
        if let Some((_, tx)) = self.clients.iter().find(|(c, _)| *c == id) {
            let _ = tx.send(body);
        }
    }

    fn role_of(&self, id: ConnId) -> ServerBody {
        let role = if self.controller == Some(id) { Role::Controller } else { Role::Observer };
        ServerBody::Role { role, controller_present: self.controller.is_some() }
    }

    fn graph(&self) -> ServerBody {
        let m = self.session.model();
        ServerBody::Graph {
            states: m.names.clone(),
            edges: m.edges.iter().map(|&(f, t)| [f, t]).collect(),
            dt: m.system.dt(),
            publish_hz: m.serve.publish_hz,
            cues: if m.handover.is_some() { Cue::ALL.iter().map(|c| c.as_str().to_string()).collect() } else { Vec::new() },
        }
    }

    fn handle(&mut self, msg: Inbound) {
        match msg {
            Inbound::Connect { id, replies } => {
                self.clients.push((id, replies));
                self.reply(id, self.graph());
                self.reply(id, self.role_of(id));
            }
            Inbound::Disconnect { id } => {
                self.clients.retain(|(c, _)| *c != id);
                if self.controller == Some(id) {
                    self.controller = None;
                    log::info!("controller {id} left");
                }
            }
            Inbound::Command { id, seq, command } => self.command(id, seq, command),
        }
    }

    fn command(&mut self, id: ConnId, seq: u64, command: Command) {
        match command {
            Command::ClaimControl => match self.controller {
                Some(c) if c != id => {
                    let e = CommandError::new("controller_taken", "another client holds control; continuing as observer");
                    self.reply(id, ServerBody::error(&e, Some(seq)));
                    self.reply(id, self.role_of(id));
                }
                _ => {
                    self.controller = Some(id);
                    log::info!("connection {id} took control");
                    self.reply(id, self.role_of(id));
                }
            },
            Command::ReleaseControl => {
                if self.controller == Some(id) {
                    self.controller = None;
                }
                self.reply(id, self.role_of(id));
            }
            cmd if self.controller != Some(id) => {
                let e = CommandError::new("not_controller", format!("`{}` needs the controller role", cmd.name()));
                self.reply(id, ServerBody::error(&e, Some(seq)));
            }
            cmd => {
                let tick = self.session.record().tick;
                match self.session.apply(&cmd) {
                    Ok(()) => {
                        self.dirty = true;
                        self.reply(id, ServerBody::Ack { reply_to: seq, command: cmd.name().to_string(), tick });
                    }
                    Err(e) => self.reply(id, ServerBody::error(&e, Some(seq))),
                }
            }
        }
    }
}

async fn step_loop(session: Session, mut inbound: mpsc::UnboundedReceiver<Inbound>, bcast: broadcast::Sender<Broadcast>) {
    let serve = session.model().serve.clone();
    let dt = session.model().system.dt();
    let period = Duration::from_secs_f64(1.0 / serve.publish_hz);
    let ticks_per_publish = ((serve.realtime_factor / (serve.publish_hz * dt)).round() as u64).max(1);
    let mut st = Stepper { session, clients: Vec::new(), controller: None, dirty: false };
    let mut interval = tokio::time::interval(period);
    interval.set_missed_tick_behavior(MissedTickBehavior::Skip);
    log::info!("stepping {ticks_per_publish} ticks per {:.1} ms publish period", period.as_secs_f64() * 1e3);
    loop {
        interval.tick().await;
        let started = Instant::now();
        loop {
            match inbound.try_recv() {
                Ok(msg) => st.handle(msg),
                Err(mpsc::error::TryRecvError::Empty) => break,
                Err(mpsc::error::TryRecvError::Disconnected) => return,
            }
        }
        if !st.session.is_paused() {
            for _ in 0..ticks_per_publish {
                if let Err(e) = st.session.step() {
                    log::error!("{e}; session paused");
                    let _ = st.session.apply(&Command::Pause);
                    let body = ServerBody::Error { code: "divergence".into(), detail: e.to_string(), reply_to: None };
                    let _ = bcast.send(Broadcast::Error(Arc::new(body)));
                    break;
                }
            }
            st.dirty = false;
        } else if std::mem::take(&mut st.dirty) {
            if let Err(e) = st.session.refresh() {
                log::error!("{e}");
            }
        }
        let snap = ServerBody::Snapshot { record: st.session.record().clone(), paused: st.session.is_paused() };
        let _ = bcast.send(Broadcast::Snapshot(Arc::new(snap)));
        let busy = started.elapsed();
        if busy > period {
            log::warn!("publish overran by {:.1} ms; late ticks are dropped", (busy - period).as_secs_f64() * 1e3);
        }
    }
}

async fn connection(
    id: ConnId,
    stream: TcpStream,
    inbound: mpsc::UnboundedSender<Inbound>,
    mut snapshots: broadcast::Receiver<Broadcast>,
) {
    let ws = match tokio_tungstenite::accept_async(stream).await {
        Ok(ws) => ws,
        Err(e) => {
            log::warn!("connection {id}: handshake failed: {e}");
            return;
        }
    };
    let (mut sink, mut stream) = ws.split();
    let (reply_tx, mut replies) = mpsc::unbounded_channel();
    if inbound.send(Inbound::Connect { id, replies: reply_tx.clone() }).is_err() {
        return;
    }
    let mut seq: u64 = 0;
    // Snapshots wait until the greeting (graph, then role) has gone out.
    let mut greeted = false;
    let mut last_client_seq: Option<u64> = None;
    loop {
        let body: Arc<ServerBody> = tokio::select! {
            frame = stream.next() => match frame {
                Some(Ok(Message::Text(text))) => {
                    match parse_client(text.as_str()) {
                        Ok(msg) if last_client_seq.is_some_and(|s| msg.seq <= s) => {
                            let e = CommandError::new("stale_seq", format!("seq {} is not above {}", msg.seq, last_client_seq.unwrap()));
                            Arc::new(ServerBody::error(&e, Some(msg.seq)))
                        }
                        Ok(msg) => {
                            last_client_seq = Some(msg.seq);
                            if inbound.send(Inbound::Command { id, seq: msg.seq, command: msg.command }).is_err() {
                                break;
                            }
                            continue;
                        }
                        Err((reply_to, e)) => {
                            log::debug!("connection {id}: rejected frame: {e}");
                            Arc::new(ServerBody::error(&e, reply_to))
                        }
                    }
                }
                Some(Ok(Message::Binary(_))) => {
                    Arc::new(ServerBody::error(&CommandError::new("malformed", "binary frames are not supported"), None))
                }
                Some(Ok(Message::Close(_))) | None => break,
                Some(Ok(_)) => continue,
                Some(Err(e)) => {
                    log::debug!("connection {id}: {e}");
                    break;
                }
            },
            reply = replies.recv() => match reply {
                Some(body) => {
                    greeted |= matches!(body, ServerBody::Role { .. });
                    Arc::new(body)
                }
                None => break,
            },
            snap = snapshots.recv(), if greeted => match snap {
                Ok(Broadcast::Snapshot(b)) | Ok(Broadcast::Error(b)) => b,
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::debug!("connection {id}: dropped {n} late snapshots");
                    continue;
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
        };
        seq += 1;
        let msg = ServerMessage { v: PROTOCOL_VERSION, seq, body: (*body).clone() };
        if sink.send(Message::text(msg.to_json())).await.is_err() {
            break;
        }
    }
    let _ = inbound.send(Inbound::Disconnect { id });
    log::info!("connection {id} closed");
}
