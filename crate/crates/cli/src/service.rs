//! Live WebSocket bridge.
//!
//! The session loop runs on its own thread and is the only writer of game
//! state. Frames leave it through a bounded broadcast queue; a client that
//! falls behind loses the oldest frames instead of slowing the loop. Client
//! messages reach the loop through shared state sampled once per tick.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use anyhow::{Context, Result};
use futures_util::{SinkExt, StreamExt};
use log::{debug, info, warn};
use neuroloop::config::RunConfig;
use neuroloop::elm::ElmModel;
use neuroloop::engine::{Directive, ModeKind, SessionConfig, SessionHooks};
use neuroloop::frame::{error_frame, ClientMessage, ControlOp, LiveMode, StateFrame};
use neuroloop::task::{write_trials_jsonl, Command};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;
use tokio_tungstenite::tungstenite::Message;

/// Session indices for live sessions start here, clear of training and
/// benchmark streams.
pub const LIVE_SESSION_BASE: u64 = 200;

pub const DEFAULT_BIND: &str = "127.0.0.1:8090";

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub bind: String,
    pub mode: LiveMode,
    pub trials: u32,
    pub model: Option<ElmModel>,
    /// Wall-clock tick period.
    pub tick: Duration,
    /// Start the first session without waiting for a `start` message.
    pub autostart: bool,
    /// Directory for live trial logs; `None` keeps them in memory only.
    pub out: Option<PathBuf>,
    /// Frames buffered per client before the oldest are dropped.
    pub frame_queue: usize,
}

impl ServeOptions {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            bind: DEFAULT_BIND.into(),
            mode: LiveMode::Hand,
            trials: 10,
            model: None,
            tick: Duration::from_secs_f64(1.0 / cfg.features.d_f),
            autostart: false,
            out: None,
            frame_queue: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Control {
    Idle,
    StartRequested,
    Running,
    Paused,
    AbortRequested,
    Shutdown,
}

struct Shared {
    control: Mutex<Control>,
    wake: Condvar,
    held: Mutex<Command>,
    operator: Mutex<Option<u64>>,
    mode: Mutex<LiveMode>,
    frames: broadcast::Sender<Arc<str>>,
    completed_sessions: AtomicU64,
    has_operator: AtomicBool,
}

impl Shared {
    fn set_control(&self, c: Control) {
        *self.control.lock().unwrap() = c;
        self.wake.notify_all();
    }

    fn broadcast(&self, text: String) {
        // no receivers is fine: frames are simply dropped
        let _ = self.frames.send(Arc::from(text));
    }
}

/// Running service. Dropping it without [`ServiceHandle::shutdown`] leaves
/// the session thread parked until process exit.
pub struct ServiceHandle {
    addr: SocketAddr,
    shared: Arc<Shared>,
    accept: JoinHandle<()>,
    session: Option<std::thread::JoinHandle<()>>,
}

impl ServiceHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Number of live sessions that have run to completion or abort.
    pub fn completed_sessions(&self) -> u64 {
        self.shared.completed_sessions.load(Ordering::SeqCst)
    }

    pub async fn shutdown(mut self) {
        self.shared.set_control(Control::Shutdown);
        self.accept.abort();
        if let Some(t) = self.session.take() {
            let _ = tokio::task::spawn_blocking(move || t.join()).await;
        }
    }
}

/// Binds the listener and starts the session thread.
pub async fn start(cfg: RunConfig, opts: ServeOptions) -> Result<ServiceHandle> {
    cfg.validate()?;
    if let Some(m) = &opts.model {
        cfg.check_model(m)?;
    }
    if opts.mode == LiveMode::Neural && opts.model.is_none() {
        anyhow::bail!("neural mode needs a decoder model (--model)");
    }
    let listener = TcpListener::bind(&opts.bind)
        .await
        .with_context(|| format!("binding {}", opts.bind))?;
    let addr = listener.local_addr()?;
    let (frames, _) = broadcast::channel(opts.frame_queue.max(1));
    let shared = Arc::new(Shared {
        control: Mutex::new(if opts.autostart { Control::StartRequested } else { Control::Idle }),
        wake: Condvar::new(),
        held: Mutex::new(Command::Stop),
        operator: Mutex::new(None),
        mode: Mutex::new(opts.mode),
        frames,
        completed_sessions: AtomicU64::new(0),
        has_operator: AtomicBool::new(false),
    });
    info!("serving on ws://{addr}");

    let session = {
        let shared = shared.clone();
        let opts = opts.clone();
        std::thread::Builder::new()
            .name("session-loop".into())
            .spawn(move || session_loop(cfg, opts, shared))?
    };
    let accept = {
        let shared = shared.clone();
        tokio::spawn(async move {
            let next_id = AtomicU64::new(1);
            loop {
                let (stream, peer) = match listener.accept().await {
                    Ok(c) => c,
                    Err(e) => {
                        warn!("accept failed: {e}");
                        continue;
                    }
                };
                let id = next_id.fetch_add(1, Ordering::SeqCst);
                let shared = shared.clone();
                tokio::spawn(async move {
                    if let Err(e) = client(stream, id, shared).await {
                        debug!("client {peer} closed: {e}");
                    }
                });
            }
        })
    };
    Ok(ServiceHandle {
        addr,
        shared,
        accept,
        session: Some(session),
    })
}

/// Blocks until `start` is called on an idle service or the handle shuts down.
fn session_loop(cfg: RunConfig, opts: ServeOptions, shared: Arc<Shared>) {
    let engine = cfg.engine();
    let mut index = LIVE_SESSION_BASE;
    loop {
        {
            let mut c = shared.control.lock().unwrap();
            while *c != Control::StartRequested && *c != Control::Shutdown {
                c = shared.wake.wait(c).unwrap();
            }
            if *c == Control::Shutdown {
                return;
            }
            *c = Control::Running;
        }
        let mode = *shared.mode.lock().unwrap();
        let kind = match mode {
            LiveMode::Hand => ModeKind::HandInteractive,
            LiveMode::Neural => ModeKind::Neural,
        };
        let scfg = SessionConfig::new(kind, opts.trials, index);
        let mut hooks = LiveHooks {
            shared: &shared,
            period: opts.tick,
            // a full period after the first spawn frame before tick 1
            next: Some(Instant::now() + opts.tick),
        };
        info!("live session {index} ({kind:?}) started");
        let model = match mode {
            LiveMode::Neural => opts.model.as_ref(),
            LiveMode::Hand => opts.model.as_ref().filter(|m| m.is_trained()),
        };
        match engine.run_session(&scfg, model, &mut hooks) {
            Ok(records) => {
                if let Some(dir) = &opts.out {
                    let name = format!("live_session_{index}_{}.jsonl", mode_name(kind));
                    if let Err(e) = std::fs::create_dir_all(dir).and_then(|_| std::fs::write(dir.join(&name), write_trials_jsonl(&records))) {
                        warn!("could not write {name}: {e}");
                    }
                }
                info!(
                    "live session {index} finished: {}/{} successful",
                    records.iter().filter(|r| r.succeeded()).count(),
                    records.len()
                );
            }
            Err(e) => {
                warn!("live session {index} failed: {e}");
                shared.broadcast(error_frame(&format!("session failed: {e}")));
            }
        }
        index += 1;
        shared.completed_sessions.fetch_add(1, Ordering::SeqCst);
        let mut c = shared.control.lock().unwrap();
        if *c == Control::Shutdown {
            return;
        }
        *c = Control::Idle;
    }
}

fn mode_name(kind: ModeKind) -> &'static str {
    match kind {
        ModeKind::HandInteractive => "hand_interactive",
        ModeKind::Neural => "neural",
        ModeKind::Hand => "hand",
        ModeKind::Passive => "passive",
        ModeKind::Assisted => "assisted",
    }
}

struct LiveHooks<'a> {
    shared: &'a Shared,
    period: Duration,
    next: Option<Instant>,
}

impl SessionHooks for LiveHooks<'_> {
    fn operator_connected(&self) -> bool {
        self.shared.has_operator.load(Ordering::SeqCst)
    }

    fn operator_command(&mut self) -> Command {
        *self.shared.held.lock().unwrap()
    }

    fn before_tick(&mut self) -> Directive {
        // pacing first, so commands arriving during the wait count for this tick
        let now = Instant::now();
        let due = self.next.unwrap_or(now);
        if due > now {
            std::thread::sleep(due - now);
        }
        let mut c = self.shared.control.lock().unwrap();
        loop {
            match *c {
                Control::Paused => c = self.shared.wake.wait(c).unwrap(),
                Control::AbortRequested | Control::Shutdown => return Directive::Abort,
                _ => break,
            }
        }
        drop(c);
        self.next = Some(Instant::now().max(due) + self.period);
        Directive::Continue
    }

    fn on_frame(&mut self, frame: &StateFrame) {
        self.shared.broadcast(frame.to_json());
    }
}

async fn client(stream: TcpStream, id: u64, shared: Arc<Shared>) -> Result<()> {
    let ws = tokio_tungstenite::accept_async(stream).await?;
    let (mut sink, mut source) = ws.split();
    let mut frames = shared.frames.subscribe();
    let (direct_tx, mut direct_rx) = mpsc::channel::<String>(16);

    {
        let mut op = shared.operator.lock().unwrap();
        if op.is_none() {
            *op = Some(id);
            shared.has_operator.store(true, Ordering::SeqCst);
            info!("client {id} is the operator");
        } else {
            info!("client {id} is an observer");
        }
    }

    let writer = tokio::spawn(async move {
        loop {
            let text: String = tokio::select! {
                f = frames.recv() => match f {
                    Ok(t) => t.to_string(),
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        debug!("client {id} dropped {n} frames");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                d = direct_rx.recv() => match d {
                    Some(t) => t,
                    None => break,
                },
            };
            if sink.send(Message::text(text)).await.is_err() {
                break;
            }
        }
    });

    while let Some(msg) = source.next().await {
        let msg = match msg {
            Ok(m) => m,
            Err(_) => break,
        };
        let text = match msg {
            Message::Text(t) => t.to_string(),
            Message::Binary(_) => {
                let _ = direct_tx.try_send(error_frame("binary frames are not supported"));
                continue;
            }
            Message::Close(_) => break,
            _ => continue,
        };
        if let Err(reply) = handle_message(&text, id, &shared) {
            // a full queue means the client is not reading; drop the reply
            let _ = direct_tx.try_send(error_frame(&reply));
        }
    }

    writer.abort();
    let mut op = shared.operator.lock().unwrap();
    if *op == Some(id) {
        *op = None;
        shared.has_operator.store(false, Ordering::SeqCst);
        *shared.held.lock().unwrap() = Command::Stop;
        info!("operator {id} left");
    }
    Ok(())
}

fn handle_message(text: &str, id: u64, shared: &Shared) -> std::result::Result<(), String> {
    let msg = ClientMessage::parse(text).map_err(|e| e.to_string())?;
    if *shared.operator.lock().unwrap() != Some(id) {
        return Err("role denied: observers cannot send commands".into());
    }
    match msg {
        ClientMessage::Cmd { cmd } => {
            *shared.held.lock().unwrap() = cmd;
            if *shared.mode.lock().unwrap() != LiveMode::Hand {
                return Err("cmd ignored: only hand sessions take operator commands".into());
            }
        }
        ClientMessage::Release => *shared.held.lock().unwrap() = Command::Stop,
        ClientMessage::Control { op } => {
            let mut c = shared.control.lock().unwrap();
            let next = match (op, *c) {
                (ControlOp::Start, Control::Idle) => Control::StartRequested,
                (ControlOp::Start, Control::Paused) => Control::Running,
                (ControlOp::Pause, Control::Running) => Control::Paused,
                (ControlOp::Abort, Control::StartRequested) => Control::Idle,
                (ControlOp::Abort, Control::Running | Control::Paused) => Control::AbortRequested,
                (op, state) => return Err(format!("cannot {op:?} while {state:?}").to_lowercase()),
            };
            *c = next;
            shared.wake.notify_all();
        }
        ClientMessage::Mode { mode } => {
            if *shared.control.lock().unwrap() != Control::Idle {
                return Err("mode can only change while idle".into());
            }
            *shared.mode.lock().unwrap() = mode;
        }
    }
    Ok(())
}
