//! TCP control service.
//!
//! One engine thread owns the simulation. Every connection gets a reader
//! thread that forwards parsed lines into the engine queue and a writer
//! thread that drains the connection's outbox, so a stalled or broken client
//! never blocks the engine or other sessions.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, BufReader, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use thiserror::Error;

use crowdsim_core::engine::{EngineError, Simulation, VelocityCommand};
use crowdsim_core::scenario::ScenarioSpec;
use crowdsim_core::trajectory::TrajectoryWriter;

use crate::protocol::{decode, encode, ErrorCode, Topic, WireMessage, PROTOCOL_VERSION};

const POLL: Duration = Duration::from_millis(20);

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// Step only when a client asks.
    Lockstep,
    /// Step on a wall clock at `rate_hz`.
    Realtime { rate_hz: f64 },
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("network: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("rate must be positive and finite, got {0}")]
    BadRate(f64),
}

/// Stops a running server from another thread.
#[derive(Clone, Debug)]
pub struct ShutdownHandle(Arc<AtomicBool>);

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.0.store(true, Ordering::SeqCst);
    }
}

enum Event {
    Connected { id: u64, stream: TcpStream, outbox: Sender<String> },
    Line { id: u64, line: String },
    Closed { id: u64 },
}

struct Session {
    stream: TcpStream,
    outbox: Sender<String>,
    subscriptions: BTreeSet<(u64, Topic)>,
}

impl Session {
    fn send(&self, msg: &WireMessage) {
        // A closed outbox means the writer already gave up on this client.
        let _ = self.outbox.send(encode(msg));
    }
}

pub struct Server {
    listener: TcpListener,
    sim: Simulation,
    mode: Mode,
    stop: Arc<AtomicBool>,
    max_steps: Option<u64>,
    recorder: Option<TrajectoryWriter<Box<dyn Write + Send>>>,
}

impl Server {
    /// Binds the listener and builds the simulation. Use port 0 to let the
    /// OS choose.
    pub fn bind(spec: &ScenarioSpec, addr: impl ToSocketAddrs, mode: Mode) -> Result<Self, ServerError> {
        if let Mode::Realtime { rate_hz } = mode {
            if !(rate_hz > 0.0 && rate_hz.is_finite()) {
                return Err(ServerError::BadRate(rate_hz));
            }
        }
        let sim = Simulation::new(spec)?;
        let listener = TcpListener::bind(addr)?;
        Ok(Server {
            listener,
            sim,
            mode,
            stop: Arc::new(AtomicBool::new(false)),
            max_steps: None,
            recorder: None,
        })
    }

    /// Stop by itself after this many steps.
    pub fn with_max_steps(mut self, steps: u64) -> Self {
        self.max_steps = Some(steps);
        self
    }

    /// Write a trajectory log line for the initial state and every step.
    pub fn record_to(mut self, out: Box<dyn Write + Send>) -> Self {
        self.recorder = Some(TrajectoryWriter::new(out));
        self
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn shutdown_handle(&self) -> ShutdownHandle {
        ShutdownHandle(self.stop.clone())
    }

    /// Serves until shut down or `max_steps` is reached; returns the final tick.
    pub fn run(mut self) -> Result<u64, ServerError> {
        let (events_tx, events) = mpsc::channel();
        self.listener.set_nonblocking(true)?;
        let listener = self.listener.try_clone()?;
        let acceptor = {
            let stop = self.stop.clone();
            thread::spawn(move || accept_loop(listener, events_tx, stop))
        };
        info!("serving {} on {}", self.sim.name(), self.listener.local_addr()?);

        if let Some(rec) = self.recorder.as_mut() {
            rec.write(&self.sim.snapshot())?;
        }
        let mut engine = EngineLoop {
            sim: self.sim,
            sessions: BTreeMap::new(),
            pending: BTreeMap::new(),
            recorder: self.recorder,
            max_steps: self.max_steps,
            lockstep: self.mode == Mode::Lockstep,
        };
        let result = engine.run(&events, self.mode, &self.stop);

        self.stop.store(true, Ordering::SeqCst);
        // Writers flush what is queued and close once their outbox drops.
        for (_, s) in std::mem::take(&mut engine.sessions) {
            let _ = s.stream.shutdown(Shutdown::Read);
        }
        let _ = acceptor.join();
        if let Some(rec) = engine.recorder.as_mut() {
            rec.flush()?;
        }
        result?;
        Ok(engine.sim.tick())
    }
}

fn accept_loop(listener: TcpListener, events: Sender<Event>, stop: Arc<AtomicBool>) {
    let mut next_id = 1;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                let id = next_id;
                next_id += 1;
                debug!("session {id} from {peer}");
                if let Err(e) = start_session(id, stream, &events) {
                    warn!("session {id}: {e}");
                }
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn start_session(id: u64, stream: TcpStream, events: &Sender<Event>) -> io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let (outbox, inbox) = mpsc::channel::<String>();
    let writer = stream.try_clone()?;
    let reader = stream.try_clone()?;
    thread::spawn(move || write_loop(writer, inbox));
    let events_for_reader = events.clone();
    let _ = events.send(Event::Connected { id, stream, outbox });
    thread::spawn(move || read_loop(id, reader, events_for_reader));
    Ok(())
}

fn write_loop(mut stream: TcpStream, inbox: Receiver<String>) {
    for mut line in inbox {
        line.push('\n');
        if stream.write_all(line.as_bytes()).is_err() {
            break;
        }
    }
    let _ = stream.shutdown(Shutdown::Write);
}

fn read_loop(id: u64, stream: TcpStream, events: Sender<Event>) {
    for line in BufReader::new(stream).lines() {
        match line {
            Ok(line) if line.trim().is_empty() => {}
            Ok(line) => {
                if events.send(Event::Line { id, line }).is_err() {
                    break;
                }
            }
            Err(_) => break,
        }
    }
    let _ = events.send(Event::Closed { id });
}

struct EngineLoop {
    sim: Simulation,
    sessions: BTreeMap<u64, Session>,
    /// Latest command per robot since the previous step.
    pending: BTreeMap<u64, VelocityCommand>,
    recorder: Option<TrajectoryWriter<Box<dyn Write + Send>>>,
    max_steps: Option<u64>,
    lockstep: bool,
}

impl EngineLoop {
    fn run(&mut self, events: &Receiver<Event>, mode: Mode, stop: &AtomicBool) -> Result<(), ServerError> {
        let period = match mode {
            Mode::Lockstep => None,
            Mode::Realtime { rate_hz } => Some(Duration::from_secs_f64(1.0 / rate_hz)),
        };
        let mut deadline = Instant::now() + period.unwrap_or(POLL);
        while !stop.load(Ordering::SeqCst) && !self.finished() {
            let wait = match period {
                Some(_) => deadline.saturating_duration_since(Instant::now()).min(POLL),
                None => POLL,
            };
            match events.recv_timeout(wait) {
                Ok(event) => self.handle(event)?,
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
            if let Some(period) = period {
                let now = Instant::now();
                if now >= deadline {
                    self.step()?;
                    deadline += period;
                    if deadline < now {
                        // Fell behind; do not try to catch up in a burst.
                        deadline = now + period;
                    }
                }
            }
        }
        Ok(())
    }

    fn finished(&self) -> bool {
        self.max_steps.is_some_and(|m| self.sim.tick() >= m)
    }

    fn handle(&mut self, event: Event) -> Result<(), ServerError> {
        match event {
            Event::Connected { id, stream, outbox } => {
                self.sessions.insert(
                    id,
                    Session {
                        stream,
                        outbox,
                        subscriptions: BTreeSet::new(),
                    },
                );
            }
            Event::Closed { id } => {
                debug!("session {id} closed");
                self.sessions.remove(&id);
            }
            Event::Line { id, line } => match decode(&line) {
                Ok(msg) => self.on_message(id, msg)?,
                Err(e) => self.reply(id, WireMessage::error(ErrorCode::Malformed, e.to_string())),
            },
        }
        Ok(())
    }

    fn reply(&self, id: u64, msg: WireMessage) {
        if let Some(s) = self.sessions.get(&id) {
            s.send(&msg);
        }
    }

    fn is_robot(&self, robot_id: u64) -> bool {
        self.sim.agent(robot_id).is_some_and(|a| a.is_robot())
    }

    fn on_message(&mut self, id: u64, msg: WireMessage) -> Result<(), ServerError> {
        match msg {
            WireMessage::Hello { version } if version == PROTOCOL_VERSION => {
                let welcome = WireMessage::Welcome {
                    version: PROTOCOL_VERSION,
                    scenario: self.sim.name().to_owned(),
                    dt: self.sim.dt(),
                    robots: self.sim.robot_ids(),
                };
                self.reply(id, welcome);
            }
            WireMessage::Hello { version } => self.reply(
                id,
                WireMessage::error(
                    ErrorCode::VersionMismatch,
                    format!("server speaks version {PROTOCOL_VERSION}, client sent {version}"),
                ),
            ),
            WireMessage::Subscribe { robot_id, topic } => {
                if !self.is_robot(robot_id) {
                    self.reply(id, unknown_robot(robot_id));
                } else if let Some(s) = self.sessions.get_mut(&id) {
                    s.subscriptions.insert((robot_id, topic));
                }
            }
            WireMessage::CmdVel {
                robot_id,
                linear,
                angular,
            } => {
                if !self.is_robot(robot_id) {
                    self.reply(id, unknown_robot(robot_id));
                } else {
                    let mut cmd = VelocityCommand::new(linear, angular);
                    cmd.issued_tick = self.sim.tick();
                    self.pending.insert(robot_id, cmd);
                }
            }
            WireMessage::Step { .. } if !self.lockstep => {
                self.reply(id, WireMessage::error(ErrorCode::NotLockstep, "server is stepping in realtime"));
            }
            WireMessage::Step { n: 0 } => {
                self.reply(id, WireMessage::error(ErrorCode::Malformed, "step count must be at least 1"));
            }
            WireMessage::Step { n } => {
                for _ in 0..n {
                    if self.finished() {
                        break;
                    }
                    match self.step() {
                        Ok(()) => {}
                        // The engine checks its input before touching any state.
                        Err(ServerError::Engine(e)) => {
                            self.reply(id, WireMessage::error(ErrorCode::Internal, e.to_string()));
                            return Ok(());
                        }
                        Err(e) => return Err(e),
                    }
                }
                self.reply(id, WireMessage::Stepped { tick: self.sim.tick() });
            }
            WireMessage::Bye => {
                if let Some(s) = self.sessions.remove(&id) {
                    let _ = s.stream.shutdown(Shutdown::Read);
                }
            }
            other => self.reply(
                id,
                WireMessage::error(ErrorCode::Malformed, format!("'{}' is a server message", other.kind())),
            ),
        }
        Ok(())
    }

    fn step(&mut self) -> Result<(), ServerError> {
        let commands = std::mem::take(&mut self.pending);
        self.sim.step(&commands)?;
        self.publish();
        if let Some(rec) = self.recorder.as_mut() {
            rec.write(&self.sim.snapshot())?;
        }
        Ok(())
    }

    fn publish(&self) {
        let scans = self.sim.scans_published_this_tick().then(|| self.sim.latest_scans());
        let mut state = None;
        for s in self.sessions.values() {
            if let Some(scans) = scans {
                for &(robot, topic) in &s.subscriptions {
                    if topic == Topic::Scan {
                        if let Some(scan) = scans.get(&robot) {
                            s.send(&WireMessage::scan(scan));
                        }
                    }
                }
            }
            if s.subscriptions.iter().any(|&(_, t)| t == Topic::State) {
                let msg = state.get_or_insert_with(|| WireMessage::state(&self.sim.snapshot()));
                s.send(msg);
            }
        }
    }
}

fn unknown_robot(robot_id: u64) -> WireMessage {
    WireMessage::error(ErrorCode::UnknownRobot, format!("no robot with id {robot_id}"))
}
