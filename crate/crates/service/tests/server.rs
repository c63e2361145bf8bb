use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpStream};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crowdsim_core::engine::Simulation;
use crowdsim_core::geometry::Vec2;
use crowdsim_core::presets;
use crowdsim_core::scenario::{AgentKind, AgentSpec, ScenarioSpec};
use crowdsim_core::trajectory::{agent_rows, replay, CommandRecord, CommandTrace};
use crowdsim_service::protocol::{decode, ErrorCode, WireMessage, NO_HIT};
use crowdsim_service::server::{Mode, Server, ShutdownHandle};

struct Running {
    addr: SocketAddr,
    stop: ShutdownHandle,
    thread: JoinHandle<u64>,
}

impl Running {
    fn start(spec: &ScenarioSpec, mode: Mode) -> Self {
        Self::start_with(Server::bind(spec, "127.0.0.1:0", mode).unwrap())
    }

    fn start_with(server: Server) -> Self {
        let addr = server.local_addr().unwrap();
        let stop = server.shutdown_handle();
        let thread = thread::spawn(move || server.run().unwrap());
        Running { addr, stop, thread }
    }

    fn client(&self) -> Client {
        Client::connect(self.addr)
    }

    fn stop(self) -> u64 {
        self.stop.shutdown();
        self.thread.join().unwrap()
    }
}

struct Client {
    out: TcpStream,
    lines: BufReader<TcpStream>,
}

impl Client {
    fn connect(addr: SocketAddr) -> Self {
        let out = TcpStream::connect(addr).unwrap();
        out.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
        let lines = BufReader::new(out.try_clone().unwrap());
        Client { out, lines }
    }

    fn send(&mut self, line: &str) {
        self.out.write_all(line.as_bytes()).unwrap();
        self.out.write_all(b"\n").unwrap();
    }

    fn recv(&mut self) -> WireMessage {
        let mut line = String::new();
        let n = self.lines.read_line(&mut line).expect("reply before timeout");
        assert!(n > 0, "server closed the connection");
        decode(&line).unwrap_or_else(|e| panic!("bad server line {line:?}: {e}"))
    }

    /// Round trip that proves every earlier line from this client was handled.
    fn sync(&mut self) {
        self.send(r#"{"type":"hello","version":1}"#);
        assert!(matches!(self.recv(), WireMessage::Welcome { .. }));
    }

    fn step(&mut self, n: u64) -> u64 {
        self.send(&format!(r#"{{"type":"step","n":{n}}}"#));
        match self.recv() {
            WireMessage::Stepped { tick } => tick,
            other => panic!("expected stepped, got {other:?}"),
        }
    }

    fn expect_error(&mut self, code: ErrorCode) {
        match self.recv() {
            WireMessage::Error { code: got, .. } => assert_eq!(got, code),
            other => panic!("expected {code:?}, got {other:?}"),
        }
    }
}

fn cmd(robot: u64, linear: f64, angular: f64) -> String {
    format!(r#"{{"type":"cmd_vel","robot_id":{robot},"linear":{linear},"angular":{angular}}}"#)
}

fn two_robot_room() -> ScenarioSpec {
    let mut spec = presets::robot_room(10.0);
    spec.agents.push(AgentSpec::robot(1, Vec2::new(2.0, 2.0), std::f64::consts::FRAC_PI_2));
    spec
}

fn row(rows: &[(u64, AgentKind, f64, f64, f64, f64, f64)], id: u64) -> (f64, f64, f64, f64, f64) {
    let r = rows.iter().find(|r| r.0 == id).unwrap();
    (r.2, r.3, r.4, r.5, r.6)
}

#[test]
fn hello_is_answered_with_welcome() {
    let server = Running::start(&two_robot_room(), Mode::Lockstep);
    let mut c = server.client();
    c.send(r#"{"type":"hello","version":1}"#);
    match c.recv() {
        WireMessage::Welcome {
            version,
            scenario,
            dt,
            robots,
        } => {
            assert_eq!(version, 1);
            assert_eq!(scenario, "robot_room_10");
            assert_eq!(dt, 0.1);
            assert_eq!(robots, vec![0, 1]);
        }
        other => panic!("{other:?}"),
    }
    server.stop();
}

#[test]
fn lockstep_step_delivers_one_scan_then_stepped() {
    let spec = presets::robot_room(10.0);
    let server = Running::start(&spec, Mode::Lockstep);
    let mut c = server.client();
    c.send(r#"{"type":"subscribe","robot_id":0,"topic":"scan"}"#);
    c.send(r#"{"type":"step"}"#);
    match c.recv() {
        WireMessage::Scan {
            robot_id,
            tick,
            ranges,
            range_max,
            ..
        } => {
            assert_eq!((robot_id, tick), (0, 1));
            assert_eq!(ranges.len(), spec.config.laser.beam_count);
            assert!(ranges.iter().all(|&r| r == NO_HIT || (0.0..=range_max).contains(&r)));
        }
        other => panic!("expected scan, got {other:?}"),
    }
    assert_eq!(c.recv(), WireMessage::Stepped { tick: 1 });

    // A multi-step request publishes after every step.
    c.send(r#"{"type":"step","n":3}"#);
    for expected in 2..=4 {
        match c.recv() {
            WireMessage::Scan { tick, .. } => assert_eq!(tick, expected),
            other => panic!("expected scan, got {other:?}"),
        }
    }
    assert_eq!(c.recv(), WireMessage::Stepped { tick: 4 });
    // Nothing else was queued.
    c.sync();
    assert_eq!(server.stop(), 4);
}

#[test]
fn scan_over_the_wire_matches_engine() {
    let spec = presets::robot_and_crowd_room(8, 2);
    let mut sim = Simulation::new(&spec).unwrap();
    sim.step(&BTreeMap::new()).unwrap();
    let direct = WireMessage::scan(&sim.latest_scans()[&0]);

    let server = Running::start(&spec, Mode::Lockstep);
    let mut c = server.client();
    c.send(r#"{"type":"subscribe","robot_id":0,"topic":"scan"}"#);
    c.send(r#"{"type":"step"}"#);
    assert_eq!(c.recv(), direct);
    server.stop();
}

#[test]
fn bad_requests_get_error_codes_and_keep_the_session() {
    let spec = presets::robot_and_crowd_room(3, 1);
    let server = Running::start(&spec, Mode::Lockstep);
    let mut c = server.client();

    c.send(r#"{"type":"subscribe","robot_id":99,"topic":"scan"}"#);
    c.expect_error(ErrorCode::UnknownRobot);
    // Pedestrians cannot be commanded or scanned.
    c.send(&cmd(1, 0.5, 0.0));
    c.expect_error(ErrorCode::UnknownRobot);
    c.send(r#"{"type":"subscribe","robot_id":1,"topic":"state"}"#);
    c.expect_error(ErrorCode::UnknownRobot);

    c.send("this is not json");
    c.expect_error(ErrorCode::Malformed);
    c.send(r#"{"type":"cmd_vel","robot_id":0,"linear":"fast","angular":0}"#);
    c.expect_error(ErrorCode::Malformed);
    c.send(r#"{"type":"subscribe","robot_id":0,"topic":"odometry"}"#);
    c.expect_error(ErrorCode::Malformed);
    c.send(r#"{"type":"step","n":0}"#);
    c.expect_error(ErrorCode::Malformed);
    c.send(r#"{"type":"stepped","tick":3}"#);
    c.expect_error(ErrorCode::Malformed);

    c.send(r#"{"type":"hello","version":2}"#);
    c.expect_error(ErrorCode::VersionMismatch);

    // Still usable, and none of the above advanced the clock.
    assert_eq!(c.step(1), 1);
    assert_eq!(server.stop(), 1);
}

#[test]
fn realtime_mode_refuses_step_requests() {
    let spec = presets::robot_room(10.0);
    let server = Running::start(&spec, Mode::Realtime { rate_hz: 50.0 });
    let mut c = server.client();
    c.send(r#"{"type":"step","n":1}"#);
    c.expect_error(ErrorCode::NotLockstep);

    // The clock runs by itself and state keeps arriving.
    c.send(r#"{"type":"subscribe","robot_id":0,"topic":"state"}"#);
    let mut last = 0;
    for _ in 0..3 {
        match c.recv() {
            WireMessage::State { tick, .. } => {
                assert!(tick > last);
                last = tick;
            }
            other => panic!("expected state, got {other:?}"),
        }
    }
    assert!(server.stop() >= last);
}

#[test]
fn two_clients_commands_apply_on_the_same_step() {
    let spec = two_robot_room();
    let server = Running::start(&spec, Mode::Lockstep);
    let mut a = server.client();
    let mut b = server.client();
    a.send(&cmd(0, 0.5, 0.0));
    a.sync();
    b.send(&cmd(1, 0.4, 0.2));
    b.send(r#"{"type":"subscribe","robot_id":1,"topic":"state"}"#);
    b.sync();

    assert_eq!(a.step(1), 1);
    let WireMessage::State { tick, agents, .. } = b.recv() else {
        panic!("expected state")
    };
    assert_eq!(tick, 1);
    let dt = 0.1;
    let (x0, y0, th0, vx0, vy0) = row(&agents, 0);
    assert_eq!((x0, y0, th0), (0.5 * dt, 0.0, 0.0));
    assert_eq!((vx0, vy0), (0.5, 0.0));
    let (x1, y1, th1, ..) = row(&agents, 1);
    let heading = std::f64::consts::FRAC_PI_2;
    assert!((x1 - (2.0 + 0.4 * dt * heading.cos())).abs() < 1e-15);
    assert!((y1 - (2.0 + 0.4 * dt)).abs() < 1e-15);
    assert!((th1 - (heading + 0.2 * dt)).abs() < 1e-15);
    server.stop();
}

#[test]
fn last_command_before_a_step_wins_and_is_held() {
    let spec = presets::robot_room(10.0);
    let server = Running::start(&spec, Mode::Lockstep);
    let mut c = server.client();
    c.send(r#"{"type":"subscribe","robot_id":0,"topic":"state"}"#);
    c.send(&cmd(0, 1.0, 0.5));
    c.send(&cmd(0, -0.2, 0.0));
    c.send(&cmd(0, 0.3, 0.0));
    c.send(r#"{"type":"step"}"#);
    let WireMessage::State { agents, .. } = c.recv() else {
        panic!("expected state")
    };
    assert_eq!(row(&agents, 0), (0.3 * 0.1, 0.0, 0.0, 0.3, 0.0));
    assert_eq!(c.recv(), WireMessage::Stepped { tick: 1 });

    // No new command: the previous one still drives the robot.
    c.send(r#"{"type":"step"}"#);
    let WireMessage::State { agents, .. } = c.recv() else {
        panic!("expected state")
    };
    assert_eq!(row(&agents, 0).3, 0.3);
    assert_eq!(c.recv(), WireMessage::Stepped { tick: 2 });
    server.stop();
}

#[test]
fn tick_counts_acknowledged_steps() {
    let spec = presets::robot_and_crowd_room(5, 3);
    let server = Running::start(&spec, Mode::Lockstep);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut clients = [server.client(), server.client()];
    let mut acknowledged = 0;
    for _ in 0..30 {
        let n = rng.gen_range(1..5);
        let who = rng.gen_range(0..clients.len());
        acknowledged += n;
        assert_eq!(clients[who].step(n), acknowledged);
    }
    assert_eq!(server.stop(), acknowledged);
}

#[test]
fn state_stream_matches_offline_replay() {
    let spec = presets::robot_and_crowd_room(12, 7);
    let steps = 25;
    let mut trace = CommandTrace::new();
    for tick in [0, 5, 12, 20] {
        trace.push(CommandRecord {
            tick,
            robot_id: 0,
            linear: 0.1 * tick as f64 + 0.2,
            angular: 0.3 - 0.02 * tick as f64,
        });
    }
    let mut sim = Simulation::new(&spec).unwrap();

    let server = Running::start(&spec, Mode::Lockstep);
    let mut c = server.client();
    c.send(r#"{"type":"subscribe","robot_id":0,"topic":"state"}"#);
    for tick in 0..steps {
        let commands = trace.commands_at(tick);
        for (id, v) in &commands {
            c.send(&cmd(*id, v.linear, v.angular));
        }
        sim.step(&commands).unwrap();
        c.send(r#"{"type":"step"}"#);
        match c.recv() {
            WireMessage::State { tick: got, t, agents } => {
                let snap = sim.snapshot();
                assert_eq!(got, snap.tick);
                assert_eq!(t, snap.sim_time);
                assert_eq!(agents, agent_rows(&snap));
            }
            other => panic!("expected state, got {other:?}"),
        }
        assert!(matches!(c.recv(), WireMessage::Stepped { .. }));
    }
    server.stop();
}

#[test]
fn recorded_log_equals_replay_of_the_same_commands() {
    let spec = presets::robot_and_crowd_room(10, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.jsonl");
    let steps = 15;
    let server = Server::bind(&spec, "127.0.0.1:0", Mode::Lockstep)
        .unwrap()
        .with_max_steps(steps)
        .record_to(Box::new(std::fs::File::create(&path).unwrap()));
    let server = Running::start_with(server);
    let mut c = server.client();
    let mut trace = CommandTrace::new();
    for tick in 0..steps {
        if tick % 4 == 0 {
            let (linear, angular) = (0.6, if tick % 8 == 0 { 0.4 } else { -0.4 });
            c.send(&cmd(0, linear, angular));
            trace.push(CommandRecord {
                tick,
                robot_id: 0,
                linear,
                angular,
            });
        }
        assert_eq!(c.step(1), tick + 1);
    }
    assert_eq!(server.thread.join().unwrap(), steps);

    let recorded = std::fs::read_to_string(&path).unwrap();
    let replayed = String::from_utf8(replay(&spec, &trace, steps, 1, Vec::new()).unwrap()).unwrap();
    assert_eq!(recorded.lines().count() as u64, steps + 1);
    assert_eq!(recorded, replayed);
}

#[test]
fn bye_closes_only_that_session() {
    let spec = presets::robot_room(10.0);
    let server = Running::start(&spec, Mode::Lockstep);
    let mut a = server.client();
    let mut b = server.client();
    a.send(r#"{"type":"bye"}"#);
    let mut rest = String::new();
    assert_eq!(a.lines.read_line(&mut rest).unwrap(), 0, "got {rest:?}");
    assert_eq!(b.step(2), 2);
    server.stop();
}

#[test]
fn vanished_client_does_not_stall_others() {
    let spec = presets::robot_room(10.0);
    let server = Running::start(&spec, Mode::Lockstep);
    {
        let mut gone = server.client();
        gone.send(r#"{"type":"subscribe","robot_id":0,"topic":"scan"}"#);
        gone.sync();
    }
    let mut c = server.client();
    for k in 1..=20 {
        assert_eq!(c.step(1), k);
    }
    server.stop();
}
