//! JSON-lines trajectory log (one object per tick) and the matching robot
//! command trace used to replay a run.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EngineError, SimSnapshot, Simulation, VelocityCommand};
use crate::scenario::{AgentKind, ScenarioSpec};

/// `[id, kind, x, y, theta, vx, vy]`
pub type AgentRow = (u64, AgentKind, f64, f64, f64, f64, f64);

pub fn agent_rows(snapshot: &SimSnapshot) -> Vec<AgentRow> {
    snapshot
        .agents
        .iter()
        .map(|a| {
            (
                a.id,
                a.kind,
                a.position.x,
                a.position.y,
                a.heading,
                a.velocity.x,
                a.velocity.y,
            )
        })
        .collect()
}

#[derive(Serialize)]
struct Record {
    tick: u64,
    t: f64,
    agents: Vec<AgentRow>,
}

/// Encodes one snapshot as a single line, without the newline.
pub fn encode_record(snapshot: &SimSnapshot) -> String {
    serde_json::to_string(&Record {
        tick: snapshot.tick,
        t: snapshot.sim_time,
        agents: agent_rows(snapshot),
    })
    .expect("snapshot fields are always serializable")
}

pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W) -> Self {
        TrajectoryWriter { out }
    }

    pub fn write(&mut self, snapshot: &SimSnapshot) -> io::Result<()> {
        self.out.write_all(encode_record(snapshot).as_bytes())?;
        self.out.write_all(b"\n")
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

/// One robot command, applied by the step that starts at `tick`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub tick: u64,
    pub robot_id: u64,
    pub linear: f64,
    pub angular: f64,
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("command trace line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("command trace line {line}: tick {tick} comes before tick {previous}")]
    OutOfOrder { line: usize, tick: u64, previous: u64 },
}

/// Commands grouped by the tick at which they take effect. Later records for
/// the same robot and tick replace earlier ones.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandTrace {
    by_tick: BTreeMap<u64, BTreeMap<u64, VelocityCommand>>,
}

impl CommandTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: CommandRecord) {
        let mut cmd = VelocityCommand::new(record.linear, record.angular);
        cmd.issued_tick = record.tick;
        self.by_tick.entry(record.tick).or_default().insert(record.robot_id, cmd);
    }

    /// Parses JSON lines of [`CommandRecord`]; blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut trace = CommandTrace::new();
        let mut previous = 0;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let record: CommandRecord =
                serde_json::from_str(raw).map_err(|source| TraceError::Parse { line: i + 1, source })?;
            if record.tick < previous {
                return Err(TraceError::OutOfOrder {
                    line: i + 1,
                    tick: record.tick,
                    previous,
                });
            }
            previous = record.tick;
            trace.push(record);
        }
        Ok(trace)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (&tick, cmds) in &self.by_tick {
            for (&robot_id, c) in cmds {
                let record = CommandRecord {
                    tick,
                    robot_id,
                    linear: c.linear,
                    angular: c.angular,
                };
                out.push_str(&serde_json::to_string(&record).expect("plain numbers"));
                out.push('\n');
            }
        }
        out
    }

    pub fn commands_at(&self, tick: u64) -> BTreeMap<u64, VelocityCommand> {
        self.by_tick.get(&tick).cloned().unwrap_or_default()
    }

    pub fn is_empty(&self) -> bool {
        self.by_tick.is_empty()
    }
}

/// Runs `spec` for `steps` ticks under `trace` and writes the trajectory log,
/// starting with the initial state at tick 0.
pub fn replay<W: Write>(
    spec: &ScenarioSpec,
    trace: &CommandTrace,
    steps: u64,
    threads: usize,
    out: W,
) -> Result<W, ReplayError> {
    let mut sim = Simulation::with_threads(spec, threads)?;
    let mut writer = TrajectoryWriter::new(out);
    writer.write(&sim.snapshot())?;
    for _ in 0..steps {
        sim.step(&trace.commands_at(sim.tick()))?;
        writer.write(&sim.snapshot())?;
    }
    writer.flush()?;
    Ok(writer.into_inner())
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("writing trajectory: {0}")]
    Io(#[from] io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::AgentPose;
    use crate::geometry::Vec2;

    #[test]
    fn record_layout() {
        let snap = SimSnapshot {
            tick: 3,
            sim_time: 0.30000000000000004,
            agents: vec![
                AgentPose {
                    id: 1,
                    kind: AgentKind::Pedestrian,
                    position: Vec2::new(0.1, -2.0),
                    heading: 0.5,
                    velocity: Vec2::new(1.0, 0.0),
                },
                AgentPose {
                    id: 4,
                    kind: AgentKind::Robot,
                    position: Vec2::new(3.0, 4.0),
                    heading: -1.25,
                    velocity: Vec2::ZERO,
                },
            ],
        };
        let mut w = TrajectoryWriter::new(Vec::new());
        w.write(&snap).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(
            text,
            "{\"tick\":3,\"t\":0.30000000000000004,\"agents\":[[1,\"pedestrian\",0.1,-2.0,0.5,1.0,0.0],[4,\"robot\",3.0,4.0,-1.25,0.0,0.0]]}\n"
        );
    }

    #[test]
    fn trace_round_trip_and_override() {
        let text = "{\"tick\":0,\"robot_id\":2,\"linear\":0.5,\"angular\":0.0}\n\n\
                    {\"tick\":3,\"robot_id\":2,\"linear\":0.1,\"angular\":0.2}\n\
                    {\"tick\":3,\"robot_id\":2,\"linear\":0.3,\"angular\":-0.2}\n";
        let trace = CommandTrace::parse(text).unwrap();
        assert_eq!(trace.commands_at(3)[&2].linear, 0.3);
        assert!(trace.commands_at(1).is_empty());
        assert_eq!(CommandTrace::parse(&trace.to_jsonl()).unwrap(), trace);
    }

    #[test]
    fn trace_rejects_backwards_ticks() {
        let text = "{\"tick\":4,\"robot_id\":1,\"linear\":0,\"angular\":0}\n\
                    {\"tick\":2,\"robot_id\":1,\"linear\":0,\"angular\":0}";
        assert!(matches!(CommandTrace::parse(text), Err(TraceError::OutOfOrder { line: 2, .. })));
    }
}
