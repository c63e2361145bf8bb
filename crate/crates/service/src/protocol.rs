//! Wire format: one JSON object per line, discriminated by `"type"`.

use serde::{Deserialize, Serialize};

use crowdsim_core::engine::SimSnapshot;
use crowdsim_core::sensors::LaserScan;
use crowdsim_core::trajectory::{agent_rows, AgentRow};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_PORT: u16 = 7171;
/// Range reported for a beam that hit nothing.
pub const NO_HIT: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topic {
    Scan,
    State,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownRobot,
    Malformed,
    NotLockstep,
    VersionMismatch,
    Internal,
}

fn one() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum WireMessage {
    // client -> server
    Hello {
        version: u32,
    },
    Subscribe {
        robot_id: u64,
        topic: Topic,
    },
    CmdVel {
        robot_id: u64,
        linear: f64,
        angular: f64,
    },
    Step {
        #[serde(default = "one")]
        n: u64,
    },
    Bye,

    // server -> client
    Welcome {
        version: u32,
        scenario: String,
        dt: f64,
        robots: Vec<u64>,
    },
    Scan {
        robot_id: u64,
        tick: u64,
        angle_min: f64,
        angle_increment: f64,
        range_max: f64,
        ranges: Vec<f64>,
    },
    State {
        tick: u64,
        t: f64,
        agents: Vec<AgentRow>,
    },
    Stepped {
        tick: u64,
    },
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl WireMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        WireMessage::Error {
            code,
            message: message.into(),
        }
    }

    pub fn scan(scan: &LaserScan) -> Self {
        WireMessage::Scan {
            robot_id: scan.robot_id,
            tick: scan.tick,
            angle_min: scan.angle_min,
            angle_increment: scan.angle_increment,
            range_max: scan.range_max,
            ranges: scan.ranges.iter().map(|r| r.unwrap_or(NO_HIT)).collect(),
        }
    }

    pub fn state(snapshot: &SimSnapshot) -> Self {
        WireMessage::State {
            tick: snapshot.tick,
            t: snapshot.sim_time,
            agents: agent_rows(snapshot),
        }
    }

    /// The `"type"` tag of this message.
    pub fn kind(&self) -> &'static str {
        match self {
            WireMessage::Hello { .. } => "hello",
            WireMessage::Subscribe { .. } => "subscribe",
            WireMessage::CmdVel { .. } => "cmd_vel",
            WireMessage::Step { .. } => "step",
            WireMessage::Bye => "bye",
            WireMessage::Welcome { .. } => "welcome",
            WireMessage::Scan { .. } => "scan",
            WireMessage::State { .. } => "state",
            WireMessage::Stepped { .. } => "stepped",
            WireMessage::Error { .. } => "error",
        }
    }
}

/// Wire ranges back to optional distances; negative values mean no hit.
pub fn ranges_from_wire(ranges: &[f64]) -> Vec<Option<f64>> {
    ranges.iter().map(|&r| (r >= 0.0).then_some(r)).collect()
}

/// Serializes to a single line without the trailing newline.
pub fn encode(msg: &WireMessage) -> String {
    serde_json::to_string(msg).expect("wire messages contain only plain data")
}

pub fn decode(line: &str) -> Result<WireMessage, serde_json::Error> {
    serde_json::from_str(line.trim_end_matches(['\r', '\n']))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn client_messages_parse() {
        assert_eq!(decode(r#"{"type":"hello","version":1}"#).unwrap(), WireMessage::Hello { version: 1 });
        assert_eq!(decode(r#"{"type":"step"}"#).unwrap(), WireMessage::Step { n: 1 });
        assert_eq!(decode(r#"{"type":"bye"}"#).unwrap(), WireMessage::Bye);
        assert_eq!(
            decode(r#"{"type":"subscribe","robot_id":3,"topic":"scan"}"#).unwrap(),
            WireMessage::Subscribe {
                robot_id: 3,
                topic: Topic::Scan
            }
        );
        assert!(decode(r#"{"type":"subscribe","robot_id":3,"topic":"odom"}"#).is_err());
        assert!(decode(r#"{"type":"step","n":2,"extra":0}"#).is_err());
        assert!(decode(r#"{"type":"teleport"}"#).is_err());
        assert!(decode("not json").is_err());
    }

    #[test]
    fn server_messages_layout() {
        let msg = WireMessage::error(ErrorCode::UnknownRobot, "no robot 9");
        assert_eq!(encode(&msg), r#"{"type":"error","code":"unknown_robot","message":"no robot 9"}"#);
        assert_eq!(encode(&WireMessage::Stepped { tick: 4 }), r#"{"type":"stepped","tick":4}"#);
    }

    #[test]
    fn no_hit_is_minus_one() {
        let scan = LaserScan {
            robot_id: 1,
            tick: 2,
            angle_min: -1.0,
            angle_increment: 0.5,
            range_max: 25.0,
            ranges: vec![Some(2.5), None, Some(0.0)],
        };
        let msg = WireMessage::scan(&scan);
        let text = encode(&msg);
        assert!(text.contains(r#""ranges":[2.5,-1.0,0.0]"#), "{text}");
        let WireMessage::Scan { ranges, .. } = decode(&text).unwrap() else {
            panic!("not a scan")
        };
        assert_eq!(ranges_from_wire(&ranges), scan.ranges);
    }
}
