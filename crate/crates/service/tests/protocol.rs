use proptest::prelude::*;

use crowdsim_core::scenario::AgentKind;
use crowdsim_service::protocol::{decode, encode, ErrorCode, Topic, WireMessage};

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        -1e6f64..1e6,
        any::<f64>().prop_filter("finite", |x| x.is_finite()),
        Just(0.0),
        Just(-0.0),
        Just(-1.0),
    ]
}

fn topic() -> impl Strategy<Value = Topic> {
    prop_oneof![Just(Topic::Scan), Just(Topic::State)]
}

fn code() -> impl Strategy<Value = ErrorCode> {
    prop_oneof![
        Just(ErrorCode::UnknownRobot),
        Just(ErrorCode::Malformed),
        Just(ErrorCode::NotLockstep),
        Just(ErrorCode::VersionMismatch),
        Just(ErrorCode::Internal),
    ]
}

fn kind() -> impl Strategy<Value = AgentKind> {
    prop_oneof![Just(AgentKind::Pedestrian), Just(AgentKind::Robot)]
}

fn message() -> impl Strategy<Value = WireMessage> {
    prop_oneof![
        any::<u32>().prop_map(|version| WireMessage::Hello { version }),
        (any::<u64>(), topic()).prop_map(|(robot_id, topic)| WireMessage::Subscribe { robot_id, topic }),
        (any::<u64>(), finite(), finite()).prop_map(|(robot_id, linear, angular)| WireMessage::CmdVel {
            robot_id,
            linear,
            angular
        }),
        (1u64..u64::MAX).prop_map(|n| WireMessage::Step { n }),
        Just(WireMessage::Bye),
        (any::<u32>(), ".{0,24}", finite(), prop::collection::vec(any::<u64>(), 0..6)).prop_map(
            |(version, scenario, dt, robots)| WireMessage::Welcome {
                version,
                scenario,
                dt,
                robots
            }
        ),
        (
            any::<u64>(),
            any::<u64>(),
            finite(),
            finite(),
            finite(),
            prop::collection::vec(finite(), 0..64)
        )
            .prop_map(|(robot_id, tick, angle_min, angle_increment, range_max, ranges)| {
                WireMessage::Scan {
                    robot_id,
                    tick,
                    angle_min,
                    angle_increment,
                    range_max,
                    ranges,
                }
            }),
        (
            any::<u64>(),
            finite(),
            prop::collection::vec(
                (any::<u64>(), kind(), finite(), finite(), finite(), finite(), finite()),
                0..8
            )
        )
            .prop_map(|(tick, t, agents)| WireMessage::State { tick, t, agents }),
        any::<u64>().prop_map(|tick| WireMessage::Stepped { tick }),
        (code(), ".{0,40}").prop_map(|(code, message)| WireMessage::Error { code, message }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn every_message_survives_a_round_trip(msg in message()) {
        let line = encode(&msg);
        prop_assert!(!line.contains('\n'));
        let back = decode(&line).unwrap();
        prop_assert_eq!(&back, &msg);
        // Bitwise, so -0.0 and the last ulp survive too.
        prop_assert_eq!(encode(&back), line);
    }

    #[test]
    fn decoding_never_panics(line in ".{0,80}") {
        let _ = decode(&line);
    }
}

#[test]
fn client_lines_from_other_languages_parse() {
    // Whitespace and key order as a generic JSON library might emit them.
    let msg = decode("{ \"angular\": -0.25, \"linear\": 1, \"robot_id\": 4, \"type\": \"cmd_vel\" }\r\n").unwrap();
    assert_eq!(
        msg,
        WireMessage::CmdVel {
            robot_id: 4,
            linear: 1.0,
            angular: -0.25
        }
    );
    assert!(decode(r#"{"type":"step","n":-1}"#).is_err());
    assert!(decode(r#"{"type":"cmd_vel","robot_id":4,"linear":1}"#).is_err());
}
