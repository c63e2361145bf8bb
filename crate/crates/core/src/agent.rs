use crate::geometry::Vec2;
use crate::navigation::TargetProgress;
use crate::scenario::{AgentKind, AgentSpec};

/// Kinematic state of one pedestrian or robot.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentState {
    pub id: u64,
    pub kind: AgentKind,
    pub position: Vec2,
    /// Robots: body orientation. Pedestrians: direction of travel, kept
    /// from the last tick when standing still.
    pub heading: f64,
    pub velocity: Vec2,
    pub radius: f64,
    pub pref_speed: f64,
    pub max_speed: f64,
    pub progress: TargetProgress,
}

impl AgentState {
    pub fn from_spec(spec: &AgentSpec) -> Self {
        AgentState {
            id: spec.id,
            kind: spec.kind,
            position: spec.start,
            heading: spec.heading,
            velocity: Vec2::ZERO,
            radius: spec.radius,
            pref_speed: spec.pref_speed,
            max_speed: spec.max_speed,
            progress: TargetProgress::new(spec.id),
        }
    }

    pub fn is_robot(&self) -> bool {
        self.kind == AgentKind::Robot
    }
}

/// Deterministic unit vector for an unordered id pair, oriented so that the
/// two agents get opposite directions.
pub(crate) fn pair_direction(self_id: u64, other_id: u64) -> Vec2 {
    let (lo, hi) = if self_id <= other_id {
        (self_id, other_id)
    } else {
        (other_id, self_id)
    };
    let mut z = lo.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ hi.rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    let angle = (z >> 11) as f64 / (1u64 << 53) as f64 * std::f64::consts::TAU;
    let dir = Vec2::from_angle(angle);
    if self_id <= other_id {
        dir
    } else {
        -dir
    }
}
