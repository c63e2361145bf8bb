//! Scenario descriptions: the world map, the agents and the simulation
//! settings, plus their JSON file format.

mod format;

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::avoidance::{OrcaParams, SocialForceParams};
use crate::geometry::{ObstacleSet, Rect, Vec2};
use crate::navigation::{AStarParams, PotentialParams};
use crate::params::{ParamMap, ParamSet};
use crate::sensors::LaserConfig;

pub use format::{parse_scenario, serialize_scenario};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_GOAL_TOLERANCE: f64 = 0.2;
pub const DEFAULT_PEDESTRIAN_RADIUS: f64 = 0.2;
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.3;
pub const DEFAULT_PEDESTRIAN_PREF_SPEED: f64 = 1.3;
pub const DEFAULT_PEDESTRIAN_MAX_SPEED: f64 = 2.0;
pub const DEFAULT_ROBOT_MAX_SPEED: f64 = 1.0;

/// Slack on the initial-overlap and wall-clearance checks.
const OVERLAP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Validation { field: String, message: String },
}

impl ScenarioError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Offending field for validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            ScenarioError::Validation { field, .. } => Some(field),
            ScenarioError::Syntax { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    Pedestrian,
    Robot,
}

impl AgentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentKind::Pedestrian => "pedestrian",
            AgentKind::Robot => "robot",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A location to visit: a point with an arrival tolerance or an
/// axis-aligned rectangular area.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GoalSpec {
    Point { pos: Vec2, tolerance: f64 },
    Region { center: Vec2, half_extents: Vec2 },
}

impl GoalSpec {
    pub fn point(pos: Vec2) -> Self {
        GoalSpec::Point {
            pos,
            tolerance: DEFAULT_GOAL_TOLERANCE,
        }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        match *self {
            GoalSpec::Point { pos, tolerance } => p.distance(pos) <= tolerance,
            GoalSpec::Region {
                center,
                half_extents,
            } => {
                (p.x - center.x).abs() <= half_extents.x && (p.y - center.y).abs() <= half_extents.y
            }
        }
    }

    /// Where planners steer to.
    pub fn anchor(&self) -> Vec2 {
        match *self {
            GoalSpec::Point { pos, .. } => pos,
            GoalSpec::Region { center, .. } => center,
        }
    }

    /// Distance from the anchor under which the goal counts as reached.
    pub fn arrival_radius(&self) -> f64 {
        match *self {
            GoalSpec::Point { tolerance, .. } => tolerance,
            GoalSpec::Region { half_extents, .. } => half_extents.x.min(half_extents.y),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSpec {
    pub id: u64,
    pub kind: AgentKind,
    pub start: Vec2,
    /// Initial heading in radians; meaningful for robots.
    pub heading: f64,
    pub radius: f64,
    pub pref_speed: f64,
    pub max_speed: f64,
    /// Target sequence. Always empty for robots.
    pub targets: Vec<GoalSpec>,
    pub cycle_targets: bool,
}

impl AgentSpec {
    pub fn pedestrian(id: u64, start: Vec2, targets: Vec<GoalSpec>) -> Self {
        AgentSpec {
            id,
            kind: AgentKind::Pedestrian,
            start,
            heading: 0.0,
            radius: DEFAULT_PEDESTRIAN_RADIUS,
            pref_speed: DEFAULT_PEDESTRIAN_PREF_SPEED,
            max_speed: DEFAULT_PEDESTRIAN_MAX_SPEED,
            targets,
            cycle_targets: false,
        }
    }

    pub fn robot(id: u64, start: Vec2, heading: f64) -> Self {
        AgentSpec {
            id,
            kind: AgentKind::Robot,
            start,
            heading,
            radius: DEFAULT_ROBOT_RADIUS,
            pref_speed: 0.0,
            max_speed: DEFAULT_ROBOT_MAX_SPEED,
            targets: Vec::new(),
            cycle_targets: false,
        }
    }

    pub fn is_robot(&self) -> bool {
        self.kind == AgentKind::Robot
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlannerKind {
    #[serde(rename = "astar")]
    AStar,
    #[serde(rename = "potential_field")]
    PotentialField,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::AStar => "astar",
            PlannerKind::PotentialField => "potential_field",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AvoidanceKind {
    #[serde(rename = "social_force")]
    SocialForce,
    #[serde(rename = "orca")]
    Orca,
}

impl AvoidanceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AvoidanceKind::SocialForce => "social_force",
            AvoidanceKind::Orca => "orca",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub planner: PlannerKind,
    pub avoidance: AvoidanceKind,
    /// Parameters of the selected planner, defaults filled in.
    pub planner_params: ParamMap,
    /// Parameters of the selected avoidance model, defaults filled in.
    pub avoidance_params: ParamMap,
    pub laser: LaserConfig,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: DEFAULT_DT,
            planner: PlannerKind::AStar,
            avoidance: AvoidanceKind::Orca,
            planner_params: AStarParams::default().to_map(),
            avoidance_params: OrcaParams::default().to_map(),
            laser: LaserConfig::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn with_planner(mut self, planner: PlannerKind) -> Self {
        self.planner = planner;
        self.planner_params = match planner {
            PlannerKind::AStar => AStarParams::default().to_map(),
            PlannerKind::PotentialField => PotentialParams::default().to_map(),
        };
        self
    }

    pub fn with_avoidance(mut self, avoidance: AvoidanceKind) -> Self {
        self.avoidance = avoidance;
        self.avoidance_params = match avoidance {
            AvoidanceKind::Orca => OrcaParams::default().to_map(),
            AvoidanceKind::SocialForce => SocialForceParams::default().to_map(),
        };
        self
    }

    // Typed views. Parameter maps are validated on parse, so these only fall
    // back to defaults for hand-built configs that skipped validation.

    pub fn astar_params(&self) -> AStarParams {
        AStarParams::from_map(&self.planner_params).unwrap_or_default()
    }

    pub fn potential_params(&self) -> PotentialParams {
        PotentialParams::from_map(&self.planner_params).unwrap_or_default()
    }

    pub fn orca_params(&self) -> OrcaParams {
        OrcaParams::from_map(&self.avoidance_params).unwrap_or_default()
    }

    pub fn social_force_params(&self) -> SocialForceParams {
        SocialForceParams::from_map(&self.avoidance_params).unwrap_or_default()
    }
}

/// A complete, validated world description.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub obstacles: ObstacleSet,
    pub world_bounds: Rect,
    pub agents: Vec<AgentSpec>,
    pub config: SimConfig,
}

impl ScenarioSpec {
    pub fn robot_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self
            .agents
            .iter()
            .filter(|a| a.is_robot())
            .map(|a| a.id)
            .collect();
        ids.sort_unstable();
        ids
    }

    pub fn pedestrian_count(&self) -> usize {
        self.agents.iter().filter(|a| !a.is_robot()).count()
    }

    /// Checks every structural invariant. Parsing calls this; hand-built
    /// specs should too.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let cfg = &self.config;
        if !(cfg.dt > 0.0 && cfg.dt <= 1.0) {
            return Err(ScenarioError::invalid("config.dt", format!("must lie in (0, 1], got {}", cfg.dt)));
        }
        let params = match cfg.planner {
            PlannerKind::AStar => AStarParams::from_map(&cfg.planner_params).map(|_| ()),
            PlannerKind::PotentialField => PotentialParams::from_map(&cfg.planner_params).map(|_| ()),
        };
        params.map_err(|(k, m)| ScenarioError::invalid(format!("config.planner_params.{k}"), m))?;
        let params = match cfg.avoidance {
            AvoidanceKind::Orca => OrcaParams::from_map(&cfg.avoidance_params).map(|_| ()),
            AvoidanceKind::SocialForce => SocialForceParams::from_map(&cfg.avoidance_params).map(|_| ()),
        };
        params.map_err(|(k, m)| ScenarioError::invalid(format!("config.avoidance_params.{k}"), m))?;
        cfg.laser
            .validate()
            .map_err(|(k, m)| ScenarioError::invalid(format!("config.laser.{k}"), m))?;

        let b = &self.world_bounds;
        if !(b.min.is_finite() && b.max.is_finite()) || b.is_degenerate() {
            return Err(ScenarioError::invalid("bounds", "must be a finite rectangle with min < max"));
        }

        let mut seen = HashSet::with_capacity(self.agents.len());
        for (i, a) in self.agents.iter().enumerate() {
            let field = |name: &str| format!("agents[{i}].{name}");
            if !seen.insert(a.id) {
                return Err(ScenarioError::invalid(field("id"), format!("duplicate agent id {}", a.id)));
            }
            if !a.start.is_finite() {
                return Err(ScenarioError::invalid(field("x"), "start position must be finite"));
            }
            if !a.heading.is_finite() {
                return Err(ScenarioError::invalid(field("heading"), "must be finite"));
            }
            if !(a.radius > 0.0 && a.radius.is_finite()) {
                return Err(ScenarioError::invalid(field("radius"), format!("must be positive, got {}", a.radius)));
            }
            if !(a.pref_speed >= 0.0 && a.pref_speed.is_finite()) {
                return Err(ScenarioError::invalid(field("pref_speed"), format!("must be >= 0, got {}", a.pref_speed)));
            }
            if !(a.max_speed >= a.pref_speed && a.max_speed.is_finite()) {
                return Err(ScenarioError::invalid(
                    field("max_speed"),
                    format!("must be >= pref_speed ({}), got {}", a.pref_speed, a.max_speed),
                ));
            }
            if a.is_robot() && (!a.targets.is_empty() || a.cycle_targets) {
                return Err(ScenarioError::invalid(field("targets"), "robots do not take targets"));
            }
            for (j, t) in a.targets.iter().enumerate() {
                let tfield = format!("agents[{i}].targets[{j}]");
                match *t {
                    GoalSpec::Point { pos, tolerance } => {
                        if !pos.is_finite() {
                            return Err(ScenarioError::invalid(tfield, "position must be finite"));
                        }
                        if !(tolerance > 0.0 && tolerance.is_finite()) {
                            return Err(ScenarioError::invalid(format!("{tfield}.tol"), "must be positive"));
                        }
                    }
                    GoalSpec::Region {
                        center,
                        half_extents,
                    } => {
                        if !center.is_finite() {
                            return Err(ScenarioError::invalid(tfield, "center must be finite"));
                        }
                        if !(half_extents.x > 0.0 && half_extents.y > 0.0 && half_extents.is_finite()) {
                            return Err(ScenarioError::invalid(format!("{tfield}.hx"), "half extents must be positive"));
                        }
                    }
                }
            }
            if !self.world_bounds.contains(a.start) {
                return Err(ScenarioError::invalid(field("x"), format!("start {} lies outside the world bounds", a.start)));
            }
            let clearance = self.obstacles.clearance(a.start);
            if clearance < a.radius - OVERLAP_SLACK {
                return Err(ScenarioError::invalid(
                    field("x"),
                    format!("start {} is {clearance:.4} m from a wall, less than its radius", a.start),
                ));
            }
        }

        // Initial overlaps, checked with a sort-and-sweep along x.
        let mut order: Vec<usize> = (0..self.agents.len()).collect();
        order.sort_by(|&i, &j| self.agents[i].start.x.total_cmp(&self.agents[j].start.x));
        let max_radius = self.agents.iter().map(|a| a.radius).fold(0.0, f64::max);
        for (k, &i) in order.iter().enumerate() {
            let a = &self.agents[i];
            for &j in &order[k + 1..] {
                let b = &self.agents[j];
                if b.start.x - a.start.x > a.radius + max_radius {
                    break;
                }
                let d = a.start.distance(b.start);
                if d < a.radius + b.radius - OVERLAP_SLACK {
                    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                    return Err(ScenarioError::invalid(
                        format!("agents[{hi}].x"),
                        format!(
                            "agent {} overlaps agent {} at start (distance {d:.4} m)",
                            self.agents[hi].id, self.agents[lo].id
                        ),
                    ));
                }
            }
        }
        Ok(())
    }
}
