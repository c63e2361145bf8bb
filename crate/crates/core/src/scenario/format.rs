//! JSON scenario documents.
//!
//! ```json
//! {
//!   "name": "hall",
//!   "bounds": [0, 0, 20, 20],
//!   "obstacles": [[0, 0, 20, 0], [20, 0, 20, 20]],
//!   "agents": [
//!     {"id": 0, "kind": "pedestrian", "x": 2, "y": 2,
//!      "targets": [{"type": "point", "x": 18, "y": 18}]},
//!     {"id": 1, "kind": "robot", "x": 5, "y": 5, "heading": 1.57}
//!   ],
//!   "config": {"dt": 0.1, "planner": "astar", "avoidance": "orca"}
//! }
//! ```

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    AgentKind, AgentSpec, AvoidanceKind, GoalSpec, PlannerKind, ScenarioError, ScenarioSpec, SimConfig,
    DEFAULT_DT, DEFAULT_GOAL_TOLERANCE, DEFAULT_PEDESTRIAN_MAX_SPEED, DEFAULT_PEDESTRIAN_PREF_SPEED,
    DEFAULT_PEDESTRIAN_RADIUS, DEFAULT_ROBOT_MAX_SPEED, DEFAULT_ROBOT_RADIUS,
};
use crate::avoidance::{OrcaParams, SocialForceParams};
use crate::geometry::{ObstacleSet, Rect, Segment, Vec2};
use crate::navigation::{AStarParams, PotentialParams};
use crate::params::{ParamMap, ParamSet};
use crate::sensors::LaserConfig;

const TOP_LEVEL_KEYS: [&str; 5] = ["name", "bounds", "obstacles", "agents", "config"];

/// Margin added around everything in the document when `bounds` is omitted.
const INFERRED_BOUNDS_MARGIN: f64 = 1.0;

#[derive(Serialize)]
struct Document<'a> {
    name: &'a str,
    bounds: [f64; 4],
    obstacles: Vec<[f64; 4]>,
    agents: Vec<RawAgent>,
    config: RawConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    id: u64,
    kind: AgentKind,
    x: f64,
    y: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    heading: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pref_speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_speed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    targets: Option<Vec<RawTarget>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cycle: Option<bool>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawTarget {
    Point {
        x: f64,
        y: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    Region {
        x: f64,
        y: f64,
        hx: f64,
        hy: f64,
    },
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    planner: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    avoidance: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    planner_params: Option<ParamMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    avoidance_params: Option<ParamMap>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    laser: Option<RawLaser>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawLaser {
    #[serde(skip_serializing_if = "Option::is_none")]
    fov: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_range: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rate_divisor: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mount_offset: Option<[f64; 2]>,
}

fn section<T: DeserializeOwned>(value: Value, field: &str) -> Result<T, ScenarioError> {
    serde_json::from_value(value).map_err(|e| ScenarioError::invalid(field, e.to_string()))
}

/// Parses and validates a scenario document, filling in every default.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec, ScenarioError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| ScenarioError::Syntax {
        line: e.line(),
        message: e.to_string(),
    })?;
    let Value::Object(mut doc) = doc else {
        return Err(ScenarioError::invalid("document", "top level must be a JSON object"));
    };
    if let Some(key) = doc.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
        return Err(ScenarioError::invalid(key.clone(), "unknown top-level key"));
    }

    let name = match doc.remove("name") {
        None => String::from("unnamed"),
        Some(v) => section::<String>(v, "name")?,
    };

    let mut obstacles = ObstacleSet::empty();
    if let Some(v) = doc.remove("obstacles") {
        let quads: Vec<[f64; 4]> = section(v, "obstacles")?;
        for (i, [x1, y1, x2, y2]) in quads.into_iter().enumerate() {
            let seg = Segment::new(Vec2::new(x1, y1), Vec2::new(x2, y2))
                .map_err(|e| ScenarioError::invalid(format!("obstacles[{i}]"), e.to_string()))?;
            obstacles.push(seg);
        }
    }

    let raw_agents: Vec<Value> = match doc.remove("agents") {
        None => return Err(ScenarioError::invalid("agents", "missing required section")),
        Some(v) => section(v, "agents")?,
    };
    let mut agents = Vec::with_capacity(raw_agents.len());
    for (i, v) in raw_agents.into_iter().enumerate() {
        let raw: RawAgent = section(v, &format!("agents[{i}]"))?;
        agents.push(agent_from_raw(raw));
    }

    let raw_config: RawConfig = match doc.remove("config") {
        None => RawConfig::default(),
        Some(v) => section(v, "config")?,
    };
    let config = config_from_raw(raw_config)?;

    let world_bounds = match doc.remove("bounds") {
        Some(v) => {
            let [x0, y0, x1, y1]: [f64; 4] = section(v, "bounds")?;
            Rect::new(Vec2::new(x0, y0), Vec2::new(x1, y1))
        }
        None => infer_bounds(&obstacles, &agents)
            .ok_or_else(|| ScenarioError::invalid("bounds", "cannot infer bounds of an empty world"))?,
    };

    let spec = ScenarioSpec {
        name,
        obstacles,
        world_bounds,
        agents,
        config,
    };
    spec.validate()?;
    Ok(spec)
}

fn agent_from_raw(raw: RawAgent) -> AgentSpec {
    let robot = raw.kind == AgentKind::Robot;
    let (radius, pref, max) = if robot {
        (DEFAULT_ROBOT_RADIUS, 0.0, DEFAULT_ROBOT_MAX_SPEED)
    } else {
        (
            DEFAULT_PEDESTRIAN_RADIUS,
            DEFAULT_PEDESTRIAN_PREF_SPEED,
            DEFAULT_PEDESTRIAN_MAX_SPEED,
        )
    };
    let pref_speed = raw.pref_speed.unwrap_or(pref);
    let targets = if robot {
        Vec::new()
    } else {
        raw.targets
            .unwrap_or_default()
            .into_iter()
            .map(|t| match t {
                RawTarget::Point { x, y, tol } => GoalSpec::Point {
                    pos: Vec2::new(x, y),
                    tolerance: tol.unwrap_or(DEFAULT_GOAL_TOLERANCE),
                },
                RawTarget::Region { x, y, hx, hy } => GoalSpec::Region {
                    center: Vec2::new(x, y),
                    half_extents: Vec2::new(hx, hy),
                },
            })
            .collect()
    };
    AgentSpec {
        id: raw.id,
        kind: raw.kind,
        start: Vec2::new(raw.x, raw.y),
        heading: raw.heading.unwrap_or(0.0),
        radius: raw.radius.unwrap_or(radius),
        pref_speed,
        // An omitted max_speed never undercuts an explicit pref_speed.
        max_speed: raw.max_speed.unwrap_or(max.max(pref_speed)),
        targets,
        cycle_targets: !robot && raw.cycle.unwrap_or(false),
    }
}

fn config_from_raw(raw: RawConfig) -> Result<SimConfig, ScenarioError> {
    let planner = match raw.planner.as_deref() {
        None | Some("astar") => PlannerKind::AStar,
        Some("potential_field") => PlannerKind::PotentialField,
        Some(other) => {
            return Err(ScenarioError::invalid(
                "config.planner",
                format!("unknown planner `{other}` (expected astar or potential_field)"),
            ))
        }
    };
    let avoidance = match raw.avoidance.as_deref() {
        None | Some("orca") => AvoidanceKind::Orca,
        Some("social_force") => AvoidanceKind::SocialForce,
        Some(other) => {
            return Err(ScenarioError::invalid(
                "config.avoidance",
                format!("unknown avoidance model `{other}` (expected orca or social_force)"),
            ))
        }
    };
    let planner_params = raw.planner_params.unwrap_or_default();
    let planner_params = match planner {
        PlannerKind::AStar => AStarParams::from_map(&planner_params).map(|p| p.to_map()),
        PlannerKind::PotentialField => PotentialParams::from_map(&planner_params).map(|p| p.to_map()),
    }
    .map_err(|(k, m)| ScenarioError::invalid(format!("config.planner_params.{k}"), m))?;
    let avoidance_params = raw.avoidance_params.unwrap_or_default();
    let avoidance_params = match avoidance {
        AvoidanceKind::Orca => OrcaParams::from_map(&avoidance_params).map(|p| p.to_map()),
        AvoidanceKind::SocialForce => SocialForceParams::from_map(&avoidance_params).map(|p| p.to_map()),
    }
    .map_err(|(k, m)| ScenarioError::invalid(format!("config.avoidance_params.{k}"), m))?;

    let defaults = LaserConfig::default();
    let laser = raw.laser.unwrap_or_default();
    let laser = LaserConfig {
        fov: laser.fov.unwrap_or(defaults.fov),
        max_range: laser.max_range.unwrap_or(defaults.max_range),
        beam_count: laser.beam_count.unwrap_or(defaults.beam_count),
        rate_divisor: laser.rate_divisor.unwrap_or(defaults.rate_divisor),
        mount_offset: laser
            .mount_offset
            .map_or(defaults.mount_offset, |[x, y]| Vec2::new(x, y)),
    };

    Ok(SimConfig {
        dt: raw.dt.unwrap_or(DEFAULT_DT),
        planner,
        avoidance,
        planner_params,
        avoidance_params,
        laser,
        seed: raw.seed.unwrap_or(0),
    })
}

fn infer_bounds(obstacles: &ObstacleSet, agents: &[AgentSpec]) -> Option<Rect> {
    let mut points: Vec<Vec2> = obstacles.segments().iter().flat_map(|s| [s.a(), s.b()]).collect();
    for a in agents {
        let r = Vec2::new(a.radius, a.radius);
        points.push(a.start - r);
        points.push(a.start + r);
        for t in &a.targets {
            match *t {
                GoalSpec::Point { pos, .. } => points.push(pos),
                GoalSpec::Region {
                    center,
                    half_extents,
                } => {
                    points.push(center - half_extents);
                    points.push(center + half_extents);
                }
            }
        }
    }
    Rect::from_points(points.into_iter().filter(|p| p.is_finite())).map(|r| r.expanded(INFERRED_BOUNDS_MARGIN))
}

/// Writes the canonical document for `spec`: every default spelled out,
/// fixed key order, pretty-printed.
pub fn serialize_scenario(spec: &ScenarioSpec) -> String {
    let cfg = &spec.config;
    let doc = Document {
        name: &spec.name,
        bounds: [
            spec.world_bounds.min.x,
            spec.world_bounds.min.y,
            spec.world_bounds.max.x,
            spec.world_bounds.max.y,
        ],
        obstacles: spec
            .obstacles
            .segments()
            .iter()
            .map(|s| [s.a().x, s.a().y, s.b().x, s.b().y])
            .collect(),
        agents: spec.agents.iter().map(agent_to_raw).collect(),
        config: RawConfig {
            dt: Some(cfg.dt),
            planner: Some(cfg.planner.as_str().to_string()),
            avoidance: Some(cfg.avoidance.as_str().to_string()),
            planner_params: Some(cfg.planner_params.clone()),
            avoidance_params: Some(cfg.avoidance_params.clone()),
            seed: Some(cfg.seed),
            laser: Some(RawLaser {
                fov: Some(cfg.laser.fov),
                max_range: Some(cfg.laser.max_range),
                beam_count: Some(cfg.laser.beam_count),
                rate_divisor: Some(cfg.laser.rate_divisor),
                mount_offset: Some([cfg.laser.mount_offset.x, cfg.laser.mount_offset.y]),
            }),
        },
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("scenario documents always serialize");
    out.push('\n');
    out
}

fn agent_to_raw(a: &AgentSpec) -> RawAgent {
    let robot = a.is_robot();
    RawAgent {
        id: a.id,
        kind: a.kind,
        x: a.start.x,
        y: a.start.y,
        heading: Some(a.heading),
        radius: Some(a.radius),
        pref_speed: Some(a.pref_speed),
        max_speed: Some(a.max_speed),
        targets: (!robot).then(|| {
            a.targets
                .iter()
                .map(|t| match *t {
                    GoalSpec::Point { pos, tolerance } => RawTarget::Point {
                        x: pos.x,
                        y: pos.y,
                        tol: Some(tolerance),
                    },
                    GoalSpec::Region {
                        center,
                        half_extents,
                    } => RawTarget::Region {
                        x: center.x,
                        y: center.y,
                        hx: half_extents.x,
                        hy: half_extents.y,
                    },
                })
                .collect()
        }),
        cycle: (!robot).then_some(a.cycle_targets),
    }
}
