//! Per-tick velocity adjustment that keeps agents from colliding: a social
//! force model and ORCA (optimal reciprocal collision avoidance).
//!
//! Both models are pure functions of a read-only snapshot, so the engine can
//! evaluate every pedestrian in parallel.

mod lp;
mod orca;
mod social_force;

use crate::geometry::Vec2;
use crate::params::{self, ParamMap, ParamSet};

pub use lp::{orca_solve, orca_solve_detailed, OrcaSolution};
pub use orca::{imminent_lines, orca_lines, orca_velocity, OrcaConstraints};
pub use social_force::social_force_velocity;

/// A half-plane in velocity space. Velocities on the left of `direction`
/// (seen from `point`) are permitted.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrcaLine {
    pub point: Vec2,
    pub direction: Vec2,
}

impl OrcaLine {
    /// Signed distance of `v` into the forbidden side; `<= 0` means satisfied.
    #[inline]
    pub fn violation(&self, v: Vec2) -> f64 {
        self.direction.cross(self.point - v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrcaParams {
    /// Look-ahead for agent-agent constraints, seconds.
    pub time_horizon: f64,
    /// Look-ahead for agent-wall constraints, seconds.
    pub time_horizon_obst: f64,
    pub neighbor_dist: f64,
    pub max_neighbors: usize,
    /// Share of the avoidance a pedestrian takes on against a robot. Robots
    /// never reciprocate; 0.5 treats them like any other agent.
    pub robot_responsibility: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams {
            time_horizon: 2.0,
            time_horizon_obst: 1.0,
            neighbor_dist: 10.0,
            max_neighbors: 10,
            robot_responsibility: 0.5,
        }
    }
}

impl ParamSet for OrcaParams {
    const KEYS: &'static [&'static str] = &[
        "time_horizon",
        "time_horizon_obst",
        "neighbor_dist",
        "max_neighbors",
        "robot_responsibility",
    ];

    fn from_map(map: &ParamMap) -> Result<Self, (String, String)> {
        params::check_keys(map, Self::KEYS)?;
        let d = OrcaParams::default();
        let robot_responsibility = params::positive(map, "robot_responsibility", d.robot_responsibility)?;
        if robot_responsibility > 1.0 {
            return Err(("robot_responsibility".into(), "must lie in (0, 1]".into()));
        }
        Ok(OrcaParams {
            time_horizon: params::positive(map, "time_horizon", d.time_horizon)?,
            time_horizon_obst: params::positive(map, "time_horizon_obst", d.time_horizon_obst)?,
            neighbor_dist: params::positive(map, "neighbor_dist", d.neighbor_dist)?,
            max_neighbors: params::positive_count(map, "max_neighbors", d.max_neighbors)?,
            robot_responsibility,
        })
    }

    fn to_map(&self) -> ParamMap {
        [
            ("time_horizon", self.time_horizon),
            ("time_horizon_obst", self.time_horizon_obst),
            ("neighbor_dist", self.neighbor_dist),
            ("max_neighbors", self.max_neighbors as f64),
            ("robot_responsibility", self.robot_responsibility),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}

/// Exponential social force coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SocialForceParams {
    /// Relaxation time toward the preferred velocity, seconds.
    pub tau: f64,
    /// Agent interaction strength, m/s^2.
    pub a: f64,
    /// Agent interaction falloff, meters.
    pub b: f64,
    pub wall_a: f64,
    pub wall_b: f64,
    pub neighbor_dist: f64,
    /// Scales `a` for robot neighbors.
    pub robot_multiplier: f64,
}

impl Default for SocialForceParams {
    fn default() -> Self {
        SocialForceParams {
            tau: 0.5,
            a: 2.0,
            b: 0.08,
            wall_a: 4.0,
            wall_b: 0.06,
            neighbor_dist: 5.0,
            robot_multiplier: 1.0,
        }
    }
}

impl ParamSet for SocialForceParams {
    const KEYS: &'static [&'static str] = &["tau", "A", "B", "wall_A", "wall_B", "neighbor_dist", "robot_multiplier"];

    fn from_map(map: &ParamMap) -> Result<Self, (String, String)> {
        params::check_keys(map, Self::KEYS)?;
        let d = SocialForceParams::default();
        Ok(SocialForceParams {
            tau: params::positive(map, "tau", d.tau)?,
            a: params::positive(map, "A", d.a)?,
            b: params::positive(map, "B", d.b)?,
            wall_a: params::positive(map, "wall_A", d.wall_a)?,
            wall_b: params::positive(map, "wall_B", d.wall_b)?,
            neighbor_dist: params::positive(map, "neighbor_dist", d.neighbor_dist)?,
            robot_multiplier: params::positive(map, "robot_multiplier", d.robot_multiplier)?,
        })
    }

    fn to_map(&self) -> ParamMap {
        [
            ("tau", self.tau),
            ("A", self.a),
            ("B", self.b),
            ("wall_A", self.wall_a),
            ("wall_B", self.wall_b),
            ("neighbor_dist", self.neighbor_dist),
            ("robot_multiplier", self.robot_multiplier),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }
}
