//! Goal selection over target sequences and plan computation: each
//! pedestrian's preferred velocity comes from grid A* waypoints or from a
//! potential field.

mod astar;
mod follow;
mod goals;
mod potential;

use crate::params::{self, ParamMap, ParamSet};

pub use astar::{astar_plan, Path, PlanError};
pub use follow::{distance_to_path, preferred_velocity_astar};
pub use goals::{advance_goal, TargetProgress};
pub use potential::{potential, potential_field_velocity, potential_force, PotentialError};

/// Grid planner settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AStarParams {
    /// Planning grid cell size, meters.
    pub resolution: f64,
    /// Wall dilation; `None` means "largest pedestrian radius".
    pub inflation: Option<f64>,
    /// How far ahead along the path the steering waypoint is picked, meters.
    pub lookahead: f64,
    /// Replan when the agent drifts further than this many cells from its path.
    pub replan_cells: f64,
}

impl Default for AStarParams {
    fn default() -> Self {
        AStarParams {
            resolution: 0.25,
            inflation: None,
            lookahead: 1.0,
            replan_cells: 2.0,
        }
    }
}

impl ParamSet for AStarParams {
    const KEYS: &'static [&'static str] = &["resolution", "inflation", "lookahead", "replan_cells"];

    fn from_map(map: &ParamMap) -> Result<Self, (String, String)> {
        params::check_keys(map, Self::KEYS)?;
        let d = AStarParams::default();
        Ok(AStarParams {
            resolution: params::positive(map, "resolution", d.resolution)?,
            inflation: match map.get("inflation") {
                None => None,
                Some(_) => Some(params::non_negative(map, "inflation", 0.0)?),
            },
            lookahead: params::positive(map, "lookahead", d.lookahead)?,
            replan_cells: params::positive(map, "replan_cells", d.replan_cells)?,
        })
    }

    fn to_map(&self) -> ParamMap {
        let mut m = ParamMap::new();
        m.insert("resolution".into(), self.resolution);
        if let Some(i) = self.inflation {
            m.insert("inflation".into(), i);
        }
        m.insert("lookahead".into(), self.lookahead);
        m.insert("replan_cells".into(), self.replan_cells);
        m
    }
}

/// Gains of the attractive/repulsive potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialParams {
    /// Attractive gain, 1/s.
    pub k_att: f64,
    /// Repulsive gain.
    pub k_rep: f64,
    /// Obstacles further than this do not repel, meters.
    pub rho0: f64,
}

impl Default for PotentialParams {
    fn default() -> Self {
        PotentialParams {
            k_att: 1.0,
            k_rep: 0.5,
            rho0: 2.0,
        }
    }
}

impl ParamSet for PotentialParams {
    const KEYS: &'static [&'static str] = &["k_att", "k_rep", "rho0"];

    fn from_map(map: &ParamMap) -> Result<Self, (String, String)> {
        params::check_keys(map, Self::KEYS)?;
        let d = PotentialParams::default();
        Ok(PotentialParams {
            k_att: params::positive(map, "k_att", d.k_att)?,
            k_rep: params::positive(map, "k_rep", d.k_rep)?,
            rho0: params::positive(map, "rho0", d.rho0)?,
        })
    }

    fn to_map(&self) -> ParamMap {
        [("k_att", self.k_att), ("k_rep", self.k_rep), ("rho0", self.rho0)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }
}
