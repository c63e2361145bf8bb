//! Deterministic 2-D simulation of pedestrian crowds sharing space with
//! externally commanded circular robots.
//!
//! Each decision cycle advances pedestrian goals, computes preferred
//! velocities with a grid A* or a potential-field planner, resolves
//! collisions with ORCA or a social force model, integrates motion and
//! produces simulated laser scans for every robot.

pub mod geometry;
pub mod params;
pub mod scenario;
pub mod navigation;
pub mod agent;
pub mod avoidance;
pub mod sensors;
pub mod engine;
pub mod trajectory;
pub mod presets;
