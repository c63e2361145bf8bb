//! The decision cycle.
//!
//! [`Simulation::step`] is the only mutation point. Within a step every
//! pedestrian is evaluated against the same pre-step state, fanned out over a
//! rayon pool; results are assembled in id order, so the outcome does not
//! depend on the thread count.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::agent::AgentState;
use crate::avoidance::{orca_velocity, social_force_velocity, OrcaParams, SocialForceParams};
use crate::geometry::{normalize_angle, rasterize, Disc, ObstacleSet, OccupancyGrid, Vec2};
use crate::navigation::{
    advance_goal, astar_plan, distance_to_path, potential_field_velocity, preferred_velocity_astar, AStarParams,
    PlanError, PotentialParams,
};
use crate::scenario::{AgentKind, AvoidanceKind, GoalSpec, PlannerKind, ScenarioError, ScenarioSpec};
use crate::sensors::{simulate_scan, LaserConfig, LaserScan};

/// Environment variable capping intra-cycle parallelism; 0 or unset means
/// one thread per core.
pub const THREADS_ENV: &str = "CROWDSIM_THREADS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("no robot with id {0}")]
    UnknownRobot(u64),
    #[error("agent {0} is not a robot")]
    NotARobot(u64),
    #[error("command for robot {0} is not finite")]
    InvalidCommand(u64),
    #[error("could not start worker pool: {0}")]
    ThreadPool(String),
}

/// Unicycle command: forward speed and turn rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VelocityCommand {
    pub linear: f64,
    pub angular: f64,
    pub issued_tick: u64,
}

impl VelocityCommand {
    pub fn new(linear: f64, angular: f64) -> Self {
        VelocityCommand {
            linear,
            angular,
            issued_tick: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgentPose {
    pub id: u64,
    pub kind: AgentKind,
    pub position: Vec2,
    pub heading: f64,
    pub velocity: Vec2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimSnapshot {
    pub tick: u64,
    pub sim_time: f64,
    /// Ascending id.
    pub agents: Vec<AgentPose>,
}

/// Wall-clock cost of one step, in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CycleStats {
    pub tick: u64,
    pub goal_ms: f64,
    pub plan_ms: f64,
    pub avoid_ms: f64,
    pub integrate_ms: f64,
    pub sense_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CollisionTarget {
    Agent(u64),
    Wall,
}

/// A robot overlapping something at the end of a tick. Overlaps are only
/// reported, never resolved.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionEvent {
    pub tick: u64,
    pub robot_id: u64,
    pub other: CollisionTarget,
}

enum Planner {
    /// `clearance` is the wall inflation the grid was built with.
    AStar {
        params: AStarParams,
        grid: OccupancyGrid,
        clearance: f64,
    },
    Potential(PotentialParams),
}

enum Avoidance {
    Orca(OrcaParams),
    SocialForce(SocialForceParams),
}

impl Avoidance {
    fn neighbor_dist(&self) -> f64 {
        match self {
            Avoidance::Orca(p) => p.neighbor_dist,
            Avoidance::SocialForce(p) => p.neighbor_dist,
        }
    }
}

/// Waypoints toward one target of a pedestrian.
#[derive(Clone, Debug)]
struct PlanCache {
    target_index: usize,
    waypoints: Vec<Vec2>,
}

struct Targets {
    goals: Vec<GoalSpec>,
    cycle: bool,
}

pub struct Simulation {
    name: String,
    dt: f64,
    obstacles: ObstacleSet,
    planner: Planner,
    avoidance: Avoidance,
    laser: LaserConfig,
    /// Ascending id.
    agents: Vec<AgentState>,
    targets: Vec<Targets>,
    index: HashMap<u64, usize>,
    plans: Vec<Option<PlanCache>>,
    commands: BTreeMap<u64, VelocityCommand>,
    tick: u64,
    collisions: Vec<CollisionEvent>,
    scans: BTreeMap<u64, LaserScan>,
    pool: rayon::ThreadPool,
}

/// Thread count from [`THREADS_ENV`]; unparsable values mean automatic.
pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(0)
}

impl Simulation {
    /// Builds the initial state with the thread count from the environment.
    pub fn new(spec: &ScenarioSpec) -> Result<Self, EngineError> {
        Self::with_threads(spec, threads_from_env())
    }

    /// `threads == 0` sizes the pool to the machine.
    pub fn with_threads(spec: &ScenarioSpec, threads: usize) -> Result<Self, EngineError> {
        spec.validate()?;
        let cfg = &spec.config;

        let mut specs: Vec<_> = spec.agents.iter().collect();
        specs.sort_by_key(|a| a.id);
        let agents: Vec<AgentState> = specs.iter().map(|a| AgentState::from_spec(a)).collect();
        let targets = specs
            .iter()
            .map(|a| Targets {
                goals: a.targets.clone(),
                cycle: a.cycle_targets,
            })
            .collect();
        let index = agents.iter().enumerate().map(|(i, a)| (a.id, i)).collect();

        let planner = match cfg.planner {
            PlannerKind::AStar => {
                let params = cfg.astar_params();
                let inflation = params.inflation.unwrap_or_else(|| {
                    specs
                        .iter()
                        .filter(|a| !a.is_robot())
                        .map(|a| a.radius)
                        .fold(0.0, f64::max)
                });
                let grid = rasterize(&spec.obstacles, params.resolution, inflation, Some(spec.world_bounds))
                    .map_err(|e| ScenarioError::invalid("config.planner_params", e.to_string()))?;
                Planner::AStar {
                    params,
                    grid,
                    clearance: inflation,
                }
            }
            PlannerKind::PotentialField => Planner::Potential(cfg.potential_params()),
        };
        let avoidance = match cfg.avoidance {
            AvoidanceKind::Orca => Avoidance::Orca(cfg.orca_params()),
            AvoidanceKind::SocialForce => Avoidance::SocialForce(cfg.social_force_params()),
        };

        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| EngineError::ThreadPool(e.to_string()))?;

        let mut sim = Simulation {
            name: spec.name.clone(),
            dt: cfg.dt,
            obstacles: spec.obstacles.clone(),
            planner,
            avoidance,
            laser: cfg.laser,
            plans: vec![None; agents.len()],
            agents,
            targets,
            index,
            commands: BTreeMap::new(),
            tick: 0,
            collisions: Vec::new(),
            scans: BTreeMap::new(),
            pool,
        };
        // Initial routes are planned while loading, not in the first cycle.
        sim.refresh_routes();
        Ok(sim)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn sim_time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn thread_count(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn laser_config(&self) -> &LaserConfig {
        &self.laser
    }

    pub fn obstacles(&self) -> &ObstacleSet {
        &self.obstacles
    }

    /// Agent states in ascending id order.
    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn agent(&self, id: u64) -> Option<&AgentState> {
        self.index.get(&id).map(|&i| &self.agents[i])
    }

    pub fn robot_ids(&self) -> Vec<u64> {
        self.agents.iter().filter(|a| a.is_robot()).map(|a| a.id).collect()
    }

    /// Every robot overlap recorded so far.
    pub fn collisions(&self) -> &[CollisionEvent] {
        &self.collisions
    }

    /// Scans produced by the most recent step that published any, keyed by
    /// robot id. Empty before the first publishing step.
    pub fn latest_scans(&self) -> &BTreeMap<u64, LaserScan> {
        &self.scans
    }

    /// Whether the step that produced the current tick published scans.
    pub fn scans_published_this_tick(&self) -> bool {
        self.tick > 0 && self.tick % self.laser.rate_divisor == 0
    }

    pub fn snapshot(&self) -> SimSnapshot {
        SimSnapshot {
            tick: self.tick,
            sim_time: self.sim_time(),
            agents: self
                .agents
                .iter()
                .map(|a| AgentPose {
                    id: a.id,
                    kind: a.kind,
                    position: a.position,
                    heading: a.heading,
                    velocity: a.velocity,
                })
                .collect(),
        }
    }

    /// Scan of the current state from robot `robot_id`.
    pub fn scan(&self, robot_id: u64) -> Result<LaserScan, EngineError> {
        let i = *self.index.get(&robot_id).ok_or(EngineError::UnknownRobot(robot_id))?;
        if !self.agents[i].is_robot() {
            return Err(EngineError::NotARobot(robot_id));
        }
        Ok(self.scan_index(i))
    }

    fn scan_index(&self, i: usize) -> LaserScan {
        let robot = &self.agents[i];
        let discs: Vec<Disc> = self
            .agents
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, a)| Disc::new(a.position, a.radius))
            .collect();
        simulate_scan(
            robot.id,
            self.tick,
            robot.position,
            robot.heading,
            &self.laser,
            &self.obstacles,
            &discs,
        )
    }

    /// Advances one decision cycle. `commands` replace the held command of
    /// each listed robot; unlisted robots keep their previous one.
    pub fn step(&mut self, commands: &BTreeMap<u64, VelocityCommand>) -> Result<CycleStats, EngineError> {
        for (&id, cmd) in commands {
            match self.index.get(&id) {
                Some(&i) if self.agents[i].is_robot() => {}
                _ => return Err(EngineError::UnknownRobot(id)),
            }
            if !(cmd.linear.is_finite() && cmd.angular.is_finite()) {
                return Err(EngineError::InvalidCommand(id));
            }
        }
        let started = Instant::now();
        let mut stats = CycleStats::default();

        // Commands.
        self.commands.extend(commands.iter().map(|(&k, &v)| (k, v)));
        for a in self.agents.iter_mut().filter(|a| a.is_robot()) {
            let cmd = self.commands.get(&a.id);
            let linear = cmd.map_or(0.0, |c| c.linear.clamp(-a.max_speed, a.max_speed));
            a.velocity = Vec2::from_angle(a.heading) * linear;
        }

        // Goals.
        let t = Instant::now();
        for (a, tg) in self.agents.iter_mut().zip(&self.targets) {
            if !a.is_robot() {
                a.progress = advance_goal(a.progress, a.position, &tg.goals, tg.cycle);
            }
        }
        stats.goal_ms = ms(t);

        // Preferred velocities.
        let t = Instant::now();
        let prefs = self.preferred_velocities();
        stats.plan_ms = ms(t);

        // Avoidance.
        let t = Instant::now();
        let new_velocities = self.avoid(&prefs);
        stats.avoid_ms = ms(t);

        // Integration.
        let t = Instant::now();
        let dt = self.dt;
        for (a, v) in self.agents.iter_mut().zip(new_velocities) {
            if a.is_robot() {
                let angular = self.commands.get(&a.id).map_or(0.0, |c| c.angular);
                a.position += a.velocity * dt;
                a.heading = normalize_angle(a.heading + angular * dt);
            } else {
                a.velocity = v;
                a.position += v * dt;
                if v != Vec2::ZERO {
                    a.heading = v.angle();
                }
            }
        }
        self.tick += 1;
        self.record_collisions();
        stats.integrate_ms = ms(t);

        // Sensing. Robots are scanned one after another.
        let t = Instant::now();
        if self.scans_published_this_tick() {
            let robots: Vec<usize> = (0..self.agents.len()).filter(|&i| self.agents[i].is_robot()).collect();
            self.scans = robots
                .into_iter()
                .map(|i| (self.agents[i].id, self.scan_index(i)))
                .collect();
        }
        stats.sense_ms = ms(t);

        stats.tick = self.tick;
        stats.total_ms = ms(started);
        Ok(stats)
    }

    /// Replans every pedestrian route that is missing, belongs to an earlier
    /// target, or has been left too far behind.
    fn refresh_routes(&mut self) {
        let Planner::AStar { params, grid, clearance } = &self.planner else {
            return;
        };
        let agents = &self.agents;
        let targets = &self.targets;
        let obstacles = &self.obstacles;
        let plans = &mut self.plans;
        self.pool.install(|| {
            plans.par_iter_mut().enumerate().for_each(|(i, plan)| {
                let a = &agents[i];
                if a.is_robot() {
                    return;
                }
                let Some(goal) = a.progress.current(&targets[i].goals) else {
                    return;
                };
                let stale = match plan {
                    Some(p) => {
                        p.target_index != a.progress.index
                            || distance_to_path(a.position, &p.waypoints) > params.replan_cells * grid.resolution()
                    }
                    None => true,
                };
                if stale {
                    *plan = Some(PlanCache {
                        target_index: a.progress.index,
                        waypoints: plan_waypoints(grid, obstacles, *clearance, a.position, goal.anchor()),
                    });
                }
            })
        });
    }

    fn preferred_velocities(&mut self) -> Vec<Vec2> {
        self.refresh_routes();
        let agents = &self.agents;
        let targets = &self.targets;
        let obstacles = &self.obstacles;
        let planner = &self.planner;
        let plans = &self.plans;
        self.pool.install(|| {
            plans
                .par_iter()
                .enumerate()
                .map(|(i, plan)| {
                    let a = &agents[i];
                    if a.is_robot() {
                        return Vec2::ZERO;
                    }
                    let Some(goal) = a.progress.current(&targets[i].goals) else {
                        return Vec2::ZERO;
                    };
                    match planner {
                        Planner::AStar { params, .. } => {
                            let waypoints = &plan.as_ref().expect("routes refreshed above").waypoints;
                            preferred_velocity_astar(
                                a.position,
                                waypoints,
                                a.pref_speed,
                                params.lookahead,
                                goal.arrival_radius(),
                            )
                        }
                        Planner::Potential(params) => {
                            if a.position.distance(goal.anchor()) <= goal.arrival_radius() {
                                Vec2::ZERO
                            } else {
                                potential_field_velocity(a.position, goal.anchor(), obstacles, params, a.pref_speed)
                            }
                        }
                    }
                })
                .collect()
        })
    }

    fn avoid(&self, prefs: &[Vec2]) -> Vec<Vec2> {
        let agents = &self.agents;
        let neighbors = NeighborGrid::new(agents, self.avoidance.neighbor_dist());
        self.pool.install(|| {
            (0..agents.len())
                .into_par_iter()
                .map(|i| {
                    let a = &agents[i];
                    if a.is_robot() {
                        return a.velocity;
                    }
                    let near: Vec<&AgentState> = neighbors
                        .query(a.position)
                        .into_iter()
                        .filter(|&j| j != i)
                        .map(|j| &agents[j])
                        .collect();
                    match &self.avoidance {
                        Avoidance::Orca(params) => {
                            orca_velocity(a, &near, &self.obstacles, params, self.dt, prefs[i])
                        }
                        Avoidance::SocialForce(params) => {
                            social_force_velocity(a, prefs[i], &near, &self.obstacles, params, self.dt)
                        }
                    }
                })
                .collect()
        })
    }

    fn record_collisions(&mut self) {
        for a in self.agents.iter().filter(|a| a.is_robot()) {
            for b in &self.agents {
                if b.id != a.id && a.position.distance(b.position) < a.radius + b.radius {
                    self.collisions.push(CollisionEvent {
                        tick: self.tick,
                        robot_id: a.id,
                        other: CollisionTarget::Agent(b.id),
                    });
                }
            }
            if self.obstacles.clearance(a.position) < a.radius {
                self.collisions.push(CollisionEvent {
                    tick: self.tick,
                    robot_id: a.id,
                    other: CollisionTarget::Wall,
                });
            }
        }
    }
}

/// Grid path from `start` to `goal`. Endpoints inside inflated cells are
/// moved to the nearest free cell; without any path the agent steers
/// straight at the goal.
fn plan_waypoints(grid: &OccupancyGrid, obstacles: &ObstacleSet, clearance: f64, start: Vec2, goal: Vec2) -> Vec<Vec2> {
    let direct = vec![start, goal];
    let free_center = |p: Vec2| -> Option<Vec2> {
        let c = grid.cell_of(p)?;
        if grid.is_occupied(c) {
            grid.nearest_free(c).map(|f| grid.cell_center(f))
        } else {
            Some(p)
        }
    };
    let (Some(s), Some(g)) = (free_center(start), free_center(goal)) else {
        return direct;
    };
    match astar_plan(grid, s, g) {
        Ok(path) => {
            let mut w = path.waypoints;
            // Both endpoints lie inside their (free) end cells.
            if s == start {
                w[0] = start;
            } else {
                w.insert(0, start);
            }
            if g == goal {
                *w.last_mut().expect("paths are never empty") = goal;
            } else {
                w.push(goal);
            }
            shortcut(&w, obstacles, clearance)
        }
        Err(PlanError::NoPath | PlanError::OutOfBounds { .. } | PlanError::OccupiedEndpoint { .. }) => direct,
    }
}

/// Drops waypoints that can be skipped by a straight move keeping
/// `clearance` from every wall.
fn shortcut(waypoints: &[Vec2], obstacles: &ObstacleSet, clearance: f64) -> Vec<Vec2> {
    if waypoints.len() <= 2 || obstacles.is_empty() {
        return if obstacles.is_empty() {
            vec![waypoints[0], *waypoints.last().expect("non-empty")]
        } else {
            waypoints.to_vec()
        };
    }
    let mut out = vec![waypoints[0]];
    let mut anchor = 0;
    let mut j = anchor + 2;
    while j < waypoints.len() {
        if obstacles.span_clearance(waypoints[anchor], waypoints[j]) < clearance {
            anchor = j - 1;
            out.push(waypoints[anchor]);
        }
        j += 1;
    }
    out.push(*waypoints.last().expect("non-empty"));
    out
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

/// Uniform bucket grid for radius queries; results come back in ascending
/// agent index (and therefore id) order.
struct NeighborGrid {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl NeighborGrid {
    fn new(agents: &[AgentState], radius: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, a) in agents.iter().enumerate() {
            buckets.entry(key(a.position, radius)).or_default().push(i);
        }
        NeighborGrid { cell: radius, buckets }
    }

    /// Candidates within one cell of `p`; a superset of the agents closer
    /// than the radius.
    fn query(&self, p: Vec2) -> Vec<usize> {
        let (cx, cy) = key(p, self.cell);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(b) = self.buckets.get(&(cx + dx, cy + dy)) {
                    out.extend_from_slice(b);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

fn key(p: Vec2, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}
