//! Seeded scenario generators used for the bundled scenario files, the
//! benchmark and the test suites.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{ObstacleSet, Rect, Vec2};
use crate::scenario::{AgentSpec, GoalSpec, ScenarioSpec, SimConfig};

const BOOTH_W: f64 = 4.0;
const BOOTH_H: f64 = 3.0;
const AISLE: f64 = 3.0;
/// Extra space kept between generated agents and anything else.
const PLACEMENT_GAP: f64 = 0.05;

fn rect_polygon(r: Rect) -> [Vec2; 4] {
    [
        r.min,
        Vec2::new(r.max.x, r.min.y),
        r.max,
        Vec2::new(r.min.x, r.max.y),
    ]
}

fn walled(bounds: Rect) -> ObstacleSet {
    let mut o = ObstacleSet::empty();
    o.push_polygon(&rect_polygon(bounds)).expect("non-degenerate room");
    o
}

/// An exhibition hall: a square lattice of rectangular booths separated by
/// aisles, with pedestrians wandering between aisle crossings.
///
/// The lattice grows with the crowd so density stays near 0.3 people/m^2.
pub fn trade_show(pedestrians: usize, seed: u64) -> ScenarioSpec {
    let k = ((pedestrians as f64 / 12.5).sqrt().ceil() as usize).max(1);
    let width = AISLE + k as f64 * (BOOTH_W + AISLE);
    let height = AISLE + k as f64 * (BOOTH_H + AISLE);
    let bounds = Rect::new(Vec2::ZERO, Vec2::new(width, height));
    let mut obstacles = walled(bounds);
    let mut booths = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let min = Vec2::new(
                AISLE + i as f64 * (BOOTH_W + AISLE),
                AISLE + j as f64 * (BOOTH_H + AISLE),
            );
            let booth = Rect::new(min, min + Vec2::new(BOOTH_W, BOOTH_H));
            obstacles.push_polygon(&rect_polygon(booth)).expect("non-degenerate booth");
            booths.push(booth);
        }
    }

    let mut crossings = Vec::with_capacity((k + 1) * (k + 1));
    for i in 0..=k {
        for j in 0..=k {
            crossings.push(Vec2::new(
                0.5 * AISLE + i as f64 * (BOOTH_W + AISLE),
                0.5 * AISLE + j as f64 * (BOOTH_H + AISLE),
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents: Vec<AgentSpec> = Vec::with_capacity(pedestrians);
    while agents.len() < pedestrians {
        let p = Vec2::new(rng.gen_range(0.0..width), rng.gen_range(0.0..height));
        let mut a = AgentSpec::pedestrian(agents.len() as u64 + 1, p, Vec::new());
        if booths.iter().any(|b| b.expanded(a.radius).contains(p)) || !fits(&a, &agents, &obstacles) {
            continue;
        }
        a.pref_speed = rng.gen_range(1.1..1.5);
        a.targets = (0..3)
            .map(|_| GoalSpec::Point {
                pos: crossings[rng.gen_range(0..crossings.len())],
                tolerance: 1.0,
            })
            .collect();
        a.cycle_targets = true;
        agents.push(a);
    }

    ScenarioSpec {
        name: format!("trade_show_{pedestrians}"),
        obstacles,
        world_bounds: bounds,
        agents,
        config: SimConfig {
            seed,
            ..SimConfig::default()
        },
    }
}

/// Four streams of pedestrians crossing an open square: each starts near
/// one side and heads for a random point on the opposite side. No walls.
pub fn open_crossing(pedestrians: usize, seed: u64) -> ScenarioSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = ((pedestrians as f64).sqrt() * 1.4).max(6.0);
    let lane = 0.8 * half;
    let extent = half + 3.0;
    let mut agents: Vec<AgentSpec> = Vec::with_capacity(pedestrians);
    while agents.len() < pedestrians {
        let across = rng.gen_range(-lane..lane);
        let depth = rng.gen_range(0.0..3.0);
        let target = rng.gen_range(-lane..lane);
        let (start, goal) = match agents.len() % 4 {
            0 => (Vec2::new(-half + depth, across), Vec2::new(half, target)),
            1 => (Vec2::new(half - depth, across), Vec2::new(-half, target)),
            2 => (Vec2::new(across, -half + depth), Vec2::new(target, half)),
            _ => (Vec2::new(across, half - depth), Vec2::new(target, -half)),
        };
        let a = AgentSpec::pedestrian(agents.len() as u64 + 1, start, vec![GoalSpec::point(goal)]);
        if fits(&a, &agents, &ObstacleSet::empty()) {
            agents.push(a);
        }
    }
    ScenarioSpec {
        name: format!("open_crossing_{pedestrians}_{seed}"),
        obstacles: ObstacleSet::empty(),
        world_bounds: Rect::new(Vec2::new(-extent, -extent), Vec2::new(extent, extent)),
        agents,
        config: SimConfig {
            seed,
            ..SimConfig::default()
        },
    }
}

/// A square room of side `side` with one robot (id 0) in the middle,
/// facing +x.
pub fn robot_room(side: f64) -> ScenarioSpec {
    let h = 0.5 * side;
    let bounds = Rect::new(Vec2::new(-h, -h), Vec2::new(h, h));
    ScenarioSpec {
        name: format!("robot_room_{side}"),
        obstacles: walled(bounds),
        world_bounds: bounds,
        agents: vec![AgentSpec::robot(0, Vec2::ZERO, 0.0)],
        config: SimConfig::default(),
    }
}

/// A 20 x 20 m room: one robot (id 0) at (-5, 0) facing +x and `pedestrians`
/// people walking between random points of the room.
pub fn robot_and_crowd_room(pedestrians: usize, seed: u64) -> ScenarioSpec {
    let mut spec = robot_room(20.0);
    spec.name = format!("robot_crowd_room_{pedestrians}");
    spec.agents[0].start = Vec2::new(-5.0, 0.0);
    spec.config.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_point = |rng: &mut ChaCha8Rng| Vec2::new(rng.gen_range(-8.5..8.5), rng.gen_range(-8.5..8.5));
    while spec.agents.len() < pedestrians + 1 {
        let id = spec.agents.len() as u64;
        let start = random_point(&mut rng);
        let mut a = AgentSpec::pedestrian(id, start, Vec::new());
        if !fits(&a, &spec.agents, &spec.obstacles) {
            continue;
        }
        a.targets = (0..3).map(|_| GoalSpec::point(random_point(&mut rng))).collect();
        a.cycle_targets = true;
        spec.agents.push(a);
    }
    spec
}

/// Whether `a` keeps clear of walls and of every agent in `placed`.
pub fn fits(a: &AgentSpec, placed: &[AgentSpec], obstacles: &ObstacleSet) -> bool {
    obstacles.clearance(a.start) >= a.radius + PLACEMENT_GAP
        && placed
            .iter()
            .all(|b| a.start.distance(b.start) >= a.radius + b.radius + PLACEMENT_GAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for spec in [
            trade_show(200, 1),
            open_crossing(50, 3),
            robot_room(10.0),
            robot_and_crowd_room(10, 5),
        ] {
            spec.validate().unwrap_or_else(|e| panic!("{}: {e}", spec.name));
        }
    }

    #[test]
    fn generation_is_seeded() {
        assert_eq!(trade_show(50, 9), trade_show(50, 9));
        assert_ne!(open_crossing(20, 1), open_crossing(20, 2));
    }

    #[test]
    fn trade_show_sizes() {
        let s = trade_show(200, 0);
        assert_eq!(s.pedestrian_count(), 200);
        assert_eq!(s.obstacles.len(), 4 + 16 * 4);
    }
}
