//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crowdsim_core::avoidance::OrcaLine;
use crowdsim_core::geometry::{CellIndex, OccupancyGrid, Vec2};
use rand::Rng;

// ---------------------------------------------------------------- grids

/// Grid with each cell occupied with probability `occupancy`.
pub fn random_grid<R: Rng>(rng: &mut R, width: usize, height: usize, occupancy: f64) -> OccupancyGrid {
    let mut g = OccupancyGrid::new(Vec2::ZERO, 1.0, width, height).unwrap();
    for y in 0..height {
        for x in 0..width {
            g.set(CellIndex::new(x, y), rng.gen_bool(occupancy));
        }
    }
    g
}

struct Node {
    cost: f64,
    steps: (u32, u32),
    cell: usize,
}

impl PartialEq for Node {
    fn eq(&self, o: &Self) -> bool {
        self.cost == o.cost
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Node {
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost)
    }
}

/// Plain Dijkstra over the 8-connected free cells. A diagonal move needs both
/// cells it squeezes between to be free. Returns the optimal path length as
/// (axial steps, diagonal steps).
pub fn dijkstra_steps(grid: &OccupancyGrid, start: CellIndex, goal: CellIndex) -> Option<(u32, u32)> {
    let (w, h) = (grid.width() as i64, grid.height() as i64);
    let free = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && !grid.is_occupied(CellIndex::new(x as usize, y as usize));
    if !free(start.x as i64, start.y as i64) || !free(goal.x as i64, goal.y as i64) {
        return None;
    }
    let idx = |x: i64, y: i64| (y * w + x) as usize;
    let mut dist = vec![f64::INFINITY; (w * h) as usize];
    let mut done = vec![false; (w * h) as usize];
    let mut heap = BinaryHeap::new();
    let s = idx(start.x as i64, start.y as i64);
    dist[s] = 0.0;
    heap.push(Node { cost: 0.0, steps: (0, 0), cell: s });
    let target = idx(goal.x as i64, goal.y as i64);
    while let Some(Node { steps, cell, .. }) = heap.pop() {
        if done[cell] {
            continue;
        }
        done[cell] = true;
        if cell == target {
            return Some(steps);
        }
        let (x, y) = (cell as i64 % w, cell as i64 / w);
        for dx in -1..=1i64 {
            for dy in -1..=1i64 {
                if (dx, dy) == (0, 0) || !free(x + dx, y + dy) {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                if diagonal && !(free(x + dx, y) && free(x, y + dy)) {
                    continue;
                }
                let (a, d) = if diagonal { (steps.0, steps.1 + 1) } else { (steps.0 + 1, steps.1) };
                let c = a as f64 + std::f64::consts::SQRT_2 * d as f64;
                let n = idx(x + dx, y + dy);
                if c < dist[n] {
                    dist[n] = c;
                    heap.push(Node { cost: c, steps: (a, d), cell: n });
                }
            }
        }
    }
    None
}

/// (axial, diagonal) step counts along a cell path, checking that every move
/// is a legal 8-connected move through free cells.
pub fn path_steps(grid: &OccupancyGrid, cells: &[CellIndex]) -> (u32, u32) {
    let mut steps = (0, 0);
    for c in cells {
        assert!(!grid.is_occupied(*c), "path crosses occupied cell {c:?}");
    }
    for pair in cells.windows(2) {
        let dx = pair[1].x as i64 - pair[0].x as i64;
        let dy = pair[1].y as i64 - pair[0].y as i64;
        assert!(dx.abs() <= 1 && dy.abs() <= 1 && (dx, dy) != (0, 0), "bad move {pair:?}");
        if dx != 0 && dy != 0 {
            let side_a = CellIndex::new(pair[1].x, pair[0].y);
            let side_b = CellIndex::new(pair[0].x, pair[1].y);
            assert!(!grid.is_occupied(side_a) && !grid.is_occupied(side_b), "corner cut at {pair:?}");
            steps.1 += 1;
        } else {
            steps.0 += 1;
        }
    }
    steps
}

// ---------------------------------------------------------------- ORCA LP

pub fn max_violation(lines: &[OrcaLine], v: Vec2) -> f64 {
    lines.iter().map(|l| l.violation(v)).fold(f64::NEG_INFINITY, f64::max)
}

fn left(l: &OrcaLine) -> Vec2 {
    Vec2::new(-l.direction.y, l.direction.x)
}

/// Random constraint set. Even `case`s are built around a common admissible
/// velocity so that both feasible and infeasible programs get exercised.
pub fn random_lines<R: Rng>(rng: &mut R, case: usize, max_speed: f64) -> (Vec<OrcaLine>, Vec2) {
    let n = rng.gen_range(1..=12);
    let anchor = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU)) * rng.gen_range(0.0..0.9 * max_speed);
    let lines = (0..n)
        .map(|_| {
            let direction = Vec2::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
            let normal = Vec2::new(-direction.y, direction.x);
            let point = if case % 2 == 0 {
                anchor - normal * rng.gen_range(0.0..1.0) + direction * rng.gen_range(-1.0..1.0)
            } else {
                Vec2::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5))
            };
            OrcaLine { point, direction }
        })
        .collect();
    let v_pref = Vec2::new(rng.gen_range(-2.5..2.5), rng.gen_range(-2.5..2.5));
    (lines, v_pref)
}

/// Exact feasible optimum by enumeration: the closest admissible velocity to
/// `v_pref` is `v_pref` itself or lies on a constraint boundary, so it is one
/// of the projections or pairwise boundary intersections checked here.
pub fn enumerated_optimum(lines: &[OrcaLine], v_pref: Vec2, max_speed: f64, tol: f64) -> Option<Vec2> {
    let mut cands = vec![v_pref.clamp_length(max_speed)];
    for l in lines {
        let p = l.point + l.direction * l.direction.dot(v_pref - l.point);
        cands.push(p);
        cands.push(p.clamp_length(max_speed));
        // Line-circle intersections.
        let b = l.point.dot(l.direction);
        let disc = b * b - (l.point.length_squared() - max_speed * max_speed);
        if disc >= 0.0 {
            let r = disc.sqrt();
            cands.push(l.point + l.direction * (-b + r));
            cands.push(l.point + l.direction * (-b - r));
        }
    }
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a, b) = (&lines[i], &lines[j]);
            let det = a.direction.cross(b.direction);
            if det.abs() > 1e-12 {
                let t = b.direction.cross(a.point - b.point) / det;
                cands.push(a.point + a.direction * t);
            }
        }
    }
    cands
        .into_iter()
        .filter(|&v| v.length() <= max_speed + tol && max_violation(lines, v) <= tol)
        .min_by(|a, b| a.distance(v_pref).total_cmp(&b.distance(v_pref)))
}

pub struct Sampled {
    /// Closest admissible velocity to the preference, if any was found.
    pub feasible: Option<Vec2>,
    /// Smallest largest-violation over the speed disc.
    pub best_violation: f64,
}

/// Dense sampling of the speed disc: a uniform grid, fine samples along every
/// constraint boundary and the rim, and the boundary vertices. The smallest
/// largest-violation is then refined by zooming into the best grid sample.
pub fn sampled_optimum(lines: &[OrcaLine], v_pref: Vec2, max_speed: f64) -> Sampled {
    const TOL: f64 = 1e-9;
    let mut samples: Vec<Vec2> = Vec::new();
    let h = 0.01;
    let n = (max_speed / h).ceil() as i64;
    for i in -n..=n {
        for j in -n..=n {
            let v = Vec2::new(i as f64 * h, j as f64 * h);
            if v.length() <= max_speed {
                samples.push(v);
            }
        }
    }
    for l in lines {
        let b = l.point.dot(l.direction);
        let disc = b * b - (l.point.length_squared() - max_speed * max_speed);
        if disc < 0.0 {
            continue;
        }
        let r = disc.sqrt();
        let (t0, t1) = (-b - r, -b + r);
        let k = ((t1 - t0) / 0.001).ceil().max(1.0) as usize;
        for s in 0..=k {
            samples.push(l.point + l.direction * (t0 + (t1 - t0) * s as f64 / k as f64));
        }
    }
    let rim = 6284;
    for s in 0..rim {
        samples.push(Vec2::from_angle(std::f64::consts::TAU * s as f64 / rim as f64) * max_speed);
    }
    if let Some(v) = enumerated_optimum(lines, v_pref, max_speed, TOL) {
        samples.push(v);
    }

    let mut feasible: Option<Vec2> = None;
    let mut best = (f64::INFINITY, Vec2::ZERO);
    for &v in &samples {
        let worst = max_violation(lines, v);
        if worst < best.0 {
            best = (worst, v);
        }
        if worst <= TOL && feasible.map_or(true, |f| v.distance(v_pref) < f.distance(v_pref)) {
            feasible = Some(v);
        }
    }
    // Refine the minimax value around the best sample.
    let mut step = h;
    for _ in 0..3 {
        let center = best.1;
        step /= 10.0;
        for i in -15..=15 {
            for j in -15..=15 {
                let v = center + Vec2::new(i as f64 * step, j as f64 * step);
                if v.length() <= max_speed {
                    let worst = max_violation(lines, v);
                    if worst < best.0 {
                        best = (worst, v);
                    }
                }
            }
        }
    }
    Sampled {
        feasible,
        best_violation: best.0,
    }
}

/// Checks one solver output against the sampling oracle; `Err` explains the
/// mismatch.
pub fn check_against_sampling(lines: &[OrcaLine], v_pref: Vec2, max_speed: f64, v: Vec2, feasible: bool) -> Result<(), String> {
    let oracle = sampled_optimum(lines, v_pref, max_speed);
    if v.length() > max_speed + 1e-9 {
        return Err(format!("speed {} above cap", v.length()));
    }
    match (feasible, oracle.feasible) {
        (true, Some(best)) => {
            let worst = max_violation(lines, v);
            if worst > 1e-9 {
                return Err(format!("reported feasible but violates by {worst}"));
            }
            if v.distance(best) > 1e-2 {
                return Err(format!("{v} is {} from sampled optimum {best}", v.distance(best)));
            }
            Ok(())
        }
        (false, None) => {
            let gap = (max_violation(lines, v) - oracle.best_violation).abs();
            if gap > 1e-2 {
                return Err(format!("least violation off by {gap}"));
            }
            Ok(())
        }
        (true, None) => Err("solver found a point the sampling could not".into()),
        (false, Some(best)) => Err(format!("reported infeasible but {best} satisfies every line")),
    }
}

// ---------------------------------------------------------------- potential

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let t = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
    (p - (a + ab * t)).length()
}

/// Potential energy written out directly from its definition.
pub fn reference_potential(p: Vec2, goal: Vec2, segments: &[(Vec2, Vec2)], k_att: f64, k_rep: f64, rho0: f64) -> f64 {
    let mut u = 0.5 * k_att * ((p.x - goal.x).powi(2) + (p.y - goal.y).powi(2));
    for &(a, b) in segments {
        let rho = segment_distance(p, a, b);
        if rho < rho0 {
            u += 0.5 * k_rep * (1.0 / rho - 1.0 / rho0).powi(2);
        }
    }
    u
}
