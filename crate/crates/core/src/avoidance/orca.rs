// Constraint construction follows the reference formulation of optimal
// reciprocal collision avoidance (van den Berg, Guy, Lin and Manocha; the
// RVO2 library), restated in f64 for two-sided wall segments.

use super::{orca_solve_detailed, OrcaLine, OrcaParams};
use crate::agent::{pair_direction, AgentState};
use crate::geometry::{ObstacleSet, Segment, Vec2};

/// Threshold under which two unit directions count as parallel.
const EPS: f64 = 1e-10;

/// ORCA half-planes for one agent. Wall constraints come first and should
/// be treated as hard by the solver.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrcaConstraints {
    pub lines: Vec<OrcaLine>,
    pub obstacle_lines: usize,
}

/// Builds the ORCA constraints of `agent` against static walls and against
/// the nearest `max_neighbors` agents within `neighbor_dist`.
///
/// Agent lines are emitted in ascending neighbor id. `dt` is the length of
/// the step and sets how fast an existing overlap is resolved.
pub fn orca_lines(
    agent: &AgentState,
    neighbors: &[&AgentState],
    obstacles: &ObstacleSet,
    params: &OrcaParams,
    dt: f64,
) -> OrcaConstraints {
    let mut lines = Vec::new();
    obstacle_lines(agent, obstacles, params, &mut lines);
    let obstacle_lines = lines.len();

    let mut near: Vec<(f64, &AgentState)> = neighbors
        .iter()
        .filter(|n| n.id != agent.id)
        .map(|n| ((n.position - agent.position).length_squared(), *n))
        .filter(|(d2, _)| *d2 < params.neighbor_dist * params.neighbor_dist)
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
    near.truncate(params.max_neighbors);
    near.sort_by_key(|(_, n)| n.id);

    for (_, other) in near {
        lines.push(agent_line(agent, other, params.time_horizon, dt, responsibility(agent, other, params)));
    }
    OrcaConstraints { lines, obstacle_lines }
}

/// Per-step contact constraints: toward every neighbor that could be
/// reached within one step, the agent closes at most half of the current
/// gap (all of it against a robot, which does not reciprocate, after
/// accounting for the robot's own velocity). Zero velocity satisfies every
/// such line unless agents already overlap, and two pedestrians that both
/// honor them cannot touch during the step.
pub fn imminent_lines(agent: &AgentState, neighbors: &[&AgentState], dt: f64) -> Vec<OrcaLine> {
    let mut close: Vec<&AgentState> = neighbors
        .iter()
        .copied()
        .filter(|n| n.id != agent.id)
        .filter(|n| {
            let reach = agent.radius + n.radius + 2.0 * dt * agent.max_speed.max(n.max_speed);
            (n.position - agent.position).length_squared() < reach * reach
        })
        .collect();
    close.sort_by_key(|n| n.id);
    close
        .into_iter()
        .map(|n| {
            let offset = n.position - agent.position;
            let dist = offset.length();
            let toward = offset
                .normalized()
                .unwrap_or_else(|| -pair_direction(agent.id, n.id));
            let gap = dist - agent.radius - n.radius;
            let limit = if n.is_robot() && !agent.is_robot() {
                gap / dt + n.velocity.dot(toward)
            } else {
                0.5 * gap / dt
            };
            // Feasible side: v . toward <= limit.
            OrcaLine {
                point: toward * limit,
                direction: toward.perp(),
            }
        })
        .collect()
}

/// ORCA velocity for one agent, closest to `v_pref`.
///
/// Wall lines and [`imminent_lines`] are hard constraints: the
/// least-violation fallback used when the full program has no solution
/// may only relax the time-horizon lines. If even the hard lines conflict,
/// only the walls stay hard.
pub fn orca_velocity(
    agent: &AgentState,
    neighbors: &[&AgentState],
    obstacles: &ObstacleSet,
    params: &OrcaParams,
    dt: f64,
    v_pref: Vec2,
) -> Vec2 {
    let c = orca_lines(agent, neighbors, obstacles, params, dt);
    let imminent = imminent_lines(agent, neighbors, dt);
    if !imminent.is_empty() {
        let mut lines = Vec::with_capacity(c.lines.len() + imminent.len());
        lines.extend_from_slice(&c.lines[..c.obstacle_lines]);
        lines.extend_from_slice(&imminent);
        let hard = lines.len();
        if orca_solve_detailed(&lines, hard, Vec2::ZERO, agent.max_speed).feasible {
            lines.extend_from_slice(&c.lines[c.obstacle_lines..]);
            return orca_solve_detailed(&lines, hard, v_pref, agent.max_speed).velocity;
        }
    }
    orca_solve_detailed(&c.lines, c.obstacle_lines, v_pref, agent.max_speed).velocity
}

fn responsibility(agent: &AgentState, other: &AgentState, params: &OrcaParams) -> f64 {
    if other.is_robot() && !agent.is_robot() {
        params.robot_responsibility
    } else {
        0.5
    }
}

/// Half-plane induced by one neighbor. `share` is the fraction of the
/// escape vector this agent takes on (0.5 for reciprocal avoidance).
pub(crate) fn agent_line(agent: &AgentState, other: &AgentState, time_horizon: f64, dt: f64, share: f64) -> OrcaLine {
    let rel_pos = other.position - agent.position;
    let rel_vel = agent.velocity - other.velocity;
    let dist_sq = rel_pos.length_squared();
    let combined_radius = agent.radius + other.radius;
    let combined_radius_sq = combined_radius * combined_radius;

    let direction;
    let u;
    if dist_sq > combined_radius_sq {
        let inv_tau = 1.0 / time_horizon;
        // Vector from the cutoff circle center to the relative velocity.
        let w = rel_vel - rel_pos * inv_tau;
        let w_len_sq = w.length_squared();
        let dot1 = w.dot(rel_pos);
        // Inside the cutoff disc on the exact line of centers the escape is
        // symmetric; fall through to the left leg so mirror-image pairs do
        // not brake into a standstill.
        let axial_inside = rel_pos.cross(w) == 0.0 && w_len_sq < combined_radius_sq * inv_tau * inv_tau;
        if dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq && !axial_inside {
            // Closest boundary point lies on the cutoff arc.
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = unit_w * (combined_radius * inv_tau - w_len);
        } else {
            // Closest boundary point lies on a leg of the cone. A relative
            // velocity exactly on the axis goes to the left leg.
            let leg = (dist_sq - combined_radius_sq).sqrt();
            if rel_pos.cross(w) >= 0.0 {
                direction = Vec2::new(
                    rel_pos.x * leg - rel_pos.y * combined_radius,
                    rel_pos.x * combined_radius + rel_pos.y * leg,
                ) / dist_sq;
            } else {
                direction = -Vec2::new(
                    rel_pos.x * leg + rel_pos.y * combined_radius,
                    -rel_pos.x * combined_radius + rel_pos.y * leg,
                ) / dist_sq;
            }
            u = direction * rel_vel.dot(direction) - rel_vel;
        }
    } else {
        // Already overlapping: separate within one step.
        let inv_dt = 1.0 / dt;
        let w = rel_vel - rel_pos * inv_dt;
        let w_len = w.length();
        let unit_w = w
            .normalized()
            .or_else(|| (-rel_pos).normalized())
            .unwrap_or_else(|| -pair_direction(agent.id, other.id));
        direction = Vec2::new(unit_w.y, -unit_w.x);
        u = unit_w * (combined_radius * inv_dt - w_len);
    }

    OrcaLine {
        point: agent.velocity + u * share,
        direction,
    }
}

/// One end of a wall segment, seen as a vertex of a two-sided obstacle.
#[derive(Clone, Copy)]
struct Vertex {
    point: Vec2,
    /// Direction toward the other end.
    unit_dir: Vec2,
    /// Direction of the edge arriving at this vertex.
    prev_unit_dir: Vec2,
}

fn obstacle_lines(agent: &AgentState, obstacles: &ObstacleSet, params: &OrcaParams, lines: &mut Vec<OrcaLine>) {
    if obstacles.is_empty() {
        return;
    }
    let range = params.time_horizon_obst * agent.max_speed + agent.radius;
    let mut near: Vec<(f64, usize, &Segment)> = obstacles
        .segments()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.distance_to(agent.position), i, s))
        .filter(|(d, _, _)| *d < range)
        .collect();
    near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let inv_tau = 1.0 / params.time_horizon_obst;
    let radius = agent.radius;
    let radius_sq = radius * radius;
    let position = agent.position;
    let velocity = agent.velocity;

    for (_, _, seg) in near {
        // Orient the edge so the agent sits on its right-hand side.
        let (pa, pb) = if (seg.a() - position).cross(seg.b() - seg.a()) <= 0.0 {
            (seg.a(), seg.b())
        } else {
            (seg.b(), seg.a())
        };
        let unit = (pb - pa).normalized().expect("segments have length");
        let mut v1 = Vertex {
            point: pa,
            unit_dir: unit,
            prev_unit_dir: -unit,
        };
        let mut v2 = Vertex {
            point: pb,
            unit_dir: -unit,
            prev_unit_dir: unit,
        };

        let rel1 = v1.point - position;
        let rel2 = v2.point - position;

        let covered = lines.iter().any(|l| {
            (rel1 * inv_tau - l.point).cross(l.direction) - inv_tau * radius >= -EPS
                && (rel2 * inv_tau - l.point).cross(l.direction) - inv_tau * radius >= -EPS
        });
        if covered {
            continue;
        }

        let dist_sq1 = rel1.length_squared();
        let dist_sq2 = rel2.length_squared();
        let obstacle_vec = v2.point - v1.point;
        let s = (-rel1).dot(obstacle_vec) / obstacle_vec.length_squared();
        let dist_sq_line = (-rel1 - obstacle_vec * s).length_squared();

        if s < 0.0 && dist_sq1 <= radius_sq {
            // Touching the first vertex.
            lines.push(OrcaLine {
                point: Vec2::ZERO,
                direction: Vec2::new(-rel1.y, rel1.x).normalized().unwrap_or(-v1.unit_dir),
            });
            continue;
        } else if s > 1.0 && dist_sq2 <= radius_sq {
            // Touching the second vertex. The reversed edge would cover it
            // for a polygon; a lone segment has to do it here.
            lines.push(OrcaLine {
                point: Vec2::ZERO,
                direction: Vec2::new(-rel2.y, rel2.x).normalized().unwrap_or(v1.unit_dir),
            });
            continue;
        } else if (0.0..1.0).contains(&s) && dist_sq_line <= radius_sq {
            // Touching the segment interior.
            lines.push(OrcaLine {
                point: Vec2::ZERO,
                direction: -v1.unit_dir,
            });
            continue;
        }

        let mut left_leg;
        let mut right_leg;
        let single_vertex;
        if s < 0.0 && dist_sq_line <= radius_sq {
            // Seen end-on: the first vertex alone defines the cone.
            v2 = v1;
            single_vertex = true;
            let leg = (dist_sq1 - radius_sq).sqrt();
            left_leg = Vec2::new(rel1.x * leg - rel1.y * radius, rel1.x * radius + rel1.y * leg) / dist_sq1;
            right_leg = Vec2::new(rel1.x * leg + rel1.y * radius, -rel1.x * radius + rel1.y * leg) / dist_sq1;
        } else if s > 1.0 && dist_sq_line <= radius_sq {
            v1 = v2;
            single_vertex = true;
            let leg = (dist_sq2 - radius_sq).sqrt();
            left_leg = Vec2::new(rel2.x * leg - rel2.y * radius, rel2.x * radius + rel2.y * leg) / dist_sq2;
            right_leg = Vec2::new(rel2.x * leg + rel2.y * radius, -rel2.x * radius + rel2.y * leg) / dist_sq2;
        } else {
            single_vertex = false;
            let leg1 = (dist_sq1 - radius_sq).sqrt();
            left_leg = Vec2::new(rel1.x * leg1 - rel1.y * radius, rel1.x * radius + rel1.y * leg1) / dist_sq1;
            let leg2 = (dist_sq2 - radius_sq).sqrt();
            right_leg = Vec2::new(rel2.x * leg2 + rel2.y * radius, -rel2.x * radius + rel2.y * leg2) / dist_sq2;
        }

        // A leg may not point back into the adjacent edge; use that edge's
        // direction instead and drop the constraint if it ends up there.
        let mut left_foreign = false;
        let mut right_foreign = false;
        if left_leg.cross(-v1.prev_unit_dir) >= 0.0 {
            left_leg = -v1.prev_unit_dir;
            left_foreign = true;
        }
        if right_leg.cross(v2.unit_dir) <= 0.0 {
            right_leg = v2.unit_dir;
            right_foreign = true;
        }

        let left_cutoff = (v1.point - position) * inv_tau;
        let right_cutoff = (v2.point - position) * inv_tau;
        let cutoff_vec = right_cutoff - left_cutoff;

        let t = if single_vertex {
            0.5
        } else {
            (velocity - left_cutoff).dot(cutoff_vec) / cutoff_vec.length_squared()
        };
        let t_left = (velocity - left_cutoff).dot(left_leg);
        let t_right = (velocity - right_cutoff).dot(right_leg);

        if (t < 0.0 && t_left < 0.0) || (single_vertex && t_left < 0.0 && t_right < 0.0) {
            // Closest to the left cutoff circle.
            let unit_w = (velocity - left_cutoff).normalized().unwrap_or(-left_leg.perp());
            lines.push(OrcaLine {
                direction: Vec2::new(unit_w.y, -unit_w.x),
                point: left_cutoff + unit_w * (radius * inv_tau),
            });
            continue;
        } else if t > 1.0 && t_right < 0.0 {
            let unit_w = (velocity - right_cutoff).normalized().unwrap_or(right_leg.perp());
            lines.push(OrcaLine {
                direction: Vec2::new(unit_w.y, -unit_w.x),
                point: right_cutoff + unit_w * (radius * inv_tau),
            });
            continue;
        }

        let dist_sq_cutoff = if t < 0.0 || t > 1.0 || single_vertex {
            f64::INFINITY
        } else {
            (velocity - (left_cutoff + cutoff_vec * t)).length_squared()
        };
        let dist_sq_left = if t_left < 0.0 {
            f64::INFINITY
        } else {
            (velocity - (left_cutoff + left_leg * t_left)).length_squared()
        };
        let dist_sq_right = if t_right < 0.0 {
            f64::INFINITY
        } else {
            (velocity - (right_cutoff + right_leg * t_right)).length_squared()
        };

        if dist_sq_cutoff <= dist_sq_left && dist_sq_cutoff <= dist_sq_right {
            let direction = -v1.unit_dir;
            lines.push(OrcaLine {
                direction,
                point: left_cutoff + Vec2::new(-direction.y, direction.x) * (radius * inv_tau),
            });
        } else if dist_sq_left <= dist_sq_right {
            if left_foreign {
                continue;
            }
            let direction = left_leg;
            lines.push(OrcaLine {
                direction,
                point: left_cutoff + Vec2::new(-direction.y, direction.x) * (radius * inv_tau),
            });
        } else {
            if right_foreign {
                continue;
            }
            let direction = -right_leg;
            lines.push(OrcaLine {
                direction,
                point: right_cutoff + Vec2::new(-direction.y, direction.x) * (radius * inv_tau),
            });
        }
    }
}
