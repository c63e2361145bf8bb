// Incremental low-dimensional linear programs over ORCA half-planes, in the
// shape of the RVO2 solver: a 2-D program for the closest feasible velocity
// and a 3-D fallback that minimizes the largest violation.

use super::OrcaLine;
use crate::geometry::Vec2;

const EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrcaSolution {
    pub velocity: Vec2,
    /// False when the half-planes had no common point inside the speed disc
    /// and the least-violation fallback was used.
    pub feasible: bool,
}

/// Velocity inside `|v| <= max_speed` closest to `v_pref` that satisfies all
/// lines, or the one with the smallest maximum violation if none does.
pub fn orca_solve(lines: &[OrcaLine], v_pref: Vec2, max_speed: f64) -> Vec2 {
    orca_solve_detailed(lines, 0, v_pref, max_speed).velocity
}

/// Like [`orca_solve`], treating the first `hard_count` lines as constraints
/// that the fallback may never relax (walls).
pub fn orca_solve_detailed(lines: &[OrcaLine], hard_count: usize, v_pref: Vec2, max_speed: f64) -> OrcaSolution {
    let hard_count = hard_count.min(lines.len());
    let mut result = Vec2::ZERO;
    let fail = lp2(lines, max_speed, v_pref, false, &mut result);
    let feasible = fail == lines.len();
    if !feasible {
        lp3(lines, hard_count, fail, max_speed, &mut result);
    }
    OrcaSolution {
        velocity: result.clamp_length(max_speed),
        feasible,
    }
}

/// Optimizes along line `line_no` subject to lines `0..line_no` and the disc.
fn lp1(lines: &[OrcaLine], line_no: usize, radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> bool {
    let line = &lines[line_no];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.length_squared();
    if discriminant < 0.0 {
        // The line misses the speed disc entirely.
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for other in &lines[..line_no] {
        let denominator = line.direction.cross(other.direction);
        let numerator = other.direction.cross(line.point - other.point);
        if denominator.abs() <= EPS {
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    *result = if direction_opt {
        if opt.dot(line.direction) > 0.0 {
            line.point + line.direction * t_right
        } else {
            line.point + line.direction * t_left
        }
    } else {
        let t = line.direction.dot(opt - line.point).clamp(t_left, t_right);
        line.point + line.direction * t
    };
    true
}

/// Returns the index of the first line that could not be satisfied, or
/// `lines.len()` on success.
fn lp2(lines: &[OrcaLine], radius: f64, opt: Vec2, direction_opt: bool, result: &mut Vec2) -> usize {
    *result = if direction_opt {
        opt * radius
    } else {
        opt.clamp_length(radius)
    };
    for i in 0..lines.len() {
        if lines[i].violation(*result) > 0.0 {
            let previous = *result;
            if !lp1(lines, i, radius, opt, direction_opt, result) {
                *result = previous;
                return i;
            }
        }
    }
    lines.len()
}

/// Minimizes the largest violation over the soft lines `hard_count..`,
/// keeping the first `hard_count` lines satisfied.
fn lp3(lines: &[OrcaLine], hard_count: usize, begin: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin..lines.len() {
        if lines[i].violation(*result) <= distance {
            continue;
        }
        let mut projected: Vec<OrcaLine> = lines[..hard_count].to_vec();
        for j in hard_count..i {
            let determinant = lines[i].direction.cross(lines[j].direction);
            let point = if determinant.abs() <= EPS {
                if lines[i].direction.dot(lines[j].direction) > 0.0 {
                    // Same orientation: line j is implied by line i.
                    continue;
                }
                (lines[i].point + lines[j].point) * 0.5
            } else {
                lines[i].point
                    + lines[i].direction
                        * (lines[j].direction.cross(lines[i].point - lines[j].point) / determinant)
            };
            let Some(direction) = (lines[j].direction - lines[i].direction).normalized() else {
                continue;
            };
            projected.push(OrcaLine { point, direction });
        }
        let previous = *result;
        let toward = Vec2::new(-lines[i].direction.y, lines[i].direction.x);
        if lp2(&projected, radius, toward, true, result) < projected.len() {
            // Only reachable through rounding; keep the last good answer.
            *result = previous;
        }
        distance = lines[i].violation(*result);
    }
}
