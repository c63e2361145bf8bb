use crate::geometry::{Segment, Vec2};

/// Closest point on the polyline: `(distance, arc length at that point)`.
fn project_onto(position: Vec2, waypoints: &[Vec2]) -> (f64, f64) {
    let mut best = (position.distance(waypoints[0]), 0.0);
    let mut arc = 0.0;
    for w in waypoints.windows(2) {
        let len = w[0].distance(w[1]);
        if let Ok(seg) = Segment::new(w[0], w[1]) {
            let q = seg.closest_point(position);
            let d = position.distance(q);
            if d < best.0 {
                best = (d, arc + q.distance(w[0]));
            }
        }
        arc += len;
    }
    best
}

/// Distance from `position` to the polyline through `waypoints`.
pub fn distance_to_path(position: Vec2, waypoints: &[Vec2]) -> f64 {
    if waypoints.is_empty() {
        return f64::INFINITY;
    }
    project_onto(position, waypoints).0
}

/// Pure-pursuit style steering along a waypoint polyline.
///
/// The agent heads for the first waypoint lying at least `lookahead` meters
/// beyond its projection onto the path (the last waypoint if none does) at
/// `pref_speed`. Within `tolerance` of the last waypoint the result is zero.
pub fn preferred_velocity_astar(
    position: Vec2,
    waypoints: &[Vec2],
    pref_speed: f64,
    lookahead: f64,
    tolerance: f64,
) -> Vec2 {
    let Some(&last) = waypoints.last() else {
        return Vec2::ZERO;
    };
    if position.distance(last) <= tolerance {
        return Vec2::ZERO;
    }
    let (_, s0) = project_onto(position, waypoints);
    let mut arc = 0.0;
    let mut target = last;
    for (i, &w) in waypoints.iter().enumerate() {
        if i > 0 {
            arc += waypoints[i - 1].distance(w);
        }
        if arc >= s0 + lookahead {
            target = w;
            break;
        }
    }
    let dir = (target - position)
        .normalized()
        .or_else(|| (last - position).normalized());
    dir.map_or(Vec2::ZERO, |d| d * pref_speed)
}
