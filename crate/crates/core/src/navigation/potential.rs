use thiserror::Error;

use super::PotentialParams;
use crate::geometry::{ObstacleSet, Vec2};

/// Clearance below which the repulsive gradient is not evaluated.
const SINGULAR_CLEARANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum PotentialError {
    /// The position touches an obstacle; carries the unit direction pointing
    /// away from it.
    #[error("position is within {SINGULAR_CLEARANCE} m of an obstacle")]
    SingularPoint { away: Vec2 },
}

/// Field value `U(p) = k_att/2 |p - goal|^2 + sum k_rep/2 (1/rho - 1/rho0)^2`,
/// the sum running over segments closer than `rho0`.
pub fn potential(position: Vec2, goal: Vec2, obstacles: &ObstacleSet, params: &PotentialParams) -> f64 {
    let mut u = 0.5 * params.k_att * (position - goal).length_squared();
    for seg in obstacles.segments() {
        let rho = seg.distance_to(position);
        if rho < params.rho0 {
            let k = 1.0 / rho - 1.0 / params.rho0;
            u += 0.5 * params.k_rep * k * k;
        }
    }
    u
}

/// `-grad U` at `position`, before any speed clamping.
pub fn potential_force(
    position: Vec2,
    goal: Vec2,
    obstacles: &ObstacleSet,
    params: &PotentialParams,
) -> Result<Vec2, PotentialError> {
    let mut force = (goal - position) * params.k_att;
    for seg in obstacles.segments() {
        let q = seg.closest_point(position);
        let away = position - q;
        let rho = away.length();
        if rho < SINGULAR_CLEARANCE {
            let dir = away
                .normalized()
                .unwrap_or_else(|| (seg.b() - seg.a()).perp().normalized().expect("segments have length"));
            return Err(PotentialError::SingularPoint { away: dir });
        }
        if rho < params.rho0 {
            // d/dp of 1/rho is -(p - q)/rho^3.
            let k = 1.0 / rho - 1.0 / params.rho0;
            force += away * (params.k_rep * k / (rho * rho * rho));
        }
    }
    Ok(force)
}

/// Preferred velocity from the potential field, clamped to `pref_speed`.
/// An agent touching a wall is pushed straight away from it.
pub fn potential_field_velocity(
    position: Vec2,
    goal: Vec2,
    obstacles: &ObstacleSet,
    params: &PotentialParams,
    pref_speed: f64,
) -> Vec2 {
    match potential_force(position, goal, obstacles, params) {
        Ok(f) => f.clamp_length(pref_speed),
        Err(PotentialError::SingularPoint { away }) => away * pref_speed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;

    #[test]
    fn attractive_only_is_clamped() {
        let v = potential_field_velocity(
            Vec2::ZERO,
            Vec2::new(10.0, 0.0),
            &ObstacleSet::empty(),
            &PotentialParams::default(),
            1.0,
        );
        assert_eq!(v, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn at_goal_is_zero() {
        let p = Vec2::new(3.0, -2.0);
        let v = potential_field_velocity(p, p, &ObstacleSet::empty(), &PotentialParams::default(), 1.0);
        assert_eq!(v, Vec2::ZERO);
    }

    #[test]
    fn wall_north_matches_central_difference() {
        // Independent evaluation of U, written out for one wall.
        let params = PotentialParams {
            k_att: 1.0,
            k_rep: 0.5,
            rho0: 2.0,
        };
        let goal = Vec2::new(4.0, 0.0);
        let u = |p: Vec2| {
            let att = 0.5 * params.k_att * ((p.x - goal.x).powi(2) + (p.y - goal.y).powi(2));
            let rho = 0.5 - p.y; // wall y = 0.5 spanning x in [-5, 5]
            let rep = if rho < params.rho0 {
                0.5 * params.k_rep * (1.0 / rho - 1.0 / params.rho0).powi(2)
            } else {
                0.0
            };
            att + rep
        };
        let obstacles = ObstacleSet::new(vec![Segment::new(Vec2::new(-5.0, 0.5), Vec2::new(5.0, 0.5)).unwrap()]);
        let p = Vec2::ZERO;
        let h = 1e-6;
        let grad = Vec2::new(
            (u(p + Vec2::new(h, 0.0)) - u(p - Vec2::new(h, 0.0))) / (2.0 * h),
            (u(p + Vec2::new(0.0, h)) - u(p - Vec2::new(0.0, h))) / (2.0 * h),
        );
        let f = potential_force(p, goal, &obstacles, &params).unwrap();
        let rel = (f + grad).length() / grad.length();
        assert!(rel < 1e-4, "force {f} vs -grad {}", -grad);
        assert!(f.y < 0.0, "wall to the north pushes south");

        let pref = 1.3;
        let v = potential_field_velocity(p, goal, &obstacles, &params, pref);
        let expected = (-grad).clamp_length(pref);
        assert!((v - expected).length() / expected.length() < 1e-4);
    }

    #[test]
    fn touching_wall_is_singular() {
        let obstacles = ObstacleSet::new(vec![Segment::new(Vec2::new(-5.0, 0.0), Vec2::new(5.0, 0.0)).unwrap()]);
        let p = Vec2::new(1.0, 1e-7);
        let err = potential_force(p, Vec2::new(0.0, 5.0), &obstacles, &PotentialParams::default()).unwrap_err();
        let PotentialError::SingularPoint { away } = err;
        assert!((away - Vec2::new(0.0, 1.0)).length() < 1e-9);
        let v = potential_field_velocity(p, Vec2::new(0.0, 5.0), &obstacles, &PotentialParams::default(), 0.8);
        assert!((v - Vec2::new(0.0, 0.8)).length() < 1e-9);
    }

    #[test]
    fn far_walls_do_not_repel() {
        let obstacles = ObstacleSet::new(vec![Segment::new(Vec2::new(-5.0, 3.0), Vec2::new(5.0, 3.0)).unwrap()]);
        let f = potential_force(Vec2::ZERO, Vec2::new(1.0, 0.0), &obstacles, &PotentialParams::default()).unwrap();
        assert_eq!(f, Vec2::new(1.0, 0.0));
    }
}
