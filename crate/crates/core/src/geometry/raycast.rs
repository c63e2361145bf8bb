use super::{GeometryError, ObstacleSet, Segment, Vec2};

/// Tolerance on `|direction| - 1`.
const UNIT_TOLERANCE: f64 = 1e-9;
/// Negative discriminants above this are treated as tangential hits.
const DISCRIMINANT_EPS: f64 = 1e-12;

/// A circular body seen by the ray, typically another agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Disc {
    pub center: Vec2,
    pub radius: f64,
}

impl Disc {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Disc { center, radius }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RayHit {
    Hit(f64),
    NoHit,
}

impl RayHit {
    pub fn distance(self) -> Option<f64> {
        match self {
            RayHit::Hit(t) => Some(t),
            RayHit::NoHit => None,
        }
    }

    pub fn is_hit(self) -> bool {
        matches!(self, RayHit::Hit(_))
    }
}

/// Casts a ray and returns the nearest intersection in `(0, max_range]`.
///
/// Discs that contain the ray origin are skipped; the caller is expected to
/// exclude the body the sensor is mounted on.
pub fn ray_cast(
    origin: Vec2,
    direction: Vec2,
    max_range: f64,
    obstacles: &ObstacleSet,
    discs: &[Disc],
) -> Result<RayHit, GeometryError> {
    let len = direction.length();
    if !((len - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(GeometryError::InvalidDirection(len));
    }
    if !(max_range > 0.0) {
        return Err(GeometryError::InvalidRange(max_range));
    }

    let mut best = f64::INFINITY;
    for seg in obstacles.segments() {
        if let Some(t) = ray_segment(origin, direction, seg) {
            if t < best {
                best = t;
            }
        }
    }
    for disc in discs {
        if let Some(t) = ray_disc(origin, direction, disc) {
            if t < best {
                best = t;
            }
        }
    }

    if best <= max_range {
        Ok(RayHit::Hit(best))
    } else {
        Ok(RayHit::NoHit)
    }
}

/// Parametric ray/segment intersection; `None` when the hit is behind the
/// origin or outside the segment.
pub(crate) fn ray_segment(origin: Vec2, dir: Vec2, seg: &Segment) -> Option<f64> {
    let e = seg.b() - seg.a();
    let ao = seg.a() - origin;
    let denom = dir.cross(e);
    if denom.abs() <= DISCRIMINANT_EPS * e.length() {
        // Parallel. Only a collinear segment lying ahead can be hit, at its
        // nearer endpoint.
        if ao.cross(dir).abs() > DISCRIMINANT_EPS * ao.length().max(1.0) {
            return None;
        }
        let near = ao.dot(dir).min((seg.b() - origin).dot(dir));
        return (near > 0.0).then_some(near);
    }
    let t = ao.cross(e) / denom;
    let s = ao.cross(dir) / denom;
    if t > 0.0 && (0.0..=1.0).contains(&s) {
        Some(t)
    } else {
        None
    }
}

fn ray_disc(origin: Vec2, dir: Vec2, disc: &Disc) -> Option<f64> {
    let f = origin - disc.center;
    let c = f.length_squared() - disc.radius * disc.radius;
    if c <= 0.0 {
        return None;
    }
    let b = f.dot(dir);
    if b >= 0.0 {
        // Center behind the origin and origin outside: both roots negative.
        return None;
    }
    let mut disc_sq = b * b - c;
    if disc_sq < -DISCRIMINANT_EPS {
        return None;
    }
    if disc_sq < 0.0 {
        disc_sq = 0.0;
    }
    // c / (-b + sqrt) is the cancellation-free form of -b - sqrt.
    let t = c / (-b + disc_sq.sqrt());
    if t > 0.0 {
        Some(t)
    } else {
        None
    }
}
