//! Planar geometry shared by planning, avoidance and the simulated laser.
//!
//! Static obstacles are a soup of line segments; polygons are decomposed
//! into their edges before they get here.

mod grid;
mod raycast;

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use thiserror::Error;

pub use grid::{rasterize, CellIndex, OccupancyGrid, NEIGHBORS_8};
pub use raycast::{ray_cast, Disc, RayHit};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("ray direction must be unit length, got |d| = {0}")]
    InvalidDirection(f64),
    #[error("ray max_range must be positive, got {0}")]
    InvalidRange(f64),
    #[error("segment endpoints coincide at ({0}, {1})")]
    DegenerateSegment(f64, f64),
    #[error("grid resolution must be positive, got {0}")]
    InvalidResolution(f64),
    #[error("inflation must be non-negative, got {0}")]
    InvalidInflation(f64),
    #[error("obstacle bounds are degenerate and no world bounds were given")]
    EmptyBounds,
}

/// A point or displacement in the plane, in meters (or m/s in velocity space).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn from_angle(theta: f64) -> Self {
        Vec2::new(theta.cos(), theta.sin())
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product; positive when `other` lies to
    /// the left of `self`.
    #[inline]
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn length(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).length()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let len = self.length();
        if len > 0.0 && len.is_finite() {
            Some(self / len)
        } else {
            None
        }
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Rotates counter-clockwise by `theta` radians.
    pub fn rotated(self, theta: f64) -> Vec2 {
        let (s, c) = theta.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    /// Scales down to `max_len` if longer; never scales up.
    pub fn clamp_length(self, max_len: f64) -> Vec2 {
        let len_sq = self.length_squared();
        if len_sq > max_len * max_len {
            self * (max_len / len_sq.sqrt())
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, rhs: Vec2) {
        self.x -= rhs.x;
        self.y -= rhs.y;
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x / rhs, self.y / rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = theta % TAU;
    if a <= -PI {
        a += TAU;
    } else if a > PI {
        a -= TAU;
    }
    a
}

/// A wall or furniture edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    a: Vec2,
    b: Vec2,
}

impl Segment {
    pub fn new(a: Vec2, b: Vec2) -> Result<Self, GeometryError> {
        if a == b {
            return Err(GeometryError::DegenerateSegment(a.x, a.y));
        }
        Ok(Segment { a, b })
    }

    #[inline]
    pub fn a(&self) -> Vec2 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> Vec2 {
        self.b
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    /// Nearest point on the segment to `p`.
    pub fn closest_point(&self, p: Vec2) -> Vec2 {
        let ab = self.b - self.a;
        let t = ((p - self.a).dot(ab) / ab.length_squared()).clamp(0.0, 1.0);
        self.a + ab * t
    }

    pub fn distance_to(&self, p: Vec2) -> f64 {
        p.distance(self.closest_point(p))
    }

    pub fn point_at(&self, t: f64) -> Vec2 {
        self.a + (self.b - self.a) * t
    }

    /// Shortest distance between this segment and the segment `p`-`q`
    /// (which may be a single point).
    pub fn distance_to_span(&self, p: Vec2, q: Vec2) -> f64 {
        if p != q && spans_cross(self.a, self.b, p, q) {
            return 0.0;
        }
        let mut d = self.distance_to(p).min(self.distance_to(q));
        if p != q {
            let other = Segment { a: p, b: q };
            d = d.min(other.distance_to(self.a)).min(other.distance_to(self.b));
        }
        d
    }
}

/// Whether closed segments `a`-`b` and `c`-`d` share a point.
fn spans_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Vec2,
    pub max: Vec2,
}

impl Rect {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Rect { min, max }
    }

    pub fn from_points(points: impl IntoIterator<Item = Vec2>) -> Option<Rect> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut r = Rect::new(first, first);
        for p in iter {
            r.include(p);
        }
        Some(r)
    }

    pub fn include(&mut self, p: Vec2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.width() > 0.0 && self.height() > 0.0)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn expanded(&self, margin: f64) -> Rect {
        Rect::new(
            self.min - Vec2::new(margin, margin),
            self.max + Vec2::new(margin, margin),
        )
    }

    pub fn center(&self) -> Vec2 {
        (self.min + self.max) * 0.5
    }
}

/// The static part of the world.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObstacleSet {
    segments: Vec<Segment>,
    bounds: Option<Rect>,
}

impl ObstacleSet {
    pub fn new(segments: Vec<Segment>) -> Self {
        let bounds = Rect::from_points(segments.iter().flat_map(|s| [s.a, s.b]));
        ObstacleSet { segments, bounds }
    }

    pub fn empty() -> Self {
        ObstacleSet::default()
    }

    /// Closed polygon outline, e.g. a booth or a room.
    pub fn push_polygon(&mut self, vertices: &[Vec2]) -> Result<(), GeometryError> {
        for i in 0..vertices.len() {
            let a = vertices[i];
            let b = vertices[(i + 1) % vertices.len()];
            self.push(Segment::new(a, b)?);
        }
        Ok(())
    }

    pub fn push(&mut self, segment: Segment) {
        match &mut self.bounds {
            Some(r) => {
                r.include(segment.a);
                r.include(segment.b);
            }
            None => self.bounds = Rect::from_points([segment.a, segment.b]),
        }
        self.segments.push(segment);
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Bounding box of every segment endpoint, `None` when empty.
    pub fn bounds(&self) -> Option<Rect> {
        self.bounds
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// Distance from `p` to the nearest segment along with the nearest point.
    pub fn nearest(&self, p: Vec2) -> Option<(f64, Vec2)> {
        self.segments
            .iter()
            .map(|s| {
                let q = s.closest_point(p);
                (p.distance(q), q)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn clearance(&self, p: Vec2) -> f64 {
        self.nearest(p).map_or(f64::INFINITY, |(d, _)| d)
    }

    /// Smallest distance between the straight move `p`-`q` and any segment.
    pub fn span_clearance(&self, p: Vec2, q: Vec2) -> f64 {
        self.segments
            .iter()
            .map(|s| s.distance_to_span(p, q))
            .fold(f64::INFINITY, f64::min)
    }
}
