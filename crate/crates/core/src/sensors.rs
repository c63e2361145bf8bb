//! Noise-free planar range scanner.

use crate::geometry::{ray_cast, Disc, ObstacleSet, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaserConfig {
    /// Total field of view, radians, centered on the robot heading.
    pub fov: f64,
    pub max_range: f64,
    pub beam_count: usize,
    /// Publish a scan every this many ticks.
    pub rate_divisor: u64,
    /// Sensor position in the robot frame.
    pub mount_offset: Vec2,
}

impl Default for LaserConfig {
    fn default() -> Self {
        LaserConfig {
            fov: 220f64.to_radians(),
            max_range: 25.0,
            beam_count: 440,
            rate_divisor: 1,
            mount_offset: Vec2::ZERO,
        }
    }
}

impl LaserConfig {
    /// Returns `(field, message)` for the first out-of-range value.
    pub fn validate(&self) -> Result<(), (String, String)> {
        if !(self.fov > 0.0 && self.fov <= std::f64::consts::TAU) {
            return Err(("fov".into(), format!("must lie in (0, 2pi], got {}", self.fov)));
        }
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err(("max_range".into(), format!("must be positive, got {}", self.max_range)));
        }
        if self.beam_count < 2 {
            return Err(("beam_count".into(), format!("must be at least 2, got {}", self.beam_count)));
        }
        if self.rate_divisor == 0 {
            return Err(("rate_divisor".into(), "must be at least 1".into()));
        }
        if !self.mount_offset.is_finite() {
            return Err(("mount_offset".into(), "must be finite".into()));
        }
        Ok(())
    }

    pub fn angle_min(&self) -> f64 {
        -0.5 * self.fov
    }

    pub fn angle_increment(&self) -> f64 {
        self.fov / (self.beam_count - 1) as f64
    }

    /// Robot-frame angle of beam `k`. The first and last beams land exactly
    /// on the field-of-view edges.
    pub fn beam_angle(&self, k: usize) -> f64 {
        self.angle_min() + self.fov * (k as f64 / (self.beam_count - 1) as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaserScan {
    pub robot_id: u64,
    pub tick: u64,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    /// One entry per beam; `None` when nothing lies within `range_max`.
    pub ranges: Vec<Option<f64>>,
}

/// Casts every beam of `config` from a robot at `position` facing `heading`.
/// `discs` are the other agents; the scanning robot must not be among them.
pub fn simulate_scan(
    robot_id: u64,
    tick: u64,
    position: Vec2,
    heading: f64,
    config: &LaserConfig,
    obstacles: &ObstacleSet,
    discs: &[Disc],
) -> LaserScan {
    let origin = position + config.mount_offset.rotated(heading);
    let ranges = (0..config.beam_count)
        .map(|k| {
            let dir = Vec2::from_angle(heading + config.beam_angle(k));
            ray_cast(origin, dir, config.max_range, obstacles, discs)
                .expect("unit direction and validated range")
                .distance()
        })
        .collect();
    LaserScan {
        robot_id,
        tick,
        angle_min: config.angle_min(),
        angle_increment: config.angle_increment(),
        range_max: config.max_range,
        ranges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> ObstacleSet {
        let mut o = ObstacleSet::empty();
        o.push_polygon(&[
            Vec2::new(-5.0, -5.0),
            Vec2::new(5.0, -5.0),
            Vec2::new(5.0, 5.0),
            Vec2::new(-5.0, 5.0),
        ])
        .unwrap();
        o
    }

    fn forward(scan: &LaserScan) -> Option<f64> {
        // An odd beam count puts one beam exactly on the heading.
        scan.ranges[scan.ranges.len() / 2]
    }

    fn odd_config() -> LaserConfig {
        LaserConfig {
            beam_count: 441,
            ..LaserConfig::default()
        }
    }

    #[test]
    fn forward_beam_hits_room_wall() {
        let cfg = odd_config();
        let scan = simulate_scan(1, 0, Vec2::ZERO, 0.0, &cfg, &room(), &[]);
        assert_eq!(cfg.beam_angle(220), 0.0);
        assert_eq!(forward(&scan), Some(5.0));
    }

    #[test]
    fn empty_world_has_no_hits() {
        let scan = simulate_scan(1, 0, Vec2::ZERO, 0.3, &LaserConfig::default(), &ObstacleSet::empty(), &[]);
        assert_eq!(scan.ranges.len(), 440);
        assert!(scan.ranges.iter().all(Option::is_none));
    }

    #[test]
    fn pedestrian_disc_ahead() {
        let cfg = odd_config();
        let disc = Disc::new(Vec2::new(3.0, 0.0), 0.3);
        let scan = simulate_scan(1, 0, Vec2::ZERO, 0.0, &cfg, &ObstacleSet::empty(), &[disc]);
        let r = forward(&scan).unwrap();
        assert!((r - 2.7).abs() < 1e-12, "{r}");
    }

    #[test]
    fn edge_beams_on_fov_boundary() {
        let cfg = LaserConfig::default();
        assert_eq!(cfg.beam_angle(0), -110f64.to_radians());
        assert_eq!(cfg.beam_angle(439), 110f64.to_radians());
    }

    #[test]
    fn mount_offset_rotates_with_heading() {
        let cfg = LaserConfig {
            mount_offset: Vec2::new(0.5, 0.0),
            ..odd_config()
        };
        let scan = simulate_scan(1, 0, Vec2::ZERO, std::f64::consts::FRAC_PI_2, &cfg, &room(), &[]);
        let r = forward(&scan).unwrap();
        assert!((r - 4.5).abs() < 1e-12, "{r}");
    }

    #[test]
    fn validate_rejects_bad_values() {
        let bad = [
            LaserConfig { fov: 0.0, ..LaserConfig::default() },
            LaserConfig { fov: 7.0, ..LaserConfig::default() },
            LaserConfig { max_range: -1.0, ..LaserConfig::default() },
            LaserConfig { beam_count: 1, ..LaserConfig::default() },
            LaserConfig { rate_divisor: 0, ..LaserConfig::default() },
        ];
        let fields = ["fov", "fov", "max_range", "beam_count", "rate_divisor"];
        for (cfg, field) in bad.iter().zip(fields) {
            assert_eq!(cfg.validate().unwrap_err().0, field);
        }
        LaserConfig::default().validate().unwrap();
    }
}
