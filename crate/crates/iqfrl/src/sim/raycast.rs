//! Lidar ray casting against segment worlds.
//!
//! Beam indexing convention: beam 0 points at the robot's rear (relative
//! angle -pi), beams sweep counter-clockwise through the right side
//! (-pi/2 around index (n-1)/4), the front ((n-1)/2), and the left, back to
//! the rear at beam n-1. The default configuration models two back-to-back
//! 361-beam scanners covering the full circle.

use super::env::{Environment, Pose};
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaserConfig {
    pub n_beams: usize,
    /// Total field of view in radians, centered on the robot's heading.
    pub fov: f64,
    pub max_range: f64,
}

impl Default for LaserConfig {
    fn default() -> Self {
        Self { n_beams: 722, fov: std::f64::consts::TAU, max_range: 8.0 }
    }
}

impl LaserConfig {
    /// Beam angle relative to the robot heading, from -fov/2 to +fov/2.
    pub fn beam_angle(&self, beam: usize) -> f64 {
        -self.fov / 2.0 + self.fov * beam as f64 / (self.n_beams - 1) as f64
    }
}

/// Minimum clearance below which a pose counts as touching a wall.
const EMBED_EPS: f64 = 1e-9;

/// Distance from `(x, y)` along direction `(dx, dy)` (unit) to a segment, if
/// the ray hits it.
fn ray_segment(x: f64, y: f64, dx: f64, dy: f64, s: &super::env::Segment) -> Option<f64> {
    let (ex, ey) = (s.x2 - s.x1, s.y2 - s.y1);
    let (wx, wy) = (s.x1 - x, s.y1 - y);
    let denom = dx * ey - dy * ex;
    if denom.abs() < 1e-15 {
        // Parallel. A collinear segment ahead of the origin is hit at its
        // nearest endpoint; anything else is a miss.
        if (wx * dy - wy * dx).abs() > 1e-12 {
            return None;
        }
        let t1 = wx * dx + wy * dy;
        let t2 = (s.x2 - x) * dx + (s.y2 - y) * dy;
        let t = t1.min(t2);
        return (t >= 0.0).then_some(t);
    }
    let t = (wx * ey - wy * ex) / denom;
    let u = (wx * dy - wy * dx) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Casts all beams from `pose`, returning nearest-hit distances clamped to
/// `max_range`. Errors if the pose lies on a wall.
pub fn raycast(env: &Environment, pose: &Pose, cfg: &LaserConfig) -> Result<Vec<f64>, SimError> {
    for s in &env.segments {
        if s.distance_to(pose.x, pose.y) < EMBED_EPS {
            return Err(SimError::EmbeddedInWall { x: pose.x, y: pose.y });
        }
    }
    let mut out = Vec::with_capacity(cfg.n_beams);
    for beam in 0..cfg.n_beams {
        let a = pose.theta + cfg.beam_angle(beam);
        let (dx, dy) = (a.cos(), a.sin());
        let mut best = cfg.max_range;
        for s in &env.segments {
            if let Some(t) = ray_segment(pose.x, pose.y, dx, dy, s) {
                if t < best {
                    best = t;
                }
            }
        }
        out.push(best);
    }
    Ok(out)
}

/// Minimum beam distance over the beams whose relative angle falls in
/// `[lo, hi]` radians. Returns `max_range` if no beam falls in the window.
pub fn sector_min(scan: &[f64], cfg: &LaserConfig, lo: f64, hi: f64) -> f64 {
    let mut best = cfg.max_range;
    for (beam, &d) in scan.iter().enumerate() {
        let a = cfg.beam_angle(beam);
        if a >= lo && a <= hi && d < best {
            best = d;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::env::Segment;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn env_with(segments: Vec<Segment>) -> Environment {
        Environment {
            segments,
            lap_anchor: Pose { x: 0.0, y: 0.0, theta: 0.0 },
            lap_direction: 1,
        }
    }

    #[test]
    fn perpendicular_wall_at_one_meter() {
        let env = env_with(vec![Segment { x1: 1.0, y1: -5.0, x2: 1.0, y2: 5.0 }]);
        let cfg = LaserConfig { n_beams: 5, ..LaserConfig::default() };
        let pose = Pose { x: 0.0, y: 0.0, theta: 0.0 };
        let scan = raycast(&env, &pose, &cfg).unwrap();
        // Beams at -pi, -pi/2, 0, pi/2, pi: only the forward beam hits.
        assert!((scan[2] - 1.0).abs() < 1e-12);
        assert_eq!(scan[0], cfg.max_range);
        assert_eq!(scan[1], cfg.max_range);
    }

    #[test]
    fn empty_environment_reads_max_range() {
        let env = env_with(vec![]);
        let cfg = LaserConfig { n_beams: 16, ..LaserConfig::default() };
        let scan = raycast(&env, &Pose { x: 0.0, y: 0.0, theta: 0.4 }, &cfg).unwrap();
        assert!(scan.iter().all(|&d| d == cfg.max_range));
    }

    #[test]
    fn pose_on_wall_is_an_error() {
        let env = env_with(vec![Segment { x1: -1.0, y1: 0.0, x2: 1.0, y2: 0.0 }]);
        let cfg = LaserConfig::default();
        let err = raycast(&env, &Pose { x: 0.0, y: 0.0, theta: 0.0 }, &cfg).unwrap_err();
        assert!(matches!(err, SimError::EmbeddedInWall { .. }));
    }

    /// Distance-field marching: step by the clearance to the nearest segment,
    /// which can never skip a wall, until contact or max range.
    fn march_oracle(env: &Environment, x: f64, y: f64, angle: f64, max_range: f64) -> f64 {
        let (dx, dy) = (angle.cos(), angle.sin());
        let mut t = 0.0;
        for _ in 0..2_000_000 {
            let (px, py) = (x + t * dx, y + t * dy);
            let clearance = env
                .segments
                .iter()
                .map(|s| s.distance_to(px, py))
                .fold(f64::INFINITY, f64::min);
            if clearance < 1e-9 {
                return t;
            }
            t += clearance;
            if t >= max_range {
                return max_range;
            }
        }
        panic!("marching oracle failed to converge");
    }

    #[test]
    fn matches_distance_marching_oracle_on_random_scenes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = LaserConfig { n_beams: 32, ..LaserConfig::default() };
        for _ in 0..100 {
            let segments: Vec<Segment> = (0..rng.gen_range(3..8))
                .map(|_| Segment {
                    x1: rng.gen_range(-5.0..5.0),
                    y1: rng.gen_range(-5.0..5.0),
                    x2: rng.gen_range(-5.0..5.0),
                    y2: rng.gen_range(-5.0..5.0),
                })
                .collect();
            let env = env_with(segments);
            let pose = loop {
                let p = Pose {
                    x: rng.gen_range(-4.0..4.0),
                    y: rng.gen_range(-4.0..4.0),
                    theta: rng.gen_range(-3.0..3.0),
                };
                let clear = env
                    .segments
                    .iter()
                    .map(|s| s.distance_to(p.x, p.y))
                    .fold(f64::INFINITY, f64::min);
                if clear > 0.05 {
                    break p;
                }
            };
            let scan = raycast(&env, &pose, &cfg).unwrap();
            for (beam, &d) in scan.iter().enumerate() {
                let oracle =
                    march_oracle(&env, pose.x, pose.y, pose.theta + cfg.beam_angle(beam), cfg.max_range);
                assert!(
                    (d - oracle).abs() < 1e-6,
                    "beam {beam}: analytic {d} vs marched {oracle}"
                );
            }
        }
    }

    #[test]
    fn sector_min_picks_the_right_side() {
        // Wall only on the right (negative y).
        let env = env_with(vec![Segment { x1: -5.0, y1: -0.5, x2: 5.0, y2: -0.5 }]);
        let cfg = LaserConfig { n_beams: 181, ..LaserConfig::default() };
        let scan = raycast(&env, &Pose { x: 0.0, y: 0.0, theta: 0.0 }, &cfg).unwrap();
        let right = sector_min(&scan, &cfg, -2.0 * std::f64::consts::FRAC_PI_3, -std::f64::consts::FRAC_PI_3);
        assert!((right - 0.5).abs() < 1e-9);
        let front = sector_min(&scan, &cfg, -0.5, 0.5);
        assert!(front > 0.9);
    }
}
