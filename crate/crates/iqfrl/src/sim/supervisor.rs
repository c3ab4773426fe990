//! Scripted wall-following supervisor and dataset generation.
//!
//! The supervisor is a simple geometric proportional law on the right-wall
//! distance error and the frontal clearance. It labels each pose with one of
//! three situations: straight wall (class 1, the default), convex corner or
//! gap (class 2, the right wall opens up), and concave corner (class 3, a
//! wall blocks the front). Training datasets are produced by perturbing robot
//! poses along the environment walls and recording the supervisor's command.

use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ClassDataset, Dataset, TrainingExample};
use crate::model::Universes;

use super::env::Environment;
use super::env::Pose;
use super::kinematics::{step, RobotState, CONTROL_PERIOD, V_MAX, W_MAX};
use super::raycast::{raycast, sector_min, LaserConfig};
use super::SimError;

pub const SITUATION_STRAIGHT: u32 = 1;
pub const SITUATION_CONVEX: u32 = 2;
pub const SITUATION_CONCAVE: u32 = 3;
pub const N_SITUATIONS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupervisorConfig {
    /// Reference distance to the right wall in m.
    pub d_wall: f64,
    /// Gain steering toward/away from the right wall.
    pub k_dist: f64,
    /// Gain steering away from frontal obstacles.
    pub k_front: f64,
    /// Frontal clearance below which the turn-away term engages.
    pub front_ref: f64,
    /// Frontal clearance at which the linear velocity reaches zero.
    pub front_stop: f64,
    /// Frontal clearance at which the linear velocity reaches its maximum.
    pub front_full: f64,
    /// Frontal clearance below which a pose is a concave-corner situation.
    pub concave_front: f64,
    /// Right-wall distance above which a pose is a convex-corner situation.
    pub convex_right: f64,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            d_wall: 0.5,
            k_dist: 1.5,
            k_front: 2.0,
            front_ref: 1.0,
            front_stop: 0.35,
            front_full: 1.0,
            concave_front: 1.0,
            convex_right: 0.8,
        }
    }
}

/// Minimum distance over the right-side sector (-90 degrees +/- 30).
pub fn right_distance(scan: &[f64], laser: &LaserConfig) -> f64 {
    sector_min(scan, laser, -2.0 * FRAC_PI_3, -FRAC_PI_3)
}

/// Minimum distance over the frontal sector (+/- 30 degrees).
pub fn front_distance(scan: &[f64], laser: &LaserConfig) -> f64 {
    sector_min(scan, laser, -FRAC_PI_6, FRAC_PI_6)
}

/// The supervisor's command for one scan: steer to hold the right wall at
/// the reference distance, turn left and slow down when a wall blocks the
/// front.
pub fn supervisor_command(
    scan: &[f64],
    laser: &LaserConfig,
    cfg: &SupervisorConfig,
) -> (f64, f64) {
    let front = front_distance(scan, laser);
    let right = right_distance(scan, laser);
    let vang = (cfg.k_front * (cfg.front_ref - front).max(0.0)
        - cfg.k_dist * (right - cfg.d_wall))
        .clamp(-W_MAX, W_MAX);
    let vlin =
        V_MAX * ((front - cfg.front_stop) / (cfg.front_full - cfg.front_stop)).clamp(0.0, 1.0);
    (vlin, vang)
}

/// Situation class for one scan: concave corner when a wall blocks the
/// front, convex corner when the right wall opens up, straight otherwise.
pub fn situation_label(scan: &[f64], laser: &LaserConfig, cfg: &SupervisorConfig) -> u32 {
    if front_distance(scan, laser) < cfg.concave_front {
        SITUATION_CONCAVE
    } else if right_distance(scan, laser) > cfg.convex_right {
        SITUATION_CONVEX
    } else {
        SITUATION_STRAIGHT
    }
}

/// Requested number of examples per situation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SituationCounts {
    pub straight: usize,
    pub convex: usize,
    pub concave: usize,
}

impl SituationCounts {
    pub fn total(&self) -> usize {
        self.straight + self.convex + self.concave
    }

    fn get(&self, situation: u32) -> usize {
        match situation {
            SITUATION_STRAIGHT => self.straight,
            SITUATION_CONVEX => self.convex,
            _ => self.concave,
        }
    }
}

/// Per-situation regression datasets plus the situation classification
/// dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisorData {
    pub straight: Dataset,
    pub convex: Dataset,
    pub concave: Dataset,
    pub classes: ClassDataset,
}

/// Samples a pose near a random wall with the wall on the robot's right and
/// a broad heading jitter, and returns it together with its scan. `None`
/// when the candidate is embedded, too close to a wall, or outside the map.
fn random_wall_pose(
    env: &Environment,
    lengths: &[f64],
    total_len: f64,
    laser: &LaserConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(Pose, Vec<f64>)>, SimError> {
    let mut pick = rng.gen_range(0.0..total_len);
    let mut seg = &env.segments[0];
    for (s, &len) in env.segments.iter().zip(lengths) {
        if pick <= len {
            seg = s;
            break;
        }
        pick -= len;
    }
    let len = seg.length();
    // Extend past the segment ends so poses just beyond corners and
    // gaps (the convex situations) are reachable.
    let ext = 0.6 / len;
    let t = rng.gen_range(-ext..1.0 + ext);
    let (px, py) = (seg.x1 + t * (seg.x2 - seg.x1), seg.y1 + t * (seg.y2 - seg.y1));
    let (tx, ty) = ((seg.x2 - seg.x1) / len, (seg.y2 - seg.y1) / len);
    let side = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let (nx, ny) = (-ty * side, tx * side);
    let offset = rng.gen_range(0.3..0.85);
    let (x, y) = (px + offset * nx, py + offset * ny);
    // Heading along the wall such that the wall sits on the right: the
    // right-hand vector (sin, -cos) of the heading must point back at
    // the wall (-n).
    let along = if tx * ny - ty * nx > 0.0 { (tx, ty) } else { (-tx, -ty) };
    let theta = along.1.atan2(along.0) + rng.gen_range(-0.9..0.9);
    let pose = Pose { x, y, theta };

    let scan = match raycast(env, &pose, laser) {
        Ok(scan) => scan,
        Err(SimError::EmbeddedInWall { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    if scan.iter().copied().fold(f64::INFINITY, f64::min) < 0.27 {
        return Ok(None); // too close to a wall to be a valid pose
    }
    // A pose outside the mapped area sees mostly open space; reject it.
    let open = scan.iter().filter(|&&d| d >= laser.max_range).count();
    if 5 * open > 2 * laser.n_beams {
        return Ok(None);
    }
    Ok(Some((pose, scan)))
}

/// Collects training examples by rolling the supervisor out from random wall
/// poses while injecting command noise, so the recorded states cover the
/// tube the closed-loop controller will actually visit (a plain sample of
/// disconnected wall poses misses the transient states a learner reaches
/// while correcting, and controllers trained on it fail in the loop).
/// Errors if the environment cannot produce a requested situation.
pub fn supervisor_dataset(
    env: &Environment,
    counts: &SituationCounts,
    laser: &LaserConfig,
    universes: &Universes,
    cfg: &SupervisorConfig,
    rng: &mut ChaCha8Rng,
) -> Result<SupervisorData, SimError> {
    if universes.n_beams != laser.n_beams {
        return Err(SimError::BeamMismatch { laser: laser.n_beams, universe: universes.n_beams });
    }
    if env.segments.is_empty() {
        return Err(SimError::EmptyEnvironment);
    }
    let mut data = SupervisorData {
        straight: Dataset::new(*universes),
        convex: Dataset::new(*universes),
        concave: Dataset::new(*universes),
        classes: ClassDataset::new(*universes, N_SITUATIONS),
    };
    let total = counts.total();
    let max_attempts = 500 * total.max(1);
    let mut filled = [0usize; 3];
    let lengths: Vec<f64> = env.segments.iter().map(|s| s.length()).collect();
    let total_len: f64 = lengths.iter().sum();
    let mut attempts = 0;
    // Rollout state: `None` forces a restart from a fresh random wall pose.
    let mut state: Option<RobotState> = None;
    let mut steps_since_restart = 0usize;
    let mut shallow_filled = 0usize;
    // Short rollouts recorded sparsely: consecutive 10 Hz cycles are nearly
    // identical, so taking every cycle of a long rollout would fill the
    // requested counts with a handful of trajectories.
    const ROLLOUT_MAX_STEPS: usize = 60;
    const RECORD_EVERY: usize = 5;
    while filled[0] < counts.straight || filled[1] < counts.convex || filled[2] < counts.concave {
        if attempts >= max_attempts {
            let missing = (1..=N_SITUATIONS)
                .find(|&s| filled[(s - 1) as usize] < counts.get(s))
                .expect("some situation is unfilled");
            return Err(SimError::SituationUnavailable { situation: missing, attempts });
        }
        attempts += 1;

        let current = match state {
            Some(s) => s,
            None => {
                let Some((pose, _)) = random_wall_pose(env, &lengths, total_len, laser, rng)?
                else {
                    continue;
                };
                steps_since_restart = 0;
                let mut restarted = RobotState::at(pose);
                restarted.v = rng.gen_range(0.0..V_MAX);
                restarted
            }
        };
        let scan = match raycast(env, &current.pose(), laser) {
            Ok(scan) => scan,
            Err(SimError::EmbeddedInWall { .. }) => {
                state = None;
                continue;
            }
            Err(e) => return Err(e),
        };
        if scan.iter().copied().fold(f64::INFINITY, f64::min) < 0.27
            || steps_since_restart >= ROLLOUT_MAX_STEPS
        {
            state = None; // wall contact or a stale rollout: restart elsewhere
            continue;
        }

        let (vlin, vang) = supervisor_command(&scan, laser, cfg);
        let label = situation_label(&scan, laser, cfg);
        let bucket = (label - 1) as usize;
        // Stratify the concave bucket: rollouts spend most concave cycles
        // just past the labelling threshold, yet the states that decide
        // between a clean turn and a blockade sit deep in the corner. Cap
        // the shallow ones so deep corners fill half the bucket.
        let is_shallow = label == SITUATION_CONCAVE && front_distance(&scan, laser) >= 0.7;
        if steps_since_restart % RECORD_EVERY == 0
            && filled[bucket] < counts.get(label)
            && !(is_shallow && 2 * shallow_filled >= counts.concave)
        {
            filled[bucket] += 1;
            if is_shallow {
                shallow_filled += 1;
            }
            let distances: Vec<f64> =
                scan.iter().map(|&d| d.min(universes.distance.max)).collect();
            // The law ignores speed, but the rollout's own speed correlates
            // with the situation (slow at corners), and learning that
            // correlation deadlocks the closed loop: a robot arriving fast
            // at a corner matches no corner rule, so it never slows down.
            // Recording an independently sampled speed breaks the loop.
            let velocity = rng.gen_range(0.0..V_MAX);
            let regression = match label {
                SITUATION_STRAIGHT => &mut data.straight,
                SITUATION_CONVEX => &mut data.convex,
                _ => &mut data.concave,
            };
            regression.examples.push(TrainingExample {
                distances: distances.clone(),
                velocity,
                vlin,
                vang,
            });
            data.classes.examples.push(crate::dataset::ClassExample {
                distances,
                velocity,
                class_id: label,
            });
        }

        // Advance the rollout under the supervisor command plus noise; the
        // noise pushes the robot off the teacher's exact path so the next
        // cycles record the corrective commands for nearby imperfect states.
        // The linear factor reaches zero so slow and stopped states (the
        // robot's own start state) appear in the data as well.
        let noisy_vlin = vlin * rng.gen_range(0.0..1.3);
        let noisy_vang = vang + rng.gen_range(-0.45..0.45);
        state = Some(step(&current, noisy_vlin, noisy_vang, CONTROL_PERIOD));
        steps_since_restart += 1;
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::env::fixtures;
    use rand::SeedableRng;

    fn laser16() -> LaserConfig {
        LaserConfig { n_beams: 64, ..LaserConfig::default() }
    }

    #[test]
    fn parallel_at_reference_distance_drives_straight() {
        let env = fixtures::room();
        // Near the bottom wall (y = 0), heading +x, wall 0.5 m to the right.
        let pose = Pose { x: 1.0, y: 0.5, theta: 0.0 };
        let scan = raycast(&env, &pose, &laser16()).unwrap();
        let cfg = SupervisorConfig::default();
        let (vlin, vang) = supervisor_command(&scan, &laser16(), &cfg);
        assert!(vang.abs() < 0.05, "vang {vang}");
        assert!(vlin > 0.45, "vlin {vlin}");
    }

    #[test]
    fn frontal_wall_slows_and_turns_left() {
        let env = fixtures::room();
        // 0.4 m from the east wall, heading straight at it.
        let pose = Pose { x: 5.6, y: 2.0, theta: 0.0 };
        let scan = raycast(&env, &pose, &laser16()).unwrap();
        let cfg = SupervisorConfig::default();
        let (vlin, vang) = supervisor_command(&scan, &laser16(), &cfg);
        assert!(vlin < 0.15, "vlin {vlin}");
        assert!(vang > 0.2, "vang {vang}");
        assert_eq!(situation_label(&scan, &laser16(), &cfg), SITUATION_CONCAVE);
    }

    #[test]
    fn dataset_sizes_match_requested_counts() {
        let env = fixtures::rooms();
        let laser = laser16();
        let u = Universes::with_beams(laser.n_beams);
        let counts = SituationCounts { straight: 30, convex: 10, concave: 15 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data =
            supervisor_dataset(&env, &counts, &laser, &u, &SupervisorConfig::default(), &mut rng)
                .unwrap();
        assert_eq!(data.straight.examples.len(), 30);
        assert_eq!(data.convex.examples.len(), 10);
        assert_eq!(data.concave.examples.len(), 15);
        assert_eq!(data.classes.examples.len(), 55);
        for e in &data.classes.examples {
            assert!((1..=3).contains(&e.class_id));
        }
    }

    #[test]
    fn missing_situation_is_an_explicit_error() {
        // In a 1.2 m box every scan has a wall within a meter of the front,
        // so every pose is a concave situation and a request for straight
        // ones cannot be met.
        let mut env = fixtures::room();
        env.segments = vec![
            crate::sim::env::Segment { x1: 0.0, y1: 0.0, x2: 1.2, y2: 0.0 },
            crate::sim::env::Segment { x1: 1.2, y1: 0.0, x2: 1.2, y2: 1.2 },
            crate::sim::env::Segment { x1: 1.2, y1: 1.2, x2: 0.0, y2: 1.2 },
            crate::sim::env::Segment { x1: 0.0, y1: 1.2, x2: 0.0, y2: 0.0 },
        ];
        let laser = laser16();
        let u = Universes::with_beams(laser.n_beams);
        let counts = SituationCounts { straight: 5, convex: 0, concave: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let err =
            supervisor_dataset(&env, &counts, &laser, &u, &SupervisorConfig::default(), &mut rng)
                .unwrap_err();
        match err {
            SimError::SituationUnavailable { situation, .. } => {
                assert_eq!(situation, SITUATION_STRAIGHT)
            }
            other => panic!("expected SituationUnavailable, got {other}"),
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let env = fixtures::corridor();
        let laser = laser16();
        let u = Universes::with_beams(laser.n_beams);
        let counts = SituationCounts { straight: 10, convex: 5, concave: 5 };
        let cfg = SupervisorConfig::default();
        let mut r1 = ChaCha8Rng::seed_from_u64(7);
        let mut r2 = ChaCha8Rng::seed_from_u64(7);
        let d1 = supervisor_dataset(&env, &counts, &laser, &u, &cfg, &mut r1).unwrap();
        let d2 = supervisor_dataset(&env, &counts, &laser, &u, &cfg, &mut r2).unwrap();
        assert_eq!(d1, d2);
    }
}
