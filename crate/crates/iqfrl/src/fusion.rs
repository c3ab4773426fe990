//! Behavior arbitration: a geometric tracker that pursues a moving target,
//! and switching to wall-following avoidance when an obstacle gets too
//! close, with hysteresis between the trigger and safe distances.
//!
//! Left-side obstacles are handled by mirroring: the beam vector is reversed
//! (a pure permutation) so the obstacle appears on the right, the
//! wall-following controller runs unchanged, and the angular command is
//! negated.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::kb_io::{LineTokens, ParseError};
use crate::model::{KnowledgeBase, ModelError};
use crate::sim::benchmark::SituationKbs;
use crate::sim::kinematics::{wrap_angle, RobotState, V_MAX, W_MAX};
use crate::sim::SimError;

/// Inputs of the tracking behavior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingInputs {
    /// Distance to the target, divided by the reference distance when one is
    /// configured.
    pub d: f64,
    /// Bearing of the target relative to the robot heading, in (-pi, pi].
    pub dev: f64,
    /// Velocity difference (robot minus target) over the maximum velocity.
    pub dv: f64,
    /// Heading difference (target minus robot), wrapped to (-pi, pi].
    pub dtheta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    /// Obstacle distance below which avoidance takes over, in m.
    pub trigger_dist: f64,
    /// Obstacle distance above which tracking resumes, in m.
    pub safe_dist: f64,
    /// Reference tracking distance in m; 0 means path tracking, where the
    /// raw distance is used.
    pub d_ref: f64,
    /// Tracker steering gain.
    pub k_dev: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { trigger_dist: 0.4, safe_dist: 0.5, d_ref: 0.5, k_dev: 1.5 }
    }
}

/// A moving target: pose plus speed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

pub fn tracking_inputs(
    robot: &RobotState,
    target: &TargetState,
    cfg: &FusionConfig,
) -> TrackingInputs {
    let dist = (target.x - robot.x).hypot(target.y - robot.y);
    let d = if cfg.d_ref > 0.0 { dist / cfg.d_ref } else { dist };
    let dev = wrap_angle((target.y - robot.y).atan2(target.x - robot.x) - robot.theta);
    TrackingInputs {
        d,
        dev,
        dv: (robot.v - target.v) / V_MAX,
        dtheta: wrap_angle(target.theta - robot.theta),
    }
}

/// Proportional pursuit: steer onto the target bearing, drive forward at a
/// speed that shrinks with the remaining distance and vanishes when the
/// target is behind.
pub fn simple_tracker(inputs: &TrackingInputs, cfg: &FusionConfig) -> (f64, f64) {
    let vang = (cfg.k_dev * inputs.dev).clamp(-W_MAX, W_MAX);
    let vlin = (V_MAX * inputs.d.min(1.0) * inputs.dev.cos().max(0.0)).clamp(0.0, V_MAX);
    (vlin, vang)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActiveBehavior {
    Tracking,
    Avoidance,
}

/// Wall-following avoidance on one scan. `left_side` mirrors the scan (beam
/// reversal) and negates the angular command so the same right-wall
/// controller serves both sides.
pub fn avoidance_command(
    scan_clamped: &[f64],
    velocity: f64,
    kbs: &SituationKbs,
    classifier: &KnowledgeBase,
    left_side: bool,
    previous: (f64, f64),
) -> Result<(f64, f64), SimError> {
    let mirrored: Vec<f64>;
    let scan = if left_side {
        mirrored = scan_clamped.iter().rev().copied().collect();
        &mirrored[..]
    } else {
        scan_clamped
    };
    let situation = classifier.classify(scan, velocity)?;
    let kb = match situation {
        crate::sim::supervisor::SITUATION_CONVEX => &kbs.convex,
        crate::sim::supervisor::SITUATION_CONCAVE => &kbs.concave,
        _ => &kbs.straight,
    };
    let (vlin, vang) = match kb.infer(scan, velocity) {
        Ok(cmd) => cmd,
        Err(ModelError::UncoveredInput) | Err(ModelError::EmptyKnowledgeBase) => previous,
        Err(e) => return Err(e.into()),
    };
    Ok(if left_side { (vlin, -vang) } else { (vlin, vang) })
}

/// Behavior switch with hysteresis: avoidance engages below the trigger
/// distance and only releases above the safe distance, so nothing chatters
/// inside the band between them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arbitrator {
    pub active: ActiveBehavior,
}

impl Default for Arbitrator {
    fn default() -> Self {
        Self { active: ActiveBehavior::Tracking }
    }
}

impl Arbitrator {
    /// Updates and returns the active behavior given the current minimum
    /// obstacle distance.
    pub fn update(&mut self, min_obstacle_dist: f64, cfg: &FusionConfig) -> ActiveBehavior {
        assert!(cfg.trigger_dist < cfg.safe_dist, "hysteresis band must be non-empty");
        self.active = match self.active {
            ActiveBehavior::Tracking if min_obstacle_dist < cfg.trigger_dist => {
                ActiveBehavior::Avoidance
            }
            ActiveBehavior::Avoidance if min_obstacle_dist >= cfg.safe_dist => {
                ActiveBehavior::Tracking
            }
            same => same,
        };
        self.active
    }

    /// One arbitration cycle: avoidance on the obstacle's side when engaged,
    /// tracking otherwise. `scan_clamped` is the scan clamped to the fuzzy
    /// distance universe, `scan_min`/`min_beam` describe the true nearest
    /// obstacle.
    #[allow(clippy::too_many_arguments)]
    pub fn arbitrate(
        &mut self,
        scan_clamped: &[f64],
        scan_min: f64,
        min_beam: usize,
        robot: &RobotState,
        target: &TargetState,
        kbs: &SituationKbs,
        classifier: &KnowledgeBase,
        cfg: &FusionConfig,
        previous: (f64, f64),
    ) -> Result<(ActiveBehavior, (f64, f64)), SimError> {
        let behavior = self.update(scan_min, cfg);
        let cmd = match behavior {
            ActiveBehavior::Tracking => {
                simple_tracker(&tracking_inputs(robot, target, cfg), cfg)
            }
            ActiveBehavior::Avoidance => {
                // Beams sweep counter-clockwise from the rear: the left half
                // of the scan is the upper index range.
                let left_side = 2 * min_beam >= scan_clamped.len();
                avoidance_command(scan_clamped, robot.v, kbs, classifier, left_side, previous)?
            }
        };
        Ok((behavior, cmd))
    }
}

pub const SCENARIO_MAGIC: &str = "iqfrl-scenario";
pub const SCENARIO_VERSION: &str = "v1";

/// A moving obstacle: a square of the given half-size following waypoints at
/// constant speed.
#[derive(Debug, Clone, PartialEq)]
pub struct MovingObstacle {
    pub speed: f64,
    pub half_size: f64,
    pub waypoints: Vec<(f64, f64)>,
}

/// A tracking scenario: the target's waypoint path and speed, plus optional
/// moving obstacles.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub target_speed: f64,
    pub waypoints: Vec<(f64, f64)>,
    pub obstacles: Vec<MovingObstacle>,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.waypoints.len() < 2 {
            return Err(ScenarioError::Invalid("need at least 2 waypoints".to_string()));
        }
        if !(self.target_speed > 0.0) {
            return Err(ScenarioError::Invalid("target speed must be positive".to_string()));
        }
        for o in &self.obstacles {
            if o.waypoints.is_empty() {
                return Err(ScenarioError::Invalid("obstacle has no waypoints".to_string()));
            }
        }
        Ok(())
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{SCENARIO_MAGIC} {SCENARIO_VERSION}");
        let _ = writeln!(out, "target {}", self.target_speed);
        for (x, y) in &self.waypoints {
            let _ = writeln!(out, "waypoint {x} {y}");
        }
        for o in &self.obstacles {
            let mut line = format!("obstacle {} {}", o.speed, o.half_size);
            for (x, y) in &o.waypoints {
                let _ = write!(line, " {x} {y}");
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (line_no, first) = lines.next().ok_or_else(|| ParseError {
            line: 1,
            col: 1,
            token: "<empty>".to_string(),
            message: "empty document".to_string(),
        })?;
        let mut toks = LineTokens::new(line_no, first);
        toks.expect_keyword(SCENARIO_MAGIC)?;
        toks.expect_keyword(SCENARIO_VERSION)?;
        toks.expect_end()?;

        let mut scenario =
            Scenario { target_speed: 0.0, waypoints: Vec::new(), obstacles: Vec::new() };
        for (line_no, raw) in lines {
            let line = raw.trim_end();
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let mut toks = LineTokens::new(line_no, line);
            let (col, word) = toks.expect("a directive")?;
            match word {
                "target" => {
                    scenario.target_speed = toks.expect_f64("target speed")?;
                    toks.expect_end()?;
                }
                "waypoint" => {
                    let x = toks.expect_f64("waypoint x")?;
                    let y = toks.expect_f64("waypoint y")?;
                    toks.expect_end()?;
                    scenario.waypoints.push((x, y));
                }
                "obstacle" => {
                    let speed = toks.expect_f64("obstacle speed")?;
                    let half_size = toks.expect_f64("obstacle half-size")?;
                    let mut waypoints = Vec::new();
                    while let Some((_, tok)) = toks.next() {
                        let x: f64 = tok
                            .parse()
                            .map_err(|_| toks.error(col, tok, "expected obstacle x"))?;
                        let y = toks.expect_f64("obstacle y")?;
                        waypoints.push((x, y));
                    }
                    scenario.obstacles.push(MovingObstacle { speed, half_size, waypoints });
                }
                other => return Err(toks.error(col, other, "unknown directive").into()),
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }
}

/// Position along a waypoint path after traveling `dist`, clamping at the
/// final waypoint, plus the local path heading.
pub fn path_position(waypoints: &[(f64, f64)], dist: f64) -> (f64, f64, f64) {
    let mut remaining = dist.max(0.0);
    for pair in waypoints.windows(2) {
        let (ax, ay) = pair[0];
        let (bx, by) = pair[1];
        let len = (bx - ax).hypot(by - ay);
        if remaining <= len || len == 0.0 {
            let t = if len == 0.0 { 0.0 } else { remaining / len };
            return (ax + t * (bx - ax), ay + t * (by - ay), (by - ay).atan2(bx - ax));
        }
        remaining -= len;
    }
    let n = waypoints.len();
    let (x, y) = waypoints[n - 1];
    let (px, py) = waypoints[n.saturating_sub(2).min(n - 1)];
    (x, y, (y - py).atan2(x - px))
}

/// Total length of a waypoint path.
pub fn path_length(waypoints: &[(f64, f64)]) -> f64 {
    waypoints.windows(2).map(|p| (p[1].0 - p[0].0).hypot(p[1].1 - p[0].1)).sum()
}

/// One control cycle of a tracking run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub behavior: ActiveBehavior,
    pub vlin_cmd: f64,
    pub vang_cmd: f64,
    pub target_x: f64,
    pub target_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackReport {
    pub trace: Vec<TrackRecord>,
    /// Whether the robot caught up with the target at the end of its path.
    pub reached: bool,
    pub time_s: f64,
}

fn square_segments(x: f64, y: f64, h: f64) -> [crate::sim::env::Segment; 4] {
    use crate::sim::env::Segment;
    [
        Segment { x1: x - h, y1: y - h, x2: x + h, y2: y - h },
        Segment { x1: x + h, y1: y - h, x2: x + h, y2: y + h },
        Segment { x1: x + h, y1: y + h, x2: x - h, y2: y + h },
        Segment { x1: x - h, y1: y + h, x2: x - h, y2: y - h },
    ]
}

/// Closed-loop tracking run: the target walks its waypoint path at constant
/// speed, moving obstacles walk theirs, and the robot arbitrates between
/// tracking and avoidance each cycle. Finishes when the target has reached
/// the end of its path and the robot is within 0.6 m of it, or at `max_time`.
pub fn run_tracking(
    env: &crate::sim::env::Environment,
    scenario: &Scenario,
    kbs: &SituationKbs,
    classifier: &KnowledgeBase,
    cfg: &FusionConfig,
    laser: &crate::sim::raycast::LaserConfig,
    dt: f64,
    max_time: f64,
) -> Result<TrackReport, SimError> {
    use crate::sim::kinematics::step;
    use crate::sim::raycast::raycast;

    let d_max = classifier.universes.distance.max;
    let total = path_length(&scenario.waypoints);
    let mut state = RobotState::at(env.lap_anchor);
    let mut arbitrator = Arbitrator::default();
    let mut prev_cmd = (0.0, 0.0);
    let mut report = TrackReport { trace: Vec::new(), reached: false, time_s: 0.0 };
    let mut t = 0.0;
    while t <= max_time {
        let traveled = scenario.target_speed * t;
        let (tx, ty, ttheta) = path_position(&scenario.waypoints, traveled);
        let target = TargetState {
            x: tx,
            y: ty,
            theta: ttheta,
            v: if traveled < total { scenario.target_speed } else { 0.0 },
        };
        if traveled >= total && (tx - state.x).hypot(ty - state.y) < 0.6 {
            report.reached = true;
            break;
        }
        let mut world = env.clone();
        for o in &scenario.obstacles {
            let (ox, oy, _) = path_position(&o.waypoints, o.speed * t);
            world.segments.extend(square_segments(ox, oy, o.half_size));
        }
        let scan = raycast(&world, &state.pose(), laser)?;
        let (min_beam, &scan_min) = scan
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).expect("distances are finite"))
            .expect("scan is non-empty");
        let clamped: Vec<f64> = scan.iter().map(|&d| d.min(d_max)).collect();
        let (behavior, cmd) = arbitrator.arbitrate(
            &clamped, scan_min, min_beam, &state, &target, kbs, classifier, cfg, prev_cmd,
        )?;
        state = step(&state, cmd.0, cmd.1, dt);
        t += dt;
        prev_cmd = cmd;
        report.trace.push(TrackRecord {
            t,
            x: state.x,
            y: state.y,
            theta: state.theta,
            behavior,
            vlin_cmd: cmd.0,
            vang_cmd: cmd.1,
            target_x: tx,
            target_y: ty,
        });
    }
    report.time_s = t;
    Ok(report)
}
