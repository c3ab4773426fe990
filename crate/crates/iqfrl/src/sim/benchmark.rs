//! Wall-following benchmark protocol: closed-loop runs with situation-gated
//! knowledge bases, lap counting, blockade detection and recovery, and the
//! per-lap quality indicators.

use std::collections::VecDeque;

use crate::model::{KnowledgeBase, ModelError};

use super::env::{Environment, Pose};
use super::kinematics::{step, RobotState, CONTROL_PERIOD};
use super::raycast::{raycast, LaserConfig};
use super::supervisor::{right_distance, SITUATION_CONCAVE, SITUATION_CONVEX, SITUATION_STRAIGHT};
use super::SimError;

/// Reference distance to the wall for the quality measure, in cm.
pub const D_WALL_CM: f64 = 50.0;
/// Maximum linear velocity for the quality measure, in cm/s.
pub const V_MAX_CM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub laser: LaserConfig,
    /// Control period in s.
    pub dt: f64,
    /// Robot radius in m; any beam at or below it is a collision.
    pub robot_radius: f64,
    /// Displacement in m below which the robot counts as stuck.
    pub eps_move: f64,
    /// Time window in s over which the stuck displacement is measured.
    pub blockade_window: f64,
    /// Wall offset in m of the recovery pose after a blockade.
    pub recovery_offset: f64,
    /// Per-lap wall-clock limit in s before the run aborts.
    pub max_lap_time: f64,
    /// Half-width in m of the lap gate around the anchor.
    pub gate_halfwidth: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            laser: LaserConfig::default(),
            dt: CONTROL_PERIOD,
            robot_radius: 0.25,
            eps_move: 0.02,
            blockade_window: 5.0,
            recovery_offset: 0.5,
            max_lap_time: 600.0,
            gate_halfwidth: 1.0,
        }
    }
}

/// Indicators for one completed lap, in the units they are reported in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LapMetrics {
    pub mean_right_dist_cm: f64,
    pub mean_vel_cms: f64,
    pub mean_vel_change_cms: f64,
    pub time_s: f64,
    pub blockades: usize,
}

/// Scalar lap quality in (0, 1]: 1 when the robot holds the reference wall
/// distance at full speed with no blockades, shrinking with the distance and
/// velocity errors and with every blockade.
pub fn quality(m: &LapMetrics) -> f64 {
    1.0 / (1.0
        + (1.0 + m.blockades as f64)
            * (0.9 * (m.mean_right_dist_cm - D_WALL_CM).abs()
                + 0.1 * (m.mean_vel_cms - V_MAX_CM).abs()))
}

/// Mean and sample standard deviation of each indicator over a set of laps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsSummary {
    pub dist_cm: (f64, f64),
    pub vel_cms: (f64, f64),
    pub vel_change_cms: (f64, f64),
    pub time_s: (f64, f64),
    pub blockades: (f64, f64),
    pub quality: (f64, f64),
}

pub fn summarize(laps: &[LapMetrics]) -> Option<MetricsSummary> {
    if laps.is_empty() {
        return None;
    }
    let stat = |f: &dyn Fn(&LapMetrics) -> f64| {
        let n = laps.len() as f64;
        let mean = laps.iter().map(|m| f(m)).sum::<f64>() / n;
        let var = laps.iter().map(|m| (f(m) - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    };
    Some(MetricsSummary {
        dist_cm: stat(&|m| m.mean_right_dist_cm),
        vel_cms: stat(&|m| m.mean_vel_cms),
        vel_change_cms: stat(&|m| m.mean_vel_change_cms),
        time_s: stat(&|m| m.time_s),
        blockades: stat(&|m| m.blockades as f64),
        quality: stat(&|m| quality(m)),
    })
}

/// One control cycle of a run trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
    pub situation: u32,
    pub vlin_cmd: f64,
    pub vang_cmd: f64,
}

/// The three situation-specific control knowledge bases.
#[derive(Debug, Clone, PartialEq)]
pub struct SituationKbs {
    pub straight: KnowledgeBase,
    pub convex: KnowledgeBase,
    pub concave: KnowledgeBase,
}

impl SituationKbs {
    fn for_situation(&self, situation: u32) -> &KnowledgeBase {
        match situation {
            SITUATION_CONVEX => &self.convex,
            SITUATION_CONCAVE => &self.concave,
            _ => &self.straight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub laps: Vec<LapMetrics>,
    pub trace: Vec<TraceRecord>,
    /// Control cycles where no rule fired and the previous command was held.
    pub uncovered_cycles: usize,
    /// `None` when all requested laps finished; otherwise the 1-based lap
    /// that ran out of time. An unfinished lap contributes no metrics.
    pub incomplete_lap: Option<usize>,
}

/// Rolling pose history for stuck detection.
pub struct BlockadeMonitor {
    window: f64,
    eps_move: f64,
    history: VecDeque<(f64, f64, f64)>,
}

impl BlockadeMonitor {
    pub fn new(window: f64, eps_move: f64) -> Self {
        Self { window, eps_move, history: VecDeque::new() }
    }

    pub fn clear(&mut self) {
        self.history.clear();
    }

    /// Records the pose at time `t` and reports whether the robot has moved
    /// less than the threshold over the full window.
    pub fn record(&mut self, t: f64, x: f64, y: f64) -> bool {
        self.history.push_back((t, x, y));
        while self.history.len() >= 2 && self.history[1].0 <= t - self.window {
            self.history.pop_front();
        }
        let (t0, x0, y0) = self.history[0];
        t0 <= t - self.window && (x - x0).hypot(y - y0) < self.eps_move
    }
}

/// Pose placed `offset` meters off the wall nearest to `(x, y)`, heading
/// parallel to that wall with the wall on the robot's right.
pub fn recovery_pose(env: &Environment, x: f64, y: f64, offset: f64) -> Result<Pose, SimError> {
    let (idx, _) = env.nearest_wall(x, y).ok_or(SimError::EmptyEnvironment)?;
    let seg = env.segments[idx];
    let (px, py) = seg.nearest_point(x, y);
    let d = (x - px).hypot(y - py);
    let len = seg.length();
    let (tx, ty) = ((seg.x2 - seg.x1) / len, (seg.y2 - seg.y1) / len);
    let (nx, ny) = if d > 1e-9 {
        ((x - px) / d, (y - py) / d)
    } else {
        (-ty, tx) // embedded on the wall: pick either side
    };
    // Heading whose right-hand vector points back at the wall.
    let (ax, ay) = if tx * ny - ty * nx > 0.0 { (tx, ty) } else { (-tx, -ty) };
    Ok(Pose { x: px + offset * nx, y: py + offset * ny, theta: ay.atan2(ax) })
}

/// Lap gate: a line through the anchor, perpendicular to its heading.
/// Crossing it along the lap direction (within the lateral half-width)
/// counts a lap; the gate re-arms only after the robot approaches from
/// behind again, so jitter on the line cannot double-count.
struct LapGate {
    ux: f64,
    uy: f64,
    ax: f64,
    ay: f64,
    halfwidth: f64,
    armed: bool,
    prev_s: f64,
}

impl LapGate {
    fn new(anchor: &Pose, direction: i32, halfwidth: f64) -> Self {
        let d = direction as f64;
        Self {
            ux: d * anchor.theta.cos(),
            uy: d * anchor.theta.sin(),
            ax: anchor.x,
            ay: anchor.y,
            halfwidth,
            armed: false,
            prev_s: 0.0,
        }
    }

    fn update(&mut self, x: f64, y: f64) -> bool {
        let s = (x - self.ax) * self.ux + (y - self.ay) * self.uy;
        let lateral = ((x - self.ax) * -self.uy + (y - self.ay) * self.ux).abs();
        let mut crossed = false;
        if lateral <= self.halfwidth {
            if self.armed && self.prev_s < 0.0 && s >= 0.0 {
                crossed = true;
                self.armed = false;
            } else if s < -0.3 {
                self.armed = true;
            }
        }
        self.prev_s = s;
        crossed
    }
}

/// Runs the situation-gated wall-following controller for `n_laps` laps.
/// Each cycle: scan, classify the situation, infer with that situation's
/// knowledge base (holding the previous command when no rule fires), step.
/// Blockades teleport the robot to the recovery pose and are counted in the
/// current lap's metrics.
pub fn run_wall_following(
    env: &Environment,
    kbs: &SituationKbs,
    classifier: &KnowledgeBase,
    n_laps: usize,
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    let d_max = classifier.universes.distance.max;
    let mut state = RobotState::at(env.lap_anchor);
    let mut gate = LapGate::new(&env.lap_anchor, env.lap_direction, cfg.gate_halfwidth);
    let mut monitor = BlockadeMonitor::new(cfg.blockade_window, cfg.eps_move);
    let mut report = SimReport {
        laps: Vec::new(),
        trace: Vec::new(),
        uncovered_cycles: 0,
        incomplete_lap: None,
    };
    let mut t = 0.0;
    let mut lap_start = 0.0;
    let mut blockades = 0usize;
    let mut sums = (0.0, 0.0, 0.0); // right dist, vel, vel change (m, m/s)
    let mut cycles = 0usize;
    let mut prev_cmd = (0.0, 0.0);

    while report.laps.len() < n_laps {
        if t - lap_start > cfg.max_lap_time {
            report.incomplete_lap = Some(report.laps.len() + 1);
            break;
        }
        let scan = match raycast(env, &state.pose(), &cfg.laser) {
            Ok(scan) => scan,
            Err(SimError::EmbeddedInWall { .. }) => {
                blockades += 1;
                state = RobotState::at(recovery_pose(env, state.x, state.y, cfg.recovery_offset)?);
                monitor.clear();
                continue;
            }
            Err(e) => return Err(e),
        };
        let collided = scan.iter().any(|&d| d <= cfg.robot_radius);
        let stuck = monitor.record(t, state.x, state.y);
        if collided || stuck {
            blockades += 1;
            state = RobotState::at(recovery_pose(env, state.x, state.y, cfg.recovery_offset)?);
            monitor.clear();
            continue;
        }

        let clamped: Vec<f64> = scan.iter().map(|&d| d.min(d_max)).collect();
        let situation = classifier.classify(&clamped, state.v)?;
        // Infer with the classified situation's knowledge base; when it has
        // no rule for this input (the classifier was trained on the same
        // data, so misrouted inputs often fall outside the chosen base's
        // coverage), fall back to the other bases before holding the
        // previous command.
        let order = [situation, SITUATION_STRAIGHT, SITUATION_CONVEX, SITUATION_CONCAVE];
        let mut cmd = None;
        for s in order {
            match kbs.for_situation(s).infer(&clamped, state.v) {
                Ok(c) => {
                    cmd = Some(c);
                    break;
                }
                Err(ModelError::UncoveredInput) | Err(ModelError::EmptyKnowledgeBase) => {}
                Err(e) => return Err(e.into()),
            }
        }
        let cmd = cmd.unwrap_or_else(|| {
            report.uncovered_cycles += 1;
            prev_cmd
        });
        let prev_v = state.v;
        state = step(&state, cmd.0, cmd.1, cfg.dt);
        t += cfg.dt;
        prev_cmd = cmd;

        sums.0 += right_distance(&scan, &cfg.laser);
        sums.1 += state.v.abs();
        sums.2 += (state.v - prev_v).abs();
        cycles += 1;
        report.trace.push(TraceRecord {
            t,
            x: state.x,
            y: state.y,
            theta: state.theta,
            v: state.v,
            w: state.w,
            situation,
            vlin_cmd: cmd.0,
            vang_cmd: cmd.1,
        });

        if gate.update(state.x, state.y) {
            let n = cycles.max(1) as f64;
            report.laps.push(LapMetrics {
                mean_right_dist_cm: 100.0 * sums.0 / n,
                mean_vel_cms: 100.0 * sums.1 / n,
                mean_vel_change_cms: 100.0 * sums.2 / n,
                time_s: t - lap_start,
                blockades,
            });
            lap_start = t;
            blockades = 0;
            sums = (0.0, 0.0, 0.0);
            cycles = 0;
        }
    }
    Ok(report)
}
