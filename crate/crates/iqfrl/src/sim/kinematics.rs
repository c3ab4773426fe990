//! Exact-arc unicycle kinematics with clamped commands.

use super::env::Pose;

/// Maximum linear velocity magnitude in m/s.
pub const V_MAX: f64 = 0.5;
/// Maximum angular velocity magnitude in rad/s.
pub const W_MAX: f64 = std::f64::consts::FRAC_PI_4;
/// Default control period in seconds.
pub const CONTROL_PERIOD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub w: f64,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        Self { x: pose.x, y: pose.y, theta: pose.theta, v: 0.0, w: 0.0 }
    }

    pub fn pose(&self) -> Pose {
        Pose { x: self.x, y: self.y, theta: self.theta }
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut a = a.rem_euclid(std::f64::consts::TAU);
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}

/// Advances the robot one control period under commanded velocities, clamped
/// to the platform limits, along an exact circular arc.
pub fn step(state: &RobotState, vlin: f64, vang: f64, dt: f64) -> RobotState {
    assert!(dt > 0.0, "control period must be positive");
    let v = vlin.clamp(-V_MAX, V_MAX);
    let w = vang.clamp(-W_MAX, W_MAX);
    let (x, y, theta) = if w.abs() < 1e-12 {
        (state.x + v * dt * state.theta.cos(), state.y + v * dt * state.theta.sin(), state.theta)
    } else {
        let r = v / w;
        (
            state.x + r * ((state.theta + w * dt).sin() - state.theta.sin()),
            state.y - r * ((state.theta + w * dt).cos() - state.theta.cos()),
            state.theta + w * dt,
        )
    };
    RobotState { x, y, theta: wrap_angle(theta), v, w }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> RobotState {
        RobotState { x: 0.3, y: -0.2, theta: 0.7, v: 0.0, w: 0.0 }
    }

    #[test]
    fn straight_motion_advances_along_heading() {
        let s = step(&RobotState { x: 0.0, y: 0.0, theta: 0.0, v: 0.0, w: 0.0 }, 0.5, 0.0, 1.0);
        assert!((s.x - 0.5).abs() < 1e-12);
        assert!(s.y.abs() < 1e-12);
    }

    #[test]
    fn pure_rotation_spins_in_place() {
        let s = step(&RobotState { x: 1.0, y: 2.0, theta: 0.0, v: 0.0, w: 0.0 }, 0.0, W_MAX, 1.0);
        assert!((s.theta - W_MAX).abs() < 1e-12);
        assert_eq!((s.x, s.y), (1.0, 2.0));
    }

    #[test]
    fn zero_command_conserves_pose() {
        let s0 = start();
        let s = step(&s0, 0.0, 0.0, 0.1);
        assert_eq!((s.x, s.y, s.theta), (s0.x, s0.y, s0.theta));
    }

    #[test]
    fn commands_are_clamped() {
        let s = step(&start(), 9.0, -9.0, 0.1);
        assert_eq!(s.v, V_MAX);
        assert_eq!(s.w, -W_MAX);
    }

    /// Runge-Kutta integration of the unicycle ODE with 10^4 substeps.
    fn fine_integration(s0: &RobotState, v: f64, w: f64, dt: f64) -> (f64, f64, f64) {
        let n = 10_000;
        let h = dt / n as f64;
        let (mut x, mut y, mut theta) = (s0.x, s0.y, s0.theta);
        for _ in 0..n {
            // theta evolves linearly, so the stage headings are exact.
            let k1 = (v * theta.cos(), v * theta.sin());
            let tm = theta + w * h / 2.0;
            let k2 = (v * tm.cos(), v * tm.sin());
            let te = theta + w * h;
            let k4 = (v * te.cos(), v * te.sin());
            x += h / 6.0 * (k1.0 + 4.0 * k2.0 + k4.0);
            y += h / 6.0 * (k1.1 + 4.0 * k2.1 + k4.1);
            theta = te;
        }
        (x, y, theta)
    }

    #[test]
    fn arc_matches_fine_integration() {
        for (v, w, dt) in [(0.5, W_MAX, 0.1), (0.3, -0.5, 1.0), (0.1, 0.01, 2.0)] {
            let s0 = start();
            let s = step(&s0, v, w, dt);
            let (x, y, theta) = fine_integration(&s0, v, w, dt);
            assert!((s.x - x).abs() < 1e-9, "x: {} vs {}", s.x, x);
            assert!((s.y - y).abs() < 1e-9, "y: {} vs {}", s.y, y);
            assert!((s.theta - wrap_angle(theta)).abs() < 1e-9);
        }
    }

    #[test]
    fn wrap_angle_stays_in_range() {
        for k in -20..20 {
            let a = wrap_angle(0.3 + k as f64 * 1.7);
            assert!(a > -std::f64::consts::PI && a <= std::f64::consts::PI);
        }
    }
}
