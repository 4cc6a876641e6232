//! Differential-drive kinematics of the offset control point, the
//! feedback-linearization matrices and reference sampling.
//!
//! Wheel order is `(left, right)`; a faster right wheel turns the robot
//! counter-clockwise.

use nalgebra::{Matrix2, Matrix3x2, Vector2, Vector3};

use crate::types::{wrap_angle, Pose, ReferenceSpec, RobotParams, RobotState};

/// Jacobian from wheel rates to the planar velocity of the control point.
pub fn build_a(pose: &Pose, params: &RobotParams) -> Matrix2<f64> {
    let (s, c) = pose.theta.sin_cos();
    let half = params.wheel_radius / 2.0;
    let lat = params.wheel_radius * params.offset / params.axle_length;
    Matrix2::new(
        half * c + lat * s,
        half * c - lat * s,
        half * s - lat * c,
        half * s + lat * c,
    )
}

/// Derivative of [`build_a`] with respect to the heading.
pub fn build_a_dtheta(pose: &Pose, params: &RobotParams) -> Matrix2<f64> {
    let (s, c) = pose.theta.sin_cos();
    let half = params.wheel_radius / 2.0;
    let lat = params.wheel_radius * params.offset / params.axle_length;
    Matrix2::new(
        -half * s + lat * c,
        -half * s - lat * c,
        half * c + lat * s,
        half * c - lat * s,
    )
}

/// Maps wheel rates to the heading rate.
pub fn build_lambda(params: &RobotParams) -> Vector2<f64> {
    let k = params.wheel_radius / params.axle_length;
    Vector2::new(-k, k)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinematicMatrices {
    pub a: Matrix2<f64>,
    pub lambda: Vector2<f64>,
    /// `[A; lambda^T]`, maps wheel rates to the pose rate.
    pub gamma: Matrix3x2<f64>,
    /// Time derivative of `gamma` along the current motion.
    pub gamma_dot: Matrix3x2<f64>,
}

impl KinematicMatrices {
    /// Top block of `gamma_dot`.
    pub fn a_dot(&self) -> Matrix2<f64> {
        self.gamma_dot.fixed_view::<2, 2>(0, 0).into_owned()
    }

    /// Planar velocity `A u`.
    pub fn velocity(&self, u: [f64; 2]) -> [f64; 2] {
        let v = self.a * Vector2::from(u);
        [v[0], v[1]]
    }
}

pub fn build_kinematics(pose: &Pose, u: [f64; 2], params: &RobotParams) -> KinematicMatrices {
    let a = build_a(pose, params);
    let lambda = build_lambda(params);
    let theta_dot = lambda.dot(&Vector2::from(u));
    let a_dot = build_a_dtheta(pose, params) * theta_dot;

    let mut gamma = Matrix3x2::zeros();
    gamma.fixed_view_mut::<2, 2>(0, 0).copy_from(&a);
    gamma[(2, 0)] = lambda[0];
    gamma[(2, 1)] = lambda[1];

    let mut gamma_dot = Matrix3x2::zeros();
    gamma_dot.fixed_view_mut::<2, 2>(0, 0).copy_from(&a_dot);

    KinematicMatrices {
        a,
        lambda,
        gamma,
        gamma_dot,
    }
}

/// Translational and angular velocity of the axle midpoint.
pub fn unicycle_rates(u: [f64; 2], params: &RobotParams) -> (f64, f64) {
    let r = params.wheel_radius;
    (
        r * (u[0] + u[1]) / 2.0,
        r * (u[1] - u[0]) / params.axle_length,
    )
}

/// One explicit Euler step: wheel rates first, then the pose with the
/// updated rates.
pub fn step(
    state: &RobotState,
    u_dot: [f64; 2],
    dt: f64,
    params: &RobotParams,
    u_bounds: Option<(f64, f64)>,
) -> RobotState {
    let mut u = [state.u[0] + u_dot[0] * dt, state.u[1] + u_dot[1] * dt];
    if let Some((lo, hi)) = u_bounds {
        u = [u[0].clamp(lo, hi), u[1].clamp(lo, hi)];
    }
    let a = build_a(&state.pose, params);
    let v = a * Vector2::from(u);
    let theta_dot = build_lambda(params).dot(&Vector2::from(u));
    RobotState {
        pose: Pose::new(
            state.pose.x + v[0] * dt,
            state.pose.y + v[1] * dt,
            state.pose.theta + theta_dot * dt,
        ),
        u,
    }
}

/// Desired pose, pose rate and pose acceleration at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSample {
    pub pose: Vector3<f64>,
    pub rate: Vector3<f64>,
    pub accel: Vector3<f64>,
}

impl ReferenceSample {
    pub fn position(&self) -> [f64; 2] {
        [self.pose[0], self.pose[1]]
    }
}

/// Samples a constant-speed reference. After `duration` the sample holds at
/// the goal with zero rate.
pub fn reference_at(spec: &ReferenceSpec, t: f64) -> ReferenceSample {
    let verts = spec.vertices();
    let total = spec.length();
    let zero = Vector3::zeros();
    if total == 0.0 {
        let s = verts[0];
        return ReferenceSample {
            pose: Vector3::new(s[0], s[1], spec.start.theta),
            rate: zero,
            accel: zero,
        };
    }
    let moving = t <= spec.duration;
    let frac = (t.max(0.0) / spec.duration).min(1.0);
    let speed = total / spec.duration;

    // single segment: interpolate directly so midpoints are exact
    if verts.len() == 2 {
        let (s, g) = (verts[0], verts[1]);
        let d = [g[0] - s[0], g[1] - s[1]];
        let heading = d[1].atan2(d[0]);
        let rate = if moving {
            Vector3::new(d[0] / spec.duration, d[1] / spec.duration, 0.0)
        } else {
            zero
        };
        return ReferenceSample {
            pose: Vector3::new(s[0] + d[0] * frac, s[1] + d[1] * frac, heading),
            rate,
            accel: zero,
        };
    }

    let mut remaining = frac * total;
    let mut last = (verts[0], verts[1]);
    for w in verts.windows(2) {
        let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        if len == 0.0 {
            continue;
        }
        last = (w[0], w[1]);
        if remaining <= len {
            break;
        }
        remaining -= len;
    }
    let (a, b) = last;
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let dir = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
    let along = remaining.min(len);
    let rate = if moving {
        Vector3::new(dir[0] * speed, dir[1] * speed, 0.0)
    } else {
        zero
    };
    ReferenceSample {
        pose: Vector3::new(
            a[0] + dir[0] * along,
            a[1] + dir[1] * along,
            wrap_angle(dir[1].atan2(dir[0])),
        ),
        rate,
        accel: zero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ReferencePath;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params() -> RobotParams {
        RobotParams::default()
    }

    #[test]
    fn a_at_zero_heading() {
        let a = build_a(&Pose::new(0.0, 0.0, 0.0), &params());
        let expect = Matrix2::new(0.0165, 0.0165, -0.0165, 0.0165);
        assert_abs_diff_eq!(a, expect, epsilon = 1e-15);
    }

    #[test]
    fn a_at_quarter_turn() {
        // cos = 0 leaves only the offset terms: (+rd/L, -rd/L) on the x row
        let a = build_a(&Pose::new(0.0, 0.0, FRAC_PI_2), &params());
        let expect = Matrix2::new(0.0165, -0.0165, 0.0165, 0.0165);
        assert_abs_diff_eq!(a, expect, epsilon = 1e-15);
    }

    #[test]
    fn a_determinant_vanishes_with_offset() {
        for d in [0.08, 1e-3, 1e-6, 0.0] {
            let p = RobotParams {
                offset: d,
                ..params()
            };
            let det = build_a(&Pose::new(0.0, 0.0, 0.7), &p).determinant();
            let expect = p.wheel_radius.powi(2) * d / p.axle_length;
            assert_abs_diff_eq!(det, expect, epsilon = 1e-15);
        }
    }

    #[test]
    fn gamma_dot_zero_without_rotation() {
        let pose = Pose::new(1.0, 2.0, 0.4);
        for u in [[0.0, 0.0], [3.0, 3.0], [-1.5, -1.5]] {
            let m = build_kinematics(&pose, u, &params());
            assert_eq!(m.gamma_dot, Matrix3x2::zeros());
        }
    }

    #[test]
    fn gamma_dot_matches_finite_difference_of_a() {
        let p = params();
        let c = 2.0;
        let u = [-c, c];
        let pose = Pose::new(0.0, 0.0, 0.9);
        let m = build_kinematics(&pose, u, &p);
        let theta_dot = m.lambda.dot(&Vector2::from(u));
        assert_abs_diff_eq!(
            theta_dot,
            2.0 * p.wheel_radius * c / p.axle_length,
            epsilon = 1e-15
        );

        let h = 1e-6;
        let fd = (build_a(&Pose::new(0.0, 0.0, 0.9 + h), &p)
            - build_a(&Pose::new(0.0, 0.0, 0.9 - h), &p))
            / (2.0 * h)
            * theta_dot;
        assert_abs_diff_eq!(m.a_dot(), fd, epsilon = 1e-9);
        assert_eq!(m.gamma_dot.row(2).norm(), 0.0);
    }

    #[test]
    fn unicycle_examples() {
        let p = params();
        let (v, w) = unicycle_rates([1.0, 1.0], &p);
        assert_abs_diff_eq!(v, 0.033, epsilon = 1e-15);
        assert_eq!(w, 0.0);
        let (v, w) = unicycle_rates([-1.0, 1.0], &p);
        assert_eq!(v, 0.0);
        assert_abs_diff_eq!(w, 0.4125, epsilon = 1e-15);
        assert_eq!(unicycle_rates([0.0, 0.0], &p), (0.0, 0.0));
    }

    #[test]
    fn step_at_rest_is_equilibrium() {
        let s = RobotState::at_rest(Pose::new(1.0, -2.0, 0.3));
        assert_eq!(step(&s, [0.0, 0.0], 0.01, &params(), None), s);
    }

    #[test]
    fn step_straight_line() {
        let s = RobotState {
            pose: Pose::new(0.0, 0.0, 0.0),
            u: [1.0, 1.0],
        };
        let n = step(&s, [0.0, 0.0], 1.0, &params(), None);
        assert_abs_diff_eq!(n.pose.x, 0.033, epsilon = 1e-15);
        assert_eq!(n.pose.y, 0.0);
        assert_eq!(n.pose.theta, 0.0);
    }

    #[test]
    fn step_rates_reverse_exactly() {
        let s = RobotState {
            pose: Pose::new(0.5, 0.5, 1.0),
            u: [0.25, -0.75],
        };
        let a = step(&s, [2.0, -4.0], 0.125, &params(), None);
        let b = step(&a, [-2.0, 4.0], 0.125, &params(), None);
        assert_eq!(b.u, s.u);
    }

    #[test]
    fn step_clamps_wheel_rates() {
        let s = RobotState::at_rest(Pose::new(0.0, 0.0, 0.0));
        let n = step(&s, [100.0, -100.0], 1.0, &params(), Some((-5.0, 5.0)));
        assert_eq!(n.u, [5.0, -5.0]);
    }

    #[test]
    fn straight_reference_samples() {
        let r = ReferenceSpec::straight(Pose::new(0.0, 0.0, 0.0), [8.0, 0.0], 16.0);
        let mid = reference_at(&r, 8.0);
        assert_eq!(mid.pose, Vector3::new(4.0, 0.0, 0.0));
        assert_eq!(mid.rate, Vector3::new(0.5, 0.0, 0.0));
        assert_eq!(mid.accel, Vector3::zeros());
        assert_eq!(reference_at(&r, 0.0).pose, Vector3::new(0.0, 0.0, 0.0));
        let after = reference_at(&r, 32.0);
        assert_eq!(after.pose, Vector3::new(8.0, 0.0, 0.0));
        assert_eq!(after.rate, Vector3::zeros());
    }

    #[test]
    fn waypoint_reference_follows_segments() {
        let r = ReferenceSpec {
            path: ReferencePath::Waypoints {
                points: vec![[3.0, 0.0], [3.0, 4.0]],
            },
            start: Pose::new(0.0, 0.0, 0.0),
            duration: 7.0,
        };
        let s = reference_at(&r, 5.0);
        assert_abs_diff_eq!(s.pose, Vector3::new(3.0, 2.0, FRAC_PI_2), epsilon = 1e-12);
        assert_abs_diff_eq!(s.rate, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-12);
        let s = reference_at(&r, 1.0);
        assert_abs_diff_eq!(s.pose, Vector3::new(1.0, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_reference_keeps_start_heading() {
        let r = ReferenceSpec::straight(Pose::new(1.0, 1.0, PI / 3.0), [1.0, 1.0], 4.0);
        let s = reference_at(&r, 2.0);
        assert_eq!(s.pose, Vector3::new(1.0, 1.0, PI / 3.0));
        assert_eq!(s.rate, Vector3::zeros());
    }
}
