//! Predictive pairwise safety: the safety matrix and its smallest
//! eigenvalue, the barrier function, and the linear constraint rows over
//! the stacked wheel accelerations.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;

use crate::error::{Error, Result};
use crate::kinematics::KinematicMatrices;
use crate::types::{ControlGains, Obstacle, Pose, RobotState};

/// Position after moving `delta` meters along the current heading.
pub fn future_position(pose: &Pose, delta: f64) -> [f64; 2] {
    let (s, c) = pose.theta.sin_cos();
    [pose.x + c * delta, pose.y + s * delta]
}

/// Safety matrix for headings `theta_i`, `theta_j` and bearing `beta_ij`
/// (the direction from robot `i` towards robot `j`).
pub fn safety_matrix(theta_i: f64, theta_j: f64, beta_ij: f64) -> Matrix3<f64> {
    let cij = (theta_i - theta_j).cos();
    let ci = (beta_ij - theta_i).cos();
    let cj = (beta_ij - theta_j).cos();
    Matrix3::new(
        1.0, -cij, -ci, //
        -cij, 1.0, cj, //
        -ci, cj, 1.0,
    )
}

const SYMMETRY_TOL: f64 = 1e-12;

/// Smallest eigenvalue of a symmetric 3x3 matrix.
///
/// Trigonometric solution of the characteristic cubic, followed by Newton
/// polishing on the same cubic to recover accuracy near repeated roots.
pub fn smallest_eigenvalue(s: &Matrix3<f64>) -> Result<f64> {
    let asym = (s - s.transpose()).abs().max();
    if asym.is_nan() || asym > SYMMETRY_TOL {
        return Err(Error::Asymmetric(asym));
    }
    let (a00, a11, a22) = (s[(0, 0)], s[(1, 1)], s[(2, 2)]);
    let a01 = 0.5 * (s[(0, 1)] + s[(1, 0)]);
    let a02 = 0.5 * (s[(0, 2)] + s[(2, 0)]);
    let a12 = 0.5 * (s[(1, 2)] + s[(2, 1)]);

    let off = a01 * a01 + a02 * a02 + a12 * a12;
    if off == 0.0 {
        return Ok(a00.min(a11).min(a22));
    }
    let q = (a00 + a11 + a22) / 3.0;
    let (b00, b11, b22) = (a00 - q, a11 - q, a22 - q);
    let p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * off;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return Ok(q);
    }
    // det((A - qI) / p) / 2
    let det_b = b00 * (b11 * b22 - a12 * a12) - a01 * (a01 * b22 - a12 * a02)
        + a02 * (a01 * a12 - b11 * a02);
    let r = (det_b / (p * p * p) / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let mut lambda = q + 2.0 * p * (phi + 2.0 * PI / 3.0).cos();

    // characteristic polynomial c(x) = det(A - xI) = -x^3 + c2 x^2 - c1 x + c0
    let c2 = a00 + a11 + a22;
    let c1 = a00 * a11 + a00 * a22 + a11 * a22 - a01 * a01 - a02 * a02 - a12 * a12;
    let c0 = a00 * (a11 * a22 - a12 * a12) - a01 * (a01 * a22 - a12 * a02)
        + a02 * (a01 * a12 - a11 * a02);
    let poly = |x: f64| ((-x + c2) * x - c1) * x + c0;
    let deriv = |x: f64| (-3.0 * x + 2.0 * c2) * x - c1;
    for _ in 0..3 {
        let f = poly(lambda);
        let d = deriv(lambda);
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let next = lambda - f / d;
        if (next - lambda).abs() > 1e-6 * p || poly(next).abs() > f.abs() {
            break;
        }
        lambda = next;
    }
    Ok(lambda)
}

/// Pairwise predictive-safety quantities for a look-ahead of `delta_i`,
/// `delta_j` meters along the current headings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyAnalysis {
    pub s: Matrix3<f64>,
    pub lambda_min: f64,
    /// `[delta_i, delta_j, |p_ij|]`.
    pub d: Vector3<f64>,
}

impl SafetyAnalysis {
    /// `D^T S D`, the squared predicted separation.
    pub fn quadratic_form(&self) -> f64 {
        self.d.dot(&(self.s * self.d))
    }
}

pub fn analyze_pair(pose_i: &Pose, pose_j: &Pose, delta_i: f64, delta_j: f64) -> SafetyAnalysis {
    let dx = pose_j.x - pose_i.x;
    let dy = pose_j.y - pose_i.y;
    let beta = dy.atan2(dx);
    let s = safety_matrix(pose_i.theta, pose_j.theta, beta);
    let lambda_min = smallest_eigenvalue(&s).expect("safety matrix is symmetric by construction");
    SafetyAnalysis {
        s,
        lambda_min,
        d: Vector3::new(delta_i, delta_j, dx.hypot(dy)),
    }
}

/// `lambda |p_ij|^2 >= rho^2`.
pub fn predictive_safe(lambda: f64, p_ij: [f64; 2], rho: f64) -> bool {
    lambda * (p_ij[0] * p_ij[0] + p_ij[1] * p_ij[1]) >= rho * rho
}

/// `h = 2 lambda p.v + kappa1 (lambda |p|^2 - rho^2)`.
pub fn barrier_value(lambda: f64, p_ij: [f64; 2], v_ij: [f64; 2], kappa1: f64, rho: f64) -> f64 {
    let pv = p_ij[0] * v_ij[0] + p_ij[1] * v_ij[1];
    let pp = p_ij[0] * p_ij[0] + p_ij[1] * p_ij[1];
    2.0 * lambda * pv + kappa1 * (lambda * pp - rho * rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PairId {
    Robots(usize, usize),
    Obstacle { robot: usize, obstacle: usize },
}

impl PairId {
    pub fn involves(&self, robot: usize) -> bool {
        match *self {
            PairId::Robots(i, j) => i == robot || j == robot,
            PairId::Obstacle { robot: r, .. } => r == robot,
        }
    }
}

/// One inequality `coeffs . udot <= rhs` over the stacked wheel
/// accelerations of all `n_robots` robots.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintRow {
    /// Non-zero 2-blocks as `(robot, [left, right])`.
    pub blocks: Vec<(usize, [f64; 2])>,
    pub n_robots: usize,
    pub rhs: f64,
    pub pair: PairId,
    /// Barrier value at the state the row was built from.
    pub h: f64,
}

impl ConstraintRow {
    pub fn dense(&self) -> Vec<f64> {
        let mut a = vec![0.0; 2 * self.n_robots];
        for &(r, c) in &self.blocks {
            a[2 * r] = c[0];
            a[2 * r + 1] = c[1];
        }
        a
    }

    pub fn block(&self, robot: usize) -> Option<[f64; 2]> {
        self.blocks
            .iter()
            .find(|(r, _)| *r == robot)
            .map(|(_, c)| *c)
    }

    /// `rhs - coeffs . udot`, non-negative when satisfied.
    pub fn slack(&self, udot: &[f64]) -> f64 {
        let lhs: f64 = self
            .blocks
            .iter()
            .map(|&(r, c)| c[0] * udot[2 * r] + c[1] * udot[2 * r + 1])
            .sum();
        self.rhs - lhs
    }
}

fn v2(a: [f64; 2]) -> Vector2<f64> {
    Vector2::from(a)
}

/// Robot-robot constraint keeping `h_ij` forward invariant.
#[allow(clippy::too_many_arguments)]
pub fn pair_constraint_row(
    state_i: &RobotState,
    state_j: &RobotState,
    mats_i: &KinematicMatrices,
    mats_j: &KinematicMatrices,
    gains: &ControlGains,
    rho: f64,
    n_robots: usize,
    i: usize,
    j: usize,
) -> ConstraintRow {
    let lambda = gains.lambda;
    let p = v2(state_i.pose.position()) - v2(state_j.pose.position());
    let ui = v2(state_i.u);
    let uj = v2(state_j.u);
    let v = mats_i.a * ui - mats_j.a * uj;
    let drift = mats_i.a_dot() * ui - mats_j.a_dot() * uj;

    let gi = -2.0 * lambda * (p.transpose() * mats_i.a);
    let gj = 2.0 * lambda * (p.transpose() * mats_j.a);
    let rhs = 2.0
        * lambda
        * (v.norm_squared() + p.dot(&drift) + (gains.kappa1 + gains.kappa2) * p.dot(&v))
        + gains.kappa1 * gains.kappa2 * (lambda * p.norm_squared() - rho * rho);
    ConstraintRow {
        blocks: vec![(i, [gi[0], gi[1]]), (j, [gj[0], gj[1]])],
        n_robots,
        rhs,
        pair: PairId::Robots(i, j),
        h: barrier_value(lambda, [p[0], p[1]], [v[0], v[1]], gains.kappa1, rho),
    }
}

/// Robot-obstacle constraint; the obstacle is an uncontrolled agent with
/// constant velocity, so the robot carries the whole avoidance.
#[allow(clippy::too_many_arguments)]
pub fn obstacle_constraint_row(
    state_i: &RobotState,
    mats_i: &KinematicMatrices,
    obstacle: &Obstacle,
    gains: &ControlGains,
    rho: f64,
    n_robots: usize,
    i: usize,
    k: usize,
) -> ConstraintRow {
    let lambda = gains.lambda;
    let p = v2(state_i.pose.position()) - v2(obstacle.position);
    let ui = v2(state_i.u);
    let v = mats_i.a * ui - v2(obstacle.velocity);
    let drift = mats_i.a_dot() * ui;

    let gi = -2.0 * lambda * (p.transpose() * mats_i.a);
    let rhs = 2.0
        * lambda
        * (v.norm_squared() + p.dot(&drift) + (gains.kappa1 + gains.kappa2) * p.dot(&v))
        + gains.kappa1 * gains.kappa2 * (lambda * p.norm_squared() - rho * rho);
    ConstraintRow {
        blocks: vec![(i, [gi[0], gi[1]])],
        n_robots,
        rhs,
        pair: PairId::Obstacle {
            robot: i,
            obstacle: k,
        },
        h: barrier_value(lambda, [p[0], p[1]], [v[0], v[1]], gains.kappa1, rho),
    }
}

/// Adds an error drawn uniformly from the closed disk of radius `r_m`.
pub fn perturb_measurement<R: Rng + ?Sized>(position: [f64; 2], r_m: f64, rng: &mut R) -> [f64; 2] {
    if r_m <= 0.0 {
        return position;
    }
    let radius = r_m * rng.random::<f64>().sqrt();
    let angle = 2.0 * PI * rng.random::<f64>();
    let (s, c) = angle.sin_cos();
    // clamp guards the rounding of radius * (c, s) past r_m
    let e = [radius * c, radius * s];
    let n = e[0].hypot(e[1]);
    let scale = if n > r_m { r_m / n } else { 1.0 };
    [position[0] + e[0] * scale, position[1] + e[1] * scale]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::build_kinematics;
    use crate::types::RobotParams;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn future_position_examples() {
        assert_eq!(future_position(&Pose::new(0.0, 0.0, 0.0), 1.0), [1.0, 0.0]);
        let p = future_position(&Pose::new(1.0, 1.0, PI), 2.0);
        assert_abs_diff_eq!(p[0], -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p[1], 1.0, epsilon = 1e-15);
        assert_eq!(
            future_position(&Pose::new(3.0, -2.0, 1.1), 0.0),
            [3.0, -2.0]
        );
    }

    #[test]
    fn safety_matrix_parallel_headings() {
        let s = safety_matrix(0.0, 0.0, FRAC_PI_2);
        let expect = Matrix3::new(1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(s, expect, epsilon = 1e-15);
    }

    #[test]
    fn safety_matrix_crossing_headings() {
        // theta_ij = -pi/2 and rho_i = pi/2 vanish, rho_j = 0 does not
        let s = safety_matrix(0.0, FRAC_PI_2, FRAC_PI_2);
        let expect = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0);
        assert_abs_diff_eq!(s, expect, epsilon = 1e-15);
    }

    #[test]
    fn safety_matrix_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let s = safety_matrix(
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
                rng.random_range(-PI..PI),
            );
            assert_eq!(s, s.transpose());
            for k in 0..3 {
                assert_eq!(s[(k, k)], 1.0);
            }
            assert!(s.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn eigenvalue_examples() {
        assert_eq!(smallest_eigenvalue(&Matrix3::identity()).unwrap(), 1.0);
        let s = Matrix3::new(1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert_abs_diff_eq!(smallest_eigenvalue(&s).unwrap(), 0.0, epsilon = 1e-15);
        let d = Matrix3::from_diagonal(&Vector3::new(3.0, -2.0, 5.0));
        assert_eq!(smallest_eigenvalue(&d).unwrap(), -2.0);
        let c = Matrix3::from_element(0.0) + Matrix3::identity() * 4.0;
        assert_eq!(smallest_eigenvalue(&c).unwrap(), 4.0);
    }

    #[test]
    fn eigenvalue_rejects_asymmetry() {
        let mut s = Matrix3::identity();
        s[(0, 1)] = 1e-6;
        assert!(matches!(smallest_eigenvalue(&s), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn eigenvalue_matches_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            let s = (m + m.transpose()) * 0.5;
            let reference = s.symmetric_eigenvalues().min();
            assert_abs_diff_eq!(smallest_eigenvalue(&s).unwrap(), reference, epsilon = 1e-10);
        }
    }

    #[test]
    fn predictive_safe_examples() {
        assert!(predictive_safe(0.5, [2.0, 0.0], 0.96));
        assert!(predictive_safe(1.0, [0.96, 0.0], 0.96));
        assert!(!predictive_safe(0.5, [0.96, 0.0], 0.96));
    }

    #[test]
    fn barrier_examples() {
        assert_abs_diff_eq!(
            barrier_value(0.5, [2.0, 0.0], [-1.0, 0.0], 1.0, 0.96),
            -0.9216,
            epsilon = 1e-12
        );
        let rho = 2.0f64.sqrt() * 0.5;
        assert_abs_diff_eq!(
            barrier_value(0.5, [1.0, 0.0], [0.0, 0.0], 1.0, rho),
            0.0,
            epsilon = 1e-15
        );
        let h = barrier_value(0.5, [1.0, 2.0], [-2.0, 1.0], 3.0, 0.4);
        assert_abs_diff_eq!(h, 3.0 * (0.5 * 5.0 - 0.16), epsilon = 1e-12);
    }

    fn at(x: f64, y: f64, theta: f64, u: [f64; 2]) -> RobotState {
        RobotState {
            pose: Pose::new(x, y, theta),
            u,
        }
    }

    #[test]
    fn pair_row_at_rest() {
        let p = RobotParams::default();
        let g = ControlGains::default();
        let si = at(0.0, 0.0, 0.0, [0.0; 2]);
        let sj = at(2.0, 0.0, 0.0, [0.0; 2]);
        let mi = build_kinematics(&si.pose, si.u, &p);
        let mj = build_kinematics(&sj.pose, sj.u, &p);
        let row = pair_constraint_row(&si, &sj, &mi, &mj, &g, 0.96, 2, 0, 1);
        assert_abs_diff_eq!(row.rhs, 8.6272, epsilon = 1e-12);
        let bi = row.block(0).unwrap();
        let bj = row.block(1).unwrap();
        assert_abs_diff_eq!(bi[0], 0.033, epsilon = 1e-15);
        assert_abs_diff_eq!(bi[1], 0.033, epsilon = 1e-15);
        assert_abs_diff_eq!(bj[0], -0.033, epsilon = 1e-15);
        assert_abs_diff_eq!(bj[1], -0.033, epsilon = 1e-15);
        assert_eq!(row.dense().len(), 4);
    }

    #[test]
    fn pair_row_swap_symmetry() {
        let p = RobotParams::default();
        let g = ControlGains::default();
        let si = at(0.3, -0.2, 0.4, [3.0, 5.0]);
        let sj = at(1.9, 0.7, -2.0, [-1.0, 4.0]);
        let mi = build_kinematics(&si.pose, si.u, &p);
        let mj = build_kinematics(&sj.pose, sj.u, &p);
        let a = pair_constraint_row(&si, &sj, &mi, &mj, &g, 0.4, 2, 0, 1);
        let b = pair_constraint_row(&sj, &si, &mj, &mi, &g, 0.4, 2, 1, 0);
        assert_abs_diff_eq!(a.rhs, b.rhs, epsilon = 1e-12);
        for r in 0..2 {
            let (x, y) = (a.block(r).unwrap(), b.block(r).unwrap());
            assert_abs_diff_eq!(x[0], y[0], epsilon = 1e-15);
            assert_abs_diff_eq!(x[1], y[1], epsilon = 1e-15);
        }
    }

    #[test]
    fn pair_row_boundary_is_active() {
        let p = RobotParams::default();
        let g = ControlGains::default();
        let rho = (g.lambda * 4.0f64).sqrt();
        let si = at(0.0, 0.0, 0.0, [0.0; 2]);
        let sj = at(2.0, 0.0, 1.0, [0.0; 2]);
        let mi = build_kinematics(&si.pose, si.u, &p);
        let mj = build_kinematics(&sj.pose, sj.u, &p);
        let row = pair_constraint_row(&si, &sj, &mi, &mj, &g, rho, 2, 0, 1);
        assert_abs_diff_eq!(row.rhs, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(row.h, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn obstacle_row_static_at_rest() {
        let p = RobotParams::default();
        let g = ControlGains::default();
        let s = at(0.0, 0.0, 0.3, [0.0; 2]);
        let m = build_kinematics(&s.pose, s.u, &p);
        let o = Obstacle {
            position: [1.5, 1.0],
            velocity: [0.0, 0.0],
            radius: 0.3,
        };
        let row = obstacle_constraint_row(&s, &m, &o, &g, 0.5, 1, 0, 0);
        assert_abs_diff_eq!(row.rhs, 8.0 * (0.5 * 3.25 - 0.25), epsilon = 1e-12);
        assert_eq!(row.blocks.len(), 1);
    }

    #[test]
    fn obstacle_row_comoving_reduces_to_static() {
        let p = RobotParams::default();
        let g = ControlGains::default();
        let s = at(0.0, 0.0, 0.0, [10.0, 10.0]);
        let m = build_kinematics(&s.pose, s.u, &p);
        let v = m.velocity(s.u);
        let o = Obstacle {
            position: [2.0, 0.0],
            velocity: v,
            radius: 0.3,
        };
        let row = obstacle_constraint_row(&s, &m, &o, &g, 0.5, 1, 0, 0);
        assert_abs_diff_eq!(row.rhs, 8.0 * (0.5 * 4.0 - 0.25), epsilon = 1e-12);
    }

    #[test]
    fn obstacle_row_moving_obstacle() {
        // robot at rest, obstacle drifting with (-0.3, -0.2)
        let p = RobotParams::default();
        let g = ControlGains::default();
        let s = at(0.0, 0.0, 0.0, [0.0; 2]);
        let m = build_kinematics(&s.pose, s.u, &p);
        let o = Obstacle {
            position: [2.0, 1.0],
            velocity: [-0.3, -0.2],
            radius: 0.3,
        };
        let row = obstacle_constraint_row(&s, &m, &o, &g, 0.5, 1, 0, 0);
        // independent evaluation: p = (-2,-1), v = (0.3, 0.2)
        let vv = 0.09 + 0.04;
        let pv = -0.6 - 0.2;
        let expect = 2.0 * 0.5 * (vv + 9.0 * pv) + 8.0 * (0.5 * 5.0 - 0.25);
        assert_abs_diff_eq!(row.rhs, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(row.rhs, 10.93, epsilon = 1e-12);
    }

    #[test]
    fn perturbation_bounds_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(perturb_measurement([1.0, 2.0], 0.0, &mut rng), [1.0, 2.0]);
        for seed in 0..50 {
            let mut a = ChaCha8Rng::seed_from_u64(seed);
            let mut b = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let x = perturb_measurement([1.0, 2.0], 0.15, &mut a);
                let y = perturb_measurement([1.0, 2.0], 0.15, &mut b);
                assert_eq!(x, y);
                assert!((x[0] - 1.0).hypot(x[1] - 2.0) <= 0.15);
            }
        }
    }
}
