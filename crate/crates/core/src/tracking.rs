//! Nominal trajectory-tracking acceleration with the deadlock escape term.
//!
//! The escape term rotates the tracking error feedback by `g * q` when the
//! robot's avoidance constraints are active. The sign `g` comes from the
//! bearings of the neighbours: all neighbours on the left (non-negative
//! bearings) turns the robot right.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::kinematics::{KinematicMatrices, ReferenceSample};
use crate::types::{wrap_angle, ControlGains, RobotState};

/// Angle of the vector from `p_robot` to `p_obstacle`.
pub fn bearing_angle(p_robot: [f64; 2], p_obstacle: [f64; 2]) -> Result<f64> {
    let x = p_robot[0] - p_obstacle[0];
    let y = p_robot[1] - p_obstacle[1];
    if x == 0.0 && y == 0.0 {
        return Err(Error::CoincidentPoints);
    }
    Ok(wrap_angle((-y).atan2(-x)))
}

/// Escape direction: `-1` (clockwise) when the smallest bearing is
/// non-negative, `+1` otherwise.
pub fn escape_sign(bearings: &[f64]) -> Result<f64> {
    let min = bearings
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, b| {
            Some(acc.map_or(b, |a| a.min(b)))
        })
        .ok_or(Error::NoNeighbours)?;
    Ok(if min >= 0.0 { -1.0 } else { 1.0 })
}

pub fn rotation_q(g: f64, q: f64) -> Matrix3<f64> {
    let (s, c) = (g * q).sin_cos();
    Matrix3::new(
        c, -s, 0.0, //
        s, c, 0.0, //
        0.0, 0.0, 0.0,
    )
}

pub fn zeta(any_multiplier_positive: bool, zeta_gain: f64) -> f64 {
    if any_multiplier_positive {
        zeta_gain
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NominalCommand {
    /// Desired `Gamma * udot`.
    pub dzr: Vector3<f64>,
    /// Pose error with the heading component wrapped.
    pub xi: Vector3<f64>,
    pub zeta_active: bool,
    pub g: f64,
    pub q: Matrix3<f64>,
}

/// Pose error `P - P_d` with the heading difference wrapped to `(-pi, pi]`.
pub fn tracking_error(state: &RobotState, reference: &ReferenceSample) -> Vector3<f64> {
    let p = &state.pose;
    Vector3::new(
        p.x - reference.pose[0],
        p.y - reference.pose[1],
        wrap_angle(p.theta - reference.pose[2]),
    )
}

pub fn nominal_accel(
    state: &RobotState,
    mats: &KinematicMatrices,
    reference: &ReferenceSample,
    gains: &ControlGains,
    zeta: f64,
    g: f64,
) -> NominalCommand {
    let u = Vector2::from(state.u);
    let xi = tracking_error(state, reference);
    let pose_rate_err = mats.gamma * u - reference.rate;
    let q = rotation_q(g, gains.q);
    let surface = pose_rate_err + gains.kappa3 * xi;
    let dzr = reference.accel
        - mats.gamma_dot * u
        - (gains.kappa3 + gains.kappa4) * pose_rate_err
        - gains.kappa3 * gains.kappa4 * xi
        - zeta * (q * surface);
    NominalCommand {
        dzr,
        xi,
        zeta_active: zeta > 0.0,
        g,
        q,
    }
}
