//! Pairwise predictive safety for two robots: the safety matrix, its
//! smallest eigenvalue, the barrier value and the constraint row handed to
//! the QP.

use mrsafe::kinematics::build_kinematics;
use mrsafe::safety::{analyze_pair, future_position, pair_constraint_row};
use mrsafe::types::{ControlGains, Pose, RobotParams, RobotState};

fn main() {
    let params = RobotParams::default();
    let gains = ControlGains::default();
    let a = RobotState {
        pose: Pose::new(0.0, 0.0, 0.0),
        u: [12.0, 12.0],
    };
    let b = RobotState {
        pose: Pose::new(3.0, 0.4, std::f64::consts::PI),
        u: [10.0, 10.0],
    };

    let an = analyze_pair(&a.pose, &b.pose, 0.5, 0.5);
    println!("S = {}", an.s);
    println!("lambda_min(S) = {:.3e}", an.lambda_min);
    let (fa, fb) = (future_position(&a.pose, 0.5), future_position(&b.pose, 0.5));
    println!(
        "D'SD = {:.6}, distance^2 after 0.5 m each = {:.6}",
        an.quadratic_form(),
        (fa[0] - fb[0]).powi(2) + (fa[1] - fb[1]).powi(2)
    );

    let (ma, mb) = (
        build_kinematics(&a.pose, a.u, &params),
        build_kinematics(&b.pose, b.u, &params),
    );
    let rho = 2.0 * params.body_radius;
    let row = pair_constraint_row(&a, &b, &ma, &mb, &gains, rho, 2, 0, 1);
    println!("h = {:.4}", row.h);
    println!("row {:?} <= {:.4}", row.dense(), row.rhs);
    println!("slack at zero acceleration {:.4}", row.slack(&[0.0; 4]));
}
