//! Scalar evaluation of a finished run: tracking error statistics,
//! intervention time, clearance and speed smoothness.

use std::fmt;

use serde::Serialize;

use crate::kinematics::{build_kinematics, reference_at};
use crate::sim::{audit_collisions, RobotRecord, SimLog};
use crate::types::{RobotParams, ScenarioSpec};

/// Distance to the goal that counts as arrived.
pub const GOAL_TOLERANCE: f64 = 0.15;
/// Speeds before this time are excluded from the minimum speed.
pub const SPEED_WARMUP: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RobotMetrics {
    pub robot: usize,
    pub rmse: f64,
    pub mae: f64,
    pub std_dev: f64,
    pub intervention_time: f64,
    /// First time after which the robot stays within the goal tolerance.
    pub goal_reach_time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub robots: Vec<RobotMetrics>,
    /// Smallest `distance - rho` over all steps and pairs.
    pub min_clearance: f64,
    pub min_speed_after_start: f64,
    pub velocity_total_variation: f64,
    pub goals_reached: usize,
    pub collisions: usize,
    pub fallback_steps: usize,
    pub min_h: f64,
}

/// Speed of the control point.
pub fn robot_speed(r: &RobotRecord, params: &RobotParams) -> f64 {
    let v = build_kinematics(&r.pose, r.u, params).velocity(r.u);
    v[0].hypot(v[1])
}

/// RMSE, MAE and population standard deviation of the planar tracking
/// error over the reference duration.
pub fn tracking_stats(log: &SimLog, spec: &ScenarioSpec, robot: usize) -> (f64, f64, f64) {
    let duration = spec.robots[robot].reference.duration;
    let reference = &spec.robots[robot].reference;
    let errs: Vec<f64> = log
        .steps
        .iter()
        .filter(|s| s.t <= duration + 1e-9)
        .map(|s| {
            let p = s.robots[robot].pose.position();
            let d = reference_at(reference, s.t).position();
            (p[0] - d[0]).hypot(p[1] - d[1])
        })
        .collect();
    error_stats(&errs)
}

pub fn error_stats(errs: &[f64]) -> (f64, f64, f64) {
    if errs.is_empty() {
        return (0.0, 0.0, 0.0);
    }
    let n = errs.len() as f64;
    let mae = errs.iter().sum::<f64>() / n;
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt();
    let var = errs.iter().map(|e| (e - mae).powi(2)).sum::<f64>() / n;
    // rmse^2 = mae^2 + var exactly; keep rmse >= mae against rounding
    (rmse.max(mae), mae, var.sqrt())
}

/// Length of the window from the first to the last step in which the robot
/// had an active constraint or a positive escape gain.
pub fn intervention_time(log: &SimLog, robot: usize) -> f64 {
    let engaged = |k: &usize| {
        let r = &log.steps[*k].robots[robot];
        r.active_count > 0 || r.zeta > 0.0
    };
    let mut ks = (0..log.steps.len()).filter(engaged);
    let Some(first) = ks.next() else {
        return 0.0;
    };
    let last = ks.next_back().unwrap_or(first);
    (last - first + 1) as f64 * log.dt
}

/// `(min_clearance, min_speed, total_variation)`. The minimum speed is
/// taken per robot over `(1 s, reference duration]`, so the start from rest
/// and the stop at the goal do not count.
pub fn clearance_and_smoothness(log: &SimLog, spec: &ScenarioSpec) -> (f64, f64, f64) {
    let min_clearance = log
        .steps
        .iter()
        .flat_map(|s| s.pairs.iter().map(|p| p.distance - p.rho))
        .fold(f64::INFINITY, f64::min);
    let mut min_speed = f64::INFINITY;
    let mut total_variation = 0.0;
    for (i, robot) in spec.robots.iter().enumerate() {
        let speeds: Vec<f64> = log
            .steps
            .iter()
            .map(|s| robot_speed(&s.robots[i], &robot.params))
            .collect();
        total_variation += speeds.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>();
        for (s, v) in log.steps.iter().zip(&speeds) {
            if s.t > SPEED_WARMUP && s.t <= robot.reference.duration + 1e-9 {
                min_speed = min_speed.min(*v);
            }
        }
    }
    (min_clearance, min_speed, total_variation)
}

pub fn goal_reach_time(log: &SimLog, spec: &ScenarioSpec, robot: usize) -> Option<f64> {
    let goal = spec.robots[robot].reference.goal();
    let mut reached = None;
    for s in &log.steps {
        let p = s.robots[robot].pose.position();
        if (p[0] - goal[0]).hypot(p[1] - goal[1]) <= GOAL_TOLERANCE {
            reached.get_or_insert(s.t);
        } else {
            reached = None;
        }
    }
    reached
}

impl MetricReport {
    pub fn compute(log: &SimLog, spec: &ScenarioSpec) -> Self {
        let robots: Vec<RobotMetrics> = (0..spec.robots.len())
            .map(|i| {
                let (rmse, mae, std_dev) = tracking_stats(log, spec, i);
                RobotMetrics {
                    robot: i,
                    rmse,
                    mae,
                    std_dev,
                    intervention_time: intervention_time(log, i),
                    goal_reach_time: goal_reach_time(log, spec, i),
                }
            })
            .collect();
        let (min_clearance, min_speed_after_start, velocity_total_variation) =
            clearance_and_smoothness(log, spec);
        MetricReport {
            goals_reached: robots
                .iter()
                .filter(|r| r.goal_reach_time.is_some())
                .count(),
            robots,
            min_clearance,
            min_speed_after_start,
            velocity_total_variation,
            collisions: audit_collisions(log).len(),
            fallback_steps: log.fallback_count(),
            min_h: log.min_h(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>5} {:>9} {:>9} {:>9} {:>12} {:>10}",
            "robot", "rmse", "mae", "std", "interv [s]", "goal [s]"
        )?;
        for r in &self.robots {
            let goal = r
                .goal_reach_time
                .map_or("-".to_string(), |t| format!("{t:.3}"));
            writeln!(
                f,
                "{:>5} {:>9.4} {:>9.4} {:>9.4} {:>12.3} {:>10}",
                r.robot, r.rmse, r.mae, r.std_dev, r.intervention_time, goal
            )?;
        }
        writeln!(f, "min clearance      {:.4} m", self.min_clearance)?;
        writeln!(
            f,
            "min speed (t > 1s) {:.4} m/s",
            self.min_speed_after_start
        )?;
        writeln!(
            f,
            "speed variation    {:.4} m/s",
            self.velocity_total_variation
        )?;
        writeln!(f, "min barrier        {:.3e}", self.min_h)?;
        writeln!(
            f,
            "goals reached      {}/{}",
            self.goals_reached,
            self.robots.len()
        )?;
        writeln!(f, "collisions         {}", self.collisions)?;
        write!(f, "fallback steps     {}", self.fallback_steps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::QpStatus;
    use crate::sim::{run, StepRecord};
    use crate::types::{Pose, ReferenceSpec, RobotSpec, RobotState};

    #[test]
    fn stats_examples() {
        let (rmse, mae, std) = error_stats(&[0.1; 20]);
        assert!((rmse - 0.1).abs() < 1e-15 && (mae - 0.1).abs() < 1e-15);
        assert!(std < 1e-15);
        assert_eq!(error_stats(&[0.0; 5]), (0.0, 0.0, 0.0));
        let (rmse, mae, std) = error_stats(&[0.0, 2.0]);
        assert_eq!((mae, std), (1.0, 1.0));
        assert!((rmse - 2f64.sqrt()).abs() < 1e-15);
    }

    fn record(active: usize, zeta: f64) -> RobotRecord {
        RobotRecord {
            pose: Pose::new(0.0, 0.0, 0.0),
            u: [0.0; 2],
            udot: [0.0; 2],
            err_norm: 0.0,
            xi_norm: 0.0,
            h_min: f64::INFINITY,
            active_count: active,
            zeta,
            g: 0.0,
        }
    }

    fn log_with(active: impl Fn(usize) -> bool, n: usize, dt: f64) -> SimLog {
        SimLog {
            dt,
            steps: (0..n)
                .map(|k| StepRecord {
                    t: k as f64 * dt,
                    robots: vec![if active(k) {
                        record(1, 0.0)
                    } else {
                        record(0, 0.0)
                    }],
                    pairs: Vec::new(),
                    obstacles: Vec::new(),
                    status: QpStatus::Optimal,
                    iterations: 0,
                    fallback: false,
                })
                .collect(),
        }
    }

    #[test]
    fn intervention_window() {
        assert_eq!(intervention_time(&log_with(|_| false, 100, 0.1), 0), 0.0);
        let t = intervention_time(&log_with(|k| (50..=71).contains(&k), 100, 0.1), 0);
        assert!((t - 2.2).abs() < 1e-12, "{t}");
        // gaps inside the window still count
        let t = intervention_time(&log_with(|k| k == 50 || k == 71, 100, 0.1), 0);
        assert!((t - 2.2).abs() < 1e-12, "{t}");
    }

    #[test]
    fn stationary_robots_far_apart() {
        let mut spec = ScenarioSpec::with_defaults(2.0);
        for x in [0.0, 5.0] {
            let pose = Pose::new(x, 0.0, 0.0);
            spec.robots.push(RobotSpec {
                state: RobotState::at_rest(pose),
                params: RobotParams::default(),
                reference: ReferenceSpec::straight(pose, [x, 0.0], 2.0),
            });
        }
        let log = run(&spec).unwrap();
        let (clear, speed, tv) = clearance_and_smoothness(&log, &spec);
        assert!((clear - 4.6).abs() < 1e-12);
        assert_eq!(speed, 0.0);
        assert_eq!(tv, 0.0);
        let report = MetricReport::compute(&log, &spec);
        assert_eq!(report.goals_reached, 2);
        assert_eq!(report.robots[0].goal_reach_time, Some(0.0));
        assert_eq!(report.robots[0].intervention_time, 0.0);
    }

    #[test]
    fn constant_speed_has_no_variation() {
        // already moving on the reference at its speed
        let mut spec = ScenarioSpec::with_defaults(2.0);
        let start = Pose::new(0.0, 0.0, 0.0);
        let params = RobotParams::default();
        let w = 0.5 / params.wheel_radius;
        spec.robots.push(RobotSpec {
            state: RobotState {
                pose: start,
                u: [w, w],
            },
            params,
            reference: ReferenceSpec::straight(start, [4.0, 0.0], 8.0),
        });
        let log = run(&spec).unwrap();
        let (_, speed, tv) = clearance_and_smoothness(&log, &spec);
        assert!(tv <= 1e-9, "{tv}");
        assert!((speed - 0.5).abs() < 1e-9);
        let (rmse, mae, std) = tracking_stats(&log, &spec, 0);
        assert!(rmse < 1e-9 && mae < 1e-9 && std < 1e-9);
    }

    #[test]
    fn report_renders() {
        let log = log_with(|_| false, 3, 0.1);
        let mut spec = ScenarioSpec::with_defaults(0.2);
        spec.dt = 0.1;
        let pose = Pose::new(0.0, 0.0, 0.0);
        spec.robots.push(RobotSpec {
            state: RobotState::at_rest(pose),
            params: RobotParams::default(),
            reference: ReferenceSpec::straight(pose, [1.0, 0.0], 1.0),
        });
        let report = MetricReport::compute(&log, &spec);
        assert_eq!(report.goals_reached, 0);
        let text = report.to_string();
        assert!(text.contains("goals reached      0/1"), "{text}");
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert!(json["robots"][0]["goal_reach_time"].is_null());
    }
}
