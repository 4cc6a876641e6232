//! Shared domain types: robot state, geometry, gains and the full scenario
//! description consumed by the simulator.

use std::f64::consts::PI;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Planar pose of a robot's control point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    /// Heading in radians, kept in `(-pi, pi]`.
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn position(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Pose plus wheel angular rates `(left, right)` in rad/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotState {
    pub pose: Pose,
    pub u: [f64; 2],
}

impl RobotState {
    pub fn at_rest(pose: Pose) -> Self {
        RobotState { pose, u: [0.0; 2] }
    }
}

/// Body and drive-train geometry of a differential-drive robot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotParams {
    /// Radius of the enclosing disk used for collision checks.
    pub body_radius: f64,
    pub wheel_radius: f64,
    pub axle_length: f64,
    /// Distance of the controlled point ahead of the axle midpoint.
    pub offset: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            body_radius: 0.2,
            wheel_radius: 0.033,
            axle_length: 0.16,
            offset: 0.08,
        }
    }
}

/// Gains shared by every robot in a scenario.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlGains {
    /// Barrier position gain (inside `h`).
    pub kappa1: f64,
    /// Barrier decay rate (class-K gain on `h`).
    pub kappa2: f64,
    /// Tracking position gain.
    pub kappa3: f64,
    /// Tracking velocity gain.
    pub kappa4: f64,
    /// Prediction window in `(0, 1]`.
    pub lambda: f64,
    /// Magnitude of the escape term when collision avoidance is engaged.
    pub zeta_gain: f64,
    /// Escape attitude angle in radians, `[0, pi]`.
    pub q: f64,
    /// Weight of the heading row in the tracking objective.
    pub heading_weight: f64,
}

impl Default for ControlGains {
    fn default() -> Self {
        ControlGains {
            kappa1: 1.0,
            kappa2: 8.0,
            kappa3: 1.0,
            kappa4: 8.0,
            lambda: 0.5,
            zeta_gain: 2.0,
            q: 68f64.to_radians(),
            heading_weight: DEFAULT_HEADING_WEIGHT,
        }
    }
}

/// Weight of the heading row in the tracking objective. A heading error of
/// `e` moves the control point by about `d * e`, so `d^2` with the default
/// offset `d = 0.08` puts both rows on the same metric scale.
pub const DEFAULT_HEADING_WEIGHT: f64 = 0.0064;

/// A disk obstacle moving at constant velocity (zero for static ones).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Obstacle {
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ReferencePath {
    StraightLine {
        goal: [f64; 2],
    },
    /// Straight line through `center` to the point opposite the start.
    CircleAntipodal {
        center: [f64; 2],
    },
    /// Piecewise-linear path through the listed points, traversed at
    /// constant speed.
    Waypoints {
        points: Vec<[f64; 2]>,
    },
}

/// Desired trajectory of one robot.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSpec {
    pub path: ReferencePath,
    /// Start of the path; the heading is only used when the path is
    /// degenerate (zero length).
    pub start: Pose,
    pub duration: f64,
}

impl ReferenceSpec {
    pub fn straight(start: Pose, goal: [f64; 2], duration: f64) -> Self {
        ReferenceSpec {
            path: ReferencePath::StraightLine { goal },
            start,
            duration,
        }
    }

    /// Vertices of the path including the start.
    pub fn vertices(&self) -> Vec<[f64; 2]> {
        let s = self.start.position();
        match &self.path {
            ReferencePath::StraightLine { goal } => vec![s, *goal],
            ReferencePath::CircleAntipodal { center } => {
                vec![s, [2.0 * center[0] - s[0], 2.0 * center[1] - s[1]]]
            }
            ReferencePath::Waypoints { points } => {
                let mut v = Vec::with_capacity(points.len() + 1);
                v.push(s);
                v.extend_from_slice(points);
                v
            }
        }
    }

    pub fn goal(&self) -> [f64; 2] {
        *self.vertices().last().expect("path has a start vertex")
    }

    pub fn length(&self) -> f64 {
        self.vertices()
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum()
    }

    pub fn speed(&self) -> f64 {
        self.length() / self.duration
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct NoiseSpec {
    /// Bound on the perceived-position error in meters.
    pub r_m: f64,
    pub enabled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SafetyOptions {
    /// Added to every constraint threshold (never to the collision audit).
    pub inflate_rho: f64,
    /// Add `r_m` to constraint thresholds when noise is enabled.
    pub compensate_noise: bool,
    /// Pairs farther apart than this are not constrained. `None` is infinite.
    pub sensing_radius: Option<f64>,
}

impl Default for SafetyOptions {
    fn default() -> Self {
        SafetyOptions {
            inflate_rho: 0.0,
            compensate_noise: false,
            sensing_radius: None,
        }
    }
}

/// How the escape activation flag couples to the QP multipliers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ZetaCoupling {
    /// Use the multipliers of the previous step.
    #[default]
    Delayed,
    /// Re-solve once with fresh flags when they change within a step.
    FixedPoint,
}

/// Forces the escape direction instead of deriving it from bearings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Sign of the escape rotation: left is counter-clockwise.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobotSpec {
    pub state: RobotState,
    pub params: RobotParams,
    pub reference: ReferenceSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSpec {
    pub robots: Vec<RobotSpec>,
    pub obstacles: Vec<Obstacle>,
    pub gains: ControlGains,
    pub safety: SafetyOptions,
    /// Wheel acceleration bounds `(lower, upper)` in rad/s^2.
    pub udot_bounds: (f64, f64),
    /// Optional wheel rate bounds in rad/s.
    pub u_bounds: Option<(f64, f64)>,
    pub dt: f64,
    pub t_end: f64,
    pub noise: NoiseSpec,
    pub rng_seed: u64,
    pub zeta_coupling: ZetaCoupling,
    pub fixed_side: Option<Side>,
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_UDOT_BOUND: f64 = 20.0;

impl ScenarioSpec {
    /// Empty scenario carrying the default gains and timing.
    pub fn with_defaults(t_end: f64) -> Self {
        ScenarioSpec {
            robots: Vec::new(),
            obstacles: Vec::new(),
            gains: ControlGains::default(),
            safety: SafetyOptions::default(),
            udot_bounds: (-DEFAULT_UDOT_BOUND, DEFAULT_UDOT_BOUND),
            u_bounds: None,
            dt: DEFAULT_DT,
            t_end,
            noise: NoiseSpec::default(),
            rng_seed: 0,
            zeta_coupling: ZetaCoupling::Delayed,
            fixed_side: None,
        }
    }

    /// Number of integration steps after the initial record.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Collision threshold for a robot pair (true radii).
    pub fn robot_rho(&self, i: usize, j: usize) -> f64 {
        self.robots[i].params.body_radius + self.robots[j].params.body_radius
    }

    pub fn obstacle_rho(&self, i: usize, k: usize) -> f64 {
        self.robots[i].params.body_radius + self.obstacles[k].radius
    }

    /// Threshold the controller enforces on top of a true threshold.
    pub fn constraint_rho(&self, true_rho: f64) -> f64 {
        let mut rho = true_rho + self.safety.inflate_rho;
        if self.safety.compensate_noise && self.noise.enabled {
            rho += self.noise.r_m;
        }
        rho
    }

    /// A ring of `n` robots on a circle, each heading for the antipodal
    /// point within `duration` seconds.
    pub fn circle(n: usize, radius: f64, duration: f64, t_end: f64) -> Self {
        let mut spec = ScenarioSpec::with_defaults(t_end);
        for k in 0..n {
            let phi = 2.0 * PI * k as f64 / n as f64;
            let pose = Pose::new(radius * phi.cos(), radius * phi.sin(), phi + PI);
            spec.robots.push(RobotSpec {
                state: RobotState::at_rest(pose),
                params: RobotParams::default(),
                reference: ReferenceSpec {
                    path: ReferencePath::CircleAntipodal { center: [0.0, 0.0] },
                    start: pose,
                    duration,
                },
            });
        }
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_keeps_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(-5.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn reference_geometry() {
        let r = ReferenceSpec {
            path: ReferencePath::CircleAntipodal { center: [0.0, 0.0] },
            start: Pose::new(6.0, 0.0, PI),
            duration: 12.0,
        };
        assert_eq!(r.goal(), [-6.0, 0.0]);
        assert!((r.speed() - 1.0).abs() < 1e-15);

        let w = ReferenceSpec {
            path: ReferencePath::Waypoints {
                points: vec![[3.0, 0.0], [3.0, 4.0]],
            },
            start: Pose::new(0.0, 0.0, 0.0),
            duration: 7.0,
        };
        assert_eq!(w.length(), 7.0);
        assert_eq!(w.goal(), [3.0, 4.0]);
    }

    #[test]
    fn circle_builder_places_antipodal_goals() {
        let spec = ScenarioSpec::circle(10, 6.0, 12.0, 20.0);
        assert_eq!(spec.robots.len(), 10);
        for r in &spec.robots {
            let g = r.reference.goal();
            let p = r.state.pose.position();
            assert!((g[0] + p[0]).abs() < 1e-12 && (g[1] + p[1]).abs() < 1e-12);
        }
    }
}
