//! JSON scenario files: schema, parsing, serialization, dotted-path
//! overrides and validation.
//!
//! Angles are written in degrees in files and held in radians in memory.
//! A document has the top-level keys `robots`, `obstacles`, `gains`, `sim`,
//! `noise` and `safety`; only `robots` and `sim.t_end` are mandatory. See
//! `SCENARIOS.md` at the crate root for the full field list.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::kinematics;
use crate::safety;
use crate::types::*;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    robots: Vec<RobotFile>,
    #[serde(default)]
    obstacles: Vec<ObstacleFile>,
    #[serde(default)]
    gains: GainsFile,
    sim: SimFile,
    #[serde(default)]
    noise: NoiseFile,
    #[serde(default)]
    safety: SafetyFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RobotFile {
    x: f64,
    y: f64,
    #[serde(default)]
    theta_deg: f64,
    #[serde(default)]
    u: [f64; 2],
    #[serde(default)]
    params: ParamsFile,
    reference: ReferenceFile,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ParamsFile {
    body_radius: f64,
    wheel_radius: f64,
    axle_length: f64,
    offset: f64,
}

impl Default for ParamsFile {
    fn default() -> Self {
        let p = RobotParams::default();
        ParamsFile {
            body_radius: p.body_radius,
            wheel_radius: p.wheel_radius,
            axle_length: p.axle_length,
            offset: p.offset,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ReferenceKind {
    StraightLine,
    CircleAntipodal,
    Waypoints,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReferenceFile {
    kind: ReferenceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    goal: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    center: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<[f64; 2]>>,
    /// Defaults to the robot's initial position.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<[f64; 2]>,
    /// Heading used when the path has zero length; defaults to the robot's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start_theta_deg: Option<f64>,
    duration: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObstacleFile {
    position: [f64; 2],
    #[serde(default)]
    velocity: [f64; 2],
    radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct GainsFile {
    kappa1: f64,
    kappa2: f64,
    kappa3: f64,
    kappa4: f64,
    lambda: f64,
    zeta: f64,
    q_deg: f64,
    heading_weight: f64,
}

impl Default for GainsFile {
    fn default() -> Self {
        let g = ControlGains::default();
        GainsFile {
            kappa1: g.kappa1,
            kappa2: g.kappa2,
            kappa3: g.kappa3,
            kappa4: g.kappa4,
            lambda: g.lambda,
            zeta: g.zeta_gain,
            q_deg: 68.0,
            heading_weight: g.heading_weight,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
enum CouplingFile {
    #[default]
    Delayed,
    FixedPoint,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum SideFile {
    Left,
    Right,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_udot() -> [f64; 2] {
    [-DEFAULT_UDOT_BOUND, DEFAULT_UDOT_BOUND]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimFile {
    #[serde(default = "default_dt")]
    dt: f64,
    t_end: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_udot")]
    udot_bounds: [f64; 2],
    #[serde(default)]
    u_bounds: Option<[f64; 2]>,
    #[serde(default)]
    zeta_coupling: CouplingFile,
    #[serde(default)]
    fixed_side: Option<SideFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct NoiseFile {
    enabled: bool,
    r_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct SafetyFile {
    inflate_rho: f64,
    compensate_noise: bool,
    /// `null` means unlimited.
    sensing_radius: Option<f64>,
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "<document>".into(),
        message: e.to_string(),
    })?;
    from_value(value)
}

/// Parses a scenario after patching it with `key=value` overrides.
pub fn parse_scenario_with_overrides(text: &str, overrides: &[String]) -> Result<ScenarioSpec> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: "<document>".into(),
        message: e.to_string(),
    })?;
    for o in overrides {
        apply_override(&mut value, o)?;
    }
    from_value(value)
}

pub fn load_scenario(path: &Path, overrides: &[String]) -> Result<ScenarioSpec> {
    if !path.exists() {
        return Err(Error::ScenarioNotFound(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    parse_scenario_with_overrides(&text, overrides)
}

fn from_value(value: Value) -> Result<ScenarioSpec> {
    let file: ScenarioFile = serde_path_to_error::deserialize(value).map_err(|e| Error::Parse {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    let spec = file.into_spec()?;
    spec.validate()?;
    Ok(spec)
}

/// Serializes a scenario into the file schema (pretty-printed JSON).
pub fn serialize_scenario(spec: &ScenarioSpec) -> String {
    let file = ScenarioFile::from_spec(spec);
    serde_json::to_string_pretty(&file).expect("scenario schema is always serializable")
}

/// Sets `a.b.c=value` in a JSON document. Numeric segments index arrays;
/// missing object keys are created. The value is read as JSON when it
/// parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Override(assignment.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Override(assignment.to_string()));
    }
    let new_value: Value =
        serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));

    let mut cursor = doc;
    let segments: Vec<&str> = key.split('.').collect();
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        cursor = match cursor {
            Value::Object(map) => {
                if last {
                    map.insert(seg.to_string(), new_value);
                    return Ok(());
                }
                map.entry(seg.to_string())
                    .or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Error::Override(assignment.to_string()))?;
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Override(assignment.to_string()))?;
                if last {
                    *slot = new_value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Override(assignment.to_string())),
        };
    }
    unreachable!("loop returns on the last segment")
}

impl ScenarioFile {
    fn into_spec(self) -> Result<ScenarioSpec> {
        let mut robots = Vec::with_capacity(self.robots.len());
        for (i, r) in self.robots.into_iter().enumerate() {
            let pose = Pose::new(r.x, r.y, r.theta_deg.to_radians());
            let start_pos = r.reference.start.unwrap_or([r.x, r.y]);
            let start_theta = r
                .reference
                .start_theta_deg
                .map(f64::to_radians)
                .unwrap_or(pose.theta);
            let start = Pose::new(start_pos[0], start_pos[1], start_theta);
            let field = |name: &str| format!("robots[{i}].reference.{name}");
            let path = match r.reference.kind {
                ReferenceKind::StraightLine => ReferencePath::StraightLine {
                    goal: r.reference.goal.ok_or_else(|| {
                        Error::invalid(field("goal"), "required for straight_line")
                    })?,
                },
                ReferenceKind::CircleAntipodal => ReferencePath::CircleAntipodal {
                    center: r.reference.center.unwrap_or([0.0, 0.0]),
                },
                ReferenceKind::Waypoints => ReferencePath::Waypoints {
                    points: r
                        .reference
                        .points
                        .ok_or_else(|| Error::invalid(field("points"), "required for waypoints"))?,
                },
            };
            robots.push(RobotSpec {
                state: RobotState { pose, u: r.u },
                params: RobotParams {
                    body_radius: r.params.body_radius,
                    wheel_radius: r.params.wheel_radius,
                    axle_length: r.params.axle_length,
                    offset: r.params.offset,
                },
                reference: ReferenceSpec {
                    path,
                    start,
                    duration: r.reference.duration,
                },
            });
        }
        let g = self.gains;
        Ok(ScenarioSpec {
            robots,
            obstacles: self
                .obstacles
                .into_iter()
                .map(|o| Obstacle {
                    position: o.position,
                    velocity: o.velocity,
                    radius: o.radius,
                })
                .collect(),
            gains: ControlGains {
                kappa1: g.kappa1,
                kappa2: g.kappa2,
                kappa3: g.kappa3,
                kappa4: g.kappa4,
                lambda: g.lambda,
                zeta_gain: g.zeta,
                q: g.q_deg.to_radians(),
                heading_weight: g.heading_weight,
            },
            safety: SafetyOptions {
                inflate_rho: self.safety.inflate_rho,
                compensate_noise: self.safety.compensate_noise,
                sensing_radius: self.safety.sensing_radius,
            },
            udot_bounds: (self.sim.udot_bounds[0], self.sim.udot_bounds[1]),
            u_bounds: self.sim.u_bounds.map(|b| (b[0], b[1])),
            dt: self.sim.dt,
            t_end: self.sim.t_end,
            noise: NoiseSpec {
                r_m: self.noise.r_m,
                enabled: self.noise.enabled,
            },
            rng_seed: self.sim.seed,
            zeta_coupling: match self.sim.zeta_coupling {
                CouplingFile::Delayed => ZetaCoupling::Delayed,
                CouplingFile::FixedPoint => ZetaCoupling::FixedPoint,
            },
            fixed_side: self.sim.fixed_side.map(|s| match s {
                SideFile::Left => Side::Left,
                SideFile::Right => Side::Right,
            }),
        })
    }

    fn from_spec(spec: &ScenarioSpec) -> Self {
        let robots = spec
            .robots
            .iter()
            .map(|r| {
                let pose = r.state.pose;
                let (kind, goal, center, points) = match &r.reference.path {
                    ReferencePath::StraightLine { goal } => {
                        (ReferenceKind::StraightLine, Some(*goal), None, None)
                    }
                    ReferencePath::CircleAntipodal { center } => {
                        (ReferenceKind::CircleAntipodal, None, Some(*center), None)
                    }
                    ReferencePath::Waypoints { points } => {
                        (ReferenceKind::Waypoints, None, None, Some(points.clone()))
                    }
                };
                RobotFile {
                    x: pose.x,
                    y: pose.y,
                    theta_deg: pose.theta.to_degrees(),
                    u: r.state.u,
                    params: ParamsFile {
                        body_radius: r.params.body_radius,
                        wheel_radius: r.params.wheel_radius,
                        axle_length: r.params.axle_length,
                        offset: r.params.offset,
                    },
                    reference: ReferenceFile {
                        kind,
                        goal,
                        center,
                        points,
                        start: Some(r.reference.start.position()),
                        start_theta_deg: Some(r.reference.start.theta.to_degrees()),
                        duration: r.reference.duration,
                    },
                }
            })
            .collect();
        let g = spec.gains;
        ScenarioFile {
            robots,
            obstacles: spec
                .obstacles
                .iter()
                .map(|o| ObstacleFile {
                    position: o.position,
                    velocity: o.velocity,
                    radius: o.radius,
                })
                .collect(),
            gains: GainsFile {
                kappa1: g.kappa1,
                kappa2: g.kappa2,
                kappa3: g.kappa3,
                kappa4: g.kappa4,
                lambda: g.lambda,
                zeta: g.zeta_gain,
                q_deg: g.q.to_degrees(),
                heading_weight: g.heading_weight,
            },
            sim: SimFile {
                dt: spec.dt,
                t_end: spec.t_end,
                seed: spec.rng_seed,
                udot_bounds: [spec.udot_bounds.0, spec.udot_bounds.1],
                u_bounds: spec.u_bounds.map(|(a, b)| [a, b]),
                zeta_coupling: match spec.zeta_coupling {
                    ZetaCoupling::Delayed => CouplingFile::Delayed,
                    ZetaCoupling::FixedPoint => CouplingFile::FixedPoint,
                },
                fixed_side: spec.fixed_side.map(|s| match s {
                    Side::Left => SideFile::Left,
                    Side::Right => SideFile::Right,
                }),
            },
            noise: NoiseFile {
                enabled: spec.noise.enabled,
                r_m: spec.noise.r_m,
            },
            safety: SafetyFile {
                inflate_rho: spec.safety.inflate_rho,
                compensate_noise: spec.safety.compensate_noise,
                sensing_radius: spec.safety.sensing_radius,
            },
        }
    }
}

fn finite(field: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be finite"))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be > 0, got {v}")))
    }
}

impl ScenarioSpec {
    /// Checks every invariant of the scenario, including that the initial
    /// configuration lies in the safe set enforced by the controller.
    pub fn validate(&self) -> Result<()> {
        if self.robots.is_empty() {
            return Err(Error::invalid("robots", "at least one robot is required"));
        }
        for (i, r) in self.robots.iter().enumerate() {
            let p = &r.state.pose;
            finite(&format!("robots[{i}] pose"), &[p.x, p.y, p.theta])?;
            finite(&format!("robots[{i}].u"), &r.state.u)?;
            positive(
                &format!("robots[{i}].params.body_radius"),
                r.params.body_radius,
            )?;
            positive(
                &format!("robots[{i}].params.wheel_radius"),
                r.params.wheel_radius,
            )?;
            positive(
                &format!("robots[{i}].params.axle_length"),
                r.params.axle_length,
            )?;
            positive(&format!("robots[{i}].params.offset"), r.params.offset)?;
            positive(
                &format!("robots[{i}].reference.duration"),
                r.reference.duration,
            )?;
            let verts = r.reference.vertices();
            if verts.len() < 2 {
                return Err(Error::invalid(
                    format!("robots[{i}].reference.points"),
                    "needs at least one waypoint",
                ));
            }
            for v in &verts {
                finite(&format!("robots[{i}].reference"), v)?;
            }
        }
        for (k, o) in self.obstacles.iter().enumerate() {
            finite(&format!("obstacles[{k}]"), &[o.position[0], o.position[1]])?;
            finite(&format!("obstacles[{k}].velocity"), &o.velocity)?;
            positive(&format!("obstacles[{k}].radius"), o.radius)?;
        }

        let g = &self.gains;
        positive("gains.kappa1", g.kappa1)?;
        positive("gains.kappa2", g.kappa2)?;
        positive("gains.kappa3", g.kappa3)?;
        positive("gains.kappa4", g.kappa4)?;
        if !(g.lambda > 0.0 && g.lambda <= 1.0) {
            return Err(Error::invalid("gains.lambda", "must lie in (0, 1]"));
        }
        if !(g.zeta_gain >= 0.0 && g.zeta_gain.is_finite()) {
            return Err(Error::invalid("gains.zeta", "must be >= 0"));
        }
        if g.kappa4 <= g.zeta_gain {
            return Err(Error::invalid(
                "gains.kappa4",
                format!(
                    "must exceed zeta ({} <= {}) for tracking convergence",
                    g.kappa4, g.zeta_gain
                ),
            ));
        }
        if !(0.0..=std::f64::consts::PI + 1e-12).contains(&g.q) {
            return Err(Error::invalid("gains.q_deg", "must lie in [0, 180]"));
        }
        if !(g.heading_weight >= 0.0 && g.heading_weight.is_finite()) {
            return Err(Error::invalid("gains.heading_weight", "must be >= 0"));
        }

        positive("sim.dt", self.dt)?;
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::invalid("sim.t_end", "must be >= 0"));
        }
        let (lo, hi) = self.udot_bounds;
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::invalid("sim.udot_bounds", "lower must be < upper"));
        }
        if let Some((lo, hi)) = self.u_bounds {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(Error::invalid("sim.u_bounds", "lower must be < upper"));
            }
        }
        if !(self.noise.r_m >= 0.0 && self.noise.r_m.is_finite()) {
            return Err(Error::invalid("noise.r_m", "must be >= 0"));
        }
        if !(self.safety.inflate_rho >= 0.0 && self.safety.inflate_rho.is_finite()) {
            return Err(Error::invalid("safety.inflate_rho", "must be >= 0"));
        }
        if let Some(s) = self.safety.sensing_radius {
            positive("safety.sensing_radius", s)?;
        }

        self.check_initial_safe_set()
    }

    fn check_initial_safe_set(&self) -> Result<()> {
        let g = &self.gains;
        let mats: Vec<_> = self
            .robots
            .iter()
            .map(|r| kinematics::build_kinematics(&r.state.pose, r.state.u, &r.params))
            .collect();
        let vel = |i: usize| mats[i].velocity(self.robots[i].state.u);

        let check = |first: String, second: String, p: [f64; 2], v: [f64; 2], rho: f64| {
            let sq = p[0] * p[0] + p[1] * p[1];
            if g.lambda * sq < rho * rho {
                return Err(Error::InitialOverlap {
                    first,
                    second,
                    detail: format!(
                        "lambda*|p|^2 = {:.6} < rho^2 = {:.6}",
                        g.lambda * sq,
                        rho * rho
                    ),
                });
            }
            let h = safety::barrier_value(g.lambda, p, v, g.kappa1, rho);
            if h < 0.0 {
                return Err(Error::InitialOverlap {
                    first,
                    second,
                    detail: format!("barrier value {h:.6} < 0 (closing too fast)"),
                });
            }
            Ok(())
        };

        for i in 0..self.robots.len() {
            let pi = self.robots[i].state.pose.position();
            let vi = vel(i);
            for j in (i + 1)..self.robots.len() {
                let pj = self.robots[j].state.pose.position();
                let vj = vel(j);
                check(
                    format!("robot {i}"),
                    format!("robot {j}"),
                    [pi[0] - pj[0], pi[1] - pj[1]],
                    [vi[0] - vj[0], vi[1] - vj[1]],
                    self.constraint_rho(self.robot_rho(i, j)),
                )?;
            }
            for (k, o) in self.obstacles.iter().enumerate() {
                check(
                    format!("robot {i}"),
                    format!("obstacle {k}"),
                    [pi[0] - o.position[0], pi[1] - o.position[1]],
                    [vi[0] - o.velocity[0], vi[1] - o.velocity[1]],
                    self.constraint_rho(self.obstacle_rho(i, k)),
                )?;
            }
        }
        Ok(())
    }
}
