//! Closed-loop simulation of the whole team with one centralized QP per step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kinematics::{self, build_kinematics, reference_at, KinematicMatrices};
use crate::qp::{self, QpStatus, WheelBounds};
use crate::safety::{
    barrier_value, obstacle_constraint_row, pair_constraint_row, perturb_measurement,
    ConstraintRow, PairId,
};
use crate::tracking::{bearing_angle, escape_sign, nominal_accel, tracking_error, zeta};
use crate::types::{wrap_angle, Obstacle, Pose, RobotState, ScenarioSpec, ZetaCoupling};

/// Multipliers above this count as an active constraint.
pub const ACTIVE_MULTIPLIER: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotRecord {
    pub pose: Pose,
    pub u: [f64; 2],
    pub udot: [f64; 2],
    /// Planar distance to the reference point.
    pub err_norm: f64,
    /// Norm of the full pose error, heading included.
    pub xi_norm: f64,
    /// Smallest barrier value over the robot's pairs, infinite without pairs.
    pub h_min: f64,
    pub active_count: usize,
    pub zeta: f64,
    /// Escape sign, 0 when there was no neighbour to take it from.
    pub g: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairRecord {
    pub pair: PairId,
    pub distance: f64,
    /// Collision threshold from the true radii.
    pub rho: f64,
    /// Barrier value from true states against the enforced threshold.
    pub h: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub robots: Vec<RobotRecord>,
    pub pairs: Vec<PairRecord>,
    pub obstacles: Vec<[f64; 2]>,
    pub status: QpStatus,
    pub iterations: usize,
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimLog {
    pub dt: f64,
    pub steps: Vec<StepRecord>,
}

impl SimLog {
    pub fn robot_count(&self) -> usize {
        self.steps.first().map_or(0, |s| s.robots.len())
    }

    pub fn fallback_count(&self) -> usize {
        self.steps.iter().filter(|s| s.fallback).count()
    }

    /// Smallest barrier value over all steps and pairs.
    pub fn min_h(&self) -> f64 {
        self.steps
            .iter()
            .flat_map(|s| s.pairs.iter().map(|p| p.h))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn trajectory(&self, robot: usize) -> Vec<[f64; 2]> {
        self.steps
            .iter()
            .map(|s| s.robots[robot].pose.position())
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionEvent {
    pub t: f64,
    pub pair: PairId,
    pub distance: f64,
    /// `rho - distance`, always positive.
    pub deficit: f64,
}

/// Every step and pair whose center distance is below the true threshold.
pub fn audit_collisions(log: &SimLog) -> Vec<CollisionEvent> {
    log.steps
        .iter()
        .flat_map(|s| {
            s.pairs
                .iter()
                .filter(|p| p.distance < p.rho)
                .map(|p| CollisionEvent {
                    t: s.t,
                    pair: p.pair,
                    distance: p.distance,
                    deficit: p.rho - p.distance,
                })
        })
        .collect()
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Pair records for all robot pairs and robot-obstacle pairs, sensed or not.
pub fn pair_records(
    spec: &ScenarioSpec,
    states: &[RobotState],
    obstacles: &[[f64; 2]],
) -> Vec<PairRecord> {
    let vel: Vec<[f64; 2]> = states
        .iter()
        .zip(&spec.robots)
        .map(|(s, r)| build_kinematics(&s.pose, s.u, &r.params).velocity(s.u))
        .collect();
    let lambda = spec.gains.lambda;
    let k1 = spec.gains.kappa1;
    let n = states.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2 + n * obstacles.len());
    for i in 0..n {
        for j in i + 1..n {
            let (pi, pj) = (states[i].pose.position(), states[j].pose.position());
            let p = [pi[0] - pj[0], pi[1] - pj[1]];
            let v = [vel[i][0] - vel[j][0], vel[i][1] - vel[j][1]];
            let rho = spec.robot_rho(i, j);
            out.push(PairRecord {
                pair: PairId::Robots(i, j),
                distance: dist(pi, pj),
                rho,
                h: barrier_value(lambda, p, v, k1, spec.constraint_rho(rho)),
            });
        }
        for (k, (o, &po)) in spec.obstacles.iter().zip(obstacles).enumerate() {
            let pi = states[i].pose.position();
            let p = [pi[0] - po[0], pi[1] - po[1]];
            let v = [vel[i][0] - o.velocity[0], vel[i][1] - o.velocity[1]];
            let rho = spec.obstacle_rho(i, k);
            out.push(PairRecord {
                pair: PairId::Obstacle {
                    robot: i,
                    obstacle: k,
                },
                distance: dist(pi, po),
                rho,
                h: barrier_value(lambda, p, v, k1, spec.constraint_rho(rho)),
            });
        }
    }
    out
}

/// Wheel acceleration box for one robot, tightened so the next wheel rate
/// stays within the optional rate bounds.
fn wheel_bounds(spec: &ScenarioSpec, state: &RobotState) -> WheelBounds {
    let (lo, hi) = spec.udot_bounds;
    let mut lb = [lo; 2];
    let mut ub = [hi; 2];
    if let Some((umin, umax)) = spec.u_bounds {
        for w in 0..2 {
            lb[w] = lb[w].max((umin - state.u[w]) / spec.dt);
            ub[w] = ub[w].min((umax - state.u[w]) / spec.dt);
            if lb[w] > ub[w] {
                // rate already outside the band: push back as hard as allowed
                let target = if state.u[w] > umax { lo } else { hi };
                lb[w] = target;
                ub[w] = target;
            }
        }
    }
    (lb, ub)
}

/// What the controllers see in one step.
struct Perception {
    rows: Vec<ConstraintRow>,
    /// For each robot: relative positions (other minus self, world frame) of
    /// every sensed neighbour, keyed by pair.
    neighbours: Vec<Vec<(PairId, [f64; 2])>>,
}

fn perceive(
    spec: &ScenarioSpec,
    states: &[RobotState],
    mats: &[KinematicMatrices],
    obstacles: &[Obstacle],
    rng: &mut ChaCha8Rng,
) -> Perception {
    let n = states.len();
    let sensing = spec.safety.sensing_radius.unwrap_or(f64::INFINITY);
    let r_m = if spec.noise.enabled {
        spec.noise.r_m
    } else {
        0.0
    };
    let mut rows = Vec::new();
    let mut neighbours = vec![Vec::new(); n];
    for i in 0..n {
        let pi = states[i].pose.position();
        for j in i + 1..n {
            let pj = states[j].pose.position();
            if dist(pi, pj) > sensing {
                continue;
            }
            let seen = perturb_measurement(pj, r_m, rng);
            let mut sj = states[j];
            sj.pose.x = seen[0];
            sj.pose.y = seen[1];
            let rho = spec.constraint_rho(spec.robot_rho(i, j));
            let row = pair_constraint_row(
                &states[i],
                &sj,
                &mats[i],
                &mats[j],
                &spec.gains,
                rho,
                n,
                i,
                j,
            );
            let rel = [seen[0] - pi[0], seen[1] - pi[1]];
            neighbours[i].push((row.pair, rel));
            neighbours[j].push((row.pair, [-rel[0], -rel[1]]));
            rows.push(row);
        }
        for (k, o) in obstacles.iter().enumerate() {
            if dist(pi, o.position) > sensing {
                continue;
            }
            let seen = Obstacle {
                position: perturb_measurement(o.position, r_m, rng),
                ..*o
            };
            let rho = spec.constraint_rho(spec.obstacle_rho(i, k));
            let row =
                obstacle_constraint_row(&states[i], &mats[i], &seen, &spec.gains, rho, n, i, k);
            neighbours[i].push((
                row.pair,
                [seen.position[0] - pi[0], seen.position[1] - pi[1]],
            ));
            rows.push(row);
        }
    }
    Perception { rows, neighbours }
}

/// Escape sign for robot `i` from the bearings, in its own heading frame,
/// of the neighbours it is actively avoiding (all sensed neighbours when
/// none is active).
fn escape_for(
    spec: &ScenarioSpec,
    pose: &Pose,
    neighbours: &[(PairId, [f64; 2])],
    active: &[PairId],
) -> f64 {
    if let Some(side) = spec.fixed_side {
        return side.sign();
    }
    let bearing = |rel: [f64; 2]| {
        let b = bearing_angle([0.0, 0.0], rel)
            .map(|world| wrap_angle(world - pose.theta))
            .unwrap_or(0.0);
        if b.abs() < 1e-9 {
            0.0
        } else {
            b
        }
    };
    let mut bearings: Vec<f64> = neighbours
        .iter()
        .filter(|(pair, _)| active.contains(pair))
        .map(|(_, rel)| bearing(*rel))
        .collect();
    if bearings.is_empty() {
        bearings = neighbours.iter().map(|(_, rel)| bearing(*rel)).collect();
    }
    escape_sign(&bearings).unwrap_or(0.0)
}

struct StepSolve {
    udot: Vec<f64>,
    status: QpStatus,
    iterations: usize,
    fallback: bool,
    /// Pairs with a positive multiplier; `None` when the QP fell back.
    active: Option<Vec<PairId>>,
    zeta: Vec<f64>,
    g: Vec<f64>,
    err: Vec<(f64, f64)>,
}

fn solve_step(
    spec: &ScenarioSpec,
    t: f64,
    states: &[RobotState],
    mats: &[KinematicMatrices],
    perception: &Perception,
    active_prev: &[PairId],
) -> Result<StepSolve> {
    let n = states.len();
    let mut nominals = Vec::with_capacity(n);
    let mut zetas = Vec::with_capacity(n);
    let mut gs = Vec::with_capacity(n);
    let mut errs = Vec::with_capacity(n);
    for i in 0..n {
        let robot = &spec.robots[i];
        let reference = reference_at(&robot.reference, t);
        let engaged = active_prev.iter().any(|p| p.involves(i));
        let z = zeta(engaged, spec.gains.zeta_gain);
        let g = escape_for(
            spec,
            &states[i].pose,
            &perception.neighbours[i],
            active_prev,
        );
        let cmd = nominal_accel(&states[i], &mats[i], &reference, &spec.gains, z, g);
        let xi = tracking_error(&states[i], &reference);
        errs.push((xi[0].hypot(xi[1]), xi.norm()));
        zetas.push(z);
        gs.push(g);
        nominals.push((cmd, mats[i]));
    }
    let bounds: Vec<WheelBounds> = states.iter().map(|s| wheel_bounds(spec, s)).collect();
    let problem = qp::assemble(
        &nominals,
        &perception.rows,
        &bounds,
        spec.gains.heading_weight,
    )?;
    let sol = qp::solve(&problem)?;
    if sol.status == QpStatus::Infeasible {
        return Ok(StepSolve {
            udot: qp::fallback_brake(states, &bounds, spec.dt),
            status: sol.status,
            iterations: sol.iterations,
            fallback: true,
            active: None,
            zeta: zetas,
            g: gs,
            err: errs,
        });
    }
    let active = perception
        .rows
        .iter()
        .zip(&sol.row_multipliers)
        .filter(|(_, &m)| m > ACTIVE_MULTIPLIER)
        .map(|(r, _)| r.pair)
        .collect();
    Ok(StepSolve {
        udot: sol.z,
        status: sol.status,
        iterations: sol.iterations,
        fallback: false,
        active: Some(active),
        zeta: zetas,
        g: gs,
        err: errs,
    })
}

fn engaged_robots(n: usize, active: &[PairId]) -> Vec<bool> {
    (0..n)
        .map(|i| active.iter().any(|p| p.involves(i)))
        .collect()
}

/// Runs the scenario from `t = 0` to `t_end`, logging one record per step
/// including the initial state.
pub fn run(spec: &ScenarioSpec) -> Result<SimLog> {
    spec.validate()?;
    let n = spec.robots.len();
    let mut states: Vec<RobotState> = spec.robots.iter().map(|r| r.state).collect();
    let mut obstacles = spec.obstacles.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut active_prev: Vec<PairId> = Vec::new();
    let steps = spec.steps();
    let mut log = SimLog {
        dt: spec.dt,
        steps: Vec::with_capacity(steps + 1),
    };

    for k in 0..=steps {
        let t = k as f64 * spec.dt;
        let at_step = |e: Error| Error::Step {
            step: k,
            source: Box::new(e),
        };
        let mats: Vec<KinematicMatrices> = states
            .iter()
            .zip(&spec.robots)
            .map(|(s, r)| build_kinematics(&s.pose, s.u, &r.params))
            .collect();
        let perception = perceive(spec, &states, &mats, &obstacles, &mut rng);
        let mut solved =
            solve_step(spec, t, &states, &mats, &perception, &active_prev).map_err(at_step)?;
        if spec.zeta_coupling == ZetaCoupling::FixedPoint {
            if let Some(active) = &solved.active {
                if engaged_robots(n, active) != engaged_robots(n, &active_prev) {
                    let active = active.clone();
                    solved = solve_step(spec, t, &states, &mats, &perception, &active)
                        .map_err(at_step)?;
                }
            }
        }
        let active_now = solved.active.clone().unwrap_or_else(|| active_prev.clone());

        let pairs = pair_records(
            spec,
            &states,
            &obstacles.iter().map(|o| o.position).collect::<Vec<_>>(),
        );
        let robots = (0..n)
            .map(|i| RobotRecord {
                pose: states[i].pose,
                u: states[i].u,
                udot: [solved.udot[2 * i], solved.udot[2 * i + 1]],
                err_norm: solved.err[i].0,
                xi_norm: solved.err[i].1,
                h_min: pairs
                    .iter()
                    .filter(|p| p.pair.involves(i))
                    .map(|p| p.h)
                    .fold(f64::INFINITY, f64::min),
                active_count: active_now.iter().filter(|p| p.involves(i)).count(),
                zeta: solved.zeta[i],
                g: solved.g[i],
            })
            .collect();
        log.steps.push(StepRecord {
            t,
            robots,
            pairs,
            obstacles: obstacles.iter().map(|o| o.position).collect(),
            status: solved.status,
            iterations: solved.iterations,
            fallback: solved.fallback,
        });
        if k == steps {
            break;
        }

        for (i, s) in states.iter_mut().enumerate() {
            *s = kinematics::step(
                s,
                [solved.udot[2 * i], solved.udot[2 * i + 1]],
                spec.dt,
                &spec.robots[i].params,
                spec.u_bounds,
            );
        }
        for o in obstacles.iter_mut() {
            o.position = [
                o.position[0] + o.velocity[0] * spec.dt,
                o.position[1] + o.velocity[1] * spec.dt,
            ];
        }
        active_prev = active_now;
    }
    Ok(log)
}
