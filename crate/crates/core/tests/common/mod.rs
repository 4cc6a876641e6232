#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;

use mrsafe::qp::{ConstraintRef, QpProblem};
use mrsafe::types::ScenarioSpec;

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("scenarios")
        .join(name)
}

pub fn bundled(name: &str) -> ScenarioSpec {
    mrsafe::load_scenario(&scenario_path(name), &[]).expect("bundled scenario loads")
}

pub const BUNDLED: [&str; 5] = [
    "circle10.json",
    "example1_static.json",
    "example3_dynamic_a.json",
    "example3_dynamic_b.json",
    "swap2_deadlock.json",
];

/// Result of exhaustive active-set enumeration.
pub struct Enumerated {
    pub z: Vec<f64>,
    pub objective: f64,
    /// Constraints with a strictly positive multiplier.
    pub active: Vec<ConstraintRef>,
}

fn normal(p: &QpProblem, c: ConstraintRef) -> (Vec<f64>, f64) {
    let n = p.dim();
    match c {
        ConstraintRef::Row(k) => p.rows[k].clone(),
        ConstraintRef::Upper(i) => {
            let mut a = vec![0.0; n];
            a[i] = 1.0;
            (a, p.ub[i])
        }
        ConstraintRef::Lower(i) => {
            let mut a = vec![0.0; n];
            a[i] = -1.0;
            (a, -p.lb[i])
        }
    }
}

/// Every subset of at most `n` constraints is treated as an equality set;
/// the KKT system is solved directly and the candidate kept if it is primal
/// and dual feasible. The cheapest candidate wins.
pub fn brute_force(p: &QpProblem) -> Option<Enumerated> {
    let n = p.dim();
    let mut all = Vec::new();
    for k in 0..p.rows.len() {
        all.push(ConstraintRef::Row(k));
    }
    for i in 0..n {
        if p.ub[i].is_finite() {
            all.push(ConstraintRef::Upper(i));
        }
    }
    for i in 0..n {
        if p.lb[i].is_finite() {
            all.push(ConstraintRef::Lower(i));
        }
    }
    let m = all.len();
    let mut best: Option<Enumerated> = None;
    for mask in 0u32..(1 << m) {
        let set: Vec<ConstraintRef> = (0..m)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| all[b])
            .collect();
        if set.len() > n {
            continue;
        }
        let k = set.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&p.h);
        for i in 0..n {
            rhs[i] = -p.f[i];
        }
        for (c, &con) in set.iter().enumerate() {
            let (a, b) = normal(p, con);
            for i in 0..n {
                kkt[(i, n + c)] = a[i];
                kkt[(n + c, i)] = a[i];
            }
            rhs[n + c] = b;
        }
        let lu = kkt.lu();
        if lu.determinant().abs() < 1e-12 {
            continue;
        }
        let Some(sol) = lu.solve(&rhs) else { continue };
        let z: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let mu: Vec<f64> = sol.rows(n, k).iter().copied().collect();
        if mu.iter().any(|&m| m < -1e-10) {
            continue;
        }
        let feasible = all.iter().all(|&c| {
            let (a, b) = normal(p, c);
            let lhs: f64 = a.iter().zip(&z).map(|(x, y)| x * y).sum();
            lhs <= b + 1e-9 * (1.0 + b.abs())
        });
        if !feasible {
            continue;
        }
        let obj = p.objective(&z);
        if best.as_ref().is_none_or(|b| obj < b.objective) {
            let mut active: Vec<ConstraintRef> = set
                .iter()
                .zip(&mu)
                .filter(|(_, &m)| m > 1e-9)
                .map(|(&c, _)| c)
                .collect();
            active.sort();
            best = Some(Enumerated {
                z,
                objective: obj,
                active,
            });
        }
    }
    best
}

/// Random strictly convex QP that is feasible by construction: every
/// constraint holds at a random interior point `z0`. At most two
/// coordinates get finite bounds to keep the enumeration small.
pub fn random_feasible_qp<R: Rng>(rng: &mut R, n: usize, rows: usize) -> QpProblem {
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = &m * m.transpose() + DMatrix::identity(n, n) * rng.random_range(0.1..1.0);
    let f = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let z0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut lb = vec![f64::NEG_INFINITY; n];
    let mut ub = vec![f64::INFINITY; n];
    for _ in 0..2.min(n) {
        let i = rng.random_range(0..n);
        lb[i] = z0[i] - rng.random_range(0.05..1.5);
        ub[i] = z0[i] + rng.random_range(0.05..1.5);
    }
    let rows = (0..rows)
        .map(|_| {
            let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let at: f64 = a.iter().zip(&z0).map(|(x, y)| x * y).sum();
            (a, at + rng.random_range(0.0..0.5))
        })
        .collect();
    QpProblem { h, f, lb, ub, rows }
}

/// Smallest root of `det(S - xI)`, found by scanning for the first sign
/// change from below the Gershgorin bound and bisecting it.
pub fn smallest_root_by_bisection(s: &Matrix3<f64>) -> f64 {
    let p = |x: f64| (s - Matrix3::identity() * x).determinant();
    let radius = (0..3)
        .map(|i| (0..3).map(|j| s[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut lo = -radius - 1.0;
    let step = 1e-3;
    // det(S - xI) > 0 below every eigenvalue
    let mut hi = lo;
    while p(hi) > 0.0 {
        lo = hi;
        hi += step;
        assert!(hi <= radius + 1.0, "no sign change found");
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if p(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
