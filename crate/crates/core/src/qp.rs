//! Dense strictly convex QP with box bounds and linear inequalities:
//!
//! ```text
//! minimize    1/2 z'Hz + f'z
//! subject to  lb <= z <= ub,   a_k . z <= b_k
//! ```
//!
//! Solved with a dual active-set method (Goldfarb-Idnani): start at the
//! unconstrained minimizer, repeatedly add the most violated constraint and
//! drop constraints whose multipliers would turn negative. Every step keeps
//! the KKT stationarity condition exact, so the multipliers come out of the
//! solve directly.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::kinematics::KinematicMatrices;
use crate::safety::ConstraintRow;
use crate::tracking::NominalCommand;
use crate::types::RobotState;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("no convergence after {iterations} iterations (max violation {max_violation:e}, active set size {active})")]
    IterationLimit {
        iterations: usize,
        max_violation: f64,
        active: usize,
    },
    #[error("KKT system singular with {active} active constraints")]
    SingularKkt { active: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    /// `(a, b)` meaning `a . z <= b`.
    pub rows: Vec<(Vec<f64>, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintRef {
    Row(usize),
    Upper(usize),
    Lower(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    /// Empty when infeasible.
    pub z: Vec<f64>,
    pub row_multipliers: Vec<f64>,
    pub upper_multipliers: Vec<f64>,
    pub lower_multipliers: Vec<f64>,
    /// Constraints in the final working set, in the order they entered.
    pub active: Vec<ConstraintRef>,
    pub iterations: usize,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

impl QpProblem {
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        0.5 * z.dot(&(&self.h * &z)) + self.f.dot(&z)
    }

    fn check(&self) -> std::result::Result<(), QpError> {
        let n = self.dim();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(QpError::Dimension(format!(
                "H is {}x{}, f has {n}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.lb.len() != n || self.ub.len() != n {
            return Err(QpError::Dimension("bounds length".into()));
        }
        if let Some((k, _)) = self.rows.iter().enumerate().find(|(_, r)| r.0.len() != n) {
            return Err(QpError::Dimension(format!("row {k} length")));
        }
        Ok(())
    }

    /// Normal and right-hand side of a constraint in `a . z <= b` form.
    fn normal(&self, c: ConstraintRef) -> (DVector<f64>, f64) {
        let n = self.dim();
        match c {
            ConstraintRef::Row(k) => (DVector::from_column_slice(&self.rows[k].0), self.rows[k].1),
            ConstraintRef::Upper(i) => {
                let mut a = DVector::zeros(n);
                a[i] = 1.0;
                (a, self.ub[i])
            }
            ConstraintRef::Lower(i) => {
                let mut a = DVector::zeros(n);
                a[i] = -1.0;
                (a, -self.lb[i])
            }
        }
    }

    fn value(&self, c: ConstraintRef, z: &DVector<f64>) -> f64 {
        match c {
            ConstraintRef::Row(k) => self.rows[k]
                .0
                .iter()
                .zip(z.iter())
                .map(|(a, b)| a * b)
                .sum(),
            ConstraintRef::Upper(i) => z[i],
            ConstraintRef::Lower(i) => -z[i],
        }
    }

    /// All constraints in index order: rows, then finite upper bounds, then
    /// finite lower bounds.
    pub fn constraints(&self) -> Vec<ConstraintRef> {
        let n = self.dim();
        let mut out: Vec<ConstraintRef> = (0..self.rows.len()).map(ConstraintRef::Row).collect();
        out.extend(
            (0..n)
                .filter(|&i| self.ub[i].is_finite())
                .map(ConstraintRef::Upper),
        );
        out.extend(
            (0..n)
                .filter(|&i| self.lb[i].is_finite())
                .map(ConstraintRef::Lower),
        );
        out
    }

    fn rhs(&self, c: ConstraintRef) -> f64 {
        match c {
            ConstraintRef::Row(k) => self.rows[k].1,
            ConstraintRef::Upper(i) => self.ub[i],
            ConstraintRef::Lower(i) => -self.lb[i],
        }
    }
}

fn feasibility_tol(b: f64) -> f64 {
    1e-11 * (1.0 + b.abs())
}

/// Solves `[H N; N' 0] [dz; dmu] = [-a; 0]`.
fn kkt_direction(
    h: &DMatrix<f64>,
    normals: &[DVector<f64>],
    a: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let m = normals.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    for (j, nj) in normals.iter().enumerate() {
        k.view_mut((0, n + j), (n, 1)).copy_from(nj);
        k.view_mut((n + j, 0), (1, n)).copy_from(&nj.transpose());
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-a));
    let sol = k.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

pub fn solve(p: &QpProblem) -> std::result::Result<QpSolution, QpError> {
    p.check()?;
    let n = p.dim();
    let chol = Cholesky::<f64, Dyn>::new(p.h.clone()).ok_or(QpError::NotPositiveDefinite)?;
    let mut z = -chol.solve(&p.f);

    let all = p.constraints();
    let max_iter = 50 * (n + p.rows.len()).max(1);
    let mut active: Vec<ConstraintRef> = Vec::new();
    let mut normals: Vec<DVector<f64>> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut iterations = 0usize;

    let finish = |status: QpStatus,
                  z: Vec<f64>,
                  active: &[ConstraintRef],
                  mult: &[f64],
                  iterations: usize| {
        let mut sol = QpSolution {
            status,
            z,
            row_multipliers: vec![0.0; p.rows.len()],
            upper_multipliers: vec![0.0; n],
            lower_multipliers: vec![0.0; n],
            active: active.to_vec(),
            iterations,
        };
        if status == QpStatus::Optimal {
            for (c, &m) in active.iter().zip(mult) {
                match *c {
                    ConstraintRef::Row(k) => sol.row_multipliers[k] = m,
                    ConstraintRef::Upper(i) => sol.upper_multipliers[i] = m,
                    ConstraintRef::Lower(i) => sol.lower_multipliers[i] = m,
                }
            }
        }
        sol
    };

    loop {
        // most violated inactive constraint, lowest index on ties
        let mut pick: Option<(ConstraintRef, f64)> = None;
        for &c in &all {
            if active.contains(&c) {
                continue;
            }
            let b = p.rhs(c);
            let viol = p.value(c, &z) - b;
            if viol > feasibility_tol(b) && pick.is_none_or(|(_, v)| viol > v) {
                pick = Some((c, viol));
            }
        }
        let Some((cand, _)) = pick else {
            return Ok(finish(
                QpStatus::Optimal,
                z.iter().copied().collect(),
                &active,
                &mult,
                iterations,
            ));
        };
        let (a_p, b_p) = p.normal(cand);
        let hinv_a = chol.solve(&a_p);
        let scale = a_p.dot(&hinv_a);
        let mut cand_mult = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                let max_violation = all
                    .iter()
                    .map(|&c| p.value(c, &z) - p.rhs(c))
                    .fold(0.0, f64::max);
                return Err(QpError::IterationLimit {
                    iterations,
                    max_violation,
                    active: active.len(),
                });
            }
            let (dz, dmu) = kkt_direction(&p.h, &normals, &a_p).ok_or(QpError::SingularKkt {
                active: active.len(),
            })?;
            let slope = -a_p.dot(&dz);

            // largest dual step keeping active multipliers non-negative
            let mut dual_step: Option<(usize, f64)> = None;
            for (j, (&mu, &d)) in mult.iter().zip(dmu.iter()).enumerate() {
                if d < 0.0 {
                    let t = -mu / d;
                    if dual_step.is_none_or(|(_, best)| t < best) {
                        dual_step = Some((j, t));
                    }
                }
            }

            if slope <= 1e-12 * scale {
                // candidate is linearly dependent on the working set
                let Some((drop, t)) = dual_step else {
                    return Ok(finish(
                        QpStatus::Infeasible,
                        Vec::new(),
                        &active,
                        &mult,
                        iterations,
                    ));
                };
                for (m, d) in mult.iter_mut().zip(dmu.iter()) {
                    *m += t * d;
                }
                cand_mult += t;
                active.remove(drop);
                normals.remove(drop);
                mult.remove(drop);
                continue;
            }

            let primal_t = (a_p.dot(&z) - b_p) / slope;
            let (t, drop) = match dual_step {
                Some((j, td)) if td < primal_t => (td, Some(j)),
                _ => (primal_t, None),
            };
            z += &dz * t;
            for (m, d) in mult.iter_mut().zip(dmu.iter()) {
                *m += t * d;
            }
            cand_mult += t;
            match drop {
                Some(j) => {
                    active.remove(j);
                    normals.remove(j);
                    mult.remove(j);
                }
                None => {
                    active.push(cand);
                    normals.push(a_p.clone());
                    mult.push(cand_mult);
                    for m in mult.iter_mut() {
                        if *m < 0.0 {
                            *m = 0.0;
                        }
                    }
                    break;
                }
            }
        }
    }
}

/// Per-robot wheel acceleration box `(lower, upper)`.
pub type WheelBounds = ([f64; 2], [f64; 2]);

/// Builds the centralized QP over the stacked wheel accelerations of all
/// robots. The tracking objective of robot `i` is
/// `|W^(1/2) (Gamma_i udot_i - dzr_i)|^2` with `W = diag(1, 1, heading_weight)`.
pub fn assemble(
    nominals: &[(NominalCommand, KinematicMatrices)],
    rows: &[ConstraintRow],
    bounds: &[WheelBounds],
    heading_weight: f64,
) -> Result<QpProblem> {
    let n_robots = nominals.len();
    if n_robots == 0 {
        return Err(Error::invalid("robots", "QP needs at least one robot"));
    }
    if bounds.len() != n_robots {
        return Err(QpError::Dimension("one bound pair per robot".into()).into());
    }
    let n = 2 * n_robots;
    let mut h = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    let mut lb = vec![0.0; n];
    let mut ub = vec![0.0; n];
    for (i, (cmd, mats)) in nominals.iter().enumerate() {
        let mut weighted = mats.gamma;
        weighted.row_mut(2).scale_mut(heading_weight);
        let block = mats.gamma.transpose() * weighted;
        let det = block.determinant();
        let size = block.norm_squared();
        if det.is_nan() || det <= 1e-14 * size {
            return Err(Error::SingularHessian { robot: i });
        }
        h.view_mut((2 * i, 2 * i), (2, 2)).copy_from(&block);
        let lin = -(weighted.transpose() * cmd.dzr);
        f[2 * i] = lin[0];
        f[2 * i + 1] = lin[1];
        let (lo, hi) = bounds[i];
        lb[2 * i..2 * i + 2].copy_from_slice(&lo);
        ub[2 * i..2 * i + 2].copy_from_slice(&hi);
    }
    Ok(QpProblem {
        h,
        f,
        lb,
        ub,
        rows: rows.iter().map(|r| (r.dense(), r.rhs)).collect(),
    })
}

/// Maximal deceleration towards zero wheel speed, used when the QP is
/// infeasible.
pub fn fallback_brake(states: &[RobotState], bounds: &[WheelBounds], dt: f64) -> Vec<f64> {
    states
        .iter()
        .zip(bounds)
        .flat_map(|(s, (lo, hi))| {
            [
                (-s.u[0] / dt).clamp(lo[0], hi[0]),
                (-s.u[1] / dt).clamp(lo[1], hi[1]),
            ]
        })
        .collect()
}
