//! The active-set QP solver on its own: project (1, 1) onto the halfspace
//! z1 + z2 <= 1 inside a box.

use nalgebra::{DMatrix, DVector};

use mrsafe::qp::{solve, QpProblem};

fn main() {
    let p = QpProblem {
        h: DMatrix::identity(2, 2) * 2.0,
        f: DVector::from_vec(vec![-2.0, -2.0]),
        lb: vec![-1.0, -1.0],
        ub: vec![0.8, 2.0],
        rows: vec![(vec![1.0, 1.0], 1.0)],
    };
    let sol = solve(&p).expect("well-posed problem");
    println!("status     {:?}", sol.status);
    println!("z          {:?}", sol.z);
    println!("objective  {:.6}", p.objective(&sol.z));
    println!("row mu     {:?}", sol.row_multipliers);
    println!("upper mu   {:?}", sol.upper_multipliers);
    println!(
        "active     {:?} after {} iterations",
        sol.active, sol.iterations
    );

    // a second row that contradicts the first
    let mut bad = p.clone();
    bad.rows.push((vec![-1.0, -1.0], -1.5));
    println!("contradictory rows: {:?}", solve(&bad).unwrap().status);
}
