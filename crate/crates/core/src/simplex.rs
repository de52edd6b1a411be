//! A deterministic dense revised simplex method for inequality-form
//! linear programs
//!
//! ```text
//! minimize    c . x
//! subject to  A x <= b,   x >= 0,   b >= 0.
//! ```
//!
//! The nonnegative right-hand side makes the all-slack basis feasible, so
//! no phase-1 subproblem is ever needed; the finite-horizon builder in
//! [`crate::ocp`] produces exactly this form. Pivoting follows Bland's
//! rule (lowest eligible variable index enters; ratio-test ties break to
//! the lowest basic variable index), which makes every run reproducible
//! bit for bit and rules out cycling on degenerate vertices. The basis
//! inverse is kept explicitly and updated by rank-1 eta steps, with a
//! periodic refactorization from scratch to shed accumulated roundoff.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Feasibility, pricing and pivot tolerance.
const PIVOT_TOL: f64 = 1e-9;

/// Rebuild the basis inverse from scratch this often.
const REFACTOR_INTERVAL: usize = 128;

/// An inequality-form linear program.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// An optimal basic solution.
#[derive(Debug, Clone)]
pub struct LpSolution {
    /// Structural variables only (slacks are dropped).
    pub x: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Basic variable indices; `0..n` structural, `n..n+m` slack of row `i - n`.
    pub basis: Vec<usize>,
}

/// Solves the program, visiting at most `max_iterations` vertices.
pub fn solve_lp(problem: &LpProblem, max_iterations: usize) -> Result<LpSolution> {
    let m = problem.a.nrows();
    let n = problem.a.ncols();
    if problem.b.len() != m || problem.c.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "LP with {m}x{n} constraint matrix, {} bounds and {} objective entries",
            problem.b.len(),
            problem.c.len()
        )));
    }
    if let Some(i) = (0..m).find(|&i| problem.b[i] < -PIVOT_TOL) {
        return Err(Error::InfeasibleInput(format!(
            "row {} has a negative bound ({}); the origin must be feasible",
            i + 1,
            problem.b[i]
        )));
    }

    // Start from the all-slack basis.
    let mut basis: Vec<usize> = (n..n + m).collect();
    let mut in_basis = vec![false; n + m];
    for &j in &basis {
        in_basis[j] = true;
    }
    let mut inv = DMatrix::<f64>::identity(m, m);
    let mut x_b = problem.b.clone();

    let column = |j: usize| -> DVector<f64> {
        if j < n {
            problem.a.column(j).into_owned()
        } else {
            let mut e = DVector::zeros(m);
            e[j - n] = 1.0;
            e
        }
    };

    let mut iterations = 0;
    loop {
        if iterations >= max_iterations {
            return Err(Error::MaxIterations { limit: max_iterations });
        }

        // Simplex multipliers y = B^-T c_B, then Bland pricing: the lowest
        // variable index with a favorable reduced cost enters.
        let c_b = DVector::from_fn(m, |i, _| {
            let j = basis[i];
            if j < n {
                problem.c[j]
            } else {
                0.0
            }
        });
        let y = inv.tr_mul(&c_b);
        let a_t_y = problem.a.tr_mul(&y);
        let mut entering = None;
        for j in 0..n + m {
            if in_basis[j] {
                continue;
            }
            let reduced = if j < n {
                problem.c[j] - a_t_y[j]
            } else {
                -y[j - n]
            };
            if reduced < -PIVOT_TOL {
                entering = Some(j);
                break;
            }
        }
        let entering = match entering {
            Some(j) => j,
            None => break,
        };

        // Ratio test on the transformed column; ties break to the lowest
        // basic variable index (Bland).
        let w = &inv * column(entering);
        let mut leaving_row: Option<usize> = None;
        let mut theta = f64::INFINITY;
        for i in 0..m {
            if w[i] > PIVOT_TOL {
                let ratio = x_b[i] / w[i];
                let better = match leaving_row {
                    None => true,
                    Some(r) => {
                        ratio < theta - PIVOT_TOL
                            || (ratio < theta + PIVOT_TOL && basis[i] < basis[r])
                    }
                };
                if better {
                    leaving_row = Some(i);
                    theta = ratio;
                }
            }
        }
        let r = leaving_row.ok_or(Error::Unbounded)?;
        let theta = theta.max(0.0);

        // Eta update of the inverse: inv <- (I - (w - e_r) e_r^T / w_r) inv.
        let pivot = w[r];
        let row_r = inv.row(r).transpose();
        let mut u = w.clone();
        u[r] -= 1.0;
        u /= pivot;
        inv.ger(-1.0, &u, &row_r, 1.0);

        for i in 0..m {
            if i != r {
                x_b[i] -= theta * w[i];
            }
        }
        x_b[r] = theta;

        in_basis[basis[r]] = false;
        in_basis[entering] = true;
        basis[r] = entering;
        iterations += 1;

        if iterations % REFACTOR_INTERVAL == 0 {
            let mut bmat = DMatrix::zeros(m, m);
            for (i, &j) in basis.iter().enumerate() {
                bmat.set_column(i, &column(j));
            }
            inv = bmat
                .lu()
                .try_inverse()
                .ok_or_else(|| Error::NumericalFailure("singular working basis".to_string()))?;
            x_b = &inv * &problem.b;
        }

        // Degenerate pivots can leave microscopic negatives behind.
        for v in x_b.iter_mut() {
            if *v < 0.0 {
                debug_assert!(*v > -1e-6, "basic variable went negative: {v}");
                *v = 0.0;
            }
        }
    }

    let mut x = DVector::zeros(n);
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = x_b[i];
        }
    }
    Ok(LpSolution {
        objective: problem.c.dot(&x),
        x,
        iterations,
        basis,
    })
}
