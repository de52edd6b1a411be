//! Finite-horizon optimal transport over the network as a linear program.
//!
//! The horizon-`N` problem from state `x0` is
//!
//! ```text
//! minimize    sum_{t=0}^{N-1}  s . x(t) + r . u(t)
//! subject to  x(t+1) = x(t) + B u(t),
//!             0 <= u(t) <= u_max,  sum_{k in out(i)} u_k(t) <= x_i(t),
//!             0 <= x(t) <= x_max,
//! ```
//!
//! with the states eliminated through `x(t) = x0 + B sum_{tau<t} u(tau)`.
//! The decision vector stacks `u(0), ..., u(N-1)`; the objective becomes
//! `sum_tau ((N-1-tau) B's + r) . u(tau)` plus the constant `N s.x0`,
//! which is kept out of the LP and added back when reporting values.
//!
//! Constraint rows are emitted in a fixed order (edge caps, then mass
//! conservation, then state upper bounds, then state lower bounds, each
//! block time-major), so identical inputs produce identical programs and,
//! with the deterministic solver in [`crate::simplex`], identical optimal
//! bases. Every right-hand side is nonnegative by construction — caps and
//! box bounds are nonnegative, and mass rows move the accumulated flow to
//! the left-hand side — so the all-slack basis is always a feasible start.
//! The state lower bounds are implied by the mass rows and `u >= 0`, but
//! they are kept so the emitted program matches its documentation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::ProblemInstance;
use crate::simplex::{solve_lp, LpProblem, LpSolution};

/// Vertex cap for the LP solver; generous because Bland's rule terminates
/// finitely and these programs stay small.
pub const DEFAULT_LP_ITERATION_CAP: usize = 200_000;

/// An assembled finite-horizon program.
#[derive(Debug, Clone)]
pub struct OcpProblem {
    pub horizon: u32,
    pub n: usize,
    pub m: usize,
    pub x0: DVector<f64>,
    pub lp: LpProblem,
    /// `N s.x0`, excluded from the LP objective.
    pub constant: f64,
}

/// An optimal open-loop plan.
#[derive(Debug, Clone)]
pub struct OcpSolution {
    /// `u(0), ..., u(N-1)`.
    pub controls: Vec<DVector<f64>>,
    /// `x(0), ..., x(N)`, forward-simulated from the controls.
    pub states: Vec<DVector<f64>>,
    /// Full objective value including the constant term.
    pub objective: f64,
    pub lp_iterations: usize,
}

/// Assembles the horizon-`N` program from `x0`.
pub fn build_ocp(inst: &ProblemInstance, x0: &DVector<f64>, horizon: u32) -> Result<OcpProblem> {
    let bounds = inst.require_bounds("a finite-horizon transport program")?;
    if horizon < 1 {
        return Err(Error::HorizonTooShort { n: horizon });
    }
    let n = inst.n();
    let m = inst.m();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries for a network with {n} vertices",
            x0.len()
        )));
    }
    for i in 0..n {
        if !(x0[i] >= 0.0) || x0[i] > bounds.x_max[i] + 1e-12 {
            return Err(Error::X0OutOfBounds { vertex: i + 1, value: x0[i] });
        }
    }

    let big_n = horizon as usize;
    let b = inst.graph.incidence_matrix();
    let bts = b.tr_mul(&inst.costs.s);

    let vars = m * big_n;
    let rows = m * big_n + 3 * n * big_n;
    let mut a = DMatrix::<f64>::zeros(rows, vars);
    let mut rhs = DVector::<f64>::zeros(rows);
    let mut c = DVector::<f64>::zeros(vars);

    for tau in 0..big_n {
        let weight = (big_n - 1 - tau) as f64;
        for k in 0..m {
            c[tau * m + k] = weight * bts[k] + inst.costs.r[k];
        }
    }

    let mut row = 0;
    // Edge caps: u_k(t) <= u_max_k.
    for t in 0..big_n {
        for k in 0..m {
            a[(row, t * m + k)] = 1.0;
            rhs[row] = bounds.u_max[k];
            row += 1;
        }
    }
    // Mass conservation: out-flow at t minus accumulated net flow <= x0_i.
    for t in 0..big_n {
        for i in 0..n {
            for k in inst.graph.out_range(i) {
                a[(row, t * m + k)] = 1.0;
            }
            for tau in 0..t {
                for k in 0..m {
                    a[(row, tau * m + k)] -= b[(i, k)];
                }
            }
            rhs[row] = x0[i];
            row += 1;
        }
    }
    // State upper bounds: accumulated net flow <= x_max_i - x0_i, t = 1..N.
    for t in 1..=big_n {
        for i in 0..n {
            for tau in 0..t {
                for k in 0..m {
                    a[(row, tau * m + k)] = b[(i, k)];
                }
            }
            rhs[row] = bounds.x_max[i] - x0[i];
            row += 1;
        }
    }
    // State lower bounds: -(accumulated net flow) <= x0_i, t = 1..N.
    for t in 1..=big_n {
        for i in 0..n {
            for tau in 0..t {
                for k in 0..m {
                    a[(row, tau * m + k)] = -b[(i, k)];
                }
            }
            rhs[row] = x0[i];
            row += 1;
        }
    }
    debug_assert_eq!(row, rows);

    Ok(OcpProblem {
        horizon,
        n,
        m,
        x0: x0.clone(),
        lp: LpProblem { c, a, b: rhs },
        constant: (big_n as f64) * inst.costs.s.dot(x0),
    })
}

/// Solves an assembled program and reconstructs the trajectory.
pub fn solve_ocp(inst: &ProblemInstance, problem: &OcpProblem) -> Result<OcpSolution> {
    let sol: LpSolution = solve_lp(&problem.lp, DEFAULT_LP_ITERATION_CAP)?;
    let m = problem.m;
    let big_n = problem.horizon as usize;
    let b = inst.graph.incidence_matrix();

    let controls: Vec<DVector<f64>> = (0..big_n)
        .map(|t| DVector::from_fn(m, |k, _| sol.x[t * m + k]))
        .collect();
    let mut states = Vec::with_capacity(big_n + 1);
    states.push(problem.x0.clone());
    for u in &controls {
        let next = states.last().unwrap() + &b * u;
        states.push(next);
    }

    let objective = sol.objective + problem.constant;
    if cfg!(debug_assertions) {
        let replay: f64 = (0..big_n)
            .map(|t| inst.costs.s.dot(&states[t]) + inst.costs.r.dot(&controls[t]))
            .sum();
        debug_assert!(
            (replay - objective).abs() <= 1e-9 * objective.abs().max(1.0),
            "objective {objective} disagrees with trajectory replay {replay}"
        );
    }

    Ok(OcpSolution {
        controls,
        states,
        objective,
        lp_iterations: sol.iterations,
    })
}

/// The optimal horizon-`N` value from `x0`.
pub fn value_function(inst: &ProblemInstance, x0: &DVector<f64>, horizon: u32) -> Result<f64> {
    let problem = build_ocp(inst, x0, horizon)?;
    Ok(solve_ocp(inst, &problem)?.objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::parse_instance;
    use nalgebra::dvector;

    fn single_vertex(r: f64, u_max: f64) -> ProblemInstance {
        let json = format!(
            r#"{{
                "n": 1,
                "edges": [ {{ "from": 1, "to": "goal", "r": {r}, "u_max": {u_max} }} ],
                "s": [1.0],
                "x_max": [1.0]
            }}"#
        );
        parse_instance(&json).unwrap()
    }

    #[test]
    fn single_vertex_two_step_value() {
        // J = x(0) + x(1) + u(0) + u(1): moving at t=0 trades one unit of
        // holding cost for one unit of transport cost, so u = 0 is optimal
        // (and is what the lowest-index pivot rule returns) with value 2.
        let inst = single_vertex(1.0, 1.0);
        let problem = build_ocp(&inst, &dvector![1.0], 2).unwrap();
        assert_eq!(problem.constant, 2.0);
        let sol = solve_ocp(&inst, &problem).unwrap();
        assert!((sol.objective - 2.0).abs() < 1e-9);
        assert_eq!(sol.controls[0], dvector![0.0]);
        assert_eq!(sol.controls[1], dvector![0.0]);
    }

    #[test]
    fn cap_does_not_change_an_indifferent_plan() {
        let inst = single_vertex(1.0, 0.5);
        assert!((value_function(&inst, &dvector![1.0], 2).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cheap_transport_moves_immediately() {
        // With r = 0.2 the same trade nets 0.8 per unit, so everything
        // ships at t = 0: J = 1 + 0 + 0.2 = 1.2.
        let inst = single_vertex(0.2, 1.0);
        let sol = solve_ocp(&inst, &build_ocp(&inst, &dvector![1.0], 2).unwrap()).unwrap();
        assert!((sol.objective - 1.2).abs() < 1e-9);
        assert_eq!(sol.controls[0], dvector![1.0]);
        assert!((sol.states[1][0]).abs() < 1e-12);
    }

    #[test]
    fn empty_network_costs_nothing() {
        let inst = fixtures::reference_instance();
        let v = value_function(&inst, &dvector![0.0, 0.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn relaxed_caps_reach_the_bellman_value() {
        // With caps far above every flow, the horizon-N value saturates at
        // the routing value p . x0 = 40 once N covers the longest path
        // plus the final hand-off into the goal. At N = 3 the longest
        // route (three hops from vertex 1) fits, but its last hop buys
        // nothing inside the horizon, so the optimum skips that transport
        // fee and lands one unit short.
        let inst = fixtures::reference_instance().with_uniform_bounds(1e6);
        let ones = DVector::from_element(5, 1.0);
        let v1 = value_function(&inst, &ones, 1).unwrap();
        assert!((v1 - 21.0).abs() < 1e-9, "{v1}");
        let v2 = value_function(&inst, &ones, 2).unwrap();
        assert!(v2 > v1 && v2 < 39.0);
        let v3 = value_function(&inst, &ones, 3).unwrap();
        assert!((v3 - 39.0).abs() < 1e-9, "{v3}");
        for n in [4, 6] {
            let v = value_function(&inst, &ones, n).unwrap();
            assert!((v - 40.0).abs() < 1e-6, "horizon {n}: {v}");
        }
    }

    #[test]
    fn program_dimensions_and_signs() {
        let inst = fixtures::reference_instance();
        let x0 = DVector::from_element(5, 1.0);
        let problem = build_ocp(&inst, &x0, 16).unwrap();
        assert_eq!(problem.lp.a.nrows(), 9 * 16 + 3 * 5 * 16);
        assert_eq!(problem.lp.a.ncols(), 9 * 16);
        assert!(problem.lp.b.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn solutions_respect_all_bounds() {
        let inst = fixtures::reference_instance();
        let bounds = inst.bounds.as_ref().unwrap();
        let x0 = bounds.x_max.clone();
        let sol = solve_ocp(&inst, &build_ocp(&inst, &x0, 4).unwrap()).unwrap();
        for u in &sol.controls {
            for k in 0..inst.m() {
                assert!(u[k] >= -1e-9 && u[k] <= bounds.u_max[k] + 1e-9);
            }
        }
        for (t, x) in sol.states.iter().enumerate() {
            for i in 0..inst.n() {
                assert!(
                    x[i] >= -1e-9 && x[i] <= bounds.x_max[i] + 1e-9,
                    "state bound breached at t={t}, vertex {}",
                    i + 1
                );
            }
        }
        // Mass conservation: out-flow never exceeds what is present.
        for (t, u) in sol.controls.iter().enumerate() {
            for i in 0..inst.n() {
                let out: f64 = inst.graph.out_range(i).map(|k| u[k]).sum();
                assert!(out <= sol.states[t][i] + 1e-9);
            }
        }
    }

    #[test]
    fn objective_equals_trajectory_replay() {
        let inst = fixtures::reference_instance();
        let x0 = DVector::from_element(5, 1.0);
        let sol = solve_ocp(&inst, &build_ocp(&inst, &x0, 6).unwrap()).unwrap();
        let replay: f64 = (0..6)
            .map(|t| inst.costs.s.dot(&sol.states[t]) + inst.costs.r.dot(&sol.controls[t]))
            .sum();
        assert!((replay - sol.objective).abs() <= 1e-9 * sol.objective.max(1.0));
    }

    #[test]
    fn validates_inputs() {
        let inst = fixtures::reference_instance();
        let ok = DVector::from_element(5, 0.5);
        assert!(matches!(
            build_ocp(&inst, &ok, 0),
            Err(Error::HorizonTooShort { n: 0 })
        ));
        assert!(matches!(
            build_ocp(&inst, &dvector![0.5, 0.5, 0.5, 0.5, 1.5], 2),
            Err(Error::X0OutOfBounds { vertex: 5, .. })
        ));
        assert!(matches!(
            build_ocp(&inst, &dvector![-0.1, 0.5, 0.5, 0.5, 0.5], 2),
            Err(Error::X0OutOfBounds { vertex: 1, .. })
        ));
        assert!(matches!(
            build_ocp(&inst, &dvector![0.5, 0.5], 2),
            Err(Error::DimensionMismatch(_))
        ));
        let unbounded = fixtures::unconstrained_reference_instance();
        assert!(matches!(
            build_ocp(&unbounded, &ok, 2),
            Err(Error::BoundsRequired(_))
        ));
    }
}
