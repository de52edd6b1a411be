//! Unconstrained optimal synthesis: the value vector `p`, the routing gain
//! `K`, the successor map `nu`, and the split `BK = B~K - I`.
//!
//! For dynamics `x(t+1) = x(t) + Bu(t)` with stage cost `l(x,u) = s'x + r'u`
//! and no capacity bounds, the optimal cost-to-go is linear, `V(x) = p'x`,
//! where `p > 0` is the unique solution of the per-vertex Bellman equation
//!
//! ```text
//! p_i = s_i + min_k { r_ik + p_head(i,k) },      p_goal = 0.
//! ```
//!
//! Equivalently, `p_i` is the cost of the cheapest goal path from vertex `i`
//! counting `s_j` at every visited vertex and `r` on every used edge. The
//! optimal policy routes all commodity at vertex `i` along the first
//! minimizing edge; stacking the selected rows gives the 0/1 gain `K` with
//! `u = Kx`. Splitting `B` into its positive part `B~` yields
//! `BK = B~K - I`, and `B~K` is nilpotent because selected edges only move
//! commodity strictly closer to the goal.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{Head, RoutingGraph};
use crate::model::CostWeights;

/// The value vector `p` with the residual of its fixed-point equation.
#[derive(Debug, Clone)]
pub struct ValueVector {
    /// Optimal cost-to-go per vertex; strictly positive.
    pub p: DVector<f64>,
    /// Elementwise evaluation of `s_i + min{min_k (r_i + B_i'p)_k, 0}`;
    /// zero (up to 1e-9) at a valid solution.
    pub residual: DVector<f64>,
}

/// The routing gain `u = Kx` together with its combinatorial structure.
#[derive(Debug, Clone)]
pub struct FeedbackGain {
    /// m x n selector matrix; block `i` has the single row `e_i'` at the
    /// selected edge of vertex `i`.
    pub k: DMatrix<f64>,
    /// Successor map: where vertex `i` routes to.
    pub nu: Vec<Head>,
    /// Canonical index of the selected edge per vertex.
    pub selected_edge: Vec<usize>,
}

/// Everything the downstream controller and tuner need: `p`, `K`, `B`, `B~`.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub value: ValueVector,
    pub gain: FeedbackGain,
    /// Incidence matrix `B` (n x m).
    pub b: DMatrix<f64>,
    /// Positive part `B~` of `B` (n x m): only the `+1` entries.
    pub b_tilde: DMatrix<f64>,
}

/// Solves the Bellman fixed-point equation for the value vector.
///
/// Jacobi sweeps starting from `p = +inf` (with `p_goal = 0`): after `k`
/// sweeps, `p_i` is the cost of the cheapest goal path from `i` using at
/// most `k` edges, so `n` sweeps reach the exact fixed point (a cheapest
/// path is simple and uses at most `n` edges). Requires every vertex to
/// reach the goal and `s > 0`.
pub fn solve_value_vector(g: &RoutingGraph, costs: &CostWeights) -> Result<ValueVector> {
    let n = g.n();
    for (i, &si) in costs.s.iter().enumerate() {
        if !(si > 0.0) {
            return Err(Error::NonpositiveS { vertex: i + 1, value: si });
        }
    }
    let reach = g.goal_reachable();
    if let Some(i) = reach.iter().position(|&r| !r) {
        return Err(Error::UnreachableGoal { vertex: i + 1 });
    }

    let mut p = DVector::from_element(n, f64::INFINITY);
    for _ in 0..n {
        let mut next = DVector::from_element(n, f64::INFINITY);
        for i in 0..n {
            let mut best = f64::INFINITY;
            for k in g.out_range(i) {
                let downstream = match g.edges()[k].head {
                    Head::Goal => 0.0,
                    Head::Vertex(j) => p[j],
                };
                best = best.min(costs.r[k] + downstream);
            }
            next[i] = costs.s[i] + best;
        }
        p = next;
    }

    // Residual of s + sum_i min{min_k (r_i + B_i'p)_k, 0} e_i = 0. At the
    // fixed point the inner minimum equals -s_i < 0, so the 0-branch is
    // inactive; it matters only for malformed p.
    let mut residual = DVector::zeros(n);
    for i in 0..n {
        let mut best = f64::INFINITY;
        for k in g.out_range(i) {
            let downstream = match g.edges()[k].head {
                Head::Goal => 0.0,
                Head::Vertex(j) => p[j],
            };
            best = best.min(costs.r[k] + downstream - p[i]);
        }
        residual[i] = costs.s[i] + best.min(0.0);
    }

    Ok(ValueVector { p, residual })
}

/// Builds the routing gain: per vertex, the first minimizer (in canonical
/// edge order) of `r_ik + p_head(i,k) - p_i`.
pub fn build_feedback_gain(
    g: &RoutingGraph,
    costs: &CostWeights,
    value: &ValueVector,
) -> FeedbackGain {
    let (n, m) = (g.n(), g.m());
    let p = &value.p;
    let mut k_mat = DMatrix::zeros(m, n);
    let mut nu = Vec::with_capacity(n);
    let mut selected_edge = Vec::with_capacity(n);
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut best_edge = usize::MAX;
        for k in g.out_range(i) {
            let downstream = match g.edges()[k].head {
                Head::Goal => 0.0,
                Head::Vertex(j) => p[j],
            };
            let cand = costs.r[k] + downstream;
            if cand < best {
                best = cand;
                best_edge = k;
            }
        }
        debug_assert!(best_edge != usize::MAX, "vertex {} has no outgoing edge", i + 1);
        k_mat[(best_edge, i)] = 1.0;
        nu.push(g.edges()[best_edge].head);
        selected_edge.push(best_edge);
    }
    FeedbackGain { k: k_mat, nu, selected_edge }
}

/// Splits `B` into its positive part `B~`, checking `BK = B~K - I` exactly
/// and that `B~K` is nilpotent (no routing cycle).
pub fn split_positive_part(b: &DMatrix<f64>, gain: &FeedbackGain) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    let b_tilde = b.map(|v| if v > 0.0 { v } else { 0.0 });

    // All entries are exact small integers, so equality is exact in floats.
    let bk = b * &gain.k;
    let btk = &b_tilde * &gain.k;
    let diff = &bk - (&btk - DMatrix::<f64>::identity(n, n));
    if diff.iter().any(|&v| v != 0.0) {
        return Err(Error::CycleDetected);
    }

    // (B~K)^n = 0 iff the selected-edge routing is acyclic.
    let mut power = btk.clone();
    for _ in 1..n {
        power = &power * &btk;
    }
    if power.iter().any(|&v| v != 0.0) {
        return Err(Error::CycleDetected);
    }
    Ok(b_tilde)
}

/// Runs the full synthesis pipeline: value vector, gain, and matrix split.
pub fn synthesize(g: &RoutingGraph, costs: &CostWeights) -> Result<Synthesis> {
    let value = solve_value_vector(g, costs)?;
    let gain = build_feedback_gain(g, costs, &value);
    let b = g.incidence_matrix();
    let b_tilde = split_positive_part(&b, &gain)?;
    Ok(Synthesis { value, gain, b, b_tilde })
}
