//! The scaled routing controller `u = K diag(lambda) x` and its certificates.
//!
//! The unconstrained-optimal gain `K` usually violates capacity bounds, so
//! each vertex's outflow is scaled by `lambda_i` in `(0, 1]`. The scaling is
//! admissible — every state in the box produces an in-cap control and a
//! next state inside the box — exactly when
//!
//! ```text
//! K L x_max <= u_max        (edge-cap rows)
//! B K L x_max <= 0          (upstream-state rows),     L = diag(lambda),
//! ```
//!
//! i.e. it suffices to check the single worst state `x = x_max`. The set of
//! admissible scalings is written `L` below. For `lambda` in `L` the
//! closed-loop cost is exactly linear, `J(x0) = p_hat' x0`, with
//!
//! ```text
//! p_hat = -(BK)^-T (L^-1 s + K' r),
//! ```
//!
//! computable by back-substitution along the routing tree:
//! `p_hat_i = s_i / lambda_i + r_sel(i) + p_hat_nu(i)`. The scalar
//! `gamma = max_i p_hat_i / s_i` then certifies `V_N(x) <= gamma * s'x`
//! for every horizon, which is what the MPC horizon formulas consume.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Head;
use crate::model::{CapacityBounds, CostWeights};
use crate::synthesis::Synthesis;

/// Relative slack allowed when deciding membership of a constraint row.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

/// A per-vertex outflow scaling with entries in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambda {
    values: DVector<f64>,
}

impl Lambda {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::LambdaOutOfRange { vertex: i + 1, value: v });
            }
        }
        Ok(Lambda { values })
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }
}

/// One violated row of the admissibility system, normalized by its bound.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `(K L x_max)_edge > u_max_edge`; `excess` is the normalized overshoot.
    EdgeCap { edge: usize, lhs: f64, bound: f64, excess: f64 },
    /// `(B K L x_max)_vertex > 0`; `excess` is the overshoot relative to
    /// `x_max_vertex`.
    UpstreamState { vertex: usize, lhs: f64, excess: f64 },
}

/// Outcome of the admissibility test for a scaling.
#[derive(Debug, Clone)]
pub struct MembershipReport {
    pub is_member: bool,
    pub violations: Vec<Violation>,
}

/// Decides `lambda in L`: checks `K L x_max <= u_max` and `B K L x_max <= 0`
/// with tolerance [`MEMBERSHIP_TOL`] on rows normalized by their bound
/// (`u_max` for cap rows, `x_max` for state rows).
pub fn membership(
    lambda: &Lambda,
    syn: &Synthesis,
    bounds: &CapacityBounds,
) -> MembershipReport {
    let scaled_xmax = lambda.values().component_mul(&bounds.x_max);
    let cap_lhs = &syn.gain.k * &scaled_xmax;
    let state_lhs = (&syn.b * &syn.gain.k) * &scaled_xmax;

    let mut violations = Vec::new();
    for k in 0..cap_lhs.len() {
        let normalized = cap_lhs[k] / bounds.u_max[k] - 1.0;
        if normalized > MEMBERSHIP_TOL {
            violations.push(Violation::EdgeCap {
                edge: k,
                lhs: cap_lhs[k],
                bound: bounds.u_max[k],
                excess: normalized,
            });
        }
    }
    for i in 0..state_lhs.len() {
        let normalized = state_lhs[i] / bounds.x_max[i];
        if normalized > MEMBERSHIP_TOL {
            violations.push(Violation::UpstreamState {
                vertex: i,
                lhs: state_lhs[i],
                excess: normalized,
            });
        }
    }
    MembershipReport { is_member: violations.is_empty(), violations }
}

/// Constructs a scaling in `L`.
///
/// Takes `v = sum_{j=0}^{n-1} (B~K)^j 1`, which is positive and satisfies
/// `B~K v = v - 1` (the series telescopes and `(B~K)^n = 0`), and sets
/// `lambda_i = a v_i / x_max_i` with `a > 0` shrunk until `lambda <= 1` and
/// every cap row holds. The upstream rows then hold strictly:
/// `(B K L x_max)_i = a ((B~K v)_i - v_i) = -a < 0`.
pub fn feasible_lambda(syn: &Synthesis, bounds: &CapacityBounds) -> Lambda {
    let n = syn.b.nrows();
    let btk = &syn.b_tilde * &syn.gain.k;
    let ones = DVector::from_element(n, 1.0);
    let mut v = ones.clone();
    let mut term = ones.clone();
    for _ in 1..n {
        term = &btk * &term;
        v += &term;
    }

    let mut alpha = f64::INFINITY;
    for i in 0..n {
        // lambda_i <= 1
        alpha = alpha.min(bounds.x_max[i] / v[i]);
        // cap row of the selected edge: lambda_i x_max_i <= u_max_sel(i)
        alpha = alpha.min(bounds.u_max[syn.gain.selected_edge[i]] / v[i]);
    }
    // At the binding coordinate the quotient is exactly 1 in reals but can
    // round one ulp above it; clamp that overshoot away.
    let values = DVector::from_fn(n, |i, _| (alpha * v[i] / bounds.x_max[i]).min(1.0));
    Lambda::new(values).expect("constructive scaling is in (0, 1] by choice of alpha")
}

/// Exact closed-loop cost vector of the scaled controller:
/// `p_hat = -(BK)^-T (L^-1 s + K' r)`, evaluated by back-substitution
/// `p_hat_i = s_i / lambda_i + r_sel(i) + p_hat_nu(i)` along the routing
/// tree. Requires `lambda in L`.
pub fn closed_loop_cost_vector(
    lambda: &Lambda,
    syn: &Synthesis,
    costs: &CostWeights,
    bounds: &CapacityBounds,
) -> Result<DVector<f64>> {
    let report = membership(lambda, syn, bounds);
    if !report.is_member {
        return Err(Error::LambdaNotAdmissible {
            reason: describe_violations(&report.violations),
        });
    }
    Ok(cost_vector_unchecked(lambda, syn, costs))
}

/// `p_hat` recursion without the membership precondition. Exposed for the
/// tuner, which evaluates candidate scalings before they are certified.
pub fn cost_vector_unchecked(
    lambda: &Lambda,
    syn: &Synthesis,
    costs: &CostWeights,
) -> DVector<f64> {
    let n = lambda.len();
    let mut p_hat = vec![f64::NAN; n];
    for start in 0..n {
        if !p_hat[start].is_nan() {
            continue;
        }
        // Walk to the goal or to a vertex already evaluated, then unwind.
        let mut path = Vec::new();
        let mut cursor = start;
        let mut base = 0.0;
        loop {
            if !p_hat[cursor].is_nan() {
                base = p_hat[cursor];
                break;
            }
            path.push(cursor);
            match syn.gain.nu[cursor] {
                Head::Goal => break,
                Head::Vertex(j) => cursor = j,
            }
        }
        for &i in path.iter().rev() {
            base += costs.s[i] / lambda.values()[i] + costs.r[syn.gain.selected_edge[i]];
            p_hat[i] = base;
        }
    }
    DVector::from_vec(p_hat)
}

/// The uniform cost-bound ratio `gamma = max_i p_hat_i / s_i` (at least 1,
/// since `p_hat >= L^-1 s >= s`).
pub fn gamma_of(p_hat: &DVector<f64>, s: &DVector<f64>) -> f64 {
    p_hat
        .iter()
        .zip(s.iter())
        .map(|(&ph, &si)| ph / si)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A certified scaling: its exact cost vector and cost-bound ratio.
#[derive(Debug, Clone)]
pub struct ClosedLoopCertificate {
    pub p_hat: DVector<f64>,
    pub gamma: f64,
}

/// Certifies `lambda in L` and evaluates its cost vector and `gamma`.
pub fn certify(
    lambda: &Lambda,
    syn: &Synthesis,
    costs: &CostWeights,
    bounds: &CapacityBounds,
) -> Result<ClosedLoopCertificate> {
    let p_hat = closed_loop_cost_vector(lambda, syn, costs, bounds)?;
    let gamma = gamma_of(&p_hat, &costs.s);
    Ok(ClosedLoopCertificate { p_hat, gamma })
}

/// Applies the scaled feedback: `u = K L x`.
pub fn scaled_feedback_apply(lambda: &Lambda, k: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    k * lambda.values().component_mul(x)
}

fn describe_violations(violations: &[Violation]) -> String {
    let parts: Vec<String> = violations
        .iter()
        .map(|v| match v {
            Violation::EdgeCap { edge, lhs, bound, .. } => {
                format!("edge {} cap: {:.6} > {:.6}", edge + 1, lhs, bound)
            }
            Violation::UpstreamState { vertex, lhs, .. } => {
                format!("state row of vertex {}: {:.6} > 0", vertex + 1, lhs)
            }
        })
        .collect();
    parts.join("; ")
}
