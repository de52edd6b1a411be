//! Typed report bodies for the `--json` output mode.
//!
//! Struct field order is the JSON field order, and nothing here reads the
//! clock or the environment, so equal inputs serialize to equal bytes.

use serde::Serialize;

/// Tool version and input fingerprint stamped on every report.
#[derive(Serialize)]
pub struct Meta {
    pub version: &'static str,
    /// First 16 hex digits of the SHA-256 of the model file bytes, or
    /// `"none"` for commands that take no model.
    pub instance: String,
}

/// One canonical edge with its transport fee and routing status.
#[derive(Serialize)]
pub struct EdgeLine {
    /// 1-based canonical edge index.
    pub edge: usize,
    /// 1-based tail vertex.
    pub from: usize,
    /// Head vertex label or `"goal"`.
    pub to: String,
    pub r: f64,
    /// Whether the optimal policy routes its tail through this edge.
    pub selected: bool,
}

#[derive(Serialize)]
pub struct SynthesizeReport {
    #[serde(flatten)]
    pub meta: Meta,
    pub vertices: usize,
    pub edges: usize,
    /// Optimal cost-to-go per vertex.
    pub p: Vec<f64>,
    /// Largest fixed-point residual of `p` (zero up to roundoff).
    pub residual: f64,
    /// Successor label per vertex under the optimal policy.
    pub successors: Vec<String>,
    pub routing: Vec<EdgeLine>,
}

#[derive(Serialize)]
pub struct CertifyReport {
    #[serde(flatten)]
    pub meta: Meta,
    pub lambda: Vec<f64>,
    pub admissible: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<String>,
    /// Exact closed-loop cost vector; present only when admissible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_hat: Option<Vec<f64>>,
    /// Certified cost ratio `max_i p_hat_i / s_i`; present only when
    /// admissible.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

/// One row of the lookahead-degree table.
#[derive(Serialize)]
pub struct HorizonRow {
    pub horizon: u32,
    pub alpha: f64,
    /// Cost multiplier `1 / alpha` of the certified performance bound.
    pub factor: f64,
}

/// Horizon guarantees derived from a cost ratio alone.
#[derive(Serialize)]
pub struct HorizonReport {
    pub gamma: f64,
    /// Smallest horizon with a positive degree (never below 2).
    pub minimal_horizon: u32,
    pub table: Vec<HorizonRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_min: Option<f64>,
    /// Smallest horizon whose degree reaches `alpha_min`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smallest_horizon: Option<u32>,
}

#[derive(Serialize)]
pub struct TuneReport {
    #[serde(flatten)]
    pub meta: Meta,
    /// Best certifiable cost ratio.
    pub gamma_star: f64,
    pub lambda_star: Vec<f64>,
    pub newton_iterations: usize,
    pub kkt_residual: f64,
    /// True when the optimizer fell back to bisection accuracy.
    pub degraded_accuracy: bool,
    /// Constraint rows active at the optimum.
    pub binding_rows: Vec<String>,
    /// 1-based scaling components the optimum face is flat along; their
    /// exact values are solver-specific.
    pub flat_components: Vec<usize>,
    pub horizons: HorizonReport,
}

#[derive(Serialize)]
pub struct BoundReport {
    #[serde(flatten)]
    pub meta: Meta,
    #[serde(flatten)]
    pub horizons: HorizonReport,
}

#[derive(Serialize)]
pub struct ValueReport {
    #[serde(flatten)]
    pub meta: Meta,
    pub horizon: u32,
    pub x0: Vec<f64>,
    /// Optimal open-loop cost over the horizon.
    pub value: f64,
    pub lp_rows: usize,
    pub lp_variables: usize,
    pub lp_iterations: usize,
    /// Optimal plan, one control vector per stage.
    pub controls: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lp_file: Option<String>,
}

/// An a-priori cost guarantee checked against the realized cost.
#[derive(Serialize)]
pub struct BoundCheck {
    /// Closed form of the guarantee.
    pub kind: String,
    pub value: f64,
    /// Comparison tolerance (relative).
    pub tolerance: f64,
    /// `None` when the run was truncated and the total cost is unknown.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub satisfied: Option<bool>,
}

#[derive(Serialize)]
pub struct SimulateReport {
    #[serde(flatten)]
    pub meta: Meta,
    pub controller: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    pub x0: Vec<f64>,
    /// Steps actually executed.
    pub steps: usize,
    pub termination: String,
    /// Stage costs accumulated over the executed steps.
    pub accumulated_cost: f64,
    /// Exact cost of the remainder, when the controller admits one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_cost: Option<f64>,
    /// `accumulated + tail`; absent when the tail is unknown.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub total_cost: Option<f64>,
    /// True when the step budget ran out before the state emptied.
    pub truncated: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundCheck>,
    /// Why no bound is reported, when one is expected but unavailable.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_file: Option<String>,
}

/// One expected-vs-actual comparison of the reference pipeline.
#[derive(Serialize)]
pub struct CheckLine {
    pub name: String,
    pub expected: String,
    pub actual: String,
    /// Absolute tolerance; zero means exact.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Serialize)]
pub struct ReproduceReport {
    #[serde(flatten)]
    pub meta: Meta,
    pub checks: Vec<CheckLine>,
    pub passed: usize,
    pub failed: usize,
}
