use thiserror::Error;

/// Errors produced by model construction, synthesis, tuning and simulation.
///
/// Vertices and edges in messages are 1-based, matching the model file
/// convention and the CLI output.
#[derive(Debug, Error)]
pub enum Error {
    // -- model construction ---------------------------------------------
    #[error("graph must have at least one vertex")]
    EmptyGraph,
    #[error("edge {index}: tail {tail} out of range 1..={n}")]
    TailOutOfRange { index: usize, tail: usize, n: usize },
    #[error("edge {index}: head {head} out of range (1..={n} or \"goal\")")]
    HeadOutOfRange { index: usize, head: usize, n: usize },
    #[error("edge {index}: self-loop at vertex {vertex}")]
    SelfLoop { index: usize, vertex: usize },
    #[error("duplicate edge from {tail} to {head}")]
    DuplicateEdge { tail: usize, head: String },
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    // -- synthesis -------------------------------------------------------
    #[error("vertex {vertex} has no path to the goal; no finite value vector exists")]
    UnreachableGoal { vertex: usize },
    #[error("state weight s[{vertex}] = {value} must be strictly positive")]
    NonpositiveS { vertex: usize, value: f64 },
    #[error("routing matrix is not nilpotent: selected edges contain a cycle")]
    CycleDetected,

    // -- scaled controller -----------------------------------------------
    #[error("lambda is not admissible: {reason}")]
    LambdaNotAdmissible { reason: String },
    #[error("lambda[{vertex}] = {value} outside (0, 1]")]
    LambdaOutOfRange { vertex: usize, value: f64 },

    // -- tuning ----------------------------------------------------------
    #[error("scaling optimizer failed to converge: {0}")]
    NumericalFailure(String),
    #[error("optimizer input is infeasible: {0}")]
    InfeasibleInput(String),
    #[error("certificate check failed: {0}")]
    CertificateMismatch(String),

    // -- horizon formulas --------------------------------------------------
    #[error("gamma = {gamma} is below 1; cost bounds guarantee gamma >= 1")]
    GammaBelowOne { gamma: f64 },
    #[error("horizon N = {n} is too short; formulas require N >= 2")]
    HorizonTooShort { n: u32 },

    // -- finite-horizon optimal control -----------------------------------
    #[error("initial state outside the state box at vertex {vertex}: {value}")]
    X0OutOfBounds { vertex: usize, value: f64 },
    #[error("linear program is unbounded (internal error: the objective is bounded by construction)")]
    Unbounded,
    #[error("simplex exceeded {limit} iterations")]
    MaxIterations { limit: usize },

    // -- simulation --------------------------------------------------------
    #[error("controller produced an inadmissible step at t = {t}: {detail}")]
    AdmissibilityViolation { t: usize, detail: String },
    #[error("closed loop truncated before reaching zero; accumulated cost {lower_bound} is only a lower bound")]
    TruncatedCost { lower_bound: f64 },

    #[error("{0} requires capacity bounds")]
    BoundsRequired(String),
}

pub type Result<T> = std::result::Result<T, Error>;
