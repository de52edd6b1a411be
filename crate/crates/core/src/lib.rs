//! Control synthesis and simulation for capacity-constrained commodity
//! networks.
//!
//! The plant is a linear positive system on a directed graph: commodity
//! sits at vertices, moves along edges toward an absorbing goal, and pays
//! a holding cost `s` per step plus a transport cost `r` per unit moved.
//! Without capacities the optimal policy is shortest-path routing; this
//! crate synthesizes that policy and then makes it work under vertex
//! storage bounds and edge flow caps:
//!
//! * [`synthesis`] — the routing values `p`, the 0/1 feedback gain `K`,
//!   and the successor map of the unconstrained optimal policy;
//! * [`controller`] — admissible scalings `lambda` that shrink the
//!   routing flows until every capacity holds for all states in the box,
//!   with certified closed-loop cost vectors `p_hat` and ratio `gamma`;
//! * [`gp`] — the best certifiable ratio as a geometric program;
//! * [`horizon`] — how long a receding-horizon controller must look
//!   ahead for stability, as a function of `gamma` alone;
//! * [`ocp`] / [`simplex`] — finite-horizon optimal transport as a
//!   deterministic linear program;
//! * [`sim`] — closed-loop simulation of all three controller families
//!   with exact cost accounting;
//! * [`model`] — the JSON model format and validated instances;
//! * [`testgen`] — seeded random instances and independent oracles for
//!   the test suites.

pub mod controller;
pub mod error;
pub mod gp;
pub mod graph;
pub mod horizon;
pub mod model;
pub mod ocp;
pub mod sim;
pub mod simplex;
pub mod synthesis;
pub mod testgen;

#[cfg(test)]
pub(crate) mod fixtures;

pub use controller::{
    certify, closed_loop_cost_vector, feasible_lambda, gamma_of, membership,
    scaled_feedback_apply, ClosedLoopCertificate, Lambda, MembershipReport,
};
pub use error::{Error, Result};
pub use gp::{assemble_gp, certificate_check, optimal_scaling, solve_gp, GpProblem, GpSolution};
pub use graph::{build_graph, Edge, Head, RoutingGraph};
pub use horizon::{
    alpha, horizon_certificate, minimal_horizon, performance_bound, smallest_horizon_for_alpha,
    HorizonCertificate,
};
pub use model::{parse_instance, CapacityBounds, CostWeights, ProblemInstance};
pub use ocp::{build_ocp, solve_ocp, value_function, OcpProblem, OcpSolution};
pub use sim::{
    closed_loop_cost, mpc_feedback, simulate, write_trajectory_csv, ControllerSpec, Termination,
    Trajectory,
};
pub use synthesis::{synthesize, FeedbackGain, Synthesis, ValueVector};
