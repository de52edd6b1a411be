//! Closed-loop simulation of the three controller families.
//!
//! * **Receding-horizon**: at every step, solve the horizon-`N` program
//!   from the current state and apply the first planned control.
//! * **Scaled routing**: apply `u = K diag(lambda) x` for an admissible
//!   scaling; the state decays geometrically and never leaves the box.
//! * **Unconstrained routing**: apply `u = K x`, ignoring capacities —
//!   the benchmark the capacitated controllers are measured against.
//!
//! For the capacitated controllers every executed step is re-verified
//! against the capacity system (caps, mass conservation, state box) with
//! a small numerical slack; a breach aborts the run, since it can only
//! mean a solver defect, not a modeling choice.
//!
//! Accumulated cost is reported together with an exact *tail*: the total
//! cost still to come from the final state. For the routing controllers
//! the tail is a closed form (`p . x` and `p_hat . x`), so a truncated
//! run still yields the exact infinite-horizon closed-loop cost; a
//! truncated receding-horizon run has no closed form and reports its
//! accumulated cost as a lower bound instead.

use std::io::Write;

use nalgebra::DVector;

use crate::controller::{closed_loop_cost_vector, scaled_feedback_apply, Lambda};
use crate::error::{Error, Result};
use crate::model::{CapacityBounds, ProblemInstance};
use crate::ocp::{build_ocp, solve_ocp};
use crate::synthesis::{synthesize, Synthesis};

/// States with total mass at or below this are treated as empty.
pub const ZERO_MASS_TOL: f64 = 1e-9;

/// Relative slack for the per-step admissibility re-verification.
const STEP_CHECK_TOL: f64 = 1e-8;

/// Which feedback law drives the loop.
#[derive(Debug, Clone)]
pub enum ControllerSpec {
    /// Receding-horizon control with the given planning horizon.
    Mpc { horizon: u32 },
    /// `u = K diag(lambda) x` for an admissible scaling.
    Scaled { lambda: Lambda },
    /// `u = K x`, valid only as an uncapacitated benchmark.
    Unconstrained,
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The state emptied (mass within [`ZERO_MASS_TOL`]) at this step.
    ReachedZero { at: usize },
    /// The step budget ran out first.
    HorizonExhausted,
}

/// A simulated closed-loop run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `x(0), ..., x(T)`.
    pub states: Vec<DVector<f64>>,
    /// `u(0), ..., u(T-1)`.
    pub controls: Vec<DVector<f64>>,
    /// `s . x(t) + r . u(t)` per executed step.
    pub stage_costs: Vec<f64>,
    /// Running sums of `stage_costs`.
    pub cumulative: Vec<f64>,
    pub termination: Termination,
    /// Exact cost still to come from the final state, when known:
    /// 0 after reaching zero, `p_hat . x(T)` / `p . x(T)` for the routing
    /// controllers, `None` for a truncated receding-horizon run.
    pub tail: Option<f64>,
}

impl Trajectory {
    /// Total accumulated cost over the executed steps.
    pub fn accumulated(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// The first planned control of the horizon-`N` program from `x`.
pub fn mpc_feedback(inst: &ProblemInstance, x: &DVector<f64>, horizon: u32) -> Result<DVector<f64>> {
    let problem = build_ocp(inst, x, horizon)?;
    let sol = solve_ocp(inst, &problem)?;
    Ok(sol.controls.into_iter().next().expect("horizon >= 1"))
}

/// Verifies one executed step against the capacity system.
pub(crate) fn check_step(
    t: usize,
    x: &DVector<f64>,
    u: &DVector<f64>,
    next: &DVector<f64>,
    inst: &ProblemInstance,
    bounds: &CapacityBounds,
) -> Result<()> {
    let fail = |detail: String| Err(Error::AdmissibilityViolation { t, detail });
    for k in 0..inst.m() {
        if u[k] < -STEP_CHECK_TOL {
            return fail(format!("flow on edge {} is negative ({})", k + 1, u[k]));
        }
        if u[k] - bounds.u_max[k] > STEP_CHECK_TOL * bounds.u_max[k].max(1.0) {
            return fail(format!(
                "flow on edge {} exceeds its cap ({} > {})",
                k + 1,
                u[k],
                bounds.u_max[k]
            ));
        }
    }
    for i in 0..inst.n() {
        let out: f64 = inst.graph.out_range(i).map(|k| u[k]).sum();
        if out - x[i] > STEP_CHECK_TOL * x[i].max(1.0) {
            return fail(format!(
                "vertex {} ships {} but only holds {}",
                i + 1,
                out,
                x[i]
            ));
        }
        if next[i] < -STEP_CHECK_TOL {
            return fail(format!("vertex {} would go negative ({})", i + 1, next[i]));
        }
        if next[i] - bounds.x_max[i] > STEP_CHECK_TOL * bounds.x_max[i].max(1.0) {
            return fail(format!(
                "vertex {} would exceed its bound ({} > {})",
                i + 1,
                next[i],
                bounds.x_max[i]
            ));
        }
    }
    Ok(())
}

/// Runs the closed loop from `x0` for at most `max_steps` steps.
pub fn simulate(
    inst: &ProblemInstance,
    spec: &ControllerSpec,
    x0: &DVector<f64>,
    max_steps: u32,
) -> Result<Trajectory> {
    if x0.len() != inst.n() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} entries for a network with {} vertices",
            x0.len(),
            inst.n()
        )));
    }
    if let Some(i) = (0..inst.n()).find(|&i| !(x0[i] >= 0.0)) {
        return Err(Error::X0OutOfBounds { vertex: i + 1, value: x0[i] });
    }

    let syn: Synthesis = synthesize(&inst.graph, &inst.costs)?;
    let b = inst.graph.incidence_matrix();

    // Routing controllers have closed-form tails; compute the cost vector
    // up front (this also rejects an inadmissible scaling immediately).
    enum Prepared {
        Mpc { horizon: u32 },
        Scaled { lambda: Lambda, p_hat: DVector<f64> },
        Unconstrained,
    }
    let prepared = match spec {
        ControllerSpec::Mpc { horizon } => {
            inst.require_bounds("receding-horizon simulation")?;
            Prepared::Mpc { horizon: *horizon }
        }
        ControllerSpec::Scaled { lambda } => {
            let bounds = inst.require_bounds("scaled-routing simulation")?;
            let p_hat = closed_loop_cost_vector(lambda, &syn, &inst.costs, bounds)?;
            Prepared::Scaled { lambda: lambda.clone(), p_hat }
        }
        ControllerSpec::Unconstrained => Prepared::Unconstrained,
    };
    // Capacitated controllers must start inside the box.
    if let Prepared::Mpc { .. } | Prepared::Scaled { .. } = prepared {
        let bounds = inst.bounds.as_ref().expect("checked above");
        for i in 0..inst.n() {
            if x0[i] > bounds.x_max[i] + 1e-12 {
                return Err(Error::X0OutOfBounds { vertex: i + 1, value: x0[i] });
            }
        }
    }

    let mut states = vec![x0.clone()];
    let mut controls = Vec::new();
    let mut stage_costs = Vec::new();
    let mut cumulative = Vec::new();
    let mut total = 0.0;
    let mut termination = Termination::HorizonExhausted;

    for t in 0..max_steps as usize {
        let x = states.last().unwrap().clone();
        if x.iter().map(|v| v.abs()).sum::<f64>() <= ZERO_MASS_TOL {
            termination = Termination::ReachedZero { at: t };
            break;
        }
        let u = match &prepared {
            Prepared::Mpc { horizon } => mpc_feedback(inst, &x, *horizon)?,
            Prepared::Scaled { lambda, .. } => scaled_feedback_apply(lambda, &syn.gain.k, &x),
            Prepared::Unconstrained => &syn.gain.k * &x,
        };
        let mut next = &x + &b * &u;
        if let Prepared::Mpc { .. } | Prepared::Scaled { .. } = prepared {
            check_step(t, &x, &u, &next, inst, inst.bounds.as_ref().unwrap())?;
            // The checker vouched for this step up to roundoff; snap the
            // recorded state onto the box so the next feedback evaluation
            // (and its transport program) sees exact membership instead of
            // a -1e-16 leftover from cancellation.
            let bounds = inst.bounds.as_ref().unwrap();
            for i in 0..inst.n() {
                next[i] = next[i].clamp(0.0, bounds.x_max[i]);
            }
        } else {
            for i in 0..inst.n() {
                next[i] = next[i].max(0.0);
            }
        }
        total += inst.costs.s.dot(&x) + inst.costs.r.dot(&u);
        stage_costs.push(inst.costs.s.dot(&x) + inst.costs.r.dot(&u));
        cumulative.push(total);
        controls.push(u);
        states.push(next);
    }
    if termination == Termination::HorizonExhausted {
        // The budget may have ended exactly on an empty state.
        let x = states.last().unwrap();
        if x.iter().map(|v| v.abs()).sum::<f64>() <= ZERO_MASS_TOL {
            termination = Termination::ReachedZero { at: states.len() - 1 };
        }
    }

    let tail = match (&termination, &prepared) {
        (Termination::ReachedZero { .. }, _) => Some(0.0),
        (Termination::HorizonExhausted, Prepared::Scaled { p_hat, .. }) => {
            Some(p_hat.dot(states.last().unwrap()))
        }
        (Termination::HorizonExhausted, Prepared::Unconstrained) => {
            Some(syn.value.p.dot(states.last().unwrap()))
        }
        (Termination::HorizonExhausted, Prepared::Mpc { .. }) => None,
    };

    Ok(Trajectory {
        states,
        controls,
        stage_costs,
        cumulative,
        termination,
        tail,
    })
}

/// The exact infinite-horizon closed-loop cost of a run, when available.
///
/// Accumulated cost plus the exact tail; a truncated receding-horizon run
/// has no exact tail and surfaces its accumulated cost as a lower bound
/// through [`Error::TruncatedCost`].
pub fn closed_loop_cost(traj: &Trajectory) -> Result<f64> {
    match traj.tail {
        Some(tail) => Ok(traj.accumulated() + tail),
        None => Err(Error::TruncatedCost { lower_bound: traj.accumulated() }),
    }
}

/// Writes a run as CSV: one row per executed step plus a final row for
/// the terminal state. The final row leaves the control and stage-cost
/// columns empty, repeats the total in the cumulative column, and is the
/// only row with a tail entry (left empty when the tail is unknown).
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, n: usize, m: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|k| format!("u_{k}")));
    header.extend(["stage_cost", "cumulative_cost", "tail"].map(String::from));
    w.write_record(&header)
        .map_err(|e| Error::NumericalFailure(format!("CSV write failed: {e}")))?;

    let steps = traj.controls.len();
    for t in 0..=steps {
        let mut rec = vec![t.to_string()];
        rec.extend((0..n).map(|i| traj.states[t][i].to_string()));
        if t < steps {
            rec.extend((0..m).map(|k| traj.controls[t][k].to_string()));
            rec.push(traj.stage_costs[t].to_string());
            rec.push(traj.cumulative[t].to_string());
            rec.push(String::new());
        } else {
            rec.extend(std::iter::repeat(String::new()).take(m));
            rec.push(String::new());
            rec.push(traj.accumulated().to_string());
            rec.push(traj.tail.map(|v| v.to_string()).unwrap_or_default());
        }
        w.write_record(&rec)
            .map_err(|e| Error::NumericalFailure(format!("CSV write failed: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::NumericalFailure(format!("CSV write failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use nalgebra::dvector;

    fn reference_lambda() -> Lambda {
        Lambda::new(dvector![0.25, 0.25, 1.0, 0.2876, 0.3050]).unwrap()
    }

    #[test]
    fn receding_horizon_reference_run() {
        let inst = fixtures::reference_instance();
        let x0 = DVector::from_element(5, 1.0);
        let traj = simulate(&inst, &ControllerSpec::Mpc { horizon: 16 }, &x0, 40).unwrap();

        // First closed-loop state: the plan saturates every outgoing cap
        // of vertex 1 and tops up vertex 3 to its bound.
        let expected = dvector![0.25, 0.75, 1.0, 1.0, 1.0];
        assert!((&traj.states[1] - &expected).amax() < 1e-9, "{}", traj.states[1]);

        match traj.termination {
            Termination::ReachedZero { at } => assert!((4..=6).contains(&at), "at={at}"),
            Termination::HorizonExhausted => panic!("run should empty the network"),
        }
        let cost = closed_loop_cost(&traj).unwrap();
        assert!((cost - 56.5).abs() <= 0.1, "{cost}");
        // Stage costs replay to the same total.
        let replay: f64 = traj.stage_costs.iter().sum();
        assert!((replay - traj.accumulated()).abs() < 1e-12);
    }

    #[test]
    fn scaled_run_costs_exactly_its_certificate() {
        let inst = fixtures::reference_instance();
        let syn = synthesize(&inst.graph, &inst.costs).unwrap();
        let lambda = reference_lambda();
        let p_hat = closed_loop_cost_vector(
            &lambda,
            &syn,
            &inst.costs,
            inst.bounds.as_ref().unwrap(),
        )
        .unwrap();
        let x0 = DVector::from_element(5, 1.0);
        let predicted = p_hat.dot(&x0);

        // The tail is exact, so the total is independent of where the run
        // is truncated. (By step ~70 the state mass falls under the
        // zero-detection threshold, so stay below that.)
        for steps in [3, 17, 60] {
            let traj = simulate(
                &inst,
                &ControllerSpec::Scaled { lambda: lambda.clone() },
                &x0,
                steps,
            )
            .unwrap();
            assert_eq!(traj.termination, Termination::HorizonExhausted);
            let cost = closed_loop_cost(&traj).unwrap();
            assert!(
                (cost - predicted).abs() <= 1e-9 * predicted,
                "steps={steps}: {cost} vs {predicted}"
            );
        }
    }

    #[test]
    fn unconstrained_run_realizes_the_routing_value() {
        let inst = fixtures::unconstrained_reference_instance();
        let x0 = DVector::from_element(5, 1.0);
        let traj = simulate(&inst, &ControllerSpec::Unconstrained, &x0, 10).unwrap();
        assert_eq!(traj.termination, Termination::ReachedZero { at: 3 });
        let cost = closed_loop_cost(&traj).unwrap();
        assert!((cost - 40.0).abs() < 1e-9, "{cost}");
    }

    #[test]
    fn truncated_receding_horizon_reports_a_lower_bound() {
        let inst = fixtures::reference_instance();
        let x0 = DVector::from_element(5, 1.0);
        let traj = simulate(&inst, &ControllerSpec::Mpc { horizon: 16 }, &x0, 2).unwrap();
        assert_eq!(traj.termination, Termination::HorizonExhausted);
        assert!(traj.tail.is_none());
        match closed_loop_cost(&traj) {
            Err(Error::TruncatedCost { lower_bound }) => {
                assert!((lower_bound - traj.accumulated()).abs() < 1e-12);
                assert!(lower_bound > 0.0);
            }
            other => panic!("expected a truncation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_start_terminates_immediately() {
        let inst = fixtures::reference_instance();
        let x0 = DVector::zeros(5);
        for spec in [
            ControllerSpec::Mpc { horizon: 4 },
            ControllerSpec::Scaled { lambda: reference_lambda() },
            ControllerSpec::Unconstrained,
        ] {
            let traj = simulate(&inst, &spec, &x0, 10).unwrap();
            assert_eq!(traj.termination, Termination::ReachedZero { at: 0 });
            assert!(traj.controls.is_empty());
            assert_eq!(closed_loop_cost(&traj).unwrap(), 0.0);
        }
    }

    #[test]
    fn rejects_bad_starts_and_inadmissible_scalings() {
        let inst = fixtures::reference_instance();
        assert!(matches!(
            simulate(
                &inst,
                &ControllerSpec::Unconstrained,
                &dvector![1.0, -0.5, 0.0, 0.0, 0.0],
                5
            ),
            Err(Error::X0OutOfBounds { vertex: 2, .. })
        ));
        assert!(matches!(
            simulate(
                &inst,
                &ControllerSpec::Mpc { horizon: 4 },
                &dvector![2.0, 0.0, 0.0, 0.0, 0.0],
                5
            ),
            Err(Error::X0OutOfBounds { vertex: 1, .. })
        ));
        let all_ones = Lambda::new(DVector::from_element(5, 1.0)).unwrap();
        assert!(matches!(
            simulate(
                &inst,
                &ControllerSpec::Scaled { lambda: all_ones },
                &DVector::from_element(5, 1.0),
                5
            ),
            Err(Error::LambdaNotAdmissible { .. })
        ));
        // The unconstrained benchmark needs no bounds and ignores caps.
        let unbounded = fixtures::unconstrained_reference_instance();
        assert!(matches!(
            simulate(
                &unbounded,
                &ControllerSpec::Mpc { horizon: 4 },
                &DVector::from_element(5, 1.0),
                5
            ),
            Err(Error::BoundsRequired(_))
        ));
    }

    #[test]
    fn step_checker_flags_each_violation_class() {
        let inst = fixtures::reference_instance();
        let bounds = inst.bounds.as_ref().unwrap();
        let x = DVector::from_element(5, 1.0);
        let b = inst.graph.incidence_matrix();

        let ok = DVector::zeros(9);
        let next = &x + &b * &ok;
        assert!(check_step(0, &x, &ok, &next, &inst, bounds).is_ok());

        let mut over_cap = DVector::zeros(9);
        over_cap[0] = 0.3; // cap of edge 1 is 0.25
        let next = &x + &b * &over_cap;
        assert!(matches!(
            check_step(0, &x, &over_cap, &next, &inst, bounds),
            Err(Error::AdmissibilityViolation { t: 0, .. })
        ));

        let mut negative = DVector::zeros(9);
        negative[2] = -0.1;
        let next = &x + &b * &negative;
        assert!(check_step(1, &x, &negative, &next, &inst, bounds).is_err());

        // Shipping more than the vertex holds.
        let thin = DVector::from_element(5, 0.1);
        let mut too_much = DVector::zeros(9);
        too_much[6] = 0.5; // edge 7 ships 0.5 out of vertex 3 holding 0.1
        let next = &thin + &b * &too_much;
        assert!(check_step(2, &thin, &too_much, &next, &inst, bounds).is_err());

        // Overfilling a downstream vertex: push 0.25 into a full vertex 3.
        let mut overfill = DVector::zeros(9);
        overfill[3] = 0.25;
        let next = &x + &b * &overfill;
        assert!(check_step(3, &x, &overfill, &next, &inst, bounds).is_err());
    }

    #[test]
    fn csv_round_trip_structure() {
        let inst = fixtures::reference_instance();
        let x0 = DVector::from_element(5, 1.0);
        let traj = simulate(
            &inst,
            &ControllerSpec::Scaled { lambda: reference_lambda() },
            &x0,
            2,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&traj, 5, 9, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 2 + 1); // header, two steps, final state
        assert_eq!(
            lines[0],
            "t,x_1,x_2,x_3,x_4,x_5,u_1,u_2,u_3,u_4,u_5,u_6,u_7,u_8,u_9,\
             stage_cost,cumulative_cost,tail"
        );
        assert!(lines[1].starts_with("0,1,1,1,1,1,"));
        assert!(lines[1].ends_with(",")); // no tail on step rows
        let last = lines[3];
        let fields: Vec<&str> = last.split(',').collect();
        assert_eq!(fields.len(), 1 + 5 + 9 + 3);
        assert_eq!(fields[0], "2");
        assert!(fields[6].is_empty() && fields[14].is_empty());
        assert!(!fields[17].is_empty(), "final row must carry the tail");
        // Deterministic output: a second write is byte-identical.
        let mut buf2 = Vec::new();
        write_trajectory_csv(&traj, 5, 9, &mut buf2).unwrap();
        assert_eq!(text.as_bytes(), buf2);
    }
}
