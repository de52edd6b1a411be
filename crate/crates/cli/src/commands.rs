//! Implementations of the `netmpc` subcommands.
//!
//! Each command loads its inputs, runs one stage of the pipeline, fills a
//! typed report ([`crate::report`]) and prints it as text or JSON. All
//! output goes through the report structs so both modes agree on content.

use std::fmt::Write as _;
use std::fs;

use nalgebra::DVector;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use netmpc_core as core;
use netmpc_core::controller::Violation;
use netmpc_core::{
    certify, horizon_certificate, minimal_horizon, optimal_scaling, parse_instance,
    smallest_horizon_for_alpha, ControllerSpec, Lambda, ProblemInstance, Termination,
};

use crate::output;
use crate::report::*;
use crate::CliError;

/// Default relative tolerance for report comparisons; `NETMPC_TOL`
/// overrides it.
const DEFAULT_TOL: f64 = 1e-6;

// ---------------------------------------------------------------------
// shared plumbing
// ---------------------------------------------------------------------

struct LoadedModel {
    inst: ProblemInstance,
    /// First 16 hex digits of the SHA-256 of the file bytes.
    hash: String,
}

fn load_model(path: &str) -> Result<LoadedModel, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::input(format!("cannot read model {path:?}: {e}")))?;
    parse_loaded(&bytes)
}

fn parse_loaded(bytes: &[u8]) -> Result<LoadedModel, CliError> {
    let digest = Sha256::digest(bytes);
    let mut hash = String::with_capacity(16);
    for byte in &digest[..8] {
        write!(hash, "{byte:02x}").unwrap();
    }
    let text = std::str::from_utf8(bytes)
        .map_err(|e| CliError::input(format!("model is not UTF-8: {e}")))?;
    let inst = parse_instance(text)?;
    Ok(LoadedModel { inst, hash })
}

fn meta(instance: String) -> Meta {
    Meta { version: env!("CARGO_PKG_VERSION"), instance }
}

/// `xbar`, `zero`, or one comma-separated value per vertex.
fn parse_x0(spec: &str, inst: &ProblemInstance) -> Result<DVector<f64>, CliError> {
    match spec {
        "xbar" => Ok(inst.require_bounds("the initial state \"xbar\"")?.x_max.clone()),
        "zero" => Ok(DVector::zeros(inst.n())),
        _ => {
            let values: Vec<f64> = spec
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::input(format!("bad x0 entry {t:?}: {e}")))
                })
                .collect::<Result<_, _>>()?;
            if values.len() != inst.n() {
                return Err(CliError::input(format!(
                    "x0 has {} entries for a network with {} vertices",
                    values.len(),
                    inst.n()
                )));
            }
            Ok(DVector::from_vec(values))
        }
    }
}

/// The comparison tolerance: `NETMPC_TOL` when set, 1e-6 otherwise.
fn report_tolerance() -> Result<f64, CliError> {
    match std::env::var("NETMPC_TOL") {
        Ok(raw) => raw
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|t| t.is_finite() && *t > 0.0)
            .ok_or_else(|| {
                CliError::input(format!("NETMPC_TOL={raw:?} is not a positive number"))
            }),
        Err(_) => Ok(DEFAULT_TOL),
    }
}

fn violation_line(v: &Violation) -> String {
    match v {
        Violation::EdgeCap { edge, lhs, bound, excess } => format!(
            "edge {}: peak flow {lhs:.6} exceeds its cap {bound} (normalized excess {excess:.3e})",
            edge + 1
        ),
        Violation::UpstreamState { vertex, lhs, excess } => format!(
            "vertex {}: state would grow by {lhs:.6} at its bound (normalized excess {excess:.3e})",
            vertex + 1
        ),
    }
}

/// Degree table and related horizons for one cost ratio.
fn horizon_report(
    gamma: f64,
    n_max: Option<u32>,
    alpha_min: Option<f64>,
) -> Result<HorizonReport, CliError> {
    let minimal = minimal_horizon(gamma)?;
    let last = n_max.unwrap_or(minimal.saturating_add(10)).max(minimal);
    let mut table = Vec::with_capacity((last - minimal + 1) as usize);
    for horizon in minimal..=last {
        let cert = horizon_certificate(gamma, horizon)?;
        table.push(HorizonRow {
            horizon,
            alpha: cert.alpha,
            factor: cert.suboptimality_factor,
        });
    }
    let smallest_horizon = match alpha_min {
        Some(target) => Some(smallest_horizon_for_alpha(gamma, target)?),
        None => None,
    };
    Ok(HorizonReport { gamma, minimal_horizon: minimal, table, alpha_min, smallest_horizon })
}

fn print_horizon_report(h: &HorizonReport) {
    println!("minimal stabilizing horizon: {}", h.minimal_horizon);
    println!("     N      alpha     factor");
    for row in &h.table {
        println!("  {:>4}   {:>8.6}   {:>8.4}", row.horizon, row.alpha, row.factor);
    }
    if let (Some(target), Some(n)) = (h.alpha_min, h.smallest_horizon) {
        println!("smallest horizon with alpha >= {target}: {n}");
    }
}

// ---------------------------------------------------------------------
// synthesize
// ---------------------------------------------------------------------

pub fn synthesize(path: &str, json: bool) -> Result<(), CliError> {
    let LoadedModel { inst, hash } = load_model(path)?;
    let syn = core::synthesize(&inst.graph, &inst.costs)?;

    let routing: Vec<EdgeLine> = inst
        .graph
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| EdgeLine {
            edge: k + 1,
            from: e.tail + 1,
            to: e.head.display(),
            r: inst.costs.r[k],
            selected: syn.gain.selected_edge.contains(&k),
        })
        .collect();
    let report = SynthesizeReport {
        meta: meta(hash),
        vertices: inst.n(),
        edges: inst.m(),
        p: syn.value.p.as_slice().to_vec(),
        residual: syn.value.residual.amax(),
        successors: syn.gain.nu.iter().map(|h| h.display()).collect(),
        routing,
    };

    if json {
        return output::emit_json(&report);
    }
    output::headline(report.meta.version, &report.meta.instance);
    println!("vertices {}, edges {}", report.vertices, report.edges);
    println!("p = {}", output::seq(&report.p));
    println!("fixed-point residual {:.3e}", report.residual);
    let successor_list: Vec<String> = report
        .successors
        .iter()
        .enumerate()
        .map(|(i, to)| format!("{} -> {}", i + 1, to))
        .collect();
    println!("successors: {}", successor_list.join(", "));
    println!("edges (* = selected by the policy):");
    for line in &report.routing {
        let mark = if line.selected { '*' } else { ' ' };
        println!("  {mark} {:>3}: {} -> {}  r = {}", line.edge, line.from, line.to, line.r);
    }
    Ok(())
}

// ---------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------

pub fn certify_cmd(path: &str, lambda: &[f64], json: bool) -> Result<(), CliError> {
    let LoadedModel { inst, hash } = load_model(path)?;
    let bounds = inst.require_bounds("certification")?;
    let syn = core::synthesize(&inst.graph, &inst.costs)?;
    if lambda.len() != inst.n() {
        return Err(CliError::input(format!(
            "lambda has {} entries for a network with {} vertices",
            lambda.len(),
            inst.n()
        )));
    }
    let lambda = Lambda::new(DVector::from_vec(lambda.to_vec()))?;

    let membership = core::membership(&lambda, &syn, bounds);
    let (p_hat, gamma) = if membership.is_member {
        let cert = certify(&lambda, &syn, &inst.costs, bounds)?;
        (Some(cert.p_hat.as_slice().to_vec()), Some(cert.gamma))
    } else {
        (None, None)
    };
    let report = CertifyReport {
        meta: meta(hash),
        lambda: lambda.values().as_slice().to_vec(),
        admissible: membership.is_member,
        violations: membership.violations.iter().map(violation_line).collect(),
        p_hat,
        gamma,
    };

    if json {
        return output::emit_json(&report);
    }
    output::headline(report.meta.version, &report.meta.instance);
    println!("lambda = {}", output::seq(&report.lambda));
    if report.admissible {
        println!("admissible: yes");
        println!("p_hat = {}", output::seq(report.p_hat.as_ref().unwrap()));
        println!("gamma = {}", report.gamma.unwrap());
    } else {
        println!("admissible: no");
        for line in &report.violations {
            println!("  {line}");
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------

pub fn tune(path: &str, alpha_min: f64, json: bool) -> Result<(), CliError> {
    let LoadedModel { inst, hash } = load_model(path)?;
    let bounds = inst.require_bounds("tuning")?;
    let syn = core::synthesize(&inst.graph, &inst.costs)?;

    let (problem, solution) = optimal_scaling(&syn, &inst.costs, bounds)?;
    let check = core::certificate_check(&solution, &problem, &syn, &inst.costs)?;
    let horizons = horizon_report(solution.gamma_star, None, Some(alpha_min))?;

    let report = TuneReport {
        meta: meta(hash),
        gamma_star: solution.gamma_star,
        lambda_star: solution.lambda_star.values().as_slice().to_vec(),
        newton_iterations: solution.iterations,
        kkt_residual: solution.kkt_residual,
        degraded_accuracy: solution.degraded_accuracy,
        binding_rows: check.binding.iter().map(|k| k.to_string()).collect(),
        flat_components: check.flat_components.iter().map(|&i| i + 1).collect(),
        horizons,
    };

    if json {
        return output::emit_json(&report);
    }
    output::headline(report.meta.version, &report.meta.instance);
    println!(
        "gamma* = {}  ({} Newton steps, kkt residual {:.3e}{})",
        report.gamma_star,
        report.newton_iterations,
        report.kkt_residual,
        if report.degraded_accuracy { ", degraded accuracy" } else { "" }
    );
    println!("lambda* = {}", output::seq(&report.lambda_star));
    println!("binding rows:");
    for row in &report.binding_rows {
        println!("  {row}");
    }
    if !report.flat_components.is_empty() {
        let names: Vec<String> =
            report.flat_components.iter().map(|i| format!("lambda[{i}]")).collect();
        println!("flat optimum face along: {} (values there are not unique)", names.join(", "));
    }
    print_horizon_report(&report.horizons);
    Ok(())
}

// ---------------------------------------------------------------------
// bound
// ---------------------------------------------------------------------

pub fn bound(
    gamma: f64,
    alpha_min: Option<f64>,
    n_max: Option<u32>,
    json: bool,
) -> Result<(), CliError> {
    let horizons = horizon_report(gamma, n_max, alpha_min)?;
    let report = BoundReport { meta: meta("none".to_string()), horizons };

    if json {
        return output::emit_json(&report);
    }
    output::headline(report.meta.version, &report.meta.instance);
    println!("gamma = {gamma}");
    print_horizon_report(&report.horizons);
    Ok(())
}

// ---------------------------------------------------------------------
// value
// ---------------------------------------------------------------------

pub fn value(
    path: &str,
    x0_spec: &str,
    horizon: u32,
    export_lp: Option<&str>,
    json: bool,
) -> Result<(), CliError> {
    let LoadedModel { inst, hash } = load_model(path)?;
    let x0 = parse_x0(x0_spec, &inst)?;
    let problem = core::build_ocp(&inst, &x0, horizon)?;
    let solution = core::solve_ocp(&inst, &problem)?;

    if let Some(lp_path) = export_lp {
        export_lp_text(&problem, lp_path)?;
    }
    let report = ValueReport {
        meta: meta(hash),
        horizon,
        x0: x0.as_slice().to_vec(),
        value: solution.objective,
        lp_rows: problem.lp.a.nrows(),
        lp_variables: problem.lp.a.ncols(),
        lp_iterations: solution.lp_iterations,
        controls: solution.controls.iter().map(|u| u.as_slice().to_vec()).collect(),
        lp_file: export_lp.map(String::from),
    };

    if json {
        return output::emit_json(&report);
    }
    output::headline(report.meta.version, &report.meta.instance);
    println!("horizon {}, x0 = {}", report.horizon, output::seq(&report.x0));
    println!("optimal value = {}", report.value);
    println!(
        "lp: {} rows, {} variables, {} pivots",
        report.lp_rows, report.lp_variables, report.lp_iterations
    );
    println!("plan:");
    for (t, u) in report.controls.iter().enumerate() {
        println!("  u({t}) = {}", output::seq(u));
    }
    if let Some(f) = &report.lp_file {
        println!("linear program written to {f}");
    }
    Ok(())
}

/// Sparse plain-text dump of the assembled program: one line per nonzero.
fn export_lp_text(problem: &core::OcpProblem, path: &str) -> Result<(), CliError> {
    let lp = &problem.lp;
    let mut out = String::new();
    writeln!(
        out,
        "# horizon-{} transport program: minimize c'u + constant over A u <= b, u >= 0",
        problem.horizon
    )
    .unwrap();
    writeln!(
        out,
        "# {} variables (time-major stage blocks of {}), {} rows",
        lp.c.len(),
        problem.m,
        lp.a.nrows()
    )
    .unwrap();
    writeln!(out, "constant {}", problem.constant).unwrap();
    for (j, &cj) in lp.c.iter().enumerate() {
        if cj != 0.0 {
            writeln!(out, "c {j} {cj}").unwrap();
        }
    }
    for i in 0..lp.a.nrows() {
        for j in 0..lp.a.ncols() {
            let v = lp.a[(i, j)];
            if v != 0.0 {
                writeln!(out, "a {i} {j} {v}").unwrap();
            }
        }
    }
    for (i, &bi) in lp.b.iter().enumerate() {
        writeln!(out, "b {i} {bi}").unwrap();
    }
    fs::write(path, out).map_err(|e| CliError::input(format!("cannot write {path:?}: {e}")))
}

// ---------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------

pub fn simulate(
    path: &str,
    controller: &str,
    horizon: Option<u32>,
    lambda: Option<&[f64]>,
    x0_spec: &str,
    steps: u32,
    csv: Option<&str>,
    json: bool,
) -> Result<(), CliError> {
    let tolerance = report_tolerance()?;
    let LoadedModel { inst, hash } = load_model(path)?;
    let syn = core::synthesize(&inst.graph, &inst.costs)?;
    let x0 = parse_x0(x0_spec, &inst)?;

    match controller {
        "mpc" => {
            if horizon.is_none() {
                return Err(CliError::input("--controller mpc requires --horizon"));
            }
            if lambda.is_some() {
                return Err(CliError::input("--lambda only applies to --controller scaled"));
            }
        }
        "scaled" => {
            if horizon.is_some() {
                return Err(CliError::input("--horizon only applies to --controller mpc"));
            }
        }
        "unconstrained" => {
            if horizon.is_some() {
                return Err(CliError::input("--horizon only applies to --controller mpc"));
            }
            if lambda.is_some() {
                return Err(CliError::input("--lambda only applies to --controller scaled"));
            }
        }
        other => {
            return Err(CliError::input(format!(
                "unknown controller {other:?} (expected mpc, scaled or unconstrained)"
            )));
        }
    }

    let spec = match controller {
        "mpc" => ControllerSpec::Mpc { horizon: horizon.unwrap() },
        "scaled" => {
            let bounds = inst.require_bounds("the scaled controller")?;
            let lam = match lambda {
                Some(values) => {
                    if values.len() != inst.n() {
                        return Err(CliError::input(format!(
                            "lambda has {} entries for a network with {} vertices",
                            values.len(),
                            inst.n()
                        )));
                    }
                    Lambda::new(DVector::from_vec(values.to_vec()))?
                }
                None => optimal_scaling(&syn, &inst.costs, bounds)?.1.lambda_star,
            };
            // Certifying up front turns an inadmissible scaling into a clear
            // input error instead of a mid-run admissibility failure.
            certify(&lam, &syn, &inst.costs, bounds)?;
            ControllerSpec::Scaled { lambda: lam }
        }
        _ => ControllerSpec::Unconstrained,
    };

    let traj = core::simulate(&inst, &spec, &x0, steps)?;
    let total = traj.tail.map(|tail| traj.accumulated() + tail);
    let truncated = matches!(traj.termination, Termination::HorizonExhausted);
    let termination = match traj.termination {
        Termination::ReachedZero { at } => format!("reached zero at step {at}"),
        Termination::HorizonExhausted => "step budget exhausted".to_string(),
    };

    // A-priori guarantee for the realized total, when the theory gives one.
    let mut bound = None;
    let mut bound_note = None;
    match &spec {
        ControllerSpec::Mpc { horizon } => {
            let bounds = inst.require_bounds("the receding-horizon bound")?;
            let (_, solution) = optimal_scaling(&syn, &inst.costs, bounds)?;
            let cert = certify(&solution.lambda_star, &syn, &inst.costs, bounds)?;
            let minimal = minimal_horizon(solution.gamma_star)?;
            if *horizon >= minimal {
                let hc = horizon_certificate(solution.gamma_star, *horizon)?;
                let value = cert.p_hat.dot(&x0) * hc.suboptimality_factor;
                bound = Some(BoundCheck {
                    kind: format!("total <= p_hat*.x0 / alpha_{horizon}"),
                    value,
                    tolerance,
                    satisfied: total.map(|j| j <= value * (1.0 + tolerance)),
                });
            } else {
                bound_note = Some(format!(
                    "no closed-loop guarantee: horizon {horizon} is below the minimal \
                     stabilizing horizon {minimal}"
                ));
            }
        }
        ControllerSpec::Scaled { lambda } => {
            let bounds = inst.require_bounds("the scaled controller")?;
            let cert = certify(lambda, &syn, &inst.costs, bounds)?;
            let value = cert.p_hat.dot(&x0);
            bound = Some(BoundCheck {
                kind: "total = p_hat.x0 (exact)".to_string(),
                value,
                tolerance,
                satisfied: total.map(|j| (j - value).abs() <= tolerance * value.abs().max(1.0)),
            });
        }
        ControllerSpec::Unconstrained => {
            let value = syn.value.p.dot(&x0);
            bound = Some(BoundCheck {
                kind: "total = p.x0 (exact)".to_string(),
                value,
                tolerance,
                satisfied: total.map(|j| (j - value).abs() <= tolerance * value.abs().max(1.0)),
            });
        }
    }

    if let Some(csv_path) = csv {
        let file = fs::File::create(csv_path)
            .map_err(|e| CliError::input(format!("cannot create {csv_path:?}: {e}")))?;
        core::write_trajectory_csv(&traj, inst.n(), inst.m(), file)?;
    }

    let report = SimulateReport {
        meta: meta(hash),
        controller: controller.to_string(),
        horizon,
        lambda: match &spec {
            ControllerSpec::Scaled { lambda } => Some(lambda.values().as_slice().to_vec()),
            _ => None,
        },
        x0: x0.as_slice().to_vec(),
        steps: traj.controls.len(),
        termination,
        accumulated_cost: traj.accumulated(),
        tail_cost: traj.tail,
        total_cost: total,
        truncated,
        bound,
        bound_note,
        csv_file: csv.map(String::from),
    };

    if json {
        output::emit_json(&report)?;
        return fail_on_violated_bound(&report.bound);
    }
    output::headline(report.meta.version, &report.meta.instance);
    match report.horizon {
        Some(n) => println!("controller {} (horizon {n})", report.controller),
        None => println!("controller {}", report.controller),
    }
    if let Some(lam) = &report.lambda {
        println!("lambda = {}", output::seq(lam));
    }
    println!("x0 = {}", output::seq(&report.x0));
    println!("steps executed: {} — {}", report.steps, report.termination);
    println!("accumulated cost = {}", report.accumulated_cost);
    match (report.tail_cost, report.total_cost) {
        (Some(tail), Some(total)) => {
            println!("tail cost = {tail}");
            println!("total cost = {total}");
        }
        _ => println!(
            "total cost unknown: run truncated; accumulated cost is only a lower bound"
        ),
    }
    if let Some(b) = &report.bound {
        let status = match b.satisfied {
            Some(true) => "satisfied",
            Some(false) => "VIOLATED",
            None => "not evaluated (run truncated)",
        };
        println!("guarantee: {} = {}  {status} (tolerance {})", b.kind, b.value, b.tolerance);
    }
    if let Some(note) = &report.bound_note {
        println!("{note}");
    }
    if let Some(f) = &report.csv_file {
        println!("trajectory written to {f}");
    }
    fail_on_violated_bound(&report.bound)
}

/// A realized cost outside its certified guarantee is a numerical failure,
/// reported after the summary so the evidence is on stdout.
fn fail_on_violated_bound(bound: &Option<BoundCheck>) -> Result<(), CliError> {
    match bound {
        Some(BoundCheck { satisfied: Some(false), kind, value, .. }) => Err(CliError {
            code: 1,
            message: format!("cost guarantee violated: {kind} = {value} does not hold"),
        }),
        _ => Ok(()),
    }
}

// ---------------------------------------------------------------------
// reproduce
// ---------------------------------------------------------------------

/// Expected values of the bundled reference model, with tolerances.
#[derive(Deserialize)]
struct ValTol<T> {
    value: T,
    tolerance: f64,
}

#[derive(Deserialize)]
struct MpcExpected {
    horizon: u32,
    cost: ValTol<f64>,
    zero_step: ValTol<f64>,
    first_state: ValTol<Vec<f64>>,
}

#[derive(Deserialize)]
struct ScaledExpected {
    cost: ValTol<f64>,
    first_state: ValTol<Vec<f64>>,
}

#[derive(Deserialize)]
struct Expected {
    routing_values: ValTol<Vec<f64>>,
    successors: Vec<String>,
    gamma_star: ValTol<f64>,
    lambda_star_capped: ValTol<Vec<f64>>,
    minimal_horizon: u32,
    smallest_horizon_for_half: u32,
    reference_lambda: Vec<f64>,
    reference_gamma: ValTol<f64>,
    mpc: MpcExpected,
    scaled: ScaledExpected,
    unconstrained_cost: ValTol<f64>,
}

#[derive(Default)]
struct Checks {
    lines: Vec<CheckLine>,
}

impl Checks {
    fn scalar(&mut self, name: &str, expected: f64, tolerance: f64, actual: f64) {
        self.lines.push(CheckLine {
            name: name.to_string(),
            expected: expected.to_string(),
            actual: actual.to_string(),
            tolerance,
            pass: (actual - expected).abs() <= tolerance,
        });
    }

    fn integer(&mut self, name: &str, expected: u32, actual: u32) {
        self.lines.push(CheckLine {
            name: name.to_string(),
            expected: expected.to_string(),
            actual: actual.to_string(),
            tolerance: 0.0,
            pass: expected == actual,
        });
    }

    fn vector(&mut self, name: &str, expected: &[f64], tolerance: f64, actual: &[f64]) {
        let pass = expected.len() == actual.len()
            && expected.iter().zip(actual).all(|(e, a)| (a - e).abs() <= tolerance);
        self.lines.push(CheckLine {
            name: name.to_string(),
            expected: output::seq(expected),
            actual: output::seq(actual),
            tolerance,
            pass,
        });
    }

    fn strings(&mut self, name: &str, expected: &[String], actual: &[String]) {
        self.lines.push(CheckLine {
            name: name.to_string(),
            expected: expected.join(", "),
            actual: actual.join(", "),
            tolerance: 0.0,
            pass: expected == actual,
        });
    }
}

/// Runs the whole pipeline on the bundled reference model and compares
/// every stage against its stored expected values.
pub fn reproduce(json: bool) -> Result<(), CliError> {
    const MODEL: &str = include_str!("../../../models/example1.json");
    const EXPECTED: &str = include_str!("../../../models/example1.expected.json");

    let expected: Expected = serde_json::from_str(EXPECTED)
        .map_err(|e| CliError::input(format!("bundled expected-values file is invalid: {e}")))?;
    let LoadedModel { inst, hash } = parse_loaded(MODEL.as_bytes())?;
    let bounds = inst.require_bounds("reproduction")?;
    let syn = core::synthesize(&inst.graph, &inst.costs)?;
    let x0 = bounds.x_max.clone();
    let mut checks = Checks::default();

    checks.vector(
        "routing values",
        &expected.routing_values.value,
        expected.routing_values.tolerance,
        syn.value.p.as_slice(),
    );
    let successors: Vec<String> = syn.gain.nu.iter().map(|h| h.display()).collect();
    checks.strings("successors", &expected.successors, &successors);

    let (_, solution) = optimal_scaling(&syn, &inst.costs, bounds)?;
    checks.scalar(
        "gamma*",
        expected.gamma_star.value,
        expected.gamma_star.tolerance,
        solution.gamma_star,
    );
    let capped = expected.lambda_star_capped.value.len().min(solution.lambda_star.len());
    checks.vector(
        "lambda* (cap-forced components)",
        &expected.lambda_star_capped.value,
        expected.lambda_star_capped.tolerance,
        &solution.lambda_star.values().as_slice()[..capped],
    );

    checks.integer(
        "minimal horizon",
        expected.minimal_horizon,
        minimal_horizon(solution.gamma_star)?,
    );
    checks.integer(
        "horizon for alpha >= 1/2",
        expected.smallest_horizon_for_half,
        smallest_horizon_for_alpha(solution.gamma_star, 0.5)?,
    );

    let reference_scaling = Lambda::new(DVector::from_vec(expected.reference_lambda.clone()))?;
    let cert = certify(&reference_scaling, &syn, &inst.costs, bounds)?;
    checks.scalar(
        "gamma at reference lambda",
        expected.reference_gamma.value,
        expected.reference_gamma.tolerance,
        cert.gamma,
    );

    let mpc = core::simulate(&inst, &ControllerSpec::Mpc { horizon: expected.mpc.horizon }, &x0, 50)?;
    let mpc_total = mpc.tail.map(|t| mpc.accumulated() + t);
    checks.scalar(
        "mpc cost",
        expected.mpc.cost.value,
        expected.mpc.cost.tolerance,
        mpc_total.unwrap_or(f64::NAN),
    );
    let mpc_zero = match mpc.termination {
        Termination::ReachedZero { at } => at as f64,
        Termination::HorizonExhausted => f64::NAN,
    };
    checks.scalar(
        "mpc zero step",
        expected.mpc.zero_step.value,
        expected.mpc.zero_step.tolerance,
        mpc_zero,
    );
    let mpc_first = mpc.states.get(1).map(|v| v.as_slice().to_vec()).unwrap_or_default();
    checks.vector(
        "mpc x(1)",
        &expected.mpc.first_state.value,
        expected.mpc.first_state.tolerance,
        &mpc_first,
    );

    let scaled =
        core::simulate(&inst, &ControllerSpec::Scaled { lambda: reference_scaling }, &x0, 200)?;
    let scaled_total = scaled.tail.map(|t| scaled.accumulated() + t);
    checks.scalar(
        "scaled cost",
        expected.scaled.cost.value,
        expected.scaled.cost.tolerance,
        scaled_total.unwrap_or(f64::NAN),
    );
    let scaled_first = scaled.states.get(1).map(|v| v.as_slice().to_vec()).unwrap_or_default();
    checks.vector(
        "scaled x(1)",
        &expected.scaled.first_state.value,
        expected.scaled.first_state.tolerance,
        &scaled_first,
    );

    let unconstrained = core::simulate(&inst, &ControllerSpec::Unconstrained, &x0, 50)?;
    let unconstrained_total = unconstrained.tail.map(|t| unconstrained.accumulated() + t);
    checks.scalar(
        "unconstrained cost",
        expected.unconstrained_cost.value,
        expected.unconstrained_cost.tolerance,
        unconstrained_total.unwrap_or(f64::NAN),
    );

    let failed = checks.lines.iter().filter(|c| !c.pass).count();
    let count = checks.lines.len();
    let report = ReproduceReport {
        meta: meta(hash),
        checks: checks.lines,
        passed: count - failed,
        failed,
    };

    if json {
        output::emit_json(&report)?;
    } else {
        output::headline(report.meta.version, &report.meta.instance);
        for line in &report.checks {
            if line.pass {
                println!("ok    {:<32} {}", line.name, line.actual);
            } else {
                println!(
                    "FAIL  {:<32} expected {} (tolerance {}), got {}",
                    line.name, line.expected, line.tolerance, line.actual
                );
            }
        }
        println!("{} of {count} checks passed", report.passed);
    }

    if failed > 0 {
        return Err(CliError {
            code: 1,
            message: format!("reproduce: {failed} of {count} checks failed"),
        });
    }
    Ok(())
}
