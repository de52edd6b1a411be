//! Problem data: cost weights, capacity bounds, and the JSON model format.
//!
//! A problem instance couples a routing graph with a stage cost
//! `l(x, u) = s'x + r'u` (holding cost `s > 0` per vertex, transport cost
//! `r >= 0` per edge) and, optionally, capacity bounds `0 <= x <= x_max`,
//! `0 <= u <= u_max`. Absent bounds mean the state and control sets are the
//! whole nonnegative orthant.
//!
//! # Model file format
//!
//! A JSON document:
//!
//! ```json
//! {
//!   "n": 2,
//!   "edges": [
//!     { "from": 1, "to": 2, "r": 0.5, "u_max": 0.25 },
//!     { "from": 2, "to": "goal", "r": 1.0, "u_max": 1.0 }
//!   ],
//!   "s": [10.0, 5.0],
//!   "x_max": [1.0, 1.0]
//! }
//! ```
//!
//! Vertices are numbered `1..=n`; `"goal"` names the absorbing vertex.
//! `r` defaults to `0`. Omitting `x_max` and every `u_max` signals the
//! unconstrained case; bounds must be given completely or not at all.
//! Unknown fields are rejected.

use nalgebra::DVector;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{build_graph, Edge, Head, RoutingGraph};

/// Stage-cost weights: `s` per vertex (strictly positive), `r` per edge
/// (nonnegative), both in canonical edge order.
#[derive(Debug, Clone)]
pub struct CostWeights {
    pub s: DVector<f64>,
    pub r: DVector<f64>,
}

/// Capacity bounds: vertex storage caps `x_max > 0` and edge flow caps
/// `u_max > 0`, in canonical edge order.
#[derive(Debug, Clone)]
pub struct CapacityBounds {
    pub x_max: DVector<f64>,
    pub u_max: DVector<f64>,
}

/// A routing graph together with its cost weights and optional bounds.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub graph: RoutingGraph,
    pub costs: CostWeights,
    pub bounds: Option<CapacityBounds>,
}

impl ProblemInstance {
    /// Validated constructor; data is given in canonical edge order.
    pub fn new(
        graph: RoutingGraph,
        costs: CostWeights,
        bounds: Option<CapacityBounds>,
    ) -> Result<Self> {
        let (n, m) = (graph.n(), graph.m());
        if costs.s.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "s has {} entries, expected n = {}",
                costs.s.len(),
                n
            )));
        }
        if costs.r.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "r has {} entries, expected m = {}",
                costs.r.len(),
                m
            )));
        }
        for (i, &si) in costs.s.iter().enumerate() {
            if !(si > 0.0) {
                return Err(Error::NonpositiveS { vertex: i + 1, value: si });
            }
        }
        for (k, &rk) in costs.r.iter().enumerate() {
            if !(rk >= 0.0) {
                return Err(Error::ModelFormat(format!(
                    "edge cost r[{}] = {} must be nonnegative",
                    k + 1,
                    rk
                )));
            }
        }
        if let Some(b) = &bounds {
            if b.x_max.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "x_max has {} entries, expected n = {}",
                    b.x_max.len(),
                    n
                )));
            }
            if b.u_max.len() != m {
                return Err(Error::DimensionMismatch(format!(
                    "u_max has {} entries, expected m = {}",
                    b.u_max.len(),
                    m
                )));
            }
            for (i, &v) in b.x_max.iter().enumerate() {
                if !(v > 0.0) {
                    return Err(Error::ModelFormat(format!(
                        "x_max[{}] = {} must be strictly positive",
                        i + 1,
                        v
                    )));
                }
            }
            for (k, &v) in b.u_max.iter().enumerate() {
                if !(v > 0.0) {
                    return Err(Error::ModelFormat(format!(
                        "u_max[{}] = {} must be strictly positive",
                        k + 1,
                        v
                    )));
                }
            }
        }
        Ok(ProblemInstance { graph, costs, bounds })
    }

    /// Number of ordinary vertices.
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    /// Number of edges.
    pub fn m(&self) -> usize {
        self.graph.m()
    }

    /// Bounds, or an error naming the operation that needs them.
    pub fn require_bounds(&self, what: &str) -> Result<&CapacityBounds> {
        self.bounds
            .as_ref()
            .ok_or_else(|| Error::BoundsRequired(what.to_string()))
    }

    /// Returns a copy with both capacity bounds replaced by the given scalar
    /// (e.g. a huge value to approximate the unconstrained problem).
    pub fn with_uniform_bounds(&self, cap: f64) -> Self {
        let mut out = self.clone();
        out.bounds = Some(CapacityBounds {
            x_max: DVector::from_element(self.n(), cap),
            u_max: DVector::from_element(self.m(), cap),
        });
        out
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    edges: Vec<ModelEdge>,
    s: Vec<f64>,
    #[serde(default)]
    x_max: Option<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelEdge {
    from: usize,
    to: serde_json::Value,
    #[serde(default)]
    r: f64,
    #[serde(default)]
    u_max: Option<f64>,
}

fn parse_head(to: &serde_json::Value, n: usize, index: usize) -> Result<Head> {
    match to {
        serde_json::Value::String(s) if s == "goal" => Ok(Head::Goal),
        serde_json::Value::Number(num) => {
            let j = num
                .as_u64()
                .ok_or_else(|| Error::ModelFormat(format!(
                    "edge {index}: \"to\" must be a positive integer or \"goal\""
                )))? as usize;
            if j == 0 {
                return Err(Error::ModelFormat(format!(
                    "edge {index}: vertex numbers start at 1"
                )));
            }
            if j == n + 1 {
                // The goal may also be written by its numeric label n+1.
                Ok(Head::Goal)
            } else {
                Ok(Head::Vertex(j - 1))
            }
        }
        _ => Err(Error::ModelFormat(format!(
            "edge {index}: \"to\" must be a vertex number or \"goal\""
        ))),
    }
}

/// Parses a JSON model document into a validated [`ProblemInstance`].
///
/// Per-edge data (`r`, `u_max`) is given in file order and mapped into
/// canonical edge order automatically.
pub fn parse_instance(json: &str) -> Result<ProblemInstance> {
    let file: ModelFile =
        serde_json::from_str(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
    if file.n == 0 {
        return Err(Error::EmptyGraph);
    }

    let mut input_edges = Vec::with_capacity(file.edges.len());
    for (idx, e) in file.edges.iter().enumerate() {
        if e.from == 0 {
            return Err(Error::ModelFormat(format!(
                "edge {}: vertex numbers start at 1",
                idx + 1
            )));
        }
        let head = parse_head(&e.to, file.n, idx + 1)?;
        if let Head::Vertex(j) = head {
            if j >= file.n {
                return Err(Error::HeadOutOfRange {
                    index: idx + 1,
                    head: j + 1,
                    n: file.n,
                });
            }
        }
        if e.from > file.n {
            return Err(Error::TailOutOfRange {
                index: idx + 1,
                tail: e.from,
                n: file.n,
            });
        }
        input_edges.push(Edge { tail: e.from - 1, head });
    }
    let graph = build_graph(file.n, &input_edges)?;

    let r_input: Vec<f64> = file.edges.iter().map(|e| e.r).collect();
    let r = DVector::from_vec(graph.permute_edge_data(&r_input));
    let s = DVector::from_vec(file.s.clone());

    let caps_given = file.edges.iter().filter(|e| e.u_max.is_some()).count();
    let bounds = match (file.x_max, caps_given) {
        (None, 0) => None,
        (Some(x_max), c) if c == file.edges.len() => {
            let u_input: Vec<f64> = file.edges.iter().map(|e| e.u_max.unwrap()).collect();
            Some(CapacityBounds {
                x_max: DVector::from_vec(x_max),
                u_max: DVector::from_vec(graph.permute_edge_data(&u_input)),
            })
        }
        _ => {
            return Err(Error::ModelFormat(
                "bounds must be complete or absent: give x_max and u_max on every edge, \
                 or neither"
                    .to_string(),
            ))
        }
    };

    ProblemInstance::new(graph, CostWeights { s, r }, bounds)
}
