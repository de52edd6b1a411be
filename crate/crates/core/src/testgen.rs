//! Seeded random problem instances for the test suites.
//!
//! Instances are generated from a `u64` seed through a counter-based
//! generator, so every suite that stores its seeds reproduces its inputs
//! exactly. Graphs are built around a random spanning skeleton oriented
//! toward the goal — every vertex gets one edge pointing at the goal or
//! at a vertex placed earlier in a random order — which guarantees goal
//! reachability by construction; extra edges (including back edges that
//! create cycles) are sprinkled on top and deduplicated.
//!
//! The module also hosts a shortest-path oracle implemented as greedy
//! label-setting (Dijkstra with a linear-scan frontier), deliberately a
//! different algorithm from the production value iteration so the two can
//! cross-check each other.

use std::collections::HashSet;

use nalgebra::DVector;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::graph::{build_graph, Edge, Head, RoutingGraph};
use crate::model::{CapacityBounds, CostWeights, ProblemInstance};

/// Shape of the generated instances.
#[derive(Debug, Clone)]
pub struct GenConfig {
    /// Vertex count is drawn from `1..=max_vertices`.
    pub max_vertices: usize,
    /// Attach capacity bounds.
    pub bounded: bool,
    /// Keep flow caps at a healthy fraction of the tail's storage bound,
    /// so certified ratios stay small and closed loops drain quickly.
    pub generous_caps: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { max_vertices: 8, bounded: true, generous_caps: true }
    }
}

/// Draws a random valid instance for `seed`.
pub fn random_instance(seed: u64, cfg: &GenConfig) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=cfg.max_vertices.max(1));

    // Spanning skeleton: in a random placement order, each vertex points
    // at the goal or at an already-placed vertex.
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut seen: HashSet<(usize, Head)> = HashSet::new();
    let mut edges: Vec<Edge> = Vec::new();
    for (pos, &v) in order.iter().enumerate() {
        let head = if pos == 0 || rng.gen_bool(0.35) {
            Head::Goal
        } else {
            Head::Vertex(order[rng.gen_range(0..pos)])
        };
        if seen.insert((v, head)) {
            edges.push(Edge { tail: v, head });
        }
    }
    // Extra edges in any direction, self-loops and duplicates skipped.
    let extras = rng.gen_range(0..=n + 2);
    for _ in 0..extras {
        let tail = rng.gen_range(0..n);
        let head = match rng.gen_range(0..=n) {
            j if j == n => Head::Goal,
            j if j == tail => continue,
            j => Head::Vertex(j),
        };
        if seen.insert((tail, head)) {
            edges.push(Edge { tail, head });
        }
    }
    edges.shuffle(&mut rng);
    let graph = build_graph(n, &edges).expect("generated edge list is valid");

    let m = graph.m();
    let costs = CostWeights {
        s: DVector::from_fn(n, |_, _| rng.gen_range(0.5..5.0)),
        r: DVector::from_fn(m, |_, _| rng.gen_range(0.0..2.0)),
    };
    let bounds = if cfg.bounded {
        let x_max = DVector::from_fn(n, |_, _| rng.gen_range(0.5..2.0));
        let low = if cfg.generous_caps { 0.4 } else { 0.05 };
        let u_max = DVector::from_fn(m, |k, _| {
            x_max[graph.edges()[k].tail] * rng.gen_range(low..1.2)
        });
        Some(CapacityBounds { x_max, u_max })
    } else {
        None
    };

    ProblemInstance::new(graph, costs, bounds).expect("generated instance is valid")
}

/// Draws a random state inside the instance's box (inside `[0, 1]^n` when
/// the instance has no bounds).
pub fn random_state(seed: u64, inst: &ProblemInstance) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f5f_5f5f_5f5f_5f5f);
    DVector::from_fn(inst.n(), |i, _| {
        let hi = inst.bounds.as_ref().map_or(1.0, |b| b.x_max[i]);
        rng.gen_range(0.0..=hi)
    })
}

/// Shortest-path oracle: the minimal cost-to-empty per unit of commodity,
/// `p_i = s_i + min_k (r_k + p_head(k))`, by greedy label-setting from the
/// goal. Unreachable vertices get `f64::INFINITY`.
pub fn shortest_path_values(graph: &RoutingGraph, costs: &CostWeights) -> Vec<f64> {
    let n = graph.n();
    // Reverse view: for each ordinary head, the (tail, edge) pairs into it;
    // goal edges seed the frontier directly.
    let mut into: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut dist = vec![f64::INFINITY; n];
    for (k, e) in graph.edges().iter().enumerate() {
        match e.head {
            Head::Goal => {
                dist[e.tail] = dist[e.tail].min(costs.s[e.tail] + costs.r[k]);
            }
            Head::Vertex(j) => into[j].push((e.tail, k)),
        }
    }
    let mut settled = vec![false; n];
    for _ in 0..n {
        // Linear-scan extraction keeps this trivially correct at test sizes.
        let mut best: Option<usize> = None;
        for v in 0..n {
            if !settled[v] && dist[v].is_finite() {
                if best.map_or(true, |b| dist[v] < dist[b]) {
                    best = Some(v);
                }
            }
        }
        let Some(v) = best else { break };
        settled[v] = true;
        for &(tail, k) in &into[v] {
            if !settled[tail] {
                let cand = costs.s[tail] + costs.r[k] + dist[v];
                if cand < dist[tail] {
                    dist[tail] = cand;
                }
            }
        }
    }
    dist
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn instances_are_reproducible_and_valid() {
        let cfg = GenConfig::default();
        for seed in 0..60 {
            let a = random_instance(seed, &cfg);
            let b = random_instance(seed, &cfg);
            assert_eq!(a.n(), b.n());
            assert_eq!(a.graph.edges(), b.graph.edges());
            assert_eq!(a.costs.s, b.costs.s);
            assert_eq!(a.costs.r, b.costs.r);
            // Goal reachable from every vertex by construction.
            assert!(a.graph.goal_reachable().into_iter().all(|r| r));
            // Every vertex has at least one way out.
            assert!(a.graph.out_degrees().into_iter().all(|d| d > 0));
        }
    }

    #[test]
    fn sizes_and_shapes_vary_with_the_seed() {
        let cfg = GenConfig { max_vertices: 12, ..GenConfig::default() };
        let sizes: HashSet<usize> = (0..40).map(|s| random_instance(s, &cfg).n()).collect();
        assert!(sizes.len() >= 5, "only saw sizes {sizes:?}");
    }

    #[test]
    fn states_stay_inside_the_box() {
        let cfg = GenConfig::default();
        for seed in 0..20 {
            let inst = random_instance(seed, &cfg);
            let x = random_state(seed, &inst);
            let bounds = inst.bounds.as_ref().unwrap();
            for i in 0..inst.n() {
                assert!(x[i] >= 0.0 && x[i] <= bounds.x_max[i]);
            }
        }
    }

    #[test]
    fn oracle_reproduces_the_reference_values() {
        let inst = fixtures::reference_instance();
        let p = shortest_path_values(&inst.graph, &inst.costs);
        let expected = [19.0, 8.0, 2.0, 6.0, 5.0];
        for i in 0..5 {
            assert!((p[i] - expected[i]).abs() < 1e-12, "vertex {}: {}", i + 1, p[i]);
        }
    }

    #[test]
    fn oracle_handles_chains_and_dead_ends() {
        // 1 -> 2 -> goal with unit weights: p = (2, 1).
        let edges = [
            Edge { tail: 0, head: Head::Vertex(1) },
            Edge { tail: 1, head: Head::Goal },
        ];
        let graph = build_graph(2, &edges).unwrap();
        let costs = CostWeights {
            s: DVector::from_element(2, 1.0),
            r: DVector::from_element(2, 0.0),
        };
        let p = shortest_path_values(&graph, &costs);
        assert_eq!(p, vec![2.0, 1.0]);

        // A vertex that cannot reach the goal keeps an infinite label.
        let edges = [
            Edge { tail: 0, head: Head::Vertex(1) },
            Edge { tail: 1, head: Head::Vertex(0) },
            Edge { tail: 2, head: Head::Goal },
        ];
        let graph = build_graph(3, &edges).unwrap();
        let costs = CostWeights {
            s: DVector::from_element(3, 1.0),
            r: DVector::from_element(3, 0.0),
        };
        let p = shortest_path_values(&graph, &costs);
        assert!(p[0].is_infinite() && p[1].is_infinite());
        assert_eq!(p[2], 1.0);
    }
}
