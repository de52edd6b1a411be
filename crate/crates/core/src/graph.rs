//! Directed routing graphs and their incidence matrices.
//!
//! A routing graph has `n` ordinary vertices, labeled `1..=n` externally and
//! `0..n` internally, plus one absorbing goal vertex. Every edge points from
//! an ordinary vertex either to another ordinary vertex or to the goal.
//! Commodity stored at the vertices moves along edges; flow into the goal
//! leaves the network.
//!
//! Edges are kept in a canonical order: grouped by tail, ascending, and
//! within a group ascending by head label with the goal sorting last (the
//! goal behaves as label `n+1`). All per-edge data (transport costs `r`,
//! flow caps `u_max`) is stored in this canonical order; [`build_graph`]
//! records the permutation from input order so callers can map their data.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Head of an edge: an ordinary vertex (0-based) or the absorbing goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Head {
    /// Ordinary vertex, 0-based index.
    Vertex(usize),
    /// The absorbing goal vertex.
    Goal,
}

impl Head {
    /// Sort key placing the goal after every ordinary vertex, i.e. the goal
    /// acts as label `n` in 0-based terms (`n+1` in 1-based terms).
    fn label(self, n: usize) -> usize {
        match self {
            Head::Vertex(j) => j,
            Head::Goal => n,
        }
    }

    /// 1-based display form: vertex number or `"goal"`.
    pub fn display(self) -> String {
        match self {
            Head::Vertex(j) => (j + 1).to_string(),
            Head::Goal => "goal".to_string(),
        }
    }
}

/// A directed edge from an ordinary vertex to a vertex or the goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    /// Tail vertex, 0-based.
    pub tail: usize,
    pub head: Head,
}

/// A validated routing graph with edges in canonical order.
#[derive(Debug, Clone)]
pub struct RoutingGraph {
    n: usize,
    edges: Vec<Edge>,
    /// `first_edge[i]..first_edge[i+1]` is the canonical index range of the
    /// edges leaving vertex `i`; length `n + 1`.
    first_edge: Vec<usize>,
    /// Maps input edge order to canonical order: the edge given k-th in the
    /// input sits at canonical index `input_to_canonical[k]`.
    input_to_canonical: Vec<usize>,
}

impl RoutingGraph {
    /// Number of ordinary vertices.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total number of edges.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// All edges in canonical order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Canonical index range of the edges leaving vertex `i` (0-based).
    pub fn out_range(&self, i: usize) -> std::ops::Range<usize> {
        self.first_edge[i]..self.first_edge[i + 1]
    }

    /// Out-degrees `m_i` per vertex.
    pub fn out_degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.out_range(i).len()).collect()
    }

    /// Permutation from input edge order to canonical order.
    pub fn input_to_canonical(&self) -> &[usize] {
        &self.input_to_canonical
    }

    /// Reorders per-edge data given in input order into canonical order.
    pub fn permute_edge_data<T: Clone>(&self, data: &[T]) -> Vec<T> {
        assert_eq!(data.len(), self.m(), "per-edge data length mismatch");
        let mut out: Vec<Option<T>> = vec![None; self.m()];
        for (input_idx, &canon_idx) in self.input_to_canonical.iter().enumerate() {
            out[canon_idx] = Some(data[input_idx].clone());
        }
        out.into_iter().map(|v| v.unwrap()).collect()
    }

    /// The signed vertex-edge incidence matrix `B` (n x m). Column `k` for an
    /// edge `(i, j)` has `-1` at row `i` and, when `j` is an ordinary vertex,
    /// `+1` at row `j`; goal edges carry only the `-1`.
    pub fn incidence_matrix(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.n, self.m());
        for (k, e) in self.edges.iter().enumerate() {
            b[(e.tail, k)] = -1.0;
            if let Head::Vertex(j) = e.head {
                b[(j, k)] = 1.0;
            }
        }
        b
    }

    /// The set of vertices from which the goal is reachable, computed by a
    /// reverse traversal from the goal. Returned as a boolean mask indexed by
    /// vertex.
    pub fn goal_reachable(&self) -> Vec<bool> {
        // Reverse adjacency: for each head vertex, the tails pointing at it.
        let mut rev: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        let mut reach = vec![false; self.n];
        let mut stack: Vec<usize> = Vec::new();
        for e in &self.edges {
            match e.head {
                Head::Goal => {
                    if !reach[e.tail] {
                        reach[e.tail] = true;
                        stack.push(e.tail);
                    }
                }
                Head::Vertex(j) => rev[j].push(e.tail),
            }
        }
        while let Some(v) = stack.pop() {
            for &t in &rev[v] {
                if !reach[t] {
                    reach[t] = true;
                    stack.push(t);
                }
            }
        }
        reach
    }
}

/// Builds a validated [`RoutingGraph`] from an edge list in arbitrary order.
///
/// Edges are re-sorted into canonical (tail, head-label) order; the returned
/// graph records the permutation so per-edge data given in input order can be
/// mapped with [`RoutingGraph::permute_edge_data`]. Rejects: `n = 0`, tails
/// or heads out of range, self-loops, and duplicate edges (parallel edges are
/// not allowed — the canonical order needs distinct head labels per tail).
pub fn build_graph(n: usize, input_edges: &[Edge]) -> Result<RoutingGraph> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    for (idx, e) in input_edges.iter().enumerate() {
        if e.tail >= n {
            return Err(Error::TailOutOfRange {
                index: idx + 1,
                tail: e.tail + 1,
                n,
            });
        }
        if let Head::Vertex(j) = e.head {
            if j >= n {
                return Err(Error::HeadOutOfRange {
                    index: idx + 1,
                    head: j + 1,
                    n,
                });
            }
            if j == e.tail {
                return Err(Error::SelfLoop {
                    index: idx + 1,
                    vertex: e.tail + 1,
                });
            }
        }
    }

    // Stable sort by (tail, head label); then any duplicate is adjacent.
    let mut order: Vec<usize> = (0..input_edges.len()).collect();
    order.sort_by_key(|&k| (input_edges[k].tail, input_edges[k].head.label(n)));
    let edges: Vec<Edge> = order.iter().map(|&k| input_edges[k]).collect();
    for w in edges.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateEdge {
                tail: w[0].tail + 1,
                head: w[0].head.display(),
            });
        }
    }

    let mut input_to_canonical = vec![0usize; input_edges.len()];
    for (canon_idx, &input_idx) in order.iter().enumerate() {
        input_to_canonical[input_idx] = canon_idx;
    }

    let mut first_edge = vec![0usize; n + 1];
    for e in &edges {
        first_edge[e.tail + 1] += 1;
    }
    for i in 0..n {
        first_edge[i + 1] += first_edge[i];
    }

    Ok(RoutingGraph {
        n,
        edges,
        first_edge,
        input_to_canonical,
    })
}
