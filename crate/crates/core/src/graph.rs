//! Weighted symmetric graphs in CSR arc form.
//!
//! Every undirected edge `{i, j}` is stored as two directed arcs `i -> j` and
//! `j -> i` with equal weight. Arcs are grouped by source vertex (CSR rows) and
//! sorted by target within a row. `reverse_arc[a]` gives the index of the
//! opposite arc, so operators that read `g_{j,i}` while visiting arc `(i, j)`
//! do a single indexed load.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::signal::{PointCloud, Signal};

/// Arbitrary directed, nonnegatively weighted arcs, before symmetrization.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    vertex_count: usize,
    arcs: Vec<(usize, usize, f64)>,
}

impl DirectedGraph {
    pub fn new(vertex_count: usize, arcs: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(i, j, w) in &arcs {
            if i >= vertex_count || j >= vertex_count {
                return Err(Error::InvalidParameter(format!(
                    "arc ({i}, {j}) out of range for {vertex_count} vertices"
                )));
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "arc ({i}, {j}) has invalid weight {w}"
                )));
            }
        }
        Ok(Self { vertex_count, arcs })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn arcs(&self) -> &[(usize, usize, f64)] {
        &self.arcs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    vertex_count: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    arc_sources: Vec<usize>,
    weights: Vec<f64>,
    sqrt_weights: Vec<f64>,
    reverse_arc: Vec<usize>,
}

impl Graph {
    /// Builds a graph from arcs already sorted by `(source, target)`, free of
    /// duplicates and symmetric in both topology and weight.
    fn from_sorted_symmetric(vertex_count: usize, arcs: Vec<(usize, usize, f64)>) -> Self {
        let mut row_offsets = vec![0usize; vertex_count + 1];
        for &(i, _, _) in &arcs {
            row_offsets[i + 1] += 1;
        }
        for i in 0..vertex_count {
            row_offsets[i + 1] += row_offsets[i];
        }
        let arc_sources: Vec<usize> = arcs.iter().map(|a| a.0).collect();
        let col_indices: Vec<usize> = arcs.iter().map(|a| a.1).collect();
        let weights: Vec<f64> = arcs.iter().map(|a| a.2).collect();
        let sqrt_weights = weights.iter().map(|w| w.sqrt()).collect();

        let reverse_arc = arcs
            .iter()
            .map(|&(i, j, _)| {
                let row = &col_indices[row_offsets[j]..row_offsets[j + 1]];
                let k = row
                    .binary_search(&i)
                    .expect("symmetric arc list must contain every reverse arc");
                row_offsets[j] + k
            })
            .collect();

        Self {
            vertex_count,
            row_offsets,
            col_indices,
            arc_sources,
            weights,
            sqrt_weights,
            reverse_arc,
        }
    }

    /// Convenience constructor from undirected edges `(i, j, w)`; equivalent to
    /// symmetrizing the corresponding directed arcs.
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        Ok(symmetrize(&DirectedGraph::new(vertex_count, edges.to_vec())?))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn arc_count(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    /// Source vertex of every arc (the CSR row it belongs to).
    pub fn arc_sources(&self) -> &[usize] {
        &self.arc_sources
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sqrt_weights(&self) -> &[f64] {
        &self.sqrt_weights
    }

    pub fn reverse_arc(&self) -> &[usize] {
        &self.reverse_arc
    }

    /// Arc index range leaving vertex `i`.
    pub fn arcs_of(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    /// `(source, target, weight)` for every arc in CSR order.
    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.arc_count()).map(|a| (self.arc_sources[a], self.col_indices[a], self.weights[a]))
    }

    pub fn to_directed(&self) -> DirectedGraph {
        DirectedGraph {
            vertex_count: self.vertex_count,
            arcs: self.arcs().collect(),
        }
    }

    /// Relabels vertex `i` as `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.vertex_count)?;
        let mut arcs: Vec<_> = self.arcs().map(|(i, j, w)| (perm[i], perm[j], w)).collect();
        arcs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        Ok(Self::from_sorted_symmetric(self.vertex_count, arcs))
    }

    /// Returns the same topology with new per-arc weights (must stay symmetric).
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.arc_count() {
            return Err(Error::DimensionMismatch {
                expected: self.arc_count(),
                found: weights.len(),
            });
        }
        for (a, &w) in weights.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) || w != weights[self.reverse_arc[a]] {
                return Err(Error::InvalidParameter(format!(
                    "arc {a}: weight {w} is negative, non-finite or asymmetric"
                )));
            }
        }
        let sqrt_weights = weights.iter().map(|w| w.sqrt()).collect();
        Ok(Self {
            weights,
            sqrt_weights,
            ..self.clone()
        })
    }
}

pub(crate) fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: perm.len(),
        });
    }
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidParameter("not a permutation".into()));
        }
    }
    Ok(())
}

/// `w_ij <- max(w_ij, w_ji)`; drops self-loops and zero-weight arcs.
pub fn symmetrize(directed: &DirectedGraph) -> Graph {
    let mut arcs: Vec<(usize, usize, f64)> = directed
        .arcs
        .iter()
        .filter(|&&(i, j, w)| i != j && w > 0.0)
        .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)])
        .collect();
    arcs.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    arcs.dedup_by(|next, kept| {
        if (next.0, next.1) == (kept.0, kept.1) {
            kept.2 = kept.2.max(next.2);
            true
        } else {
            false
        }
    });
    Graph::from_sorted_symmetric(directed.vertex_count, arcs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    dist_sq: f64,
    index: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

/// Exact k-nearest-neighbor indicator graph (weights 1), symmetrized.
///
/// Distance ties are broken toward the smaller vertex index.
pub fn knn_graph(points: &PointCloud, k: usize) -> Result<Graph> {
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must satisfy 1 <= k < |V| = {n}"
        )));
    }
    points.validate()?;
    let pos = &points.positions;

    let mut arcs = Vec::with_capacity(n * k);
    let mut heap = BinaryHeap::with_capacity(k + 1);
    for (i, p) in pos.iter().enumerate() {
        heap.clear();
        for (j, q) in pos.iter().enumerate() {
            if i == j {
                continue;
            }
            let dist_sq = (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
            let cand = Candidate { dist_sq, index: j };
            if heap.len() < k {
                heap.push(cand);
            } else if cand < *heap.peek().expect("heap holds k > 0 items") {
                heap.pop();
                heap.push(cand);
            }
        }
        arcs.extend(heap.drain().map(|c| (i, c.index, 1.0)));
    }
    Ok(symmetrize(&DirectedGraph {
        vertex_count: n,
        arcs,
    }))
}

/// Multiplies every arc weight by `exp(-kappa * ||f0_i - f0_j||^2)`.
///
/// Arcs whose weight underflows to zero are kept so the topology does not
/// depend on `kappa`.
pub fn feature_weights(graph: &Graph, f0: &Signal, kappa: f64) -> Result<Graph> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("kappa = {kappa} must be >= 0")));
    }
    f0.check_shape(graph.vertex_count(), f0.dim())?;
    let weights = graph
        .arcs()
        .map(|(i, j, w)| {
            let d2: f64 = f0
                .row(i)
                .iter()
                .zip(f0.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            w * (-kappa * d2).exp()
        })
        .collect::<Vec<_>>();
    let sqrt_weights = weights.iter().map(|w| w.sqrt()).collect();
    Ok(Graph {
        weights,
        sqrt_weights,
        ..graph.clone()
    })
}

/// `max_i sum_j w_ij`; zero for a graph without arcs.
pub fn max_weighted_degree(graph: &Graph) -> f64 {
    (0..graph.vertex_count())
        .map(|i| graph.weights()[graph.arcs_of(i)].iter().sum::<f64>())
        .fold(0.0, f64::max)
}
