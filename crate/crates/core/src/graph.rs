//! Undirected graphs, self-loop augmentation, degree normalization and the
//! closed-form limit of infinite propagation.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use log::warn;

use crate::error::{Error, Result};
use crate::sparse::{CsrMatrix, SparseOperator};
use crate::tensor::{Matrix, Real};

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of a constructed graph; clones share it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraphId(u64);

impl GraphId {
    fn fresh() -> Self {
        GraphId(NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed))
    }
}

/// Immutable undirected graph stored as a symmetric CSR adjacency.
#[derive(Debug, Clone)]
pub struct Graph {
    id: GraphId,
    num_nodes: usize,
    num_edges: usize,
    adjacency: CsrMatrix<f64>,
    degrees: Vec<f64>,
    self_looped: bool,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.num_nodes == other.num_nodes
            && self.num_edges == other.num_edges
            && self.self_looped == other.self_looped
            && self.adjacency == other.adjacency
    }
}

impl Graph {
    /// Unit-weight graph from an undirected edge list.
    pub fn from_edges(num_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::from_weighted_edges(num_nodes, edges.into_iter().map(|(u, v)| (u, v, 1.0)))
    }

    /// Builds a graph from undirected weighted edges. `(u, v)` and `(v, u)`
    /// name the same edge; repeats are merged by summing their weights.
    /// Self loops are rejected: the normalization pipeline adds them itself.
    pub fn from_weighted_edges(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut merged: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut duplicates = 0usize;
        for (u, v, w) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) references a node outside [0, {num_nodes})"
                )));
            }
            if u == v {
                return Err(Error::Graph(format!("raw self loop on node {u}")));
            }
            if !w.is_finite() || w <= 0.0 {
                return Err(Error::Graph(format!("edge ({u}, {v}) has invalid weight {w}")));
            }
            let key = (u.min(v), u.max(v));
            match merged.get_mut(&key) {
                Some(acc) => {
                    *acc += w;
                    duplicates += 1;
                }
                None => {
                    merged.insert(key, w);
                }
            }
        }
        if duplicates > 0 {
            warn!("merged {duplicates} duplicate edge(s) by accumulating weights");
        }

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_nodes];
        for (&(u, v), &w) in &merged {
            rows[u].push((v, w));
            rows[v].push((u, w));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
        }
        let adjacency = CsrMatrix::from_rows(num_nodes, rows)?;
        let degrees = (0..num_nodes).map(|i| adjacency.row_sum(i)).collect();
        Ok(Self {
            id: GraphId::fresh(),
            num_nodes,
            num_edges: merged.len(),
            adjacency,
            degrees,
            self_looped: false,
        })
    }

    #[inline]
    pub fn id(&self) -> GraphId {
        self.id
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Undirected edges, excluding any added self loops.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    #[inline]
    pub fn adjacency(&self) -> &CsrMatrix<f64> {
        &self.adjacency
    }

    /// Weighted degree per node (row sums, self loops included once added).
    #[inline]
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    #[inline]
    pub fn is_self_looped(&self) -> bool {
        self.self_looped
    }

    /// Undirected off-diagonal edges as `(u, v, weight)` with `u < v`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.num_edges);
        for u in 0..self.num_nodes {
            let (cols, vals) = self.adjacency.row(u);
            for (&v, &w) in cols.iter().zip(vals) {
                if u < v {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    /// Returns `Ã = A + I`. Fails if this graph already carries self loops.
    pub fn add_self_loops(&self) -> Result<Graph> {
        if self.self_looped {
            return Err(Error::SelfLoopsAlreadyAdded);
        }
        let mut rows = Vec::with_capacity(self.num_nodes);
        for i in 0..self.num_nodes {
            let (cols, vals) = self.adjacency.row(i);
            let mut row: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
            let at = row.partition_point(|&(c, _)| c < i);
            row.insert(at, (i, 1.0));
            rows.push(row);
        }
        let adjacency = CsrMatrix::from_rows(self.num_nodes, rows)?;
        Ok(Graph {
            id: GraphId::fresh(),
            num_nodes: self.num_nodes,
            num_edges: self.num_edges,
            degrees: self.degrees.iter().map(|d| d + 1.0).collect(),
            adjacency,
            self_looped: true,
        })
    }

    /// Connected component label per node, labels in first-visit order.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.num_nodes];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.num_nodes {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            queue.push_back(start);
            while let Some(u) = queue.pop_front() {
                for &v in self.adjacency.row(u).0 {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        queue.push_back(v);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    pub fn is_connected(&self) -> bool {
        self.num_nodes == 0 || self.components().0 == 1
    }

    /// Self-looped degrees `d̃`, whether or not loops were materialized.
    fn looped_degrees(&self) -> Vec<f64> {
        if self.self_looped {
            self.degrees.clone()
        } else {
            self.degrees.iter().map(|d| d + 1.0).collect()
        }
    }
}

/// `Â = D̃^{r-1} Ã D̃^{-r}` over a self-looped graph.
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix<f64>,
    exponent_r: f64,
    source: GraphId,
}

impl NormalizedAdjacency {
    #[inline]
    pub fn matrix(&self) -> &CsrMatrix<f64> {
        &self.matrix
    }

    #[inline]
    pub fn exponent_r(&self) -> f64 {
        self.exponent_r
    }

    #[inline]
    pub fn source(&self) -> GraphId {
        self.source
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.matrix.rows()
    }

    /// The operator in element type `T`, ready for the tape.
    pub fn operator<T: Real>(&self) -> Arc<SparseOperator<T>> {
        Arc::new(SparseOperator::new(self.matrix.cast()))
    }

    /// `Â^k` as a dense matrix, by repeated sparse products.
    pub fn dense_power(&self, k: usize) -> Matrix<f64> {
        let mut acc = Matrix::identity(self.num_nodes());
        for _ in 0..k {
            acc = self.matrix.spmm(&acc).expect("square operator");
        }
        acc
    }
}

/// Normalizes a self-looped graph with exponent `r ∈ [0, 1]`.
pub fn normalize_adjacency(graph: &Graph, r: f64) -> Result<NormalizedAdjacency> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidArgument(format!("normalization exponent r={r} outside [0, 1]")));
    }
    if !graph.self_looped {
        return Err(Error::MissingSelfLoops);
    }
    let d = &graph.degrees;
    let scale = |i: usize, j: usize| -> f64 {
        // Exact forms for the common exponents; the r=0.5 branch is symmetric
        // bit for bit because d_i·d_j commutes.
        if r == 0.5 {
            1.0 / (d[i] * d[j]).sqrt()
        } else if r == 0.0 {
            1.0 / d[i]
        } else if r == 1.0 {
            1.0 / d[j]
        } else {
            d[i].powf(r - 1.0) * d[j].powf(-r)
        }
    };
    let mut rows = Vec::with_capacity(graph.num_nodes);
    for i in 0..graph.num_nodes {
        let (cols, vals) = graph.adjacency.row(i);
        rows.push(cols.iter().zip(vals).map(|(&j, &w)| (j, w * scale(i, j))).collect());
    }
    Ok(NormalizedAdjacency {
        matrix: CsrMatrix::from_rows(graph.num_nodes, rows)?,
        exponent_r: r,
        source: graph.id,
    })
}

/// Convenience: self loops then normalization.
pub fn normalized_from_raw(graph: &Graph, r: f64) -> Result<NormalizedAdjacency> {
    normalize_adjacency(&graph.add_self_loops()?, r)
}

/// Closed-form `Â^∞` for a connected graph:
/// `(d̃_i)^r (d̃_j)^{1-r} / Σ_k d̃_k`, where `d̃ = d + 1` and the denominator
/// equals `2m + n` for unit weights. Accepts the graph with or without its
/// self loops materialized.
pub fn stationary_limit(graph: &Graph, r: f64) -> Result<Matrix<f64>> {
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::InvalidArgument(format!("normalization exponent r={r} outside [0, 1]")));
    }
    let (components, _) = graph.components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let d = graph.looped_degrees();
    let mass: f64 = d.iter().sum();
    let n = graph.num_nodes;
    Ok(Matrix::from_fn(n, n, |i, j| {
        if r == 0.5 {
            (d[i] * d[j]).sqrt() / mass
        } else {
            d[i].powf(r) * d[j].powf(1.0 - r) / mass
        }
    }))
}
