//! Per-relation graph diffusion matrices and their infinity-norm
//! ceilings.
//!
//! For each relation `r` the adjacency `A_r` has `A_r[t,h] = 1` iff
//! `(h,r,t)` is a positive training triplet. The sum aggregator uses
//! `S_r = A_r` directly; the mean aggregator divides each nonzero row
//! by its per-relation in-degree, so every nonzero row sums to 1.
//!
//! Mean rows are built with a compensated last entry (`1 - partial
//! sum`), which makes the left-to-right floating-point row sum exactly
//! 1.0 — the infinity-norm ceiling `k_r = 1` must dominate every
//! constructible diffusion matrix with no tolerance.

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Split, Triplet};
use crate::matrix::CsrMatrix;
use std::collections::HashSet;
use std::str::FromStr;

/// Neighbor aggregation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregator {
    Sum,
    Mean,
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Aggregator::Sum => write!(f, "sum"),
            Aggregator::Mean => write!(f, "mean"),
        }
    }
}

impl FromStr for Aggregator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Aggregator::Sum),
            "mean" => Ok(Aggregator::Mean),
            other => Err(Error::Argument(format!(
                "unknown aggregator {other:?} (expected sum or mean)"
            ))),
        }
    }
}

/// Per-relation diffusion matrices `S_r`, the underlying adjacencies
/// `A_r`, and the infinity-norm ceilings `k_r`.
#[derive(Debug, Clone)]
pub struct DiffusionSet {
    pub aggregator: Aggregator,
    matrices: Vec<CsrMatrix>,
    adjacency: Vec<CsrMatrix>,
    k_r: Vec<f64>,
}

impl DiffusionSet {
    /// Diffusion matrix of one relation.
    pub fn matrix(&self, relation: usize) -> &CsrMatrix {
        &self.matrices[relation]
    }

    /// Boolean adjacency of one relation.
    pub fn adjacency(&self, relation: usize) -> &CsrMatrix {
        &self.adjacency[relation]
    }

    /// Infinity-norm ceiling of one relation.
    pub fn k(&self, relation: usize) -> f64 {
        self.k_r[relation]
    }

    pub fn k_all(&self) -> &[f64] {
        &self.k_r
    }

    /// Sum of `k_r` over all relations (the kappa ingredient).
    pub fn k_sum(&self) -> f64 {
        self.k_r.iter().sum()
    }

    pub fn n_relations(&self) -> usize {
        self.matrices.len()
    }

    pub fn n_entities(&self) -> usize {
        self.matrices.first().map_or(0, |m| m.rows)
    }

    /// Replace the ceilings with ones computed from a larger triplet
    /// set (the full positive set when the matrices come from a
    /// training subset).
    pub fn with_k_from(mut self, full_positives: &[Triplet]) -> Self {
        self.k_r = compute_k_r(
            full_positives,
            self.n_entities(),
            self.n_relations(),
            self.aggregator,
        );
        self
    }

    /// Diffusion for a training split: matrices from the positive
    /// training triplets, ceilings from the full positive set.
    pub fn for_split(graph: &KnowledgeGraph, split: &Split, aggregator: Aggregator) -> Self {
        build_diffusion(
            &split.train_positives(graph),
            graph.n_entities(),
            graph.n_relations(),
            aggregator,
        )
        .with_k_from(graph.positives())
    }
}

/// Build per-relation diffusion matrices from positive triplets. The
/// ceilings `k_r` are computed from the same triplet set; use
/// [`DiffusionSet::with_k_from`] when they must come from a superset.
pub fn build_diffusion(
    positives: &[Triplet],
    n_entities: usize,
    n_relations: usize,
    aggregator: Aggregator,
) -> DiffusionSet {
    let mut per_relation: Vec<HashSet<(usize, usize)>> = vec![HashSet::new(); n_relations];
    for t in positives {
        assert!(t.head < n_entities && t.tail < n_entities && t.relation < n_relations);
        per_relation[t.relation].insert((t.tail, t.head));
    }

    let mut adjacency = Vec::with_capacity(n_relations);
    let mut matrices = Vec::with_capacity(n_relations);
    for edges in &per_relation {
        let mut entries: Vec<(usize, usize, f64)> =
            edges.iter().map(|&(t, h)| (t, h, 1.0)).collect();
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let adj = CsrMatrix::from_entries(n_entities, n_entities, &entries);
        let s = match aggregator {
            Aggregator::Sum => adj.clone(),
            Aggregator::Mean => normalize_rows(&adj),
        };
        adjacency.push(adj);
        matrices.push(s);
    }
    let k_r = compute_k_r(positives, n_entities, n_relations, aggregator);
    DiffusionSet {
        aggregator,
        matrices,
        adjacency,
        k_r,
    }
}

/// Row-normalize an adjacency so every nonzero row sums to exactly 1.0
/// in left-to-right floating-point addition: the first `k-1` entries
/// are `1/k` and the last entry is the compensated remainder.
fn normalize_rows(adj: &CsrMatrix) -> CsrMatrix {
    let mut out = adj.clone();
    for r in 0..out.rows {
        let (start, end) = (out.indptr[r], out.indptr[r + 1]);
        let k = end - start;
        if k == 0 {
            continue;
        }
        let inv = 1.0 / k as f64;
        let mut partial = 0.0;
        for slot in out.data[start..end - 1].iter_mut() {
            *slot = inv;
            partial += inv;
        }
        out.data[end - 1] = 1.0 - partial;
    }
    out
}

/// Infinity-norm ceiling per relation over every diffusion matrix
/// constructible from any subset of the given positives: the maximum
/// per-relation in-degree for the sum aggregator, and 1 (or 0 for an
/// absent relation) for the mean aggregator.
pub fn compute_k_r(
    positives: &[Triplet],
    n_entities: usize,
    n_relations: usize,
    aggregator: Aggregator,
) -> Vec<f64> {
    let mut seen: Vec<HashSet<(usize, usize)>> = vec![HashSet::new(); n_relations];
    let mut in_degree = vec![vec![0usize; n_entities]; n_relations];
    for t in positives {
        if seen[t.relation].insert((t.tail, t.head)) {
            in_degree[t.relation][t.tail] += 1;
        }
    }
    (0..n_relations)
        .map(|r| match aggregator {
            Aggregator::Sum => in_degree[r].iter().copied().max().unwrap_or(0) as f64,
            Aggregator::Mean => {
                if seen[r].is_empty() {
                    0.0
                } else {
                    1.0
                }
            }
        })
        .collect()
}
