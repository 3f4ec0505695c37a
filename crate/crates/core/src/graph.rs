//! Commutation graphs: which operator pairs are required to commute.

use crate::cmatrix::CMatrix;
use crate::error::{DilationError, Result};
use crate::kernels::spectral_norm;
use std::collections::BTreeSet;

/// Undirected graph on vertices 1..=n prescribing commutation pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommutationGraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl CommutationGraph {
    /// Build from 1-based vertex labels. Self-loops and out-of-range
    /// labels are rejected; duplicate edges collapse.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a == b {
                return Err(DilationError::InvalidGraph(format!("self-loop at {a}")));
            }
            if a == 0 || b == 0 || a > n || b > n {
                return Err(DilationError::InvalidGraph(format!(
                    "edge ({a},{b}) outside 1..={n}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(CommutationGraph { n, edges: set })
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
        Self::new(n, &edges)
    }

    pub fn star(n: usize) -> Result<Self> {
        let edges: Vec<_> = (2..=n).map(|i| (1, i)).collect();
        Self::new(n, &edges)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(DilationError::InvalidGraph("cycle needs n >= 3".into()));
        }
        let mut edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
        edges.push((n, 1));
        Self::new(n, &edges)
    }

    pub fn edgeless(n: usize) -> Result<Self> {
        Self::new(n, &[])
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges
            .iter()
            .filter_map(|&(a, b)| {
                if a == v {
                    Some(b)
                } else if b == v {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn degree(&self, v: usize) -> usize {
        self.neighbors(v).len()
    }

    /// True iff no subgraph is a cycle (union-find over the edges).
    pub fn is_acyclic(&self) -> bool {
        let mut parent: Vec<usize> = (0..=self.n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }

    /// Connected components as sorted vertex lists, ordered by their
    /// smallest vertex. Isolated vertices form their own components.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut parent: Vec<usize> = (0..=self.n).collect();
        fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
            }
        }
        let mut buckets: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for v in 1..=self.n {
            let r = find(&mut parent, v);
            buckets.entry(r).or_default().push(v);
        }
        let mut comps: Vec<Vec<usize>> = buckets.into_values().collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }

    /// Restriction to a vertex subset, keeping the global labels.
    pub fn induced(&self, vertices: &[usize]) -> Result<CommutationGraph> {
        let set: BTreeSet<usize> = vertices.iter().copied().collect();
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|(a, b)| set.contains(a) && set.contains(b))
            .copied()
            .collect();
        CommutationGraph::new(self.n, &edges)
    }

    /// Leaf elimination order for an acyclic graph restricted to
    /// `vertices`: repeatedly remove a vertex of degree <= 1 (lowest
    /// label first), recording its unique remaining neighbor when
    /// present. Reversing the list gives the inductive rebuild order.
    pub fn leaf_elimination_order(&self, vertices: &[usize]) -> Result<Vec<(usize, Option<usize>)>> {
        if !self.is_acyclic() {
            return Err(DilationError::CyclicGraph);
        }
        let mut alive: BTreeSet<usize> = vertices.iter().copied().collect();
        let mut edges: BTreeSet<(usize, usize)> = self
            .edges
            .iter()
            .filter(|(a, b)| alive.contains(a) && alive.contains(b))
            .copied()
            .collect();
        let mut order = Vec::with_capacity(alive.len());
        while !alive.is_empty() {
            let deg = |v: usize, edges: &BTreeSet<(usize, usize)>| {
                edges.iter().filter(|(a, b)| *a == v || *b == v).count()
            };
            let &leaf = alive
                .iter()
                .find(|&&v| deg(v, &edges) <= 1)
                .expect("acyclic graph always has a vertex of degree <= 1");
            let nbr = edges.iter().find_map(|&(a, b)| {
                if a == leaf {
                    Some(b)
                } else if b == leaf {
                    Some(a)
                } else {
                    None
                }
            });
            edges.retain(|&(a, b)| a != leaf && b != leaf);
            alive.remove(&leaf);
            order.push((leaf, nbr));
        }
        Ok(order)
    }
}

/// Per-edge commutator norms of a labeled operator family.
#[derive(Debug, Clone, serde::Serialize)]
pub struct CommuteReport {
    pub edge_norms: Vec<(usize, usize, f64)>,
    pub max_norm: f64,
    pub pass: bool,
    pub tol: f64,
}

/// Check that `ops[v-1]` commute according to G: per-edge commutator
/// norms, pass iff all are within `tol`.
pub fn check_commute_according(
    ops: &[CMatrix],
    graph: &CommutationGraph,
    tol: f64,
) -> Result<CommuteReport> {
    if ops.len() != graph.vertex_count() {
        return Err(DilationError::DimensionMismatch(format!(
            "{} operators for {} vertices",
            ops.len(),
            graph.vertex_count()
        )));
    }
    let dim = ops.first().map_or(0, |m| m.rows());
    for m in ops {
        if !m.is_square() || m.rows() != dim {
            return Err(DilationError::DimensionMismatch(
                "operators must be square on a common space".into(),
            ));
        }
    }
    let mut edge_norms = Vec::new();
    let mut max_norm: f64 = 0.0;
    for (a, b) in graph.edges() {
        let x = &ops[a - 1];
        let y = &ops[b - 1];
        let comm = x.mul(y)?.sub(&y.mul(x)?)?;
        let norm = spectral_norm(&comm);
        max_norm = max_norm.max(norm);
        edge_norms.push((a, b, norm));
    }
    Ok(CommuteReport { edge_norms, max_norm, pass: max_norm <= tol, tol })
}
