//! Areal map structure and the inter-disease graph.
//!
//! Regions are indexed `0..n` everywhere in the library; file formats use
//! 1-based identifiers and are translated at the I/O boundary.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The areal map: regions, geographic neighbor pairs and a fixed
/// topological order used by the DAGAR construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGraph {
    n: usize,
    /// Unordered neighbor pairs stored as `(i, j)` with `i < j`, sorted.
    edges: Vec<(usize, usize)>,
    /// `rank[i]` is the position of region `i` in the topological order.
    rank: Vec<usize>,
    /// Regions listed in topological order.
    sequence: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
    centroids: Option<Vec<[f64; 2]>>,
}

/// One DAGAR parent link: `parent` is a geographic neighbor of `child`
/// that precedes it in the topological order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DirectedEdge {
    pub child: usize,
    pub parent: usize,
}

impl RegionGraph {
    /// Builds a graph with the identity topological order.
    ///
    /// Edges may be given in either orientation; self-loops, duplicates and
    /// out-of-range endpoints are rejected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::RegionOutOfRange {
                    index: a.max(b),
                    n,
                });
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        for w in canon.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateEdge(w[0].0, w[0].1));
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &canon {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            n,
            edges: canon,
            rank: (0..n).collect(),
            sequence: (0..n).collect(),
            neighbors,
            centroids: None,
        })
    }

    /// Replaces the topological order. `sequence[k]` is the region visited
    /// at position `k`.
    pub fn with_order(mut self, sequence: Vec<usize>) -> Result<Self> {
        if sequence.len() != self.n {
            return Err(Error::InvalidOrder(format!(
                "order has {} entries for {} regions",
                sequence.len(),
                self.n
            )));
        }
        let mut rank = vec![usize::MAX; self.n];
        for (pos, &r) in sequence.iter().enumerate() {
            if r >= self.n || rank[r] != usize::MAX {
                return Err(Error::InvalidOrder(format!(
                    "region {r} is repeated or out of range"
                )));
            }
            rank[r] = pos;
        }
        self.rank = rank;
        self.sequence = sequence;
        Ok(self)
    }

    pub fn with_centroids(mut self, centroids: Vec<[f64; 2]>) -> Result<Self> {
        if centroids.len() != self.n {
            return Err(Error::Dimension(format!(
                "{} centroids for {} regions",
                centroids.len(),
                self.n
            )));
        }
        self.centroids = Some(centroids);
        Ok(self)
    }

    /// Hexagonal tiling of `n` cells laid out row by row with `cols` cells
    /// per row (odd rows shifted right by half a cell). Centroids are the
    /// hexagon centers with unit spacing.
    pub fn hex_lattice(n: usize, cols: usize) -> Result<Self> {
        if cols == 0 {
            return Err(Error::Dimension("hex lattice needs at least one column".into()));
        }
        let pos = |k: usize| (k / cols, k % cols);
        let index = |r: usize, c: usize| -> Option<usize> {
            let k = r * cols + c;
            (c < cols && k < n).then_some(k)
        };
        let mut edges = Vec::new();
        let mut centroids = Vec::with_capacity(n);
        for k in 0..n {
            let (r, c) = pos(k);
            let shift = if r % 2 == 1 { 0.5 } else { 0.0 };
            centroids.push([c as f64 + shift, r as f64 * 3f64.sqrt() / 2.0]);
            if let Some(right) = index(r, c + 1) {
                edges.push((k, right));
            }
            // Odd rows sit half a cell to the right of their upper row.
            let (left, right) = if r % 2 == 1 {
                (Some(c), Some(c + 1))
            } else {
                (c.checked_sub(1), Some(c))
            };
            for cc in [left, right].into_iter().flatten() {
                if let Some(below) = index(r + 1, cc) {
                    edges.push((k, below));
                }
            }
        }
        Self::new(n, edges)?.with_centroids(centroids)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn rank(&self, i: usize) -> usize {
        self.rank[i]
    }

    /// Regions in topological order.
    pub fn sequence(&self) -> &[usize] {
        &self.sequence
    }

    pub fn centroids(&self) -> Option<&[[f64; 2]]> {
        self.centroids.as_deref()
    }

    pub fn are_neighbors(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Geographic neighbors of `i` that precede it in the topological
    /// order, sorted by their position in that order.
    pub fn preceding_neighbors(&self, i: usize) -> Result<Vec<usize>> {
        if i >= self.n {
            return Err(Error::RegionOutOfRange { index: i, n: self.n });
        }
        let mut out: Vec<usize> = self.neighbors[i]
            .iter()
            .copied()
            .filter(|&j| self.rank[j] < self.rank[i])
            .collect();
        out.sort_by_key(|&j| self.rank[j]);
        Ok(out)
    }

    /// All DAGAR parent links, grouped by child in region-index order and
    /// by parent rank within a child. Every geographic edge appears exactly
    /// once, oriented from its later endpoint.
    pub fn directed_edges(&self) -> Vec<DirectedEdge> {
        let mut out = Vec::with_capacity(self.edges.len());
        for child in 0..self.n {
            let mut parents: Vec<usize> = self.neighbors[child]
                .iter()
                .copied()
                .filter(|&j| self.rank[j] < self.rank[child])
                .collect();
            parents.sort_by_key(|&j| self.rank[j]);
            out.extend(parents.into_iter().map(|parent| DirectedEdge { child, parent }));
        }
        out
    }

    /// Orients the undirected edge `{i, j}` as a DAGAR parent link.
    pub fn orient(&self, i: usize, j: usize) -> DirectedEdge {
        if self.rank[i] > self.rank[j] {
            DirectedEdge { child: i, parent: j }
        } else {
            DirectedEdge { child: j, parent: i }
        }
    }

    /// Groups region pairs by centroid distance: pair `(i, j)` belongs to
    /// order `r` (0-based here) when its distance lies in `(d_{r-1}, d_r]`
    /// with `d_{-1} = 0`. Pairs beyond the last cut point are dropped.
    pub fn rth_order_neighbors(&self, bins: &[f64]) -> Result<Vec<Vec<(usize, usize)>>> {
        let centroids = self.centroids.as_ref().ok_or(Error::MissingCentroids)?;
        if bins.is_empty() || bins[0] <= 0.0 || bins.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidBins);
        }
        let mut out = vec![Vec::new(); bins.len()];
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let dx = centroids[i][0] - centroids[j][0];
                let dy = centroids[i][1] - centroids[j][1];
                let dist = dx.hypot(dy);
                if dist <= 0.0 {
                    continue;
                }
                // First cut point at or above the distance (right-closed bins).
                let r = bins.partition_point(|&d| d < dist);
                if r < bins.len() {
                    out[r].push((i, j));
                }
            }
        }
        Ok(out)
    }
}

/// How cross-disease dependence is structured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Unstructured,
    Directed,
    Undirected,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Unstructured, Variant::Directed, Variant::Undirected];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Unstructured => "unstructured",
            Variant::Directed => "directed",
            Variant::Undirected => "undirected",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unstructured" => Ok(Variant::Unstructured),
            "directed" => Ok(Variant::Directed),
            "undirected" => Ok(Variant::Undirected),
            other => Err(Error::Config(format!("unknown variant `{other}`"))),
        }
    }
}

/// The inter-disease graph.
///
/// For the directed variant `parents[d]` lists the parents of disease `d`,
/// each strictly smaller than `d`. For the undirected variant `adjacency`
/// is the symmetric binary matrix; the unstructured variant uses neither.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseGraphSpec {
    pub q: usize,
    pub variant: Variant,
    pub parents: Vec<Vec<usize>>,
    pub adjacency: Vec<Vec<bool>>,
}

impl DiseaseGraphSpec {
    pub fn unstructured(q: usize) -> Self {
        Self {
            q,
            variant: Variant::Unstructured,
            parents: vec![Vec::new(); q],
            adjacency: vec![vec![false; q]; q],
        }
    }

    /// Directed graph from `(child, parent)` pairs; each parent must come
    /// before its child in disease order.
    pub fn directed(q: usize, links: &[(usize, usize)]) -> Result<Self> {
        let mut parents = vec![Vec::new(); q];
        for &(child, parent) in links {
            if child >= q || parent >= q {
                return Err(Error::DiseaseOutOfRange { index: child.max(parent), q });
            }
            if parent >= child {
                return Err(Error::DiseaseGraph(format!(
                    "parent {} does not precede child {}",
                    parent + 1,
                    child + 1
                )));
            }
            if parents[child].contains(&parent) {
                return Err(Error::DiseaseGraph(format!(
                    "duplicate link {} -> {}",
                    parent + 1,
                    child + 1
                )));
            }
            parents[child].push(parent);
        }
        for p in &mut parents {
            p.sort_unstable();
        }
        let mut adjacency = vec![vec![false; q]; q];
        for (child, ps) in parents.iter().enumerate() {
            for &p in ps {
                adjacency[child][p] = true;
                adjacency[p][child] = true;
            }
        }
        Ok(Self { q, variant: Variant::Directed, parents, adjacency })
    }

    pub fn undirected(q: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![vec![false; q]; q];
        for &(a, b) in edges {
            if a >= q || b >= q {
                return Err(Error::DiseaseOutOfRange { index: a.max(b), q });
            }
            if a == b {
                return Err(Error::DiseaseGraph(format!("self-loop on disease {}", a + 1)));
            }
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        Ok(Self { q, variant: Variant::Undirected, parents: vec![Vec::new(); q], adjacency })
    }

    /// Chain `1 -> 2 -> ... -> q`, with the extra link `1 -> 4` when
    /// `q == 4` so the skeleton is the four-cycle used in simulation.
    pub fn default_directed(q: usize) -> Self {
        let mut links: Vec<(usize, usize)> = (1..q).map(|d| (d, d - 1)).collect();
        if q == 4 {
            links.push((3, 0));
        }
        Self::directed(q, &links).expect("chain links are ordered")
    }

    /// Cycle over all diseases (a single edge when `q == 2`).
    pub fn default_undirected(q: usize) -> Self {
        let mut edges: Vec<(usize, usize)> = (1..q).map(|d| (d - 1, d)).collect();
        if q > 2 {
            edges.push((0, q - 1));
        }
        Self::undirected(q, &edges).expect("cycle edges are valid")
    }

    pub fn default_for(variant: Variant, q: usize) -> Self {
        match variant {
            Variant::Unstructured => Self::unstructured(q),
            Variant::Directed => Self::default_directed(q),
            Variant::Undirected => Self::default_undirected(q),
        }
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(|row| row.iter().filter(|&&w| w).count()).collect()
    }

    /// Parent links `(child, parent)` in child-major order.
    pub fn parent_links(&self) -> Vec<(usize, usize)> {
        self.parents
            .iter()
            .enumerate()
            .flat_map(|(d, ps)| ps.iter().map(move |&h| (d, h)))
            .collect()
    }

    /// Extreme eigenvalues `(zeta_min, zeta_max)` of `D^{-1/2} W D^{-1/2}`.
    pub fn normalized_spectrum(&self) -> Result<(f64, f64)> {
        let deg = self.degrees();
        if let Some(d) = deg.iter().position(|&k| k == 0) {
            return Err(Error::IsolatedDisease(d));
        }
        let q = self.q;
        let m = DMatrix::from_fn(q, q, |a, b| {
            if self.adjacency[a][b] {
                1.0 / ((deg[a] * deg[b]) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(m).eigenvalues;
        let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok((lo, hi))
    }

    /// Open interval `(1/zeta_min, zeta_max)` on which `D - rho W` is
    /// positive definite.
    pub fn disease_rho_bounds(&self) -> Result<(f64, f64)> {
        if self.variant != Variant::Undirected {
            return Err(Error::DiseaseGraph(
                "rho bounds are defined for the undirected variant".into(),
            ));
        }
        let (lo, hi) = self.normalized_spectrum()?;
        // Symmetric eigensolvers return 1 up to rounding; pin the exact value.
        let hi = if (hi - 1.0).abs() < 1e-10 { 1.0 } else { hi };
        Ok((1.0 / lo, hi))
    }
}
