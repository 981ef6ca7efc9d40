//! DAGAR precision matrices with a covariate-thresholded adjacency.
//!
//! The precision is `Q = (I - B)ᵀ Λ (I - B)` where `B` only has entries on
//! DAGAR parent links that survive the threshold `exp(-zᵀη) >= 1/2`.
//! Everything is stored per parent link; `Q` itself is only assembled on
//! request.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirectedEdge, RegionGraph};
use crate::sparse::CsrMatrix;

/// Threshold on `exp(-zᵀη)` at or above which a parent link is kept.
pub const ADJACENCY_THRESHOLD: f64 = 0.5;

/// Non-negative dissimilarity covariates for every DAGAR parent link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDissimilarity {
    dim: usize,
    edges: Vec<DirectedEdge>,
    /// Row-major `edges.len() x dim`.
    values: Vec<f64>,
}

impl EdgeDissimilarity {
    /// Looks up `z` for each parent link of `graph`. `lookup(i, j)` is tried
    /// with the child first and then with the parent first.
    pub fn new(
        graph: &RegionGraph,
        dim: usize,
        mut lookup: impl FnMut(usize, usize) -> Option<Vec<f64>>,
    ) -> Result<Self> {
        let edges = graph.directed_edges();
        let mut values = Vec::with_capacity(edges.len() * dim);
        for e in &edges {
            let z = lookup(e.child, e.parent)
                .or_else(|| lookup(e.parent, e.child))
                .ok_or(Error::MissingDissimilarity(e.child, e.parent))?;
            if z.len() != dim {
                return Err(Error::Dimension(format!(
                    "dissimilarity for ({}, {}) has {} components, expected {dim}",
                    e.child,
                    e.parent,
                    z.len()
                )));
            }
            for &v in &z {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::NegativeDissimilarity { i: e.child, j: e.parent, value: v });
                }
            }
            values.extend_from_slice(&z);
        }
        Ok(Self { dim, edges, values })
    }

    pub fn from_pairs(
        graph: &RegionGraph,
        dim: usize,
        pairs: &BTreeMap<(usize, usize), Vec<f64>>,
    ) -> Result<Self> {
        Self::new(graph, dim, |i, j| pairs.get(&(i, j)).cloned())
    }

    pub fn zeros(graph: &RegionGraph, dim: usize) -> Self {
        let edges = graph.directed_edges();
        let values = vec![0.0; edges.len() * dim];
        Self { dim, edges, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edges(&self) -> &[DirectedEdge] {
        &self.edges
    }

    pub fn get(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn column(&self, r: usize) -> Vec<f64> {
        (0..self.edges.len()).map(|k| self.values[k * self.dim + r]).collect()
    }

    /// `exp(-z_kᵀ η)` for parent link `k`.
    pub fn similarity(&self, k: usize, eta: &[f64]) -> f64 {
        let dot: f64 = self.get(k).iter().zip(eta).map(|(z, e)| z * e).sum();
        (-dot).exp()
    }

    /// Prior upper bounds `M_r = -ln(0.5) / median(z_r)` so that at most
    /// half of the parent links can be cut by component `r` alone.
    pub fn eta_upper_bounds(&self) -> Result<Vec<f64>> {
        (0..self.dim)
            .map(|r| {
                let median = quantile(&self.column(r), 0.5);
                if !(median > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "median of dissimilarity component {} is zero; cannot bound eta",
                        r + 1
                    )));
                }
                Ok(-ADJACENCY_THRESHOLD.ln() / median)
            })
            .collect()
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Which DAGAR parent links are kept, aligned with
/// [`RegionGraph::directed_edges`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    keep: Vec<bool>,
}

impl Adjacency {
    /// Every geographic parent link kept: the unmodified DAGAR.
    pub fn full(graph: &RegionGraph) -> Self {
        Self { keep: vec![true; graph.num_edges()] }
    }

    pub fn from_mask(keep: Vec<bool>) -> Self {
        Self { keep }
    }

    pub fn mask(&self) -> &[bool] {
        &self.keep
    }

    pub fn kept(&self) -> usize {
        self.keep.iter().filter(|&&k| k).count()
    }

    /// Dense strictly-lower (in topological order) binary matrix, indexed
    /// by region: `w[child][parent]`.
    pub fn to_dense(&self, graph: &RegionGraph) -> Vec<Vec<u8>> {
        let mut w = vec![vec![0u8; graph.n()]; graph.n()];
        for (e, &k) in graph.directed_edges().iter().zip(&self.keep) {
            if k {
                w[e.child][e.parent] = 1;
            }
        }
        w
    }
}

/// `w_ij = 1` iff `exp(-z_ijᵀ η) >= 0.5`; a tie at exactly 0.5 keeps the link.
pub fn adjacency_from_eta(z: &EdgeDissimilarity, eta: &[f64]) -> Result<Adjacency> {
    if eta.len() != z.dim() {
        return Err(Error::Dimension(format!(
            "eta has {} components, dissimilarities have {}",
            eta.len(),
            z.dim()
        )));
    }
    if let Some(&bad) = eta.iter().find(|&&e| !(e >= 0.0) || !e.is_finite()) {
        return Err(Error::OutOfSupport { name: "eta", value: bad, support: "[0, M]".into() });
    }
    let keep = (0..z.len()).map(|k| z.similarity(k, eta) >= ADJACENCY_THRESHOLD).collect();
    Ok(Adjacency { keep })
}

/// The factored DAGAR precision of one disease.
#[derive(Debug, Clone, PartialEq)]
pub struct DagarPrecision {
    rho: f64,
    n: usize,
    sequence: Vec<usize>,
    /// For each region: `(parent, b_ij)` on surviving links.
    parents: Vec<Vec<(usize, f64)>>,
    lambda: Vec<f64>,
    sqrt_lambda: Vec<f64>,
}

/// Assembles `Q(ρ, W)`. `ρ` must lie in `[0, 1)`; at `ρ = 0` the result is
/// the identity.
pub fn build_precision(graph: &RegionGraph, adjacency: &Adjacency, rho: f64) -> Result<DagarPrecision> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::OutOfSupport { name: "rho", value: rho, support: "(0, 1)".into() });
    }
    let edges = graph.directed_edges();
    if adjacency.mask().len() != edges.len() {
        return Err(Error::Dimension(format!(
            "adjacency has {} links, graph has {}",
            adjacency.mask().len(),
            edges.len()
        )));
    }
    let n = graph.n();
    let mut kept: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (e, &k) in edges.iter().zip(adjacency.mask()) {
        if k {
            kept[e.child].push(e.parent);
        }
    }
    let rho2 = rho * rho;
    let mut parents = Vec::with_capacity(n);
    let mut lambda = Vec::with_capacity(n);
    for ps in kept {
        let n_prec = ps.len() as f64;
        let denom = 1.0 + (n_prec - 1.0) * rho2;
        let b = rho / denom;
        lambda.push(denom / (1.0 - rho2));
        parents.push(ps.into_iter().map(|p| (p, b)).collect());
    }
    let sqrt_lambda = lambda.iter().map(|l: &f64| l.sqrt()).collect();
    Ok(DagarPrecision { rho, n, sequence: graph.sequence().to_vec(), parents, lambda, sqrt_lambda })
}

impl DagarPrecision {
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    /// `(parent, b_ij)` pairs of region `i`.
    pub fn parents(&self, i: usize) -> &[(usize, f64)] {
        &self.parents[i]
    }

    pub fn num_preceding(&self, i: usize) -> usize {
        self.parents[i].len()
    }

    /// `log det Q = Σ log λ_i` since `I - B` is unit triangular.
    pub fn log_det(&self) -> f64 {
        self.lambda.iter().map(|l| l.ln()).sum()
    }

    /// `xᵀ Q x = Σ λ_i (x_i - Σ_j b_ij x_j)²`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| {
                let r = x[i] - self.parents[i].iter().map(|&(j, b)| b * x[j]).sum::<f64>();
                self.lambda[i] * r * r
            })
            .sum()
    }

    /// `M x` with `M = Λ^{1/2} (I - B)`, so that `Q = Mᵀ M`.
    pub fn root_mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let r = x[i] - self.parents[i].iter().map(|&(j, b)| b * x[j]).sum::<f64>();
                self.sqrt_lambda[i] * r
            })
            .collect()
    }

    /// `Mᵀ y`.
    pub fn root_t_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let s = self.sqrt_lambda[i] * y[i];
            out[i] += s;
            for &(j, b) in &self.parents[i] {
                out[j] -= b * s;
            }
        }
        out
    }

    /// Solves `M x = y`, visiting regions in topological order.
    pub fn root_solve(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        for &i in &self.sequence {
            x[i] = y[i] / self.sqrt_lambda[i]
                + self.parents[i].iter().map(|&(j, b)| b * x[j]).sum::<f64>();
        }
        x
    }

    /// Solves `Mᵀ x = y`, visiting regions in reverse topological order.
    pub fn root_t_solve(&self, y: &[f64]) -> Vec<f64> {
        let mut acc = y.to_vec();
        let mut x = vec![0.0; self.n];
        for &i in self.sequence.iter().rev() {
            x[i] = acc[i] / self.sqrt_lambda[i];
            let s = self.sqrt_lambda[i] * x[i];
            for &(j, b) in &self.parents[i] {
                acc[j] += b * s;
            }
        }
        x
    }

    /// `Q x`.
    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        self.root_t_mul(&self.root_mul(x))
    }

    /// Sparse `Q`; fill appears only between regions sharing a child.
    pub fn matrix(&self) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..self.n {
            // Row i of M: sqrt(λ_i) at i, -sqrt(λ_i) b_ij at each parent j.
            let s = self.sqrt_lambda[i];
            let mut row: Vec<(usize, f64)> = vec![(i, s)];
            row.extend(self.parents[i].iter().map(|&(j, b)| (j, -s * b)));
            for &(a, va) in &row {
                for &(c, vc) in &row {
                    t.push((a, c, va * vc));
                }
            }
        }
        CsrMatrix::from_triplets(self.n, t)
    }

    /// Diagonal of `Q⁻¹ = M⁻¹ M⁻ᵀ`, i.e. squared row norms of `M⁻¹`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        let mut diag = vec![0.0; self.n];
        let mut e = vec![0.0; self.n];
        for j in 0..self.n {
            e[j] = 1.0;
            let col = self.root_solve(&e);
            e[j] = 0.0;
            for (d, c) in diag.iter_mut().zip(&col) {
                *d += c * c;
            }
        }
        diag
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> RegionGraph {
        RegionGraph::new(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    #[test]
    fn adjacency_threshold_examples() {
        let g = path(2);
        let zero = EdgeDissimilarity::zeros(&g, 1);
        assert_eq!(adjacency_from_eta(&zero, &[3.0]).unwrap().mask(), &[true]);

        let one = EdgeDissimilarity::new(&g, 1, |_, _| Some(vec![1.0])).unwrap();
        assert_eq!(adjacency_from_eta(&one, &[0.5]).unwrap().mask(), &[true]);

        let two = EdgeDissimilarity::new(&g, 1, |_, _| Some(vec![2.0])).unwrap();
        assert_eq!(adjacency_from_eta(&two, &[0.5]).unwrap().mask(), &[false]);

        assert!(adjacency_from_eta(&one, &[-0.1]).is_err());
        assert!(adjacency_from_eta(&one, &[0.1, 0.2]).is_err());
    }

    #[test]
    fn missing_or_negative_dissimilarity() {
        let g = path(3);
        let err = EdgeDissimilarity::new(&g, 1, |i, j| (i + j == 1).then(|| vec![1.0])).unwrap_err();
        assert!(matches!(err, Error::MissingDissimilarity(2, 1)));
        let err = EdgeDissimilarity::new(&g, 1, |_, _| Some(vec![-1.0])).unwrap_err();
        assert!(matches!(err, Error::NegativeDissimilarity { .. }));
    }

    #[test]
    fn two_region_precision() {
        let g = path(2);
        let q = build_precision(&g, &Adjacency::full(&g), 0.5).unwrap();
        let m = q.matrix();
        let expect = [[4.0 / 3.0, -2.0 / 3.0], [-2.0 / 3.0, 4.0 / 3.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((m.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
        assert!((q.log_det() - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn identity_cases() {
        let g = path(4);
        let q0 = build_precision(&g, &Adjacency::full(&g), 0.0).unwrap();
        let empty = Adjacency::from_mask(vec![false; 3]);
        let q_cut = build_precision(&g, &empty, 0.7).unwrap();
        for q in [q0, q_cut] {
            let m = q.matrix();
            for i in 0..4 {
                for j in 0..4 {
                    assert_eq!(m.get(i, j), if i == j { 1.0 } else { 0.0 });
                }
            }
            assert_eq!(q.log_det(), 0.0);
        }
        assert!(build_precision(&g, &Adjacency::full(&g), 1.0).is_err());
        assert!(build_precision(&g, &Adjacency::full(&g), -0.1).is_err());
    }

    #[test]
    fn three_chain_log_det() {
        let g = path(3);
        let q = build_precision(&g, &Adjacency::full(&g), 0.9).unwrap();
        // Region 0 has no parent, regions 1 and 2 have one each.
        let l1 = 1.0f64;
        let l2: f64 = 1.0 / (1.0 - 0.81);
        assert!((q.log_det() - (l1.ln() + 2.0 * l2.ln())).abs() < 1e-12);
    }

    #[test]
    fn solves_invert_root() {
        let g = RegionGraph::hex_lattice(9, 3).unwrap().with_order(vec![4, 0, 8, 1, 7, 2, 6, 3, 5]).unwrap();
        let q = build_precision(&g, &Adjacency::full(&g), 0.6).unwrap();
        let y: Vec<f64> = (0..9).map(|i| (i as f64).sin()).collect();
        let x = q.root_solve(&y);
        let back = q.root_mul(&x);
        let xt = q.root_t_solve(&y);
        let back_t = q.root_t_mul(&xt);
        for i in 0..9 {
            assert!((back[i] - y[i]).abs() < 1e-12);
            assert!((back_t[i] - y[i]).abs() < 1e-12);
        }
        assert!((q.quad_form(&y) - q.matrix().quad_form(&y)).abs() < 1e-12);
    }

    #[test]
    fn eta_bounds_from_median() {
        let g = path(4);
        let z = EdgeDissimilarity::new(&g, 1, |i, j| Some(vec![(i + j) as f64])).unwrap();
        // Link values 1, 3, 5: median 3.
        let m = z.eta_upper_bounds().unwrap();
        assert!((m[0] - 2f64.ln() / 3.0).abs() < 1e-15);
        assert!(EdgeDissimilarity::zeros(&g, 1).eta_upper_bounds().is_err());
    }
}
