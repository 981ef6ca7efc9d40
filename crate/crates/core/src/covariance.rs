//! Joint covariance of the latent field `γ` over all region-disease cells.
//!
//! Cells are indexed disease-major: cell `(i, d)` sits at `d * n + i`.
//! Every variant is held as a square-root factor `U` of the precision
//! (`Σ_γ⁻¹ = UᵀU`) built from per-disease DAGAR factors, so products,
//! solves, log-determinants and draws never need a dense inverse.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dagar::DagarPrecision;
use crate::error::{Error, Result};
use crate::graph::{DiseaseGraphSpec, RegionGraph, Variant};
use crate::sparse::{CsrMatrix, SparseCholesky};

/// Cross-disease parameters for one of the three disease-graph variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum CrossDiseaseParams {
    /// Lower-triangular `A` (row-major `q x q`) with positive diagonal.
    Unstructured { a: Vec<Vec<f64>> },
    /// `(α0, α1)` per parent link, aligned with
    /// [`DiseaseGraphSpec::parent_links`].
    Directed { alpha: Vec<[f64; 2]> },
    Undirected { rho_dis: f64 },
}

impl CrossDiseaseParams {
    /// Starting values: `A = I`, all `α = 0`, `ρ_dis = 0`.
    pub fn initial(spec: &DiseaseGraphSpec) -> Self {
        match spec.variant {
            Variant::Unstructured => {
                let a = (0..spec.q)
                    .map(|r| (0..spec.q).map(|c| if r == c { 1.0 } else { 0.0 }).collect())
                    .collect();
                CrossDiseaseParams::Unstructured { a }
            }
            Variant::Directed => {
                CrossDiseaseParams::Directed { alpha: vec![[0.0, 0.0]; spec.parent_links().len()] }
            }
            Variant::Undirected => CrossDiseaseParams::Undirected { rho_dis: 0.0 },
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            CrossDiseaseParams::Unstructured { .. } => Variant::Unstructured,
            CrossDiseaseParams::Directed { .. } => Variant::Directed,
            CrossDiseaseParams::Undirected { .. } => Variant::Undirected,
        }
    }

    /// Flat numeric view used for sample storage.
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            CrossDiseaseParams::Unstructured { a } => {
                let mut out = Vec::new();
                for (r, row) in a.iter().enumerate() {
                    out.extend_from_slice(&row[..=r]);
                }
                out
            }
            CrossDiseaseParams::Directed { alpha } => alpha.iter().flat_map(|p| p.iter().copied()).collect(),
            CrossDiseaseParams::Undirected { rho_dis } => vec![*rho_dis],
        }
    }

    /// Column names matching [`flatten`](Self::flatten), 1-based.
    pub fn labels(&self, spec: &DiseaseGraphSpec) -> Vec<String> {
        match self {
            CrossDiseaseParams::Unstructured { a } => {
                let mut out = Vec::new();
                for r in 0..a.len() {
                    for c in 0..=r {
                        out.push(format!("a_{}_{}", r + 1, c + 1));
                    }
                }
                out
            }
            CrossDiseaseParams::Directed { .. } => spec
                .parent_links()
                .iter()
                .flat_map(|&(d, h)| [format!("alpha0_{}_{}", d + 1, h + 1), format!("alpha1_{}_{}", d + 1, h + 1)])
                .collect(),
            CrossDiseaseParams::Undirected { .. } => vec!["rho_dis".into()],
        }
    }

    /// Inverse of [`flatten`](Self::flatten).
    pub fn unflatten(variant: Variant, q: usize, values: &[f64]) -> Result<Self> {
        match variant {
            Variant::Unstructured => {
                if values.len() != q * (q + 1) / 2 {
                    return Err(Error::Dimension(format!("A needs {} entries", q * (q + 1) / 2)));
                }
                let mut a = vec![vec![0.0; q]; q];
                let mut it = values.iter();
                for (r, row) in a.iter_mut().enumerate() {
                    for v in row.iter_mut().take(r + 1) {
                        *v = *it.next().expect("length checked");
                    }
                }
                Ok(CrossDiseaseParams::Unstructured { a })
            }
            Variant::Directed => {
                if values.len() % 2 != 0 {
                    return Err(Error::Dimension("alpha values come in pairs".into()));
                }
                Ok(CrossDiseaseParams::Directed { alpha: values.chunks(2).map(|c| [c[0], c[1]]).collect() })
            }
            Variant::Undirected => match values {
                [rho] => Ok(CrossDiseaseParams::Undirected { rho_dis: *rho }),
                _ => Err(Error::Dimension("rho_dis is a scalar".into())),
            },
        }
    }
}

#[derive(Debug, Clone)]
enum Factor {
    /// `U = ⊕ M_d (A⁻¹ ⊗ I)`.
    Unstructured { a: Vec<Vec<f64>>, a_inv: Vec<Vec<f64>> },
    /// `U = ⊕ M_d (I - A)` with `A_{dh} = α0 I + α1 W`.
    Directed { links: Vec<(usize, usize, f64, f64)>, neighbors: Vec<Vec<usize>> },
    /// `U = (Lᵀ ⊗ I) ⊕ R_d` with `Λ_dis = L Lᵀ`.
    Undirected { chols: Vec<SparseCholesky>, root_lambda: Vec<f64>, l_dis: Vec<Vec<f64>> },
}

/// Factored joint precision of `γ`, with marginal standard deviations and
/// the sparse precision cached for single-site updates.
#[derive(Debug, Clone)]
pub struct GammaCovariance {
    n: usize,
    q: usize,
    dagars: Vec<DagarPrecision>,
    factor: Factor,
    log_det_precision: f64,
    marginal_sd: Vec<f64>,
    precision: Option<CsrMatrix>,
}

fn check_dagars(dagars: &[DagarPrecision]) -> Result<usize> {
    let n = dagars.first().map(DagarPrecision::n).ok_or_else(|| Error::Dimension("no diseases".into()))?;
    if dagars.iter().any(|d| d.n() != n) {
        return Err(Error::Dimension("per-disease precisions differ in size".into()));
    }
    Ok(n)
}

/// Inverse of a lower-triangular matrix by forward substitution.
pub(crate) fn lower_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let q = a.len();
    let mut inv = vec![vec![0.0; q]; q];
    for c in 0..q {
        for r in c..q {
            let rhs = if r == c { 1.0 } else { 0.0 };
            let s: f64 = (c..r).map(|k| a[r][k] * inv[k][c]).sum();
            inv[r][c] = (rhs - s) / a[r][r];
        }
    }
    inv
}

/// Dense lower Cholesky factor of a small symmetric matrix.
fn dense_cholesky(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let q = m.len();
    let mut l = vec![vec![0.0; q]; q];
    for j in 0..q {
        let d = m[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        l[j][j] = d.sqrt();
        for i in (j + 1)..q {
            let s = m[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = s / l[j][j];
        }
    }
    Ok(l)
}

/// `Λ_dis = D_dis - ρ_dis W_dis`.
pub fn lambda_dis(spec: &DiseaseGraphSpec, rho_dis: f64) -> Vec<Vec<f64>> {
    let deg = spec.degrees();
    (0..spec.q)
        .map(|a| {
            (0..spec.q)
                .map(|b| {
                    if a == b {
                        deg[a] as f64
                    } else if spec.adjacency[a][b] {
                        -rho_dis
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Factor-only constructor: log-determinant, products and solves are
/// ready, but marginal sds and the sparse precision wait for
/// [`GammaCovariance::complete`].
pub fn factor_only(
    spec: &DiseaseGraphSpec,
    params: &CrossDiseaseParams,
    geo: &RegionGraph,
    dagars: Vec<DagarPrecision>,
) -> Result<GammaCovariance> {
    if params.variant() != spec.variant {
        return Err(Error::Config(format!(
            "parameters for {} but disease graph is {}",
            params.variant(),
            spec.variant
        )));
    }
    match params {
        CrossDiseaseParams::Unstructured { a } => build_unstructured(a, dagars),
        CrossDiseaseParams::Directed { alpha } => build_directed(spec, alpha, geo, dagars),
        CrossDiseaseParams::Undirected { rho_dis } => build_undirected(spec, *rho_dis, dagars),
    }
}

/// `Σ_γ = (A ⊗ I)(⊕ Q_d⁻¹)(Aᵀ ⊗ I)`.
pub fn sigma_unstructured(a: &[Vec<f64>], dagars: Vec<DagarPrecision>) -> Result<GammaCovariance> {
    build_unstructured(a, dagars)?.complete()
}

fn build_unstructured(a: &[Vec<f64>], dagars: Vec<DagarPrecision>) -> Result<GammaCovariance> {
    let n = check_dagars(&dagars)?;
    let q = dagars.len();
    if a.len() != q || a.iter().any(|row| row.len() != q) {
        return Err(Error::Dimension(format!("A must be {q} x {q}")));
    }
    let mut a = a.to_vec();
    for (r, row) in a.iter_mut().enumerate() {
        if !(row[r] > 0.0) {
            return Err(Error::OutOfSupport { name: "a_dd", value: row[r], support: "(0, inf)".into() });
        }
        row.iter_mut().skip(r + 1).for_each(|v| *v = 0.0);
    }
    let a_inv = lower_inverse(&a);
    let log_det = dagars.iter().map(DagarPrecision::log_det).sum::<f64>()
        - 2.0 * n as f64 * (0..q).map(|d| a[d][d].ln()).sum::<f64>();
    GammaCovariance::assemble(n, q, dagars, Factor::Unstructured { a, a_inv }, log_det)
}

/// `Σ_γ = (I - A)⁻¹(⊕ Q_d⁻¹)(I - A)⁻ᵀ` with blocks `α0 I + α1 W` on parent
/// links, `W` the fixed geographic adjacency.
pub fn sigma_directed(
    spec: &DiseaseGraphSpec,
    alpha: &[[f64; 2]],
    geo: &RegionGraph,
    dagars: Vec<DagarPrecision>,
) -> Result<GammaCovariance> {
    build_directed(spec, alpha, geo, dagars)?.complete()
}

fn build_directed(
    spec: &DiseaseGraphSpec,
    alpha: &[[f64; 2]],
    geo: &RegionGraph,
    dagars: Vec<DagarPrecision>,
) -> Result<GammaCovariance> {
    let n = check_dagars(&dagars)?;
    let q = dagars.len();
    if spec.q != q || geo.n() != n {
        return Err(Error::Dimension("disease graph or map does not match precisions".into()));
    }
    let links = spec.parent_links();
    if alpha.len() != links.len() {
        return Err(Error::Dimension(format!("{} alpha pairs for {} parent links", alpha.len(), links.len())));
    }
    if links.iter().any(|&(d, h)| h >= d) {
        return Err(Error::DiseaseGraph("parent block on or above the diagonal".into()));
    }
    let links = links.iter().zip(alpha).map(|(&(d, h), a)| (d, h, a[0], a[1])).collect();
    let neighbors = (0..n).map(|i| geo.neighbors(i).to_vec()).collect();
    let log_det = dagars.iter().map(DagarPrecision::log_det).sum();
    GammaCovariance::assemble(n, q, dagars, Factor::Directed { links, neighbors }, log_det)
}

/// `Σ_γ⁻¹ = (⊕ R_dᵀ)(Λ_dis ⊗ I)(⊕ R_d)` with `R_dᵀ R_d = Q_d / λ_dis,dd`.
pub fn sigma_undirected(
    spec: &DiseaseGraphSpec,
    rho_dis: f64,
    dagars: Vec<DagarPrecision>,
) -> Result<GammaCovariance> {
    build_undirected(spec, rho_dis, dagars)?.complete()
}

fn build_undirected(
    spec: &DiseaseGraphSpec,
    rho_dis: f64,
    dagars: Vec<DagarPrecision>,
) -> Result<GammaCovariance> {
    let n = check_dagars(&dagars)?;
    let q = dagars.len();
    if spec.q != q {
        return Err(Error::Dimension("disease graph does not match precisions".into()));
    }
    let (lo, hi) = spec.disease_rho_bounds()?;
    if !(rho_dis > lo && rho_dis < hi) {
        return Err(Error::OutOfSupport { name: "rho_dis", value: rho_dis, support: format!("({lo}, {hi})") });
    }
    let lam = lambda_dis(spec, rho_dis);
    let l_dis = dense_cholesky(&lam)?;
    let mut chols = Vec::with_capacity(q);
    let mut log_det = 2.0 * n as f64 * (0..q).map(|d| l_dis[d][d].ln()).sum::<f64>();
    for (d, dag) in dagars.iter().enumerate() {
        let chol = SparseCholesky::factor(&dag.matrix())?;
        log_det += dag.log_det() - n as f64 * lam[d][d].ln();
        chols.push(chol);
    }
    let root_lambda = (0..q).map(|d| lam[d][d].sqrt()).collect();
    GammaCovariance::assemble(n, q, dagars, Factor::Undirected { chols, root_lambda, l_dis }, log_det)
}

impl GammaCovariance {
    /// Dispatches on the parameter variant.
    pub fn new(
        spec: &DiseaseGraphSpec,
        params: &CrossDiseaseParams,
        geo: &RegionGraph,
        dagars: Vec<DagarPrecision>,
    ) -> Result<Self> {
        factor_only(spec, params, geo, dagars)?.complete()
    }

    fn assemble(n: usize, q: usize, dagars: Vec<DagarPrecision>, factor: Factor, log_det: f64) -> Result<Self> {
        Ok(Self { n, q, dagars, factor, log_det_precision: log_det, marginal_sd: Vec::new(), precision: None })
    }

    /// Whether marginal sds and the sparse precision are available.
    pub fn is_complete(&self) -> bool {
        self.precision.is_some()
    }

    /// Fills the marginal sds (squared row norms of `U⁻¹`) and the sparse
    /// precision (`UᵀU` column by column).
    pub fn complete(mut self) -> Result<Self> {
        if self.is_complete() {
            return Ok(self);
        }
        let big_n = self.dim();
        let mut diag = vec![0.0; big_n];
        let mut e = vec![0.0; big_n];
        for j in 0..big_n {
            e[j] = 1.0;
            let col = self.factor_solve(&e);
            e[j] = 0.0;
            for (d, c) in diag.iter_mut().zip(&col) {
                *d += c * c;
            }
        }
        if let Some(bad) = diag.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonFinite(format!("marginal variance of cell {bad}")));
        }
        self.marginal_sd = diag.iter().map(|v| v.sqrt()).collect();
        let precision = CsrMatrix::from_columns(big_n, |j, buf| {
            let mut e = vec![0.0; big_n];
            e[j] = 1.0;
            buf.copy_from_slice(&self.factor_t_mul(&self.factor_mul(&e)));
        });
        self.precision = Some(precision);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// `N = n q`.
    pub fn dim(&self) -> usize {
        self.n * self.q
    }

    pub fn dagars(&self) -> &[DagarPrecision] {
        &self.dagars
    }

    pub fn into_dagars(self) -> Vec<DagarPrecision> {
        self.dagars
    }

    pub fn log_det_precision(&self) -> f64 {
        self.log_det_precision
    }

    /// Sparse `Σ_γ⁻¹`. Panics unless [`complete`](Self::complete) ran.
    pub fn precision(&self) -> &CsrMatrix {
        self.precision.as_ref().expect("covariance caches not computed")
    }

    /// Panics unless [`complete`](Self::complete) ran.
    pub fn marginal_sds(&self) -> &[f64] {
        assert!(self.is_complete(), "covariance caches not computed");
        &self.marginal_sd
    }

    /// `sqrt(Σ_γ[ii])`.
    pub fn marginal_sd(&self, index: usize) -> Result<f64> {
        self.marginal_sd
            .get(index)
            .copied()
            .ok_or(Error::RegionOutOfRange { index, n: self.dim() })
    }

    fn blocks<'a>(&self, x: &'a [f64]) -> impl Iterator<Item = &'a [f64]> {
        x.chunks(self.n)
    }

    /// `U x`.
    pub fn factor_mul(&self, x: &[f64]) -> Vec<f64> {
        let (n, q) = (self.n, self.q);
        let mut out = Vec::with_capacity(n * q);
        match &self.factor {
            Factor::Unstructured { a_inv, .. } => {
                let xs: Vec<&[f64]> = self.blocks(x).collect();
                for d in 0..q {
                    let mut z = vec![0.0; n];
                    for (l, xl) in xs.iter().enumerate().take(d + 1) {
                        axpy(a_inv[d][l], xl, &mut z);
                    }
                    out.extend(self.dagars[d].root_mul(&z));
                }
            }
            Factor::Directed { links, neighbors } => {
                let xs: Vec<&[f64]> = self.blocks(x).collect();
                for d in 0..q {
                    let mut z = xs[d].to_vec();
                    for &(c, h, a0, a1) in links.iter().filter(|l| l.0 == d) {
                        debug_assert_eq!(c, d);
                        block_apply(-a0, -a1, neighbors, xs[h], &mut z);
                    }
                    out.extend(self.dagars[d].root_mul(&z));
                }
            }
            Factor::Undirected { chols, root_lambda, l_dis } => {
                let zs: Vec<Vec<f64>> = self
                    .blocks(x)
                    .enumerate()
                    .map(|(d, xd)| scale(&chols[d].upper_mul(xd), 1.0 / root_lambda[d]))
                    .collect();
                for d in 0..q {
                    let mut o = vec![0.0; n];
                    for (e, ze) in zs.iter().enumerate().skip(d) {
                        axpy(l_dis[e][d], ze, &mut o);
                    }
                    out.extend(o);
                }
            }
        }
        out
    }

    /// `Uᵀ y`.
    pub fn factor_t_mul(&self, y: &[f64]) -> Vec<f64> {
        let (n, q) = (self.n, self.q);
        let mut out = vec![0.0; n * q];
        match &self.factor {
            Factor::Unstructured { a_inv, .. } => {
                for (d, yd) in self.blocks(y).enumerate() {
                    let w = self.dagars[d].root_t_mul(yd);
                    for l in 0..=d {
                        axpy(a_inv[d][l], &w, &mut out[l * n..(l + 1) * n]);
                    }
                }
            }
            Factor::Directed { links, neighbors } => {
                let ws: Vec<Vec<f64>> =
                    self.blocks(y).enumerate().map(|(d, yd)| self.dagars[d].root_t_mul(yd)).collect();
                for (d, w) in ws.iter().enumerate() {
                    out[d * n..(d + 1) * n].copy_from_slice(w);
                }
                for &(d, h, a0, a1) in links {
                    block_apply(-a0, -a1, neighbors, &ws[d], &mut out[h * n..(h + 1) * n]);
                }
            }
            Factor::Undirected { chols, root_lambda, l_dis } => {
                let ys: Vec<&[f64]> = self.blocks(y).collect();
                for d in 0..q {
                    let mut w = vec![0.0; n];
                    for (e, ye) in ys.iter().enumerate().take(d + 1) {
                        axpy(l_dis[d][e], ye, &mut w);
                    }
                    let r = scale(&chols[d].lower_mul(&w), 1.0 / root_lambda[d]);
                    out[d * n..(d + 1) * n].copy_from_slice(&r);
                }
            }
        }
        out
    }

    /// Solves `U x = y`.
    pub fn factor_solve(&self, y: &[f64]) -> Vec<f64> {
        let (n, q) = (self.n, self.q);
        let mut out = vec![0.0; n * q];
        match &self.factor {
            Factor::Unstructured { a, .. } => {
                let zs: Vec<Vec<f64>> =
                    self.blocks(y).enumerate().map(|(d, yd)| self.dagars[d].root_solve(yd)).collect();
                for d in 0..q {
                    for (l, zl) in zs.iter().enumerate().take(d + 1) {
                        axpy(a[d][l], zl, &mut out[d * n..(d + 1) * n]);
                    }
                }
            }
            Factor::Directed { links, neighbors } => {
                for (d, yd) in self.blocks(y).enumerate() {
                    let mut x = self.dagars[d].root_solve(yd);
                    for &(_, h, a0, a1) in links.iter().filter(|l| l.0 == d) {
                        let (done, _) = out.split_at(d * n);
                        block_apply(a0, a1, neighbors, &done[h * n..(h + 1) * n], &mut x);
                    }
                    out[d * n..(d + 1) * n].copy_from_slice(&x);
                }
            }
            Factor::Undirected { chols, root_lambda, l_dis } => {
                let ys: Vec<&[f64]> = self.blocks(y).collect();
                let mut zs = vec![Vec::new(); q];
                for d in (0..q).rev() {
                    let mut z = ys[d].to_vec();
                    for e in (d + 1)..q {
                        axpy(-l_dis[e][d], &zs[e], &mut z);
                    }
                    zs[d] = scale(&z, 1.0 / l_dis[d][d]);
                }
                for d in 0..q {
                    let x = scale(&chols[d].upper_solve(&zs[d]), root_lambda[d]);
                    out[d * n..(d + 1) * n].copy_from_slice(&x);
                }
            }
        }
        out
    }

    /// Solves `Uᵀ x = y`.
    pub fn factor_t_solve(&self, y: &[f64]) -> Vec<f64> {
        let (n, q) = (self.n, self.q);
        let mut out = vec![0.0; n * q];
        match &self.factor {
            Factor::Unstructured { a, .. } => {
                let ys: Vec<&[f64]> = self.blocks(y).collect();
                for d in 0..q {
                    let mut w = vec![0.0; n];
                    for (l, yl) in ys.iter().enumerate().skip(d) {
                        axpy(a[l][d], yl, &mut w);
                    }
                    out[d * n..(d + 1) * n].copy_from_slice(&self.dagars[d].root_t_solve(&w));
                }
            }
            Factor::Directed { links, neighbors } => {
                let mut ws: Vec<Vec<f64>> = self.blocks(y).map(<[f64]>::to_vec).collect();
                for h in (0..q).rev() {
                    for &(d, _, a0, a1) in links.iter().filter(|l| l.1 == h) {
                        let child = ws[d].clone();
                        block_apply(a0, a1, neighbors, &child, &mut ws[h]);
                    }
                }
                for (d, w) in ws.iter().enumerate() {
                    out[d * n..(d + 1) * n].copy_from_slice(&self.dagars[d].root_t_solve(w));
                }
            }
            Factor::Undirected { chols, root_lambda, l_dis } => {
                let ws: Vec<Vec<f64>> = self
                    .blocks(y)
                    .enumerate()
                    .map(|(d, yd)| scale(&chols[d].lower_solve(yd), root_lambda[d]))
                    .collect();
                let mut zs: Vec<Vec<f64>> = Vec::with_capacity(q);
                for d in 0..q {
                    let mut z = ws[d].clone();
                    for (e, ze) in zs.iter().enumerate() {
                        axpy(-l_dis[d][e], ze, &mut z);
                    }
                    zs.push(scale(&z, 1.0 / l_dis[d][d]));
                }
                for (d, z) in zs.iter().enumerate() {
                    out[d * n..(d + 1) * n].copy_from_slice(z);
                }
            }
        }
        out
    }

    /// `γᵀ Σ_γ⁻¹ γ = ‖U γ‖²`.
    pub fn quad_form(&self, gamma: &[f64]) -> f64 {
        self.factor_mul(gamma).iter().map(|v| v * v).sum()
    }

    /// `Σ_γ x`.
    pub fn cov_mul(&self, x: &[f64]) -> Vec<f64> {
        self.factor_solve(&self.factor_t_solve(x))
    }

    /// Dense `Σ_γ`, row-major.
    pub fn dense_covariance(&self) -> Vec<Vec<f64>> {
        self.dense_by(|e| self.cov_mul(e))
    }

    /// Dense `Σ_γ⁻¹`, row-major.
    pub fn dense_precision(&self) -> Vec<Vec<f64>> {
        self.dense_by(|e| self.factor_t_mul(&self.factor_mul(e)))
    }

    fn dense_by(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
        let big_n = self.dim();
        let mut out = vec![vec![0.0; big_n]; big_n];
        let mut e = vec![0.0; big_n];
        for j in 0..big_n {
            e[j] = 1.0;
            let col = f(&e);
            e[j] = 0.0;
            for (i, v) in col.into_iter().enumerate() {
                out[i][j] = v;
            }
        }
        out
    }

    /// Draws `γ ~ N(0, Σ_γ)` as `U⁻¹ ε`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let eps: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.factor_solve(&eps)
    }
}

/// `-½ γᵀ Σ_γ⁻¹ γ + ½ log det Σ_γ⁻¹ - (N/2) log 2π`.
pub fn gamma_log_density(gamma: &[f64], cov: &GammaCovariance) -> Result<f64> {
    if gamma.len() != cov.dim() {
        return Err(Error::Dimension(format!("gamma has {} cells, covariance {}", gamma.len(), cov.dim())));
    }
    Ok(-0.5 * cov.quad_form(gamma) + 0.5 * cov.log_det_precision() - 0.5 * cov.dim() as f64 * (2.0 * PI).ln())
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    if a != 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }
}

fn scale(x: &[f64], a: f64) -> Vec<f64> {
    x.iter().map(|v| v * a).collect()
}

/// `y += (a0 I + a1 W) x` with `W` given by neighbor lists.
fn block_apply(a0: f64, a1: f64, neighbors: &[Vec<usize>], x: &[f64], y: &mut [f64]) {
    for (i, yi) in y.iter_mut().enumerate() {
        *yi += a0 * x[i] + a1 * neighbors[i].iter().map(|&j| x[j]).sum::<f64>();
    }
}

/// `W x` for the geographic adjacency.
pub fn neighbor_sum(geo: &RegionGraph, x: &[f64]) -> Vec<f64> {
    (0..geo.n()).map(|i| geo.neighbors(i).iter().map(|&j| x[j]).sum()).collect()
}
