//! Observed counts, offsets, design and dissimilarities.

use serde::{Deserialize, Serialize};

use crate::dagar::EdgeDissimilarity;
use crate::error::{Error, Result};
use crate::stats::ln_factorial;

/// Counts and covariates for `n` regions and `q` diseases, stored
/// disease-major (cell `(i, d)` at `d * n + i`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedData {
    pub n: usize,
    pub q: usize,
    pub counts: Vec<u64>,
    pub expected: Vec<f64>,
    /// Cells whose counts enter the likelihood.
    pub observed: Vec<bool>,
    /// Per-cell design rows, all of length `covariate_names.len()`.
    pub design: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
    /// Per-disease dissimilarities for the adjacency model.
    pub dissimilarity: Vec<EdgeDissimilarity>,
}

impl ObservedData {
    /// Intercept-only design.
    pub fn new(
        n: usize,
        q: usize,
        counts: Vec<u64>,
        expected: Vec<f64>,
        dissimilarity: Vec<EdgeDissimilarity>,
    ) -> Result<Self> {
        let cells = n * q;
        let data = Self {
            n,
            q,
            counts,
            expected,
            observed: vec![true; cells],
            design: vec![vec![1.0]; cells],
            covariate_names: vec!["intercept".into()],
            dissimilarity,
        };
        data.validate()?;
        Ok(data)
    }

    /// Replaces the design with an intercept plus the given named columns.
    pub fn with_covariates(mut self, names: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != self.cells() || values.iter().any(|v| v.len() != names.len()) {
            return Err(Error::Dimension("covariate table does not match cells".into()));
        }
        self.covariate_names = std::iter::once("intercept".to_string()).chain(names).collect();
        self.design = values
            .into_iter()
            .map(|row| std::iter::once(1.0).chain(row).collect())
            .collect();
        self.validate()?;
        Ok(self)
    }

    /// Drops every cell from the likelihood, leaving the prior.
    pub fn without_likelihood(mut self) -> Self {
        self.observed.iter_mut().for_each(|o| *o = false);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let cells = self.cells();
        for (name, len) in [
            ("counts", self.counts.len()),
            ("expected", self.expected.len()),
            ("observed", self.observed.len()),
            ("design", self.design.len()),
        ] {
            if len != cells {
                return Err(Error::Dimension(format!("{name} has {len} cells, expected {cells}")));
            }
        }
        if self.dissimilarity.len() != self.q {
            return Err(Error::Dimension(format!(
                "{} dissimilarity tables for {} diseases",
                self.dissimilarity.len(),
                self.q
            )));
        }
        let p = self.covariate_names.len();
        if let Some(c) = self.design.iter().position(|r| r.len() != p) {
            return Err(Error::Dimension(format!("design row {c} has wrong length")));
        }
        for c in 0..cells {
            if self.observed[c] && !(self.expected[c] > 0.0 && self.expected[c].is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "expected count for region {} disease {} must be positive",
                    c % self.n + 1,
                    c / self.n + 1
                )));
            }
            if self.design[c].iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("design row {c}")));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.n * self.q
    }

    pub fn cell(&self, region: usize, disease: usize) -> usize {
        disease * self.n + region
    }

    /// Number of regression coefficients per disease.
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    /// `x_idᵀ β_d` for every cell; `beta` is disease-major `q x p`.
    pub fn linear_predictor(&self, beta: &[f64]) -> Vec<f64> {
        let p = self.p();
        (0..self.cells())
            .map(|c| {
                let d = c / self.n;
                self.design[c].iter().zip(&beta[d * p..(d + 1) * p]).map(|(x, b)| x * b).sum()
            })
            .collect()
    }

    /// Log Poisson pmf of one cell given its log-rate offset-free predictor.
    pub fn cell_loglik(&self, c: usize, eta: f64) -> f64 {
        if !self.observed[c] {
            return 0.0;
        }
        poisson_log_pmf(self.counts[c], self.expected[c] * eta.exp())
    }

    /// Pointwise log-likelihood for observed cells (zero elsewhere).
    pub fn pointwise_loglik(&self, beta: &[f64], phi: &[f64]) -> Vec<f64> {
        self.linear_predictor(beta)
            .iter()
            .zip(phi)
            .enumerate()
            .map(|(c, (xb, ph))| self.cell_loglik(c, xb + ph))
            .collect()
    }
}

/// `y log μ - μ - log y!`.
pub fn poisson_log_pmf(y: u64, mean: f64) -> f64 {
    if y == 0 {
        -mean
    } else {
        y as f64 * mean.ln() - mean - ln_factorial(y)
    }
}

/// `Σ_{i,d} [y (log E + xᵀβ + φ) - E exp(xᵀβ + φ) - log y!]` over observed cells.
pub fn poisson_loglik(data: &ObservedData, beta: &[f64], phi: &[f64]) -> Result<f64> {
    let total: f64 = data.pointwise_loglik(beta, phi).iter().sum();
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::NonFinite("Poisson log-likelihood".into()))
    }
}

/// One row of age-sex (or other) stratified counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumRow {
    pub region: usize,
    pub disease: usize,
    pub group: usize,
    pub cases: u64,
    pub population: f64,
}

/// Internal standardization: `c_d^k = Σ_i y_id^k / Σ_i N_i^k` and
/// `E_id = Σ_k c_d^k N_i^k`. Returns a disease-major `n q` vector.
pub fn expected_counts(n: usize, q: usize, strata: &[StratumRow]) -> Result<Vec<f64>> {
    let groups = strata.iter().map(|r| r.group + 1).max().unwrap_or(0);
    let mut cases = vec![vec![0.0; groups]; q];
    let mut pop = vec![vec![0.0; groups]; q];
    let mut cell_pop = vec![vec![vec![0.0; groups]; n]; q];
    for r in strata {
        if r.region >= n {
            return Err(Error::RegionOutOfRange { index: r.region, n });
        }
        if r.disease >= q {
            return Err(Error::DiseaseOutOfRange { index: r.disease, q });
        }
        if !(r.population >= 0.0) {
            return Err(Error::InvalidInput(format!("negative population in group {}", r.group + 1)));
        }
        cases[r.disease][r.group] += r.cases as f64;
        pop[r.disease][r.group] += r.population;
        cell_pop[r.disease][r.region][r.group] += r.population;
    }
    let mut out = vec![0.0; n * q];
    for d in 0..q {
        for k in 0..groups {
            if cases[d][k] > 0.0 && pop[d][k] <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "group {} of disease {} has cases but zero population",
                    k + 1,
                    d + 1
                )));
            }
            let rate = if pop[d][k] > 0.0 { cases[d][k] / pop[d][k] } else { 0.0 };
            for i in 0..n {
                out[d * n + i] += rate * cell_pop[d][i][k];
            }
        }
    }
    Ok(out)
}

/// Standardized incidence ratios `y / E`, disease-major.
pub fn sir(counts: &[u64], expected: &[f64]) -> Vec<f64> {
    counts.iter().zip(expected).map(|(&y, &e)| y as f64 / e).collect()
}
