//! Truncated areal stick-breaking process.
//!
//! A latent Gaussian `γ_i` is pushed through its marginal CDF and the
//! resulting uniform picks the stick-breaking cell, so neighbouring cells
//! with correlated `γ` tend to share an atom.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::GammaCovariance;
use crate::error::{Error, Result};
use crate::stats::{bvn_rectangle, norm_cdf, norm_quantile};

/// Hyperparameters of the stick-breaking prior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpPrior {
    /// Truncation level `K`.
    pub k: usize,
    /// Concentration `α` of the `Beta(1, α)` stick fractions.
    pub alpha: f64,
    /// Shape of the atom precision prior.
    pub a_s: f64,
    /// Rate of the atom precision prior.
    pub b_s: f64,
}

impl Default for DpPrior {
    fn default() -> Self {
        Self { k: 15, alpha: 1.0, a_s: 2.0, b_s: 1.0 }
    }
}

impl DpPrior {
    /// `V_1..V_{K-1} ~ Beta(1, α)` and `V_K = 1`.
    pub fn sample_sticks<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let beta = Beta::new(1.0, self.alpha).expect("alpha > 0");
        let mut v: Vec<f64> = (0..self.k.saturating_sub(1)).map(|_| beta.sample(rng)).collect();
        v.push(1.0);
        v
    }

    /// `τ_s ~ Gamma(a_s, rate b_s)`.
    pub fn sample_tau<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Gamma::new(self.a_s, 1.0 / self.b_s).expect("positive hyperparameters").sample(rng)
    }

    /// `θ_k ~ N(0, 1/τ_s)`.
    pub fn sample_atoms<R: Rng + ?Sized>(&self, tau_s: f64, rng: &mut R) -> Vec<f64> {
        let normal = Normal::new(0.0, 1.0 / tau_s.sqrt()).expect("positive precision");
        (0..self.k).map(|_| normal.sample(rng)).collect()
    }

    /// `E[θ²] = b_s / (a_s - 1)`.
    pub fn atom_variance(&self) -> Result<f64> {
        if self.a_s <= 1.0 {
            return Err(Error::OutOfSupport { name: "a_s", value: self.a_s, support: "(1, inf)".into() });
        }
        Ok(self.b_s / (self.a_s - 1.0))
    }
}

/// `p_1 = V_1`, `p_j = V_j Π_{k<j} (1 - V_k)`.
pub fn weights_from_sticks(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidSticks("no sticks".into()));
    }
    if let Some(bad) = v.iter().find(|&&x| !(x > 0.0 && x <= 1.0)) {
        return Err(Error::InvalidSticks(format!("fraction {bad} outside (0, 1]")));
    }
    if v[v.len() - 1] != 1.0 {
        return Err(Error::InvalidSticks("last fraction must be 1".into()));
    }
    let mut rest = 1.0;
    Ok(v.iter()
        .map(|&x| {
            let p = x * rest;
            rest *= 1.0 - x;
            p
        })
        .collect())
}

/// Running sums of `p` with the final entry pinned to exactly 1.
pub fn cumulative_weights(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut c: Vec<f64> = p
        .iter()
        .map(|x| {
            acc += x;
            acc
        })
        .collect();
    if let Some(last) = c.last_mut() {
        *last = 1.0;
    }
    c
}

/// 0-based cell containing `u`; a value equal to a cumulative sum belongs
/// to the lower cell.
pub fn label_from_uniform(u: f64, cumulative: &[f64]) -> usize {
    cumulative.partition_point(|&c| c < u).min(cumulative.len() - 1)
}

/// 0-based label of a cell with latent value `gamma` and marginal sd `sd`.
pub fn label_from_gamma(gamma: f64, sd: f64, cumulative: &[f64]) -> usize {
    label_from_uniform(norm_cdf(gamma / sd), cumulative)
}

/// Labels for every cell.
pub fn labels_from_gamma(gamma: &[f64], sds: &[f64], cumulative: &[f64]) -> Vec<usize> {
    gamma.iter().zip(sds).map(|(&g, &s)| label_from_gamma(g, s, cumulative)).collect()
}

/// `φ_i = θ_{u_i}`.
pub fn phi_from_state(labels: &[usize], theta: &[f64]) -> Result<Vec<f64>> {
    labels
        .iter()
        .map(|&u| theta.get(u).copied().ok_or(Error::LabelOutOfRange { label: u, k: theta.len() }))
        .collect()
}

/// `Σ_k P(γ_i ∈ cell k, γ_j ∈ cell k)` for standardized latent correlation `r`.
pub fn same_cell_probability(r: f64, cumulative: &[f64]) -> f64 {
    let r = r.clamp(-1.0, 1.0);
    let mut lo = f64::NEG_INFINITY;
    let mut total = 0.0;
    for &c in cumulative {
        let hi = norm_quantile(c);
        if hi > lo {
            total += bvn_rectangle(lo, hi, lo, hi, r);
        }
        lo = hi;
    }
    total
}

/// Monte Carlo estimate of `Cov(φ_i, φ_j)` under the prior, paired with
/// the semianalytic value evaluated on the same stick draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorCovEstimate {
    pub draws: usize,
    /// Sample mean of `φ_i φ_j` (prior mean of `φ` is 0).
    pub monte_carlo: f64,
    pub monte_carlo_se: f64,
    /// `b_s/(a_s-1) Σ_k π_kk`, averaged over the stick draws.
    pub semianalytic: f64,
    /// Standard error of the per-draw difference between the two.
    pub difference_se: f64,
}

impl PriorCovEstimate {
    /// `|MC - semianalytic|` in units of the paired standard error.
    pub fn z_score(&self) -> f64 {
        (self.monte_carlo - self.semianalytic) / self.difference_se
    }
}

const ORACLE_BLOCK: usize = 10_000;

/// Simulates `(V, τ_s, θ, γ)` from the prior and estimates `Cov(φ_i, φ_j)`.
/// Blocks of draws use independent RNG streams and run in parallel.
pub fn prior_cov_oracle(
    cov: &GammaCovariance,
    prior: &DpPrior,
    pair: (usize, usize),
    draws: usize,
    seed: u64,
) -> Result<PriorCovEstimate> {
    if draws < 10_000 {
        return Err(Error::InvalidInput(format!("prior covariance oracle needs at least 10^4 draws, got {draws}")));
    }
    let c = prior.atom_variance()?;
    let (i, j) = pair;
    let si = cov.marginal_sd(i)?;
    let sj = cov.marginal_sd(j)?;
    let mut e = vec![0.0; cov.dim()];
    e[j] = 1.0;
    let r = cov.cov_mul(&e)[i] / (si * sj);

    let blocks = draws.div_ceil(ORACLE_BLOCK);
    let sums: Vec<[f64; 5]> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = ORACLE_BLOCK.min(draws - b * ORACLE_BLOCK);
            let mut acc = [0.0; 5];
            for _ in 0..count {
                let v = prior.sample_sticks(&mut rng);
                let cum = cumulative_weights(&weights_from_sticks(&v).expect("prior sticks are valid"));
                let tau = prior.sample_tau(&mut rng);
                let theta = prior.sample_atoms(tau, &mut rng);
                let gamma = cov.sample(&mut rng);
                let ui = label_from_gamma(gamma[i], si, &cum);
                let uj = label_from_gamma(gamma[j], sj, &cum);
                let prod = theta[ui] * theta[uj];
                let semi = c * same_cell_probability(r, &cum);
                let diff = prod - semi;
                acc[0] += prod;
                acc[1] += prod * prod;
                acc[2] += semi;
                acc[3] += diff;
                acc[4] += diff * diff;
            }
            acc
        })
        .collect();
    let mut tot = [0.0; 5];
    for s in sums {
        for (t, v) in tot.iter_mut().zip(s) {
            *t += v;
        }
    }
    let m = draws as f64;
    let mean_prod = tot[0] / m;
    let var_prod = (tot[1] / m - mean_prod * mean_prod) * m / (m - 1.0);
    let mean_diff = tot[3] / m;
    let var_diff = (tot[4] / m - mean_diff * mean_diff) * m / (m - 1.0);
    Ok(PriorCovEstimate {
        draws,
        monte_carlo: mean_prod,
        monte_carlo_se: (var_prod / m).sqrt(),
        semianalytic: tot[2] / m,
        difference_se: (var_diff / m).sqrt(),
    })
}
