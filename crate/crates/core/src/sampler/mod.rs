//! Metropolis-within-Gibbs posterior simulation.
//!
//! One iteration visits, in order: regression coefficients, atoms, the
//! latent field cell by cell, stick fractions, atom precision, DAGAR
//! correlations, adjacency coefficients and the cross-disease parameters.

mod chain;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use chain::{directed_alpha_conditional, log_prior_a, Sampler, StepOutcome};

use crate::covariance::CrossDiseaseParams;
use crate::data::ObservedData;
use crate::dp::DpPrior;
use crate::error::{Error, Result};
use crate::graph::{DiseaseGraphSpec, RegionGraph, Variant};

/// Prior hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Variance of the independent normal prior on each `β` coefficient.
    pub sigma2_beta: f64,
    pub dp: DpPrior,
    /// Upper bounds `M` of the uniform priors on `η`, per disease and component.
    pub eta_upper: Vec<Vec<f64>>,
    /// Degrees of freedom of the inverse-Wishart prior on `AAᵀ`.
    pub nu: f64,
    /// Scale matrix of the inverse-Wishart prior on `AAᵀ`.
    pub psi: Vec<Vec<f64>>,
    /// Common prior mean of every `α` coefficient.
    pub alpha_mean: f64,
    /// Common prior variance of every `α` coefficient.
    pub alpha_var: f64,
    /// Support of the uniform prior on `ρ_dis`.
    pub rho_dis_bounds: Option<(f64, f64)>,
}

impl PriorSpec {
    /// `σ²_β = 1`, `a_s = 2`, `b_s = 1`, `α = 1`, `K = 15`, `ν = 2`,
    /// `Ψ = 0.1 I`, `α ~ N(0, 100 I)`, `M = -log(0.5)/median(z)` and the
    /// full admissible interval for `ρ_dis`.
    pub fn defaults(data: &ObservedData, spec: &DiseaseGraphSpec) -> Result<Self> {
        let eta_upper = data
            .dissimilarity
            .iter()
            .map(|z| z.eta_upper_bounds())
            .collect::<Result<Vec<_>>>()?;
        let q = spec.q;
        let psi = (0..q).map(|r| (0..q).map(|c| if r == c { 0.1 } else { 0.0 }).collect()).collect();
        let rho_dis_bounds = match spec.variant {
            Variant::Undirected => Some(spec.disease_rho_bounds()?),
            _ => None,
        };
        Ok(Self {
            sigma2_beta: 1.0,
            dp: DpPrior::default(),
            eta_upper,
            nu: 2.0,
            psi,
            alpha_mean: 0.0,
            alpha_var: 100.0,
            rho_dis_bounds,
        })
    }

    pub fn validate(&self, data: &ObservedData, spec: &DiseaseGraphSpec) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::OutOfSupport { name, value: v, support: "(0, inf)".into() })
            }
        };
        positive("sigma2_beta", self.sigma2_beta)?;
        positive("alpha", self.dp.alpha)?;
        positive("a_s", self.dp.a_s)?;
        positive("b_s", self.dp.b_s)?;
        positive("nu", self.nu)?;
        positive("alpha_var", self.alpha_var)?;
        if self.dp.k == 0 {
            return Err(Error::Config("truncation K must be at least 1".into()));
        }
        if self.eta_upper.len() != data.q {
            return Err(Error::Dimension("eta bounds must be given per disease".into()));
        }
        for (d, m) in self.eta_upper.iter().enumerate() {
            if m.len() != data.dissimilarity[d].dim() {
                return Err(Error::Dimension(format!("eta bounds for disease {} have wrong length", d + 1)));
            }
            for &v in m {
                positive("M", v)?;
            }
        }
        if spec.variant == Variant::Unstructured
            && (self.psi.len() != spec.q || self.psi.iter().any(|r| r.len() != spec.q))
        {
            return Err(Error::Dimension("Psi must be q x q".into()));
        }
        if spec.variant == Variant::Undirected {
            let (lo, hi) = self.rho_dis_bounds.ok_or_else(|| Error::Config("rho_dis bounds missing".into()))?;
            let (slo, shi) = spec.disease_rho_bounds()?;
            if !(lo < hi && lo >= slo && hi <= shi) {
                return Err(Error::Config(format!(
                    "rho_dis prior ({lo}, {hi}) must lie inside ({slo}, {shi})"
                )));
            }
        }
        Ok(())
    }
}

/// Proposal variances of every Metropolis block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepSizes {
    pub beta: f64,
    pub theta: f64,
    pub gamma: f64,
    pub v: f64,
    pub rho: f64,
    pub eta: f64,
    pub a_diag: f64,
    pub a_offdiag: f64,
    pub rho_dis: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self {
            beta: 0.01,
            theta: 0.05,
            gamma: 0.1,
            v: 0.5,
            rho: 0.5,
            eta: 0.5,
            a_diag: 0.01,
            a_offdiag: 0.01,
            rho_dis: 0.5,
        }
    }
}

impl StepSizes {
    fn all(&self) -> [f64; 9] {
        [self.beta, self.theta, self.gamma, self.v, self.rho, self.eta, self.a_diag, self.a_offdiag, self.rho_dis]
    }
}

/// Robbins-Monro schedule on `log ξ`: after each proposal with acceptance
/// probability `a` at iteration `t <= burn_in`,
/// `log ξ += gain * t^(-decay) * (a - target)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptConfig {
    pub enabled: bool,
    pub target_scalar: f64,
    pub target_multi: f64,
    pub gain: f64,
    pub decay: f64,
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self { enabled: true, target_scalar: 0.44, target_multi: 0.234, gain: 1.0, decay: 0.6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub steps: StepSizes,
    pub adapt: AdaptConfig,
    /// Keep every Metropolis proposal with its log acceptance ratio.
    #[serde(default)]
    pub record_proposals: bool,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 5000,
            burn_in: 2500,
            thin: 1,
            seed: 1,
            steps: StepSizes::default(),
            adapt: AdaptConfig::default(),
            record_proposals: false,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations > 0 && self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if self.steps.all().iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config("step sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        if self.iterations == 0 {
            0
        } else {
            (self.iterations - self.burn_in) / self.thin
        }
    }
}

/// Everything a chain needs besides its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub graph: RegionGraph,
    pub spec: DiseaseGraphSpec,
    pub data: ObservedData,
    pub priors: PriorSpec,
}

impl Model {
    /// Model with default priors.
    pub fn new(graph: RegionGraph, spec: DiseaseGraphSpec, data: ObservedData) -> Result<Self> {
        let priors = PriorSpec::defaults(&data, &spec)?;
        Self::with_priors(graph, spec, data, priors)
    }

    pub fn with_priors(graph: RegionGraph, spec: DiseaseGraphSpec, data: ObservedData, priors: PriorSpec) -> Result<Self> {
        data.validate()?;
        if graph.n() != data.n || spec.q != data.q {
            return Err(Error::Dimension("map, disease graph and data disagree on n or q".into()));
        }
        for (d, z) in data.dissimilarity.iter().enumerate() {
            if z.edges() != graph.directed_edges().as_slice() {
                return Err(Error::Dimension(format!("dissimilarities of disease {} do not match the map", d + 1)));
            }
        }
        priors.validate(&data, &spec)?;
        Ok(Self { graph, spec, data, priors })
    }
}

/// All sampled unknowns at one iteration, plus derived labels and `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    /// Disease-major `q x p`.
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub tau_s: f64,
    /// `K` stick fractions with `V_K = 1`.
    pub v: Vec<f64>,
    pub gamma: Vec<f64>,
    pub rho: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub cross: CrossDiseaseParams,
    pub labels: Vec<usize>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl AcceptanceStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One logged Metropolis proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalRecord {
    pub iteration: usize,
    pub block: String,
    pub current: Vec<f64>,
    pub proposed: Vec<f64>,
    pub log_ratio: f64,
    pub accepted: bool,
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub n: usize,
    pub q: usize,
    pub variant: Variant,
    pub beta: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub tau_s: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub rho: Vec<Vec<f64>>,
    /// Per-disease `η` concatenated.
    pub eta: Vec<Vec<f64>>,
    pub eta_dims: Vec<usize>,
    pub cross: Vec<Vec<f64>>,
    pub labels: Vec<Vec<usize>>,
    /// Step sizes in force when each draw was retained.
    pub step_sizes: Vec<StepSizes>,
    pub acceptance: BTreeMap<String, AcceptanceStats>,
    pub proposals: Vec<ProposalRecord>,
}

impl PosteriorSamples {
    pub fn empty(n: usize, q: usize, variant: Variant, eta_dims: Vec<usize>) -> Self {
        Self {
            n,
            q,
            variant,
            beta: Vec::new(),
            theta: Vec::new(),
            tau_s: Vec::new(),
            v: Vec::new(),
            gamma: Vec::new(),
            rho: Vec::new(),
            eta: Vec::new(),
            eta_dims,
            cross: Vec::new(),
            labels: Vec::new(),
            step_sizes: Vec::new(),
            acceptance: BTreeMap::new(),
            proposals: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tau_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_s.is_empty()
    }

    /// `φ` of draw `s`, `θ_{u_i}` for every cell.
    pub fn phi(&self, s: usize) -> Vec<f64> {
        self.labels[s].iter().map(|&u| self.theta[s][u]).collect()
    }

    /// `η` of disease `d` in draw `s`.
    pub fn eta_of(&self, s: usize, d: usize) -> &[f64] {
        let start: usize = self.eta_dims[..d].iter().sum();
        &self.eta[s][start..start + self.eta_dims[d]]
    }

    /// Pointwise log-likelihood, one row per draw.
    pub fn pointwise_loglik(&self, data: &ObservedData) -> Vec<Vec<f64>> {
        (0..self.len()).map(|s| data.pointwise_loglik(&self.beta[s], &self.phi(s))).collect()
    }

    fn push(&mut self, state: &ModelState, steps: StepSizes) {
        self.beta.push(state.beta.clone());
        self.theta.push(state.theta.clone());
        self.tau_s.push(state.tau_s);
        self.v.push(state.v.clone());
        self.gamma.push(state.gamma.clone());
        self.rho.push(state.rho.clone());
        self.eta.push(state.eta.concat());
        self.cross.push(state.cross.flatten());
        self.labels.push(state.labels.clone());
        self.step_sizes.push(steps);
    }
}

/// Runs one chain. Chain `index` draws from its own stream of the seeded
/// generator, so chains with the same seed and different indices are
/// independent.
pub fn run_chain_indexed(model: &Model, config: &ChainConfig, index: u64) -> Result<PosteriorSamples> {
    config.validate()?;
    let mut sampler = Sampler::new(model, config, index)?;
    let mut out = PosteriorSamples::empty(
        model.data.n,
        model.data.q,
        model.spec.variant,
        model.data.dissimilarity.iter().map(|z| z.dim()).collect(),
    );
    for t in 1..=config.iterations {
        sampler.iterate()?;
        if t > config.burn_in && (t - config.burn_in) % config.thin == 0 {
            out.push(sampler.state(), sampler.step_sizes());
        }
    }
    out.acceptance = sampler.acceptance().clone();
    out.proposals = sampler.take_proposals();
    Ok(out)
}

/// Runs the full sampler for one chain.
pub fn run_chain(model: &Model, config: &ChainConfig) -> Result<PosteriorSamples> {
    run_chain_indexed(model, config, 0)
}

/// Independent chains in parallel, chain `c` on stream `c`.
pub fn run_chains(model: &Model, config: &ChainConfig, chains: usize) -> Result<Vec<PosteriorSamples>> {
    (0..chains as u64).into_par_iter().map(|c| run_chain_indexed(model, config, c)).collect()
}
