use std::collections::BTreeMap;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::{AcceptanceStats, ChainConfig, Model, ModelState, ProposalRecord, StepSizes};
use crate::covariance::{factor_only, lower_inverse, neighbor_sum, CrossDiseaseParams, GammaCovariance};
use crate::dagar::{adjacency_from_eta, build_precision, Adjacency, DagarPrecision};
use crate::dp::{cumulative_weights, label_from_gamma, labels_from_gamma, weights_from_sticks};
use crate::error::{Error, Result};
use crate::graph::RegionGraph;
use crate::stats::{expit, logit};

/// Result of one Metropolis proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub log_ratio: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Beta,
    Theta,
    Gamma,
    V,
    Rho,
    Eta,
    Cross,
    RhoDis,
}

impl Block {
    fn name(self) -> &'static str {
        match self {
            Block::Beta => "beta",
            Block::Theta => "theta",
            Block::Gamma => "gamma",
            Block::V => "v",
            Block::Rho => "rho",
            Block::Eta => "eta",
            Block::Cross => "cross",
            Block::RhoDis => "rho_dis",
        }
    }
}

/// One chain's state together with the caches its updates rely on.
pub struct Sampler<'a> {
    model: &'a Model,
    config: &'a ChainConfig,
    rng: ChaCha8Rng,
    state: ModelState,
    adjacency: Vec<Adjacency>,
    cov: GammaCovariance,
    cumulative: Vec<f64>,
    /// `Σ_γ⁻¹ γ`, kept in step with single-site moves.
    p_gamma: Vec<f64>,
    /// `x_idᵀ β_d` per cell.
    lin: Vec<f64>,
    steps: StepSizes,
    acceptance: BTreeMap<String, AcceptanceStats>,
    proposals: Vec<ProposalRecord>,
    iteration: usize,
}

fn build_adjacency(model: &Model, eta: &[Vec<f64>]) -> Result<Vec<Adjacency>> {
    model.data.dissimilarity.iter().zip(eta).map(|(z, e)| adjacency_from_eta(z, e)).collect()
}

fn build_dagars(graph: &RegionGraph, adjacency: &[Adjacency], rho: &[f64]) -> Result<Vec<DagarPrecision>> {
    adjacency.iter().zip(rho).map(|(a, &r)| build_precision(graph, a, r)).collect()
}

impl<'a> Sampler<'a> {
    /// Starts from `β = 0`, `θ ~ N(0, 1)`, `τ_s = a_s / b_s`, `V = 1/2`,
    /// `γ = 0`, `ρ = 1/2`, `η = M/2` and the neutral cross-disease values.
    pub fn new(model: &'a Model, config: &'a ChainConfig, index: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(index);
        let (data, priors) = (&model.data, &model.priors);
        let k = priors.dp.k;
        let theta = (0..k).map(|_| rng.sample(StandardNormal)).collect();
        let mut v = vec![0.5; k - 1];
        v.push(1.0);
        let state = ModelState {
            beta: vec![0.0; data.q * data.p()],
            theta,
            tau_s: priors.dp.a_s / priors.dp.b_s,
            v,
            gamma: vec![0.0; data.cells()],
            rho: vec![0.5; data.q],
            eta: priors.eta_upper.iter().map(|m| m.iter().map(|x| x / 2.0).collect()).collect(),
            cross: CrossDiseaseParams::initial(&model.spec),
            labels: Vec::new(),
            phi: Vec::new(),
        };
        Self::from_state(model, config, rng, state)
    }

    /// Starts from a caller-supplied state; labels and `φ` are recomputed.
    pub fn with_state(model: &'a Model, config: &'a ChainConfig, index: u64, state: ModelState) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(index);
        Self::from_state(model, config, rng, state)
    }

    fn from_state(model: &'a Model, config: &'a ChainConfig, rng: ChaCha8Rng, mut state: ModelState) -> Result<Self> {
        let adjacency = build_adjacency(model, &state.eta)?;
        let dagars = build_dagars(&model.graph, &adjacency, &state.rho)?;
        let cov = GammaCovariance::new(&model.spec, &state.cross, &model.graph, dagars)?;
        let cumulative = cumulative_weights(&weights_from_sticks(&state.v)?);
        state.labels = labels_from_gamma(&state.gamma, cov.marginal_sds(), &cumulative);
        state.phi = state.labels.iter().map(|&u| state.theta[u]).collect();
        let p_gamma = cov.precision().mul_vec(&state.gamma);
        let lin = model.data.linear_predictor(&state.beta);
        let sampler = Self {
            model,
            config,
            rng,
            state,
            adjacency,
            cov,
            cumulative,
            p_gamma,
            lin,
            steps: config.steps,
            acceptance: BTreeMap::new(),
            proposals: Vec::new(),
            iteration: 0,
        };
        let ll = sampler.loglik(&sampler.lin, &sampler.state.theta, &sampler.state.labels);
        if !ll.is_finite() {
            return Err(Error::NonFinite("log-likelihood at the initial state".into()));
        }
        Ok(sampler)
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn covariance(&self) -> &GammaCovariance {
        &self.cov
    }

    pub fn step_sizes(&self) -> StepSizes {
        self.steps
    }

    pub fn acceptance(&self) -> &BTreeMap<String, AcceptanceStats> {
        &self.acceptance
    }

    pub fn take_proposals(&mut self) -> Vec<ProposalRecord> {
        std::mem::take(&mut self.proposals)
    }

    /// One full sweep in the fixed block order.
    pub fn iterate(&mut self) -> Result<()> {
        self.iteration += 1;
        self.step_beta()?;
        self.step_theta()?;
        self.step_gamma()?;
        self.step_v()?;
        self.step_tau_s();
        self.step_rho()?;
        self.step_eta()?;
        self.step_cross_disease()?;
        Ok(())
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn loglik(&self, lin: &[f64], theta: &[f64], labels: &[usize]) -> f64 {
        let data = &self.model.data;
        (0..data.cells()).map(|c| data.cell_loglik(c, lin[c] + theta[labels[c]])).sum()
    }

    /// `log N(γ | 0, Σ*) - log N(γ | 0, Σ)` without the shared constant.
    fn gaussian_ratio(&self, proposed: &GammaCovariance) -> f64 {
        let g = &self.state.gamma;
        -0.5 * (proposed.quad_form(g) - self.cov.quad_form(g))
            + 0.5 * (proposed.log_det_precision() - self.cov.log_det_precision())
    }

    fn metropolis(&mut self, block: Block, log_ratio: f64, dim: usize, current: &[f64], proposed: &[f64]) -> bool {
        let log_ratio = if log_ratio.is_nan() {
            warn!("{} proposal produced a NaN acceptance ratio; rejecting", block.name());
            f64::NEG_INFINITY
        } else {
            log_ratio
        };
        let u: f64 = self.rng.random();
        let accepted = u.ln() < log_ratio;
        let stats = self.acceptance.entry(block.name().to_string()).or_default();
        stats.proposed += 1;
        stats.accepted += accepted as u64;
        self.adapt(block, log_ratio.min(0.0).exp(), dim);
        if self.config.record_proposals && block != Block::Gamma {
            self.proposals.push(ProposalRecord {
                iteration: self.iteration,
                block: block.name().into(),
                current: current.to_vec(),
                proposed: proposed.to_vec(),
                log_ratio,
                accepted,
            });
        }
        accepted
    }

    fn adapt(&mut self, block: Block, accept_prob: f64, dim: usize) {
        let cfg = &self.config.adapt;
        if !cfg.enabled || self.iteration == 0 || self.iteration > self.config.burn_in {
            return;
        }
        let slot = match block {
            Block::Beta => &mut self.steps.beta,
            Block::Theta => &mut self.steps.theta,
            Block::V => &mut self.steps.v,
            Block::Rho => &mut self.steps.rho,
            Block::Eta => &mut self.steps.eta,
            Block::RhoDis => &mut self.steps.rho_dis,
            Block::Gamma | Block::Cross => return,
        };
        let target = if dim == 1 { cfg.target_scalar } else { cfg.target_multi };
        let gain = cfg.gain * (self.iteration as f64).powf(-cfg.decay);
        *slot = (slot.ln() + gain * (accept_prob - target)).exp().clamp(1e-12, 1e6);
    }

    fn refresh_labels(&mut self) {
        self.state.labels = labels_from_gamma(&self.state.gamma, self.cov.marginal_sds(), &self.cumulative);
        self.refresh_phi();
    }

    fn refresh_phi(&mut self) {
        let theta = &self.state.theta;
        self.state.phi = self.state.labels.iter().map(|&u| theta[u]).collect();
    }

    /// Swaps in a new covariance. Labels are left alone: only `γ` and `V`
    /// moves, whose ratios see the likelihood, reassign cells to atoms.
    fn install(&mut self, cov: GammaCovariance) -> Result<()> {
        self.cov = cov.complete()?;
        self.p_gamma = self.cov.precision().mul_vec(&self.state.gamma);
        Ok(())
    }

    /// Log acceptance ratio of a joint `β` proposal.
    pub fn beta_log_ratio(&self, proposed: &[f64]) -> f64 {
        let lin = self.model.data.linear_predictor(proposed);
        let s2 = self.model.priors.sigma2_beta;
        let sq = |b: &[f64]| b.iter().map(|x| x * x).sum::<f64>();
        self.loglik(&lin, &self.state.theta, &self.state.labels)
            - self.loglik(&self.lin, &self.state.theta, &self.state.labels)
            - (sq(proposed) - sq(&self.state.beta)) / (2.0 * s2)
    }

    pub fn step_beta(&mut self) -> Result<StepOutcome> {
        let sd = self.steps.beta.sqrt();
        let proposed: Vec<f64> = (0..self.state.beta.len()).map(|i| self.state.beta[i] + sd * self.normal()).collect();
        let log_ratio = self.beta_log_ratio(&proposed);
        let current = self.state.beta.clone();
        let accepted = self.metropolis(Block::Beta, log_ratio, proposed.len(), &current, &proposed);
        if accepted {
            self.lin = self.model.data.linear_predictor(&proposed);
            self.state.beta = proposed;
        }
        Ok(StepOutcome { log_ratio, accepted })
    }

    /// Log acceptance ratio of a joint atom proposal.
    pub fn theta_log_ratio(&self, proposed: &[f64]) -> f64 {
        let tau = self.state.tau_s;
        let sq = |t: &[f64]| t.iter().map(|x| x * x).sum::<f64>();
        self.loglik(&self.lin, proposed, &self.state.labels) - self.loglik(&self.lin, &self.state.theta, &self.state.labels)
            - tau * (sq(proposed) - sq(&self.state.theta)) / 2.0
    }

    pub fn step_theta(&mut self) -> Result<StepOutcome> {
        let sd = self.steps.theta.sqrt();
        let proposed: Vec<f64> = (0..self.state.theta.len()).map(|k| self.state.theta[k] + sd * self.normal()).collect();
        let log_ratio = self.theta_log_ratio(&proposed);
        let current = self.state.theta.clone();
        let accepted = self.metropolis(Block::Theta, log_ratio, proposed.len(), &current, &proposed);
        if accepted {
            self.state.theta = proposed;
            self.refresh_phi();
        }
        Ok(StepOutcome { log_ratio, accepted })
    }

    /// Log acceptance ratio for moving cell `c` of `γ` to `value`.
    pub fn gamma_log_ratio(&self, c: usize, value: f64) -> f64 {
        let delta = value - self.state.gamma[c];
        let p_cc = self.cov.precision().get(c, c);
        let d_quad = 2.0 * delta * self.p_gamma[c] + delta * delta * p_cc;
        let label = label_from_gamma(value, self.cov.marginal_sds()[c], &self.cumulative);
        let data = &self.model.data;
        let theta = &self.state.theta;
        data.cell_loglik(c, self.lin[c] + theta[label]) - data.cell_loglik(c, self.lin[c] + theta[self.state.labels[c]])
            - 0.5 * d_quad
    }

    /// Single-site sweep over all `N` cells with a fixed proposal variance.
    pub fn step_gamma(&mut self) -> Result<()> {
        let sd = self.steps.gamma.sqrt();
        for c in 0..self.state.gamma.len() {
            let proposed = self.state.gamma[c] + sd * self.normal();
            let log_ratio = self.gamma_log_ratio(c, proposed);
            if self.metropolis(Block::Gamma, log_ratio, 1, &[], &[]) {
                let delta = proposed - self.state.gamma[c];
                self.state.gamma[c] = proposed;
                for (j, p) in self.cov.precision().row(c) {
                    self.p_gamma[j] += delta * p;
                }
                let label = label_from_gamma(proposed, self.cov.marginal_sds()[c], &self.cumulative);
                self.state.labels[c] = label;
                self.state.phi[c] = self.state.theta[label];
            }
        }
        Ok(())
    }

    /// Log acceptance ratio of a stick proposal (with `V_K = 1` in both).
    pub fn v_log_ratio(&self, proposed: &[f64]) -> Result<f64> {
        let cum = cumulative_weights(&weights_from_sticks(proposed)?);
        let labels = labels_from_gamma(&self.state.gamma, self.cov.marginal_sds(), &cum);
        let alpha = self.model.priors.dp.alpha;
        let k = proposed.len() - 1;
        let log_prior_jac = |v: &[f64]| -> f64 {
            v[..k].iter().map(|&x| (alpha - 1.0) * (1.0 - x).ln() + x.ln() + (1.0 - x).ln()).sum()
        };
        Ok(self.loglik(&self.lin, &self.state.theta, &labels)
            - self.loglik(&self.lin, &self.state.theta, &self.state.labels)
            + log_prior_jac(proposed)
            - log_prior_jac(&self.state.v))
    }

    pub fn step_v(&mut self) -> Result<Option<StepOutcome>> {
        let k = self.state.v.len();
        if k < 2 {
            return Ok(None);
        }
        let sd = self.steps.v.sqrt();
        let mut proposed = self.state.v.clone();
        for x in proposed.iter_mut().take(k - 1) {
            let z: f64 = self.rng.sample(StandardNormal);
            *x = expit(logit(*x) + sd * z);
        }
        let log_ratio = if proposed[..k - 1].iter().all(|&x| x > 0.0 && x < 1.0) {
            self.v_log_ratio(&proposed)?
        } else {
            f64::NEG_INFINITY
        };
        let current = self.state.v.clone();
        let accepted = self.metropolis(Block::V, log_ratio, k - 1, &current, &proposed);
        if accepted {
            self.cumulative = cumulative_weights(&weights_from_sticks(&proposed)?);
            self.state.v = proposed;
            self.refresh_labels();
        }
        Ok(Some(StepOutcome { log_ratio, accepted }))
    }

    /// Exact draw `τ_s ~ Gamma(a_s + K/2, rate b_s + Σθ²/2)`.
    pub fn step_tau_s(&mut self) {
        let dp = &self.model.priors.dp;
        let shape = dp.a_s + self.state.theta.len() as f64 / 2.0;
        let rate = dp.b_s + self.state.theta.iter().map(|t| t * t).sum::<f64>() / 2.0;
        self.state.tau_s = Gamma::new(shape, 1.0 / rate).expect("positive shape and rate").sample(&mut self.rng);
    }

    fn propose_cov(&self, rho: &[f64], adjacency: &[Adjacency], cross: &CrossDiseaseParams) -> Option<GammaCovariance> {
        let built = build_dagars(&self.model.graph, adjacency, rho)
            .and_then(|d| factor_only(&self.model.spec, cross, &self.model.graph, d));
        match built {
            Ok(c) => Some(c),
            Err(e) => {
                warn!("rejecting proposal: {e}");
                None
            }
        }
    }

    /// Log acceptance ratio of a joint `ρ` proposal and the proposed
    /// covariance.
    pub fn rho_log_ratio(&self, proposed: &[f64]) -> (f64, Option<GammaCovariance>) {
        let Some(cov) = self.propose_cov(proposed, &self.adjacency, &self.state.cross) else {
            return (f64::NEG_INFINITY, None);
        };
        let jac = |r: &[f64]| r.iter().map(|&x| x.ln() + (1.0 - x).ln()).sum::<f64>();
        (self.gaussian_ratio(&cov) + jac(proposed) - jac(&self.state.rho), Some(cov))
    }

    pub fn step_rho(&mut self) -> Result<StepOutcome> {
        let sd = self.steps.rho.sqrt();
        let proposed: Vec<f64> =
            (0..self.state.rho.len()).map(|d| expit(logit(self.state.rho[d]) + sd * self.normal())).collect();
        let (log_ratio, cov) = if proposed.iter().all(|&r| r > 0.0 && r < 1.0) {
            self.rho_log_ratio(&proposed)
        } else {
            (f64::NEG_INFINITY, None)
        };
        let current = self.state.rho.clone();
        let accepted = self.metropolis(Block::Rho, log_ratio, proposed.len(), &current, &proposed);
        if accepted {
            self.state.rho = proposed;
            self.install(cov.expect("accepted proposals have a covariance"))?;
        }
        Ok(StepOutcome { log_ratio, accepted })
    }

    /// Log acceptance ratio of a joint `η` proposal; the covariance is only
    /// rebuilt when some adjacency actually changes.
    pub fn eta_log_ratio(&self, proposed: &[Vec<f64>]) -> Result<(f64, Option<Vec<Adjacency>>, Option<GammaCovariance>)> {
        let m = &self.model.priors.eta_upper;
        let jac = |eta: &[Vec<f64>]| -> f64 {
            eta.iter()
                .zip(m)
                .flat_map(|(e, mm)| e.iter().zip(mm).map(|(&x, &b)| x.ln() + (b - x).ln()))
                .sum()
        };
        let jacobian = jac(proposed) - jac(&self.state.eta);
        let adjacency = build_adjacency(self.model, proposed)?;
        if adjacency == self.adjacency {
            return Ok((jacobian, None, None));
        }
        let Some(cov) = self.propose_cov(&self.state.rho, &adjacency, &self.state.cross) else {
            return Ok((f64::NEG_INFINITY, None, None));
        };
        Ok((self.gaussian_ratio(&cov) + jacobian, Some(adjacency), Some(cov)))
    }

    pub fn step_eta(&mut self) -> Result<StepOutcome> {
        let sd = self.steps.eta.sqrt();
        let m = self.model.priors.eta_upper.clone();
        let mut proposed = self.state.eta.clone();
        let mut inside = true;
        for (e, mm) in proposed.iter_mut().zip(&m) {
            for (x, &b) in e.iter_mut().zip(mm) {
                let z: f64 = self.rng.sample(StandardNormal);
                *x = b * expit((*x / (b - *x)).ln() + sd * z);
                inside &= *x > 0.0 && *x < b;
            }
        }
        let (log_ratio, adjacency, cov) =
            if inside { self.eta_log_ratio(&proposed)? } else { (f64::NEG_INFINITY, None, None) };
        let dim = proposed.iter().map(Vec::len).sum();
        let current = self.state.eta.concat();
        let accepted = self.metropolis(Block::Eta, log_ratio, dim, &current, &proposed.concat());
        if accepted {
            self.state.eta = proposed;
            if let (Some(a), Some(c)) = (adjacency, cov) {
                self.adjacency = a;
                self.install(c)?;
            }
        }
        Ok(StepOutcome { log_ratio, accepted })
    }

    /// Step 8 for whichever disease-graph variant the model uses.
    pub fn step_cross_disease(&mut self) -> Result<Option<StepOutcome>> {
        match self.state.cross.clone() {
            CrossDiseaseParams::Unstructured { a } => self.step_a(&a).map(Some),
            CrossDiseaseParams::Directed { .. } => {
                self.step_alpha()?;
                Ok(None)
            }
            CrossDiseaseParams::Undirected { rho_dis } => self.step_rho_dis(rho_dis).map(Some),
        }
    }

    /// Log acceptance ratio of an unstructured `A` proposal.
    pub fn a_log_ratio(&self, proposed: &[Vec<f64>]) -> (f64, Option<GammaCovariance>) {
        let CrossDiseaseParams::Unstructured { a } = &self.state.cross else {
            return (f64::NEG_INFINITY, None);
        };
        let params = CrossDiseaseParams::Unstructured { a: proposed.to_vec() };
        let Some(cov) = self.propose_cov(&self.state.rho, &self.adjacency, &params) else {
            return (f64::NEG_INFINITY, None);
        };
        let pri = &self.model.priors;
        let log_diag = |m: &[Vec<f64>]| (0..m.len()).map(|d| m[d][d].ln()).sum::<f64>();
        let ratio = self.gaussian_ratio(&cov) + log_prior_a(proposed, pri.nu, &pri.psi) - log_prior_a(a, pri.nu, &pri.psi)
            + log_diag(proposed)
            - log_diag(a);
        (ratio, Some(cov))
    }

    fn step_a(&mut self, a: &[Vec<f64>]) -> Result<StepOutcome> {
        let q = a.len();
        let sd_diag = self.steps.a_diag.sqrt();
        let sd_off = self.steps.a_offdiag.sqrt();
        let mut proposed = a.to_vec();
        for r in 0..q {
            for c in 0..=r {
                let z = self.normal();
                proposed[r][c] = if r == c { (a[r][c].ln() + sd_diag * z).exp() } else { a[r][c] + sd_off * z };
            }
        }
        let (log_ratio, cov) = self.a_log_ratio(&proposed);
        let current = self.state.cross.flatten();
        let params = CrossDiseaseParams::Unstructured { a: proposed };
        let accepted = self.metropolis(Block::Cross, log_ratio, current.len(), &current, &params.flatten());
        if accepted {
            self.state.cross = params;
            self.install(cov.expect("accepted proposals have a covariance"))?;
        }
        Ok(StepOutcome { log_ratio, accepted })
    }

    /// Exact Gibbs draw of every disease's `α` block, then the covariance
    /// is rebuilt.
    pub fn step_alpha(&mut self) -> Result<()> {
        let spec = &self.model.spec;
        let links = spec.parent_links();
        let CrossDiseaseParams::Directed { mut alpha } = self.state.cross.clone() else {
            return Err(Error::Config("alpha update needs the directed variant".into()));
        };
        let pri = &self.model.priors;
        for d in 0..spec.q {
            let parents = &spec.parents[d];
            if parents.is_empty() {
                continue;
            }
            let (mean, cov) = directed_alpha_conditional(
                &self.cov.dagars()[d],
                &self.model.graph,
                &self.state.gamma,
                d,
                parents,
                pri.alpha_mean,
                pri.alpha_var,
            )?;
            let chol = DMatrix::from_fn(mean.len(), mean.len(), |r, c| cov[r][c])
                .cholesky()
                .ok_or(Error::NotPositiveDefinite)?;
            let z = DVector::from_fn(mean.len(), |_, _| self.rng.sample::<f64, _>(StandardNormal));
            let draw = DVector::from_vec(mean) + chol.l() * z;
            for (slot, &h) in parents.iter().enumerate() {
                let link = links.iter().position(|&l| l == (d, h)).expect("parent link exists");
                alpha[link] = [draw[2 * slot], draw[2 * slot + 1]];
            }
        }
        let params = CrossDiseaseParams::Directed { alpha };
        let cov = factor_only(&self.model.spec, &params, &self.model.graph, self.cov.dagars().to_vec())?;
        self.state.cross = params;
        let stats = self.acceptance.entry(Block::Cross.name().to_string()).or_default();
        stats.proposed += 1;
        stats.accepted += 1;
        self.install(cov)
    }

    /// Log acceptance ratio of a `ρ_dis` proposal.
    pub fn rho_dis_log_ratio(&self, proposed: f64) -> (f64, Option<GammaCovariance>) {
        let CrossDiseaseParams::Undirected { rho_dis } = self.state.cross else {
            return (f64::NEG_INFINITY, None);
        };
        let (lo, hi) = self.model.priors.rho_dis_bounds.expect("validated for the undirected variant");
        let params = CrossDiseaseParams::Undirected { rho_dis: proposed };
        let Some(cov) = self.propose_cov(&self.state.rho, &self.adjacency, &params) else {
            return (f64::NEG_INFINITY, None);
        };
        let jac = |r: f64| (r - lo).ln() + (hi - r).ln();
        (self.gaussian_ratio(&cov) + jac(proposed) - jac(rho_dis), Some(cov))
    }

    fn step_rho_dis(&mut self, rho_dis: f64) -> Result<StepOutcome> {
        let (lo, hi) = self.model.priors.rho_dis_bounds.expect("validated for the undirected variant");
        let sd = self.steps.rho_dis.sqrt();
        let t = ((rho_dis - lo) / (hi - rho_dis)).ln() + sd * self.normal();
        let proposed = lo + (hi - lo) * expit(t);
        let (log_ratio, cov) =
            if proposed > lo && proposed < hi { self.rho_dis_log_ratio(proposed) } else { (f64::NEG_INFINITY, None) };
        let accepted = self.metropolis(Block::RhoDis, log_ratio, 1, &[rho_dis], &[proposed]);
        if accepted {
            self.state.cross = CrossDiseaseParams::Undirected { rho_dis: proposed };
            self.install(cov.expect("accepted proposals have a covariance"))?;
        }
        Ok(StepOutcome { log_ratio, accepted })
    }
}

/// `log IW(AAᵀ | ν, Ψ) + log(2^q Π a_dd^{q-d+1})` up to a constant.
pub fn log_prior_a(a: &[Vec<f64>], nu: f64, psi: &[Vec<f64>]) -> f64 {
    let q = a.len();
    if (0..q).any(|d| !(a[d][d] > 0.0)) {
        return f64::NEG_INFINITY;
    }
    let inv = lower_inverse(a);
    let log_det_sigma: f64 = 2.0 * (0..q).map(|d| a[d][d].ln()).sum::<f64>();
    let mut trace = 0.0;
    for row in &inv {
        for j in 0..q {
            for k in 0..q {
                trace += row[j] * psi[j][k] * row[k];
            }
        }
    }
    let jacobian: f64 = q as f64 * 2f64.ln() + (0..q).map(|d| (q - d) as f64 * a[d][d].ln()).sum::<f64>();
    -(nu + q as f64 + 1.0) / 2.0 * log_det_sigma - trace / 2.0 + jacobian
}

/// Gaussian full conditional of disease `d`'s `α` coefficients: returns
/// `(H h, H)` with `H = (δᵀ Q_d δ + I/σ²)⁻¹`, `h = δᵀ Q_d γ_d + μ/σ²` and
/// `δ = [γ_h, W γ_h]` over the parents `h` in order.
pub fn directed_alpha_conditional(
    dagar: &DagarPrecision,
    geo: &RegionGraph,
    gamma: &[f64],
    d: usize,
    parents: &[usize],
    prior_mean: f64,
    prior_var: f64,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = geo.n();
    let mut delta: Vec<Vec<f64>> = Vec::with_capacity(2 * parents.len());
    for &h in parents {
        let gh = &gamma[h * n..(h + 1) * n];
        delta.push(gh.to_vec());
        delta.push(neighbor_sum(geo, gh));
    }
    let m = delta.len();
    let q_delta: Vec<Vec<f64>> = delta.iter().map(|col| dagar.mul(col)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let g = DMatrix::from_fn(m, m, |r, c| dot(&delta[r], &q_delta[c]) + if r == c { 1.0 / prior_var } else { 0.0 });
    let gd = &gamma[d * n..(d + 1) * n];
    let h = DVector::from_fn(m, |r, _| dot(&q_delta[r], gd) + prior_mean / prior_var);
    let chol = g.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let mean = chol.solve(&h);
    let cov = chol.inverse();
    Ok((mean.iter().copied().collect(), (0..m).map(|r| (0..m).map(|c| cov[(r, c)]).collect()).collect()))
}
