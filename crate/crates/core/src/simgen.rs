//! Simulated multivariate disease maps with known difference boundaries.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boundary::ProbeKind;
use crate::covariance::{factor_only, CrossDiseaseParams};
use crate::dagar::{adjacency_from_eta, build_precision, Adjacency, EdgeDissimilarity};
use crate::data::ObservedData;
use crate::dp::{labels_from_gamma, cumulative_weights, weights_from_sticks, DpPrior};
use crate::error::{Error, Result};
use crate::graph::{DiseaseGraphSpec, RegionGraph, Variant};
use crate::stats::variance;

/// Generating values and layout of one simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    /// Number of hexagonal cells and cells per row of the synthetic map.
    pub n: usize,
    pub cols: usize,
    pub spec: DiseaseGraphSpec,
    /// Truncation `K` and concentration `α`; `a_s`, `b_s` are unused here.
    pub dp: DpPrior,
    /// Intercept per disease.
    pub beta: Vec<f64>,
    pub tau_s: f64,
    pub rho: Vec<f64>,
    /// One adjacency coefficient per disease for the single dissimilarity.
    pub eta: Vec<f64>,
    pub cross: CrossDiseaseParams,
    pub covariate_mean: f64,
    pub covariate_sd: f64,
    /// Offset used for every cell.
    pub expected: f64,
    pub seed: u64,
    pub replicates: usize,
}

/// `α` pairs of the four-disease directed scenario, keyed by `(child, parent)`.
const DIRECTED_ALPHA: [((usize, usize), [f64; 2]); 4] =
    [((1, 0), [0.3, 0.5]), ((2, 1), [0.4, 0.4]), ((3, 0), [0.5, 0.4]), ((3, 2), [0.8, 0.1])];

impl SimScenario {
    /// Four diseases on a 58-cell hexagonal map with the reference
    /// generating values: `K = 15`, `α = 1`, `β = (-2, 2, 1, -1)`,
    /// `τ_s = 0.25`, `ρ = (0.2, 0.8, 0.4, 0.6)`, `η = (0.5, 0.25, 0.33, 0.6)`.
    pub fn reference(variant: Variant) -> Self {
        let q = 4;
        let spec = DiseaseGraphSpec::default_for(variant, q);
        let cross = match variant {
            Variant::Unstructured => CrossDiseaseParams::Unstructured {
                a: (0..q).map(|r| (0..q).map(|c| if c <= r { 1.0 } else { 0.0 }).collect()).collect(),
            },
            Variant::Directed => CrossDiseaseParams::Directed {
                alpha: spec
                    .parent_links()
                    .iter()
                    .map(|l| DIRECTED_ALPHA.iter().find(|(k, _)| k == l).map_or([0.0, 0.0], |(_, a)| *a))
                    .collect(),
            },
            Variant::Undirected => CrossDiseaseParams::Undirected { rho_dis: 0.25 },
        };
        Self {
            n: 58,
            cols: 6,
            spec,
            dp: DpPrior { k: 15, alpha: 1.0, ..DpPrior::default() },
            beta: vec![-2.0, 2.0, 1.0, -1.0],
            tau_s: 0.25,
            rho: vec![0.2, 0.8, 0.4, 0.6],
            eta: vec![0.5, 0.25, 0.33, 0.6],
            cross,
            covariate_mean: 15.0,
            covariate_sd: 5.0,
            expected: 1.0,
            seed: 2024,
            replicates: 1,
        }
    }

    /// The reference scenario shrunk to `n` cells in rows of `cols`.
    pub fn small(variant: Variant, n: usize, cols: usize) -> Self {
        Self { n, cols, ..Self::reference(variant) }
    }

    pub fn q(&self) -> usize {
        self.spec.q
    }

    pub fn validate(&self) -> Result<()> {
        let q = self.q();
        if self.beta.len() != q || self.rho.len() != q || self.eta.len() != q {
            return Err(Error::Dimension(format!("scenario vectors must have {q} entries")));
        }
        if self.cross.variant() != self.spec.variant {
            return Err(Error::Config("cross-disease parameters do not match the disease graph".into()));
        }
        if !(self.tau_s > 0.0) || !(self.covariate_sd > 0.0) || !(self.expected > 0.0) {
            return Err(Error::Config("tau_s, covariate sd and offset must be positive".into()));
        }
        if self.rho.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(Error::Config("rho must lie in [0, 1)".into()));
        }
        if self.eta.iter().any(|e| !(*e >= 0.0)) {
            return Err(Error::Config("eta must be non-negative".into()));
        }
        if self.dp.k == 0 || !(self.dp.alpha > 0.0) {
            return Err(Error::Config("K must be positive and alpha > 0".into()));
        }
        if self.replicates == 0 {
            return Err(Error::Config("at least one replicate is required".into()));
        }
        Ok(())
    }
}

/// One simulated map: a single latent realization and its count replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub scenario: SimScenario,
    pub graph: RegionGraph,
    pub covariate: Vec<f64>,
    /// Shared by every disease.
    pub dissimilarity: EdgeDissimilarity,
    pub adjacency: Vec<Adjacency>,
    pub gamma: Vec<f64>,
    pub sticks: Vec<f64>,
    pub theta: Vec<f64>,
    pub labels: Vec<usize>,
    pub phi: Vec<f64>,
    /// Disease-major counts, one vector per replicate.
    pub counts: Vec<Vec<u64>>,
}

impl SimOutput {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn q(&self) -> usize {
        self.scenario.q()
    }

    /// Replicate `r` as fitting input.
    pub fn observed(&self, r: usize) -> Result<ObservedData> {
        let counts = self.counts.get(r).ok_or_else(|| Error::InvalidInput(format!("no replicate {r}")))?;
        ObservedData::new(
            self.n(),
            self.q(),
            counts.clone(),
            vec![self.scenario.expected; self.n() * self.q()],
            vec![self.dissimilarity.clone(); self.q()],
        )
    }

    pub fn true_boundaries(&self, kind: ProbeKind) -> Result<Vec<bool>> {
        true_boundaries(&self.labels, self.n(), self.q(), self.graph.edges(), kind)
    }
}

/// Per-edge flags of the probe event under the true labels.
pub fn true_boundaries(
    labels: &[usize],
    n: usize,
    q: usize,
    edges: &[(usize, usize)],
    kind: ProbeKind,
) -> Result<Vec<bool>> {
    kind.check(q)?;
    if labels.len() != n * q {
        return Err(Error::Dimension("labels do not cover every cell".into()));
    }
    Ok(edges.iter().map(|&(i, j)| kind.event(labels, n, i, j)).collect())
}

/// `z_ij = |x_i - x_j| / σ` on every parent link, `σ` the standard deviation
/// of the absolute differences over all neighboring pairs.
pub fn standardized_differences(graph: &RegionGraph, x: &[f64]) -> Result<EdgeDissimilarity> {
    let diffs: Vec<f64> = graph.edges().iter().map(|&(i, j)| (x[i] - x[j]).abs()).collect();
    let sd = variance(&diffs).sqrt();
    if !(sd > 0.0) {
        return Err(Error::ZeroVariance("neighbor covariate differences".into()));
    }
    EdgeDissimilarity::new(graph, 1, |i, j| Some(vec![(x[i] - x[j]).abs() / sd]))
}

/// Draws the covariate, adjacency, latent field and labels once, then the
/// count replicates in parallel (replicate `r` on stream `r + 1`).
pub fn generate(scenario: &SimScenario) -> Result<SimOutput> {
    scenario.validate()?;
    let graph = RegionGraph::hex_lattice(scenario.n, scenario.cols)?;
    let n = graph.n();
    let q = scenario.q();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let normal = Normal::new(scenario.covariate_mean, scenario.covariate_sd).expect("positive sd");
    let covariate: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let dissimilarity = standardized_differences(&graph, &covariate)?;
    let adjacency =
        scenario.eta.iter().map(|&e| adjacency_from_eta(&dissimilarity, &[e])).collect::<Result<Vec<_>>>()?;
    let dagars = adjacency
        .iter()
        .zip(&scenario.rho)
        .map(|(a, &r)| build_precision(&graph, a, r))
        .collect::<Result<Vec<_>>>()?;
    let cov = factor_only(&scenario.spec, &scenario.cross, &graph, dagars)?.complete()?;
    let gamma = cov.sample(&mut rng);
    let sticks = scenario.dp.sample_sticks(&mut rng);
    let theta = scenario.dp.sample_atoms(scenario.tau_s, &mut rng);
    let cumulative = cumulative_weights(&weights_from_sticks(&sticks)?);
    let labels = labels_from_gamma(&gamma, cov.marginal_sds(), &cumulative);
    let phi: Vec<f64> = labels.iter().map(|&u| theta[u]).collect();
    let means: Vec<f64> =
        (0..n * q).map(|c| scenario.expected * (scenario.beta[c / n] + phi[c]).exp()).collect();
    let counts = (0..scenario.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
            rng.set_stream(r as u64 + 1);
            draw_counts(&means, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimOutput {
        scenario: scenario.clone(),
        graph,
        covariate,
        dissimilarity,
        adjacency,
        gamma,
        sticks,
        theta,
        labels,
        phi,
        counts,
    })
}

fn draw_counts<R: Rng>(means: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    means
        .iter()
        .map(|&m| {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::NonFinite(format!("Poisson mean {m}")));
            }
            let p = Poisson::new(m).map_err(|e| Error::InvalidInput(e.to_string()))?;
            Ok(p.sample(rng) as u64)
        })
        .collect()
}
