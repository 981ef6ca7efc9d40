//! Versioned TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::boundary::ProbeKind;
use crate::data::ObservedData;
use crate::error::{Error, Result};
use crate::graph::{DiseaseGraphSpec, Variant};
use crate::sampler::{AdaptConfig, ChainConfig, PriorSpec, StepSizes};

pub const SCHEMA_VERSION: u32 = 1;

/// Input files; relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    /// `region_i,region_j` neighbor pairs.
    pub edges: PathBuf,
    /// `region_id,disease_id,count[,expected]`.
    pub counts: PathBuf,
    /// `region_id,disease_id,group_id,cases,population`; supplies the
    /// expected counts when the counts file has none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strata: Option<PathBuf>,
    /// `region_id,disease_id,name,value`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariates: Option<PathBuf>,
    /// One `region_i,region_j,z_1[,z_2...]` file per disease; a single file
    /// is shared by all diseases.
    pub dissimilarity: Vec<PathBuf>,
    /// `region_id,x,y`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroids: Option<PathBuf>,
}

/// Disease graph in 1-based disease indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiseaseGraphConfig {
    /// Directed links `[child, parent]` or undirected edges `[a, b]`.
    pub links: Vec<[usize; 2]>,
}

/// Prior overrides; anything left out keeps its default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorOverrides {
    pub sigma2_beta: Option<f64>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub a_s: Option<f64>,
    pub b_s: Option<f64>,
    pub nu: Option<f64>,
    pub psi_diag: Option<f64>,
    pub alpha_mean: Option<f64>,
    pub alpha_var: Option<f64>,
    pub rho_dis_bounds: Option<[f64; 2]>,
    /// Bounds `M` per disease and dissimilarity component.
    pub eta_upper: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "one")]
    pub thin: usize,
    #[serde(default = "one")]
    pub chains: usize,
    #[serde(default)]
    pub record_proposals: bool,
    #[serde(default)]
    pub steps: StepSizes,
    #[serde(default)]
    pub adapt: AdaptConfig,
}

fn default_iterations() -> usize {
    5000
}

fn default_burn_in() -> usize {
    2500
}

fn one() -> usize {
    1
}

fn default_zeta() -> f64 {
    0.05
}

fn default_cutoff() -> f64 {
    0.5
}

impl Default for ChainSection {
    fn default() -> Self {
        Self {
            iterations: default_iterations(),
            burn_in: default_burn_in(),
            thin: 1,
            chains: 1,
            record_proposals: false,
            steps: StepSizes::default(),
            adapt: AdaptConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub variant: Variant,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Probe names such as `single:1` or `cross:1-2`; empty means all
    /// single, cross and shared probes.
    #[serde(default)]
    pub probes: Vec<String>,
    #[serde(default = "default_cutoff")]
    pub adjacency_cutoff: f64,
    /// Distance cut points for the Moran's I correlogram.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correlogram_bins: Option<Vec<f64>>,
    pub data: DataPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disease_graph: Option<DiseaseGraphConfig>,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub priors: PriorOverrides,
    /// Directory of the config file, used to resolve relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_toml(&text, &base).map_err(|e| match e {
            Error::Config(message) => Error::Parse { path: path.to_path_buf(), message },
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(Error::Config(format!("zeta = {} must lie in (0, 1)", self.zeta)));
        }
        if !(self.adjacency_cutoff >= 0.0 && self.adjacency_cutoff < 1.0) {
            return Err(Error::Config("adjacency_cutoff must lie in [0, 1)".into()));
        }
        if self.chain.chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if self.data.dissimilarity.is_empty() {
            return Err(Error::Config("at least one dissimilarity file is required".into()));
        }
        self.chain_config().validate()?;
        for p in &self.probes {
            p.parse::<ProbeKind>()?;
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn output_path(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    pub fn chain_config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.chain.iterations,
            burn_in: self.chain.burn_in,
            thin: self.chain.thin,
            seed: self.seed,
            steps: self.chain.steps,
            adapt: self.chain.adapt,
            record_proposals: self.chain.record_proposals,
        }
    }

    pub fn disease_graph(&self, q: usize) -> Result<DiseaseGraphSpec> {
        let Some(g) = &self.disease_graph else {
            return Ok(DiseaseGraphSpec::default_for(self.variant, q));
        };
        let links = g
            .links
            .iter()
            .map(|&[a, b]| match (a.checked_sub(1), b.checked_sub(1)) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(Error::Config("disease indices are 1-based".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        match self.variant {
            Variant::Unstructured => Ok(DiseaseGraphSpec::unstructured(q)),
            Variant::Directed => DiseaseGraphSpec::directed(q, &links),
            Variant::Undirected => DiseaseGraphSpec::undirected(q, &links),
        }
    }

    pub fn probe_kinds(&self, q: usize) -> Result<Vec<ProbeKind>> {
        if self.probes.is_empty() {
            return Ok(ProbeKind::all(q));
        }
        self.probes
            .iter()
            .map(|p| {
                let kind: ProbeKind = p.parse()?;
                kind.check(q)?;
                Ok(kind)
            })
            .collect()
    }

    /// Default priors with the configured overrides applied.
    pub fn priors(&self, data: &ObservedData, spec: &DiseaseGraphSpec) -> Result<PriorSpec> {
        let mut p = PriorSpec::defaults(data, spec)?;
        let o = &self.priors;
        if let Some(v) = o.sigma2_beta {
            p.sigma2_beta = v;
        }
        if let Some(v) = o.k {
            p.dp.k = v;
        }
        if let Some(v) = o.alpha {
            p.dp.alpha = v;
        }
        if let Some(v) = o.a_s {
            p.dp.a_s = v;
        }
        if let Some(v) = o.b_s {
            p.dp.b_s = v;
        }
        if let Some(v) = o.nu {
            p.nu = v;
        }
        if let Some(v) = o.psi_diag {
            p.psi = (0..spec.q).map(|r| (0..spec.q).map(|c| if r == c { v } else { 0.0 }).collect()).collect();
        }
        if let Some(v) = o.alpha_mean {
            p.alpha_mean = v;
        }
        if let Some(v) = o.alpha_var {
            p.alpha_var = v;
        }
        if let Some([lo, hi]) = o.rho_dis_bounds {
            p.rho_dis_bounds = Some((lo, hi));
        }
        if let Some(v) = &o.eta_upper {
            p.eta_upper = v.clone();
        }
        p.validate(data, spec)?;
        Ok(p)
    }
}
