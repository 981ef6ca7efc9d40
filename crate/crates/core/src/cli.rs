//! Command-line front end: `simulate`, `fit`, `detect`, `diagnose` and
//! `validate`. Failures go to stderr as `{"error": code, "message": ...}`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::{info, warn};
use serde_json::json;

use crate::boundary::{adjacency_detection, boundary_probs, select_threshold};
use crate::config::RunConfig;
use crate::covariance::CrossDiseaseParams;
use crate::diagnostics::diagnose;
use crate::error::{Error, Result};
use crate::graph::Variant;
use crate::io::{self, FitManifest, Ingested};
use crate::sampler::{run_chains, Model, PosteriorSamples};
use crate::simgen::{generate, SimScenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "wombling", version, about = "Difference-boundary detection on areal disease maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic map with known boundaries.
    Simulate {
        #[arg(long, default_value = "unstructured")]
        variant: Variant,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Number of regions.
        #[arg(long, default_value_t = 58)]
        n: usize,
        /// Regions per lattice row.
        #[arg(long, default_value_t = 6)]
        cols: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the MCMC sampler and store the draws.
    Fit {
        #[arg(long)]
        config: PathBuf,
    },
    /// Compute boundary probabilities and FDR-controlled selections.
    Detect {
        #[arg(long)]
        config: PathBuf,
    },
    /// WAIC, Monte Carlo error, ESS, Moran's I and cross-disease correlation.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check a configuration and its inputs without sampling.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", json!({ "error": e.code(), "message": e.to_string() }));
            EXIT_FAILURE
        }
    }
}

pub fn execute(command: &Command) -> Result<serde_json::Value> {
    match command {
        Command::Simulate { variant, seed, replicates, n, cols, out } => {
            simulate(*variant, *seed, *replicates, *n, *cols, out)
        }
        Command::Fit { config } => fit(&RunConfig::load(config)?),
        Command::Detect { config } => detect(&RunConfig::load(config)?),
        Command::Diagnose { config } => run_diagnose(&RunConfig::load(config)?),
        Command::Validate { config } => validate(&RunConfig::load(config)?),
    }
}

fn simulate(variant: Variant, seed: u64, replicates: usize, n: usize, cols: usize, out: &Path) -> Result<serde_json::Value> {
    let scenario = SimScenario { seed, replicates, ..SimScenario::small(variant, n, cols) };
    let sim = generate(&scenario)?;
    let manifest = io::sha256_hex(serde_json::to_string(&scenario)?.as_bytes());
    let configs = io::write_sim_output(out, &sim, &manifest)?;
    info!("wrote {} replicate(s) to {}", replicates, out.display());
    Ok(json!({
        "manifest": manifest,
        "regions": sim.n(),
        "edges": sim.graph.num_edges(),
        "configs": configs,
    }))
}

fn build_model(cfg: &RunConfig, ingested: Ingested) -> Result<Model> {
    let spec = cfg.disease_graph(ingested.data.q)?;
    let priors = cfg.priors(&ingested.data, &spec)?;
    Model::with_priors(ingested.graph, spec, ingested.data, priors)
}

fn samples_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_path().join("samples")
}

fn manifest_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_path().join("manifest.json")
}

fn validate(cfg: &RunConfig) -> Result<serde_json::Value> {
    let ingested = io::ingest(cfg)?;
    let report = ingested.report.clone();
    let model = build_model(cfg, ingested)?;
    cfg.probe_kinds(model.data.q)?;
    let (hash, _) = io::run_manifest_hash(cfg)?;
    Ok(json!({
        "valid": true,
        "manifest": hash,
        "regions": model.graph.n(),
        "edges": model.graph.num_edges(),
        "diseases": model.data.q,
        "variant": model.spec.variant,
        "ingest": report,
    }))
}

fn fit(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (hash, input_hashes) = io::run_manifest_hash(cfg)?;
    let ingested = io::ingest(cfg)?;
    let report = ingested.report.clone();
    let model = build_model(cfg, ingested)?;
    let chains = run_chains(&model, &cfg.chain_config(), cfg.chain.chains)?;
    let cross_names = CrossDiseaseParams::initial(&model.spec).labels(&model.spec);
    io::write_samples(&samples_dir(cfg), &hash, &chains, &cross_names)?;
    let manifest = FitManifest {
        schema_version: crate::config::SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        manifest_hash: hash.clone(),
        variant: model.spec.variant,
        seed: cfg.seed,
        regions: model.data.n,
        diseases: model.data.q,
        eta_dims: model.data.dissimilarity.iter().map(|z| z.dim()).collect(),
        chains: chains.len(),
        draws_per_chain: chains.iter().map(PosteriorSamples::len).collect(),
        input_hashes,
        config: cfg.clone(),
        ingest: report,
        acceptance: chains.iter().map(|c| c.acceptance.clone()).collect(),
        final_step_sizes: chains.iter().map(|c| c.step_sizes.last().copied()).collect(),
    };
    let path = manifest_path(cfg);
    std::fs::create_dir_all(cfg.output_path())?;
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    let rates: Vec<_> = chains
        .iter()
        .map(|c| c.acceptance.iter().map(|(k, a)| (k.clone(), a.rate())).collect::<std::collections::BTreeMap<_, _>>())
        .collect();
    Ok(json!({
        "manifest": hash,
        "output": cfg.output_path(),
        "draws_per_chain": manifest.draws_per_chain,
        "acceptance": rates,
    }))
}

/// Loads the stored fit for `cfg`, refusing one made from other inputs.
fn load_fit(cfg: &RunConfig) -> Result<(FitManifest, Model, Vec<PosteriorSamples>)> {
    let manifest = io::read_manifest(&manifest_path(cfg))?;
    let (hash, _) = io::run_manifest_hash(cfg)?;
    if hash != manifest.manifest_hash {
        return Err(Error::Config(format!(
            "stored fit {} does not match the current config and inputs ({hash}); rerun `fit`",
            manifest.manifest_hash
        )));
    }
    let model = build_model(cfg, io::ingest(cfg)?)?;
    let mut chains = io::read_samples(&samples_dir(cfg), manifest.regions, manifest.diseases, manifest.variant, manifest.eta_dims.clone())?;
    for (c, acc) in chains.iter_mut().zip(&manifest.acceptance) {
        c.acceptance = acc.clone();
    }
    Ok((manifest, model, chains))
}

fn pooled(chains: &[PosteriorSamples]) -> Result<PosteriorSamples> {
    let mut all = chains.first().cloned().ok_or_else(|| Error::InvalidInput("no chains stored".into()))?;
    for c in &chains[1..] {
        all.beta.extend_from_slice(&c.beta);
        all.theta.extend_from_slice(&c.theta);
        all.tau_s.extend_from_slice(&c.tau_s);
        all.v.extend_from_slice(&c.v);
        all.gamma.extend_from_slice(&c.gamma);
        all.rho.extend_from_slice(&c.rho);
        all.eta.extend_from_slice(&c.eta);
        all.cross.extend_from_slice(&c.cross);
        all.labels.extend_from_slice(&c.labels);
        all.step_sizes.extend_from_slice(&c.step_sizes);
    }
    Ok(all)
}

fn detect(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (manifest, model, chains) = load_fit(cfg)?;
    let samples = pooled(&chains)?;
    if samples.is_empty() {
        return Err(Error::InvalidInput("the stored fit has no retained draws".into()));
    }
    let mut results = Vec::new();
    let mut summary = Vec::new();
    for kind in cfg.probe_kinds(model.data.q)? {
        let probe = boundary_probs(&samples, &model.graph, kind)?;
        let curve = select_threshold(&probe.v, cfg.zeta)?;
        if curve.threshold.is_none() {
            warn!("{kind}: no threshold reaches FDR <= {}; nothing selected", cfg.zeta);
        }
        summary.push(json!({
            "probe": kind.to_string(),
            "threshold": curve.threshold,
            "selected": curve.n_selected(),
        }));
        results.push((probe, curve));
    }
    let out = cfg.output_path();
    let hash = &manifest.manifest_hash;
    io::write_boundaries(&out.join("boundaries.csv"), hash, &results)?;
    io::write_fdr_curves(&out.join("fdr_curves.csv"), hash, &results)?;
    let adjacency = adjacency_detection(&samples, &model.data.dissimilarity, cfg.adjacency_cutoff)?;
    io::write_adjacency(&out.join("adjacency.csv"), hash, &adjacency)?;
    Ok(json!({ "manifest": hash, "zeta": cfg.zeta, "probes": summary }))
}

fn run_diagnose(cfg: &RunConfig) -> Result<serde_json::Value> {
    let (manifest, model, chains) = load_fit(cfg)?;
    let report = diagnose(&chains, &model.data, &model.graph, cfg.correlogram_bins.as_deref())?;
    io::write_json(&cfg.output_path().join("diagnostics.json"), &manifest.manifest_hash, &report)?;
    Ok(json!({
        "manifest": manifest.manifest_hash,
        "waic": report.waic.waic,
        "ess": report.chains.iter().map(|c| c.ess_multivariate).collect::<Vec<_>>(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["wombling", "fit"]), EXIT_USAGE);
        assert_eq!(run(["wombling", "simulate", "--variant", "sideways", "--out", "x"]), EXIT_USAGE);
    }

    #[test]
    fn missing_config_is_an_io_failure() {
        assert_eq!(run(["wombling", "validate", "--config", "/nonexistent/run.toml"]), EXIT_FAILURE);
    }
}
