//! WAIC, Monte Carlo error, multivariate ESS, Moran's I and SIR
//! correlations for a fitted model.

use areal_wombling::diagnostics::diagnose;
use areal_wombling::graph::Variant;
use areal_wombling::sampler::{run_chains, ChainConfig, Model};
use areal_wombling::simgen::{generate, SimScenario};

fn main() -> areal_wombling::Result<()> {
    let sim = generate(&SimScenario::small(Variant::Directed, 24, 6))?;
    let data = sim.observed(0)?;
    let model = Model::new(sim.graph.clone(), sim.scenario.spec.clone(), data.clone())?;
    let chains = run_chains(&model, &ChainConfig { iterations: 4000, burn_in: 2000, ..ChainConfig::default() }, 2)?;
    let report = diagnose(&chains, &data, &sim.graph, Some(&[1.5, 3.0, 4.5]))?;
    println!("WAIC {:.2} (lppd {:.2}, p_waic {:.2})", report.waic.waic, report.waic.lppd, report.waic.p_waic);
    for (c, ch) in report.chains.iter().enumerate() {
        println!("chain {}: ESS {:?} over {} parameters, relative precision {:?}", c + 1, ch.ess_multivariate, ch.ess_parameters, ch.relative_precision);
    }
    for (d, m) in report.morans.iter().enumerate() {
        println!("Moran's I of SIR, disease {}: {:.3?}", d + 1, m);
    }
    println!("SIR correlation {:.2?}", report.pearson);
    Ok(())
}
