//! Runs two parallel chains on a simulated map and reports acceptance
//! rates and posterior means.

use areal_wombling::graph::Variant;
use areal_wombling::sampler::{run_chains, ChainConfig, Model};
use areal_wombling::simgen::{generate, SimScenario};

fn main() -> areal_wombling::Result<()> {
    let sim = generate(&SimScenario::small(Variant::Undirected, 20, 5))?;
    let model = Model::new(sim.graph.clone(), sim.scenario.spec.clone(), sim.observed(0)?)?;
    let cfg = ChainConfig { iterations: 2000, burn_in: 1000, thin: 2, seed: 3, ..ChainConfig::default() };
    let chains = run_chains(&model, &cfg, 2)?;
    for (c, s) in chains.iter().enumerate() {
        let rates: Vec<String> = s.acceptance.iter().map(|(k, a)| format!("{k} {:.2}", a.rate())).collect();
        println!("chain {}: {}", c + 1, rates.join(", "));
        let mean = |f: &dyn Fn(usize) -> f64| (0..s.len()).map(f).sum::<f64>() / s.len() as f64;
        let beta: Vec<String> = (0..model.data.q).map(|d| format!("{:.2}", mean(&|t| s.beta[t][d]))).collect();
        println!("  beta [{}], rho_dis {:.3}, tau_s {:.3}", beta.join(", "), mean(&|t| s.cross[t][0]), mean(&|t| s.tau_s[t]));
    }
    println!("truth: beta {:?}", sim.scenario.beta);
    Ok(())
}
