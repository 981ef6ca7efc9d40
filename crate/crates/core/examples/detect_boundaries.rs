//! Posterior boundary probabilities with FDR-controlled selection, scored
//! against the simulated truth.

use areal_wombling::boundary::{
    adjacency_detection, boundary_probs, score_against_truth, select_threshold, truth_fdr, ProbeKind,
};
use areal_wombling::graph::Variant;
use areal_wombling::sampler::{run_chain, ChainConfig, Model};
use areal_wombling::simgen::{generate, SimScenario};

fn main() -> areal_wombling::Result<()> {
    let sim = generate(&SimScenario::small(Variant::Unstructured, 30, 6))?;
    let model = Model::new(sim.graph.clone(), sim.scenario.spec.clone(), sim.observed(0)?)?;
    let samples = run_chain(&model, &ChainConfig { iterations: 3000, burn_in: 1500, ..ChainConfig::default() })?;

    let kinds = [ProbeKind::Single(0), ProbeKind::Single(1), ProbeKind::Cross(0, 1), ProbeKind::Shared(0, 1)];
    for kind in kinds {
        let probe = boundary_probs(&samples, &sim.graph, kind)?;
        let curve = select_threshold(&probe.v, 0.05)?;
        let truth = sim.true_boundaries(kind)?;
        let top = truth.iter().filter(|&&t| t).count();
        let score = score_against_truth(&probe.v, &truth, top)?;
        println!(
            "{kind:>10}: t* {:?}, {} selected, truth FDR {:.3}, top-{top} sensitivity {:.3}",
            curve.threshold,
            curve.n_selected(),
            truth_fdr(&curve.selected, &truth),
            score.sensitivity
        );
    }
    let adjacency = adjacency_detection(&samples, &model.data.dissimilarity, 0.5)?;
    for d in 0..model.data.q {
        println!("disease {}: {} links detected as cut", d + 1, adjacency.detected(d).iter().filter(|&&x| x).count());
    }
    Ok(())
}
