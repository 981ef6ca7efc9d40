//! Joint covariance of the latent field under each disease graph.

use areal_wombling::covariance::{sigma_directed, sigma_undirected, sigma_unstructured};
use areal_wombling::dagar::{build_precision, Adjacency, DagarPrecision};
use areal_wombling::graph::{DiseaseGraphSpec, RegionGraph};

fn dagars(graph: &RegionGraph, rho: &[f64]) -> areal_wombling::Result<Vec<DagarPrecision>> {
    rho.iter().map(|&r| build_precision(graph, &Adjacency::full(graph), r)).collect()
}

fn main() -> areal_wombling::Result<()> {
    let graph = RegionGraph::hex_lattice(6, 3)?;
    let rho = [0.3, 0.7, 0.5];

    let a = vec![vec![1.0, 0.0, 0.0], vec![0.5, 1.0, 0.0], vec![0.2, 0.4, 0.8]];
    let un = sigma_unstructured(&a, dagars(&graph, &rho)?)?;

    let spec = DiseaseGraphSpec::default_directed(3);
    let alpha = vec![[0.4, 0.1]; spec.parent_links().len()];
    let dir = sigma_directed(&spec, &alpha, &graph, dagars(&graph, &rho)?)?;

    let spec = DiseaseGraphSpec::default_undirected(3);
    let (lo, hi) = spec.disease_rho_bounds()?;
    let und = sigma_undirected(&spec, 0.4, dagars(&graph, &rho)?)?;

    println!("rho_dis support ({lo:.3}, {hi:.3})");
    for (name, cov) in [("unstructured", &un), ("directed", &dir), ("undirected", &und)] {
        let s = cov.dense_covariance();
        println!(
            "{name:>12}: log|P| {:8.3}, sd(1,1) {:.3}, cov((1,1),(1,2)) {:.3}",
            cov.log_det_precision(),
            cov.marginal_sds()[0],
            s[0][6]
        );
    }
    Ok(())
}
