//! DAGAR precision on a small lattice, with links cut by a dissimilarity
//! covariate.

use areal_wombling::dagar::{adjacency_from_eta, build_precision, Adjacency};
use areal_wombling::graph::RegionGraph;
use areal_wombling::simgen::standardized_differences;

fn main() -> areal_wombling::Result<()> {
    let graph = RegionGraph::hex_lattice(9, 3)?;
    let x = [12.0, 15.5, 9.0, 14.0, 21.0, 13.5, 8.0, 16.0, 15.0];
    let z = standardized_differences(&graph, &x)?;
    let eta = z.eta_upper_bounds()?;

    let full = build_precision(&graph, &Adjacency::full(&graph), 0.6)?;
    let adjacency = adjacency_from_eta(&z, &eta)?;
    let cut = build_precision(&graph, &adjacency, 0.6)?;

    println!("{} parent links, {} kept at eta = M", graph.num_edges(), adjacency.kept());
    println!("log|Q| full {:.4}, thresholded {:.4}", full.log_det(), cut.log_det());
    for (i, row) in cut.matrix().to_dense().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:7.3}")).collect();
        println!("{i}: {}", cells.join(" "));
    }
    Ok(())
}
