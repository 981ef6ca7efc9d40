//! Monte Carlo check of the stick-breaking prior covariance between two
//! spatial effects against its semianalytic value.

use areal_wombling::covariance::sigma_unstructured;
use areal_wombling::dagar::{build_precision, Adjacency};
use areal_wombling::dp::{prior_cov_oracle, DpPrior};
use areal_wombling::graph::RegionGraph;

fn main() -> areal_wombling::Result<()> {
    let graph = RegionGraph::hex_lattice(6, 3)?;
    let dagar = build_precision(&graph, &Adjacency::full(&graph), 0.8)?;
    let cov = sigma_unstructured(&[vec![1.0]], vec![dagar])?;
    let prior = DpPrior { k: 15, alpha: 1.0, a_s: 5.0, b_s: 2.0 };
    for pair in [(0, 1), (0, 5), (2, 3)] {
        let est = prior_cov_oracle(&cov, &prior, pair, 20_000, 7)?;
        println!(
            "{pair:?}: Monte Carlo {:.4} +- {:.4}, semianalytic {:.4}, z {:+.2}",
            est.monte_carlo,
            est.monte_carlo_se,
            est.semianalytic,
            est.z_score()
        );
    }
    Ok(())
}
