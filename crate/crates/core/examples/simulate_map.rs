//! Simulates a four-disease map with known boundaries and writes the
//! fitting inputs plus the truth to a directory.

use areal_wombling::boundary::ProbeKind;
use areal_wombling::graph::Variant;
use areal_wombling::io::{sha256_hex, write_sim_output};
use areal_wombling::simgen::{generate, SimScenario};

fn main() -> areal_wombling::Result<()> {
    let out_dir = std::env::args().nth(1).map(Into::into).unwrap_or_else(|| std::env::temp_dir().join("wombling-sim"));
    let scenario = SimScenario { replicates: 2, ..SimScenario::reference(Variant::Directed) };
    let sim = generate(&scenario)?;
    for d in 0..sim.q() {
        let truth = sim.true_boundaries(ProbeKind::Single(d))?;
        println!("disease {}: {} of {} edges are true boundaries", d + 1, truth.iter().filter(|&&t| t).count(), truth.len());
    }
    let manifest = sha256_hex(serde_json::to_string(&scenario)?.as_bytes());
    for cfg in write_sim_output(&out_dir, &sim, &manifest)? {
        println!("wrote {}", cfg.display());
    }
    Ok(())
}
