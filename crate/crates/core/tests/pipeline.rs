use std::fs;
use std::path::{Path, PathBuf};

use areal_wombling::cli::run;
use areal_wombling::config::RunConfig;
use areal_wombling::graph::Variant;
use areal_wombling::io::{ingest, read_manifest};
use areal_wombling::simgen::{generate, SimScenario};

fn simulate(dir: &Path, variant: &str, replicates: usize) -> PathBuf {
    let out = dir.join("sim");
    let code = run([
        "wombling",
        "simulate",
        "--variant",
        variant,
        "--n",
        "12",
        "--cols",
        "4",
        "--seed",
        "5",
        "--replicates",
        &replicates.to_string(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    out
}

fn shorten(cfg: &Path, iterations: usize, burn_in: usize) {
    let text = fs::read_to_string(cfg).unwrap();
    let text = text
        .replace("iterations = 5000", &format!("iterations = {iterations}"))
        .replace("burn_in = 2500", &format!("burn_in = {burn_in}"));
    fs::write(cfg, text).unwrap();
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn simulated_files_ingest_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "unstructured", 3);
    let scenario = SimScenario { seed: 5, replicates: 3, ..SimScenario::small(Variant::Unstructured, 12, 4) };
    let out = generate(&scenario).unwrap();
    for r in 0..3 {
        let got = ingest(&RunConfig::load(&sim.join(format!("run_{}.toml", r + 1))).unwrap()).unwrap();
        assert_eq!(got.data, out.observed(r).unwrap());
        assert_eq!(got.graph, out.graph);
        assert!(got.report.unobserved_cells.is_empty());
    }
}

#[test]
fn fit_then_detect_writes_one_row_per_edge_and_probe() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "directed", 1);
    let cfg_path = sim.join("run_1.toml");
    shorten(&cfg_path, 300, 150);
    let cfg = cfg_path.to_str().unwrap();
    assert_eq!(run(["wombling", "validate", "--config", cfg]), 0);
    assert_eq!(run(["wombling", "fit", "--config", cfg]), 0);
    assert_eq!(run(["wombling", "detect", "--config", cfg]), 0);
    assert_eq!(run(["wombling", "diagnose", "--config", cfg]), 0);

    let fit = sim.join("fit_1");
    let manifest = read_manifest(&fit.join("manifest.json")).unwrap();
    let edges = data_rows(&sim.join("edges.csv")).len();
    let probes = 4 + 2 * 6;
    let rows = data_rows(&fit.join("boundaries.csv"));
    assert_eq!(rows.len(), edges * probes);
    for r in &rows {
        let v: f64 = r[5].parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
    assert_eq!(data_rows(&fit.join("adjacency.csv")).len(), edges * 4);
    for name in ["boundaries.csv", "fdr_curves.csv", "adjacency.csv", "samples/beta.csv"] {
        let first = fs::read_to_string(fit.join(name)).unwrap().lines().next().unwrap().to_string();
        assert_eq!(first, format!("# manifest: {}", manifest.manifest_hash));
    }
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(fit.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["manifest"], manifest.manifest_hash.as_str());
    assert_eq!(manifest.draws_per_chain, vec![150]);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let sim = simulate(dir, "undirected", 1);
        let cfg_path = sim.join("run_1.toml");
        shorten(&cfg_path, 200, 100);
        let cfg = cfg_path.to_str().unwrap();
        for cmd in ["fit", "detect", "diagnose"] {
            assert_eq!(run(["wombling", cmd, "--config", cfg]), 0);
        }
    }
    for name in ["fit_1/samples/gamma.csv", "fit_1/manifest.json", "fit_1/boundaries.csv", "fit_1/diagnostics.json"] {
        let x = fs::read(a.path().join("sim").join(name)).unwrap();
        let y = fs::read(b.path().join("sim").join(name)).unwrap();
        assert_eq!(x, y, "{name}");
    }
}

#[test]
fn zero_iterations_store_no_draws_and_detect_refuses() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "unstructured", 1);
    let cfg_path = sim.join("run_1.toml");
    shorten(&cfg_path, 0, 0);
    let cfg = cfg_path.to_str().unwrap();
    assert_eq!(run(["wombling", "fit", "--config", cfg]), 0);
    assert!(data_rows(&sim.join("fit_1/samples/beta.csv")).is_empty());
    assert_eq!(run(["wombling", "detect", "--config", cfg]), 1);
}

#[test]
fn detect_without_a_satisfying_threshold_selects_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "unstructured", 1);
    let cfg_path = sim.join("run_1.toml");
    shorten(&cfg_path, 40, 20);
    let cfg = cfg_path.to_str().unwrap();
    assert_eq!(run(["wombling", "fit", "--config", cfg]), 0);
    let labels = sim.join("fit_1/samples/labels.csv");
    let text = fs::read_to_string(&labels).unwrap();
    let flat: Vec<String> = text
        .lines()
        .enumerate()
        .map(|(k, l)| {
            if k < 2 {
                return l.to_string();
            }
            let cols: Vec<&str> = l.split(',').collect();
            let mut row = vec![cols[0].to_string(), cols[1].to_string()];
            row.extend(std::iter::repeat_n("1".to_string(), cols.len() - 2));
            row.join(",")
        })
        .collect();
    fs::write(&labels, flat.join("\n") + "\n").unwrap();
    assert_eq!(run(["wombling", "detect", "--config", cfg]), 0);
    let rows = data_rows(&sim.join("fit_1/boundaries.csv"));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|r| r[5] == "0" && r[6] == "0"));
}

#[test]
fn stale_fit_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "unstructured", 1);
    let cfg_path = sim.join("run_1.toml");
    shorten(&cfg_path, 40, 20);
    let cfg = cfg_path.to_str().unwrap();
    assert_eq!(run(["wombling", "fit", "--config", cfg]), 0);
    let counts = sim.join("counts_1.csv");
    let text = fs::read_to_string(&counts).unwrap();
    fs::write(&counts, text + "\n").unwrap();
    assert_eq!(run(["wombling", "detect", "--config", cfg]), 1);
}

#[test]
fn schema_violations_fail_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let sim = simulate(dir.path(), "unstructured", 1);
    let cfg_path = sim.join("run_1.toml");
    let text = fs::read_to_string(&cfg_path).unwrap();
    fs::write(&cfg_path, text.replace("zeta = 0.05", "zeta = 2.0")).unwrap();
    assert_eq!(run(["wombling", "validate", "--config", cfg_path.to_str().unwrap()]), 1);
    assert_eq!(run(["wombling", "fit", "--config", cfg_path.to_str().unwrap(), "--bogus"]), 2);
}
