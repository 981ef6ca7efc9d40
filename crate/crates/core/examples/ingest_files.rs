//! Reads a run configuration with counts, strata-based expected counts and
//! an extra covariate, then checks it the way `wombling validate` does.

use std::fs;

use areal_wombling::config::RunConfig;
use areal_wombling::io::ingest;

const CONFIG: &str = r#"
schema_version = 1
variant = "undirected"
seed = 1
output_dir = "out"

[data]
edges = "edges.csv"
counts = "counts.csv"
strata = "strata.csv"
covariates = "covariates.csv"
dissimilarity = ["z.csv"]
"#;

fn main() -> areal_wombling::Result<()> {
    let dir = std::env::temp_dir().join("wombling-ingest");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("edges.csv"), "region_i,region_j\n1,2\n2,3\n3,4\n1,3\n")?;
    fs::write(dir.join("z.csv"), "region_i,region_j,z1\n1,2,0.2\n2,3,1.4\n3,4,0.7\n1,3,0.9\n")?;
    let mut counts = String::from("region_id,disease_id,count\n");
    let mut strata = String::from("region_id,disease_id,group_id,cases,population\n");
    let mut covariates = String::from("region_id,disease_id,name,value\n");
    for d in 1..=2 {
        for i in 1..=4 {
            let (young, old) = (i * d, 2 * i + d);
            counts.push_str(&format!("{i},{d},{}\n", young + old));
            strata.push_str(&format!("{i},{d},1,{young},{}\n{i},{d},2,{old},{}\n", 100 * i, 50 + 10 * i));
            covariates.push_str(&format!("{i},{d},smoking,{:.2}\n", 0.1 * i as f64 - 0.25));
        }
    }
    fs::write(dir.join("counts.csv"), counts)?;
    fs::write(dir.join("strata.csv"), strata)?;
    fs::write(dir.join("covariates.csv"), covariates)?;

    let cfg = RunConfig::from_toml(CONFIG, &dir)?;
    let got = ingest(&cfg)?;
    println!("{} regions, {} diseases, design {:?}", got.data.n, got.data.q, got.data.covariate_names);
    println!("expected counts {:.2?}", got.data.expected);
    println!("notes {:?}", got.report.notes);
    Ok(())
}
