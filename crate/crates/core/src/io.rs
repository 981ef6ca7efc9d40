//! CSV and JSON ingestion and output. Region and disease IDs are 1-based in
//! every file and 0-based in memory. Lines starting with `#` are comments;
//! every written file opens with a `# manifest: <hash>` line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary::{AdjacencyReport, BoundaryProbe, FdrCurve, ProbeKind};
use crate::config::RunConfig;
use crate::dagar::EdgeDissimilarity;
use crate::data::{expected_counts, ObservedData, StratumRow};
use crate::error::{Error, Result};
use crate::graph::{RegionGraph, Variant};
use crate::sampler::{AcceptanceStats, PosteriorSamples, ProposalRecord, StepSizes};
use crate::simgen::SimOutput;

fn parse_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), message: message.into() }
}

/// Rows of a headed CSV file as trimmed strings.
fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| parse_err(path, e.to_string()))?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()).map_err(|e| parse_err(path, e.to_string())))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok((header, rows))
}

fn field<'a>(path: &Path, row: &'a [String], k: usize, line: usize) -> Result<&'a str> {
    row.get(k).map(String::as_str).ok_or_else(|| parse_err(path, format!("row {line}: missing column {}", k + 1)))
}

fn id(path: &Path, row: &[String], k: usize, line: usize, what: &str) -> Result<usize> {
    let s = field(path, row, k, line)?;
    let v: usize = s.parse().map_err(|_| parse_err(path, format!("row {line}: bad {what} `{s}`")))?;
    v.checked_sub(1).ok_or_else(|| parse_err(path, format!("row {line}: {what} IDs start at 1")))
}

fn real(path: &Path, row: &[String], k: usize, line: usize) -> Result<f64> {
    let s = field(path, row, k, line)?;
    let v: f64 = s.parse().map_err(|_| parse_err(path, format!("row {line}: bad number `{s}`")))?;
    if !v.is_finite() {
        return Err(parse_err(path, format!("row {line}: non-finite value")));
    }
    Ok(v)
}

/// `region_i,region_j` pairs.
pub fn read_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let (_, rows) = read_rows(path)?;
    rows.iter()
        .enumerate()
        .map(|(l, r)| Ok((id(path, r, 0, l + 1, "region")?, id(path, r, 1, l + 1, "region")?)))
        .collect()
}

/// `region_id,x,y`, one row per region.
pub fn read_centroids(path: &Path, n: usize) -> Result<Vec<[f64; 2]>> {
    let (_, rows) = read_rows(path)?;
    let mut out = vec![None; n];
    for (l, r) in rows.iter().enumerate() {
        let i = id(path, r, 0, l + 1, "region")?;
        if i >= n {
            return Err(Error::RegionOutOfRange { index: i + 1, n });
        }
        out[i] = Some([real(path, r, 1, l + 1)?, real(path, r, 2, l + 1)?]);
    }
    out.into_iter()
        .enumerate()
        .map(|(i, c)| c.ok_or_else(|| parse_err(path, format!("no centroid for region {}", i + 1))))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountRow {
    pub region: usize,
    pub disease: usize,
    pub count: u64,
    pub expected: Option<f64>,
}

/// `region_id,disease_id,count[,expected]`.
pub fn read_counts(path: &Path) -> Result<Vec<CountRow>> {
    let (_, rows) = read_rows(path)?;
    rows.iter()
        .enumerate()
        .map(|(l, r)| {
            let line = l + 1;
            let region = id(path, r, 0, line, "region")?;
            let disease = id(path, r, 1, line, "disease")?;
            let raw = field(path, r, 2, line)?;
            let count: i64 = raw.parse().map_err(|_| parse_err(path, format!("row {line}: bad count `{raw}`")))?;
            if count < 0 {
                return Err(parse_err(
                    path,
                    format!("negative count {count} for region {} disease {}", region + 1, disease + 1),
                ));
            }
            let expected = match r.get(3).filter(|s| !s.is_empty()) {
                Some(_) => Some(real(path, r, 3, line)?),
                None => None,
            };
            Ok(CountRow { region, disease, count: count as u64, expected })
        })
        .collect()
}

/// `region_id,disease_id,group_id,cases,population`.
pub fn read_strata(path: &Path) -> Result<Vec<StratumRow>> {
    let (_, rows) = read_rows(path)?;
    rows.iter()
        .enumerate()
        .map(|(l, r)| {
            let line = l + 1;
            let raw = field(path, r, 3, line)?;
            let cases: u64 = raw.parse().map_err(|_| parse_err(path, format!("row {line}: bad case count `{raw}`")))?;
            Ok(StratumRow {
                region: id(path, r, 0, line, "region")?,
                disease: id(path, r, 1, line, "disease")?,
                group: id(path, r, 2, line, "group")?,
                cases,
                population: real(path, r, 4, line)?,
            })
        })
        .collect()
}

/// `region_id,disease_id,name,value`, as a disease-major design table with
/// columns in order of first appearance.
pub fn read_covariates(path: &Path, n: usize, q: usize) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let (_, rows) = read_rows(path)?;
    let mut names: Vec<String> = Vec::new();
    let mut values: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (l, r) in rows.iter().enumerate() {
        let line = l + 1;
        let region = id(path, r, 0, line, "region")?;
        let disease = id(path, r, 1, line, "disease")?;
        if region >= n {
            return Err(Error::RegionOutOfRange { index: region + 1, n });
        }
        if disease >= q {
            return Err(Error::DiseaseOutOfRange { index: disease + 1, q });
        }
        let name = field(path, r, 2, line)?.to_string();
        let col = match names.iter().position(|x| *x == name) {
            Some(c) => c,
            None => {
                names.push(name.clone());
                names.len() - 1
            }
        };
        if values.insert((disease * n + region, col), real(path, r, 3, line)?).is_some() {
            return Err(parse_err(
                path,
                format!("duplicate covariate `{name}` for region {} disease {}", region + 1, disease + 1),
            ));
        }
    }
    let table = (0..n * q)
        .map(|c| {
            (0..names.len())
                .map(|k| {
                    values.get(&(c, k)).copied().ok_or_else(|| {
                        parse_err(
                            path,
                            format!("covariate `{}` missing for region {} disease {}", names[k], c % n + 1, c / n + 1),
                        )
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((names, table))
}

/// `region_i,region_j,z_1[,z_2...]`; pairs may be listed in either order.
pub fn read_dissimilarity(path: &Path, graph: &RegionGraph) -> Result<EdgeDissimilarity> {
    let (header, rows) = read_rows(path)?;
    let dim = header.len().checked_sub(2).filter(|&d| d > 0).ok_or_else(|| parse_err(path, "no dissimilarity columns"))?;
    let mut pairs = BTreeMap::new();
    for (l, r) in rows.iter().enumerate() {
        let line = l + 1;
        let i = id(path, r, 0, line, "region")?;
        let j = id(path, r, 1, line, "region")?;
        let z = (0..dim).map(|k| real(path, r, 2 + k, line)).collect::<Result<Vec<f64>>>()?;
        pairs.insert((i, j), z);
    }
    EdgeDissimilarity::from_pairs(graph, dim, &pairs).map_err(|e| match e {
        Error::MissingDissimilarity(i, j) => {
            parse_err(path, format!("missing dissimilarity row for regions ({}, {})", i + 1, j + 1))
        }
        other => other,
    })
}

/// What ingestion did to the raw rows.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub regions: usize,
    pub diseases: usize,
    /// Cells without a count row, left out of the likelihood.
    pub unobserved_cells: Vec<(usize, usize)>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub graph: RegionGraph,
    pub data: ObservedData,
    pub report: IngestReport,
}

/// Reads and validates every input named in the configuration.
pub fn ingest(cfg: &RunConfig) -> Result<Ingested> {
    let paths = &cfg.data;
    let counts_path = cfg.resolve(&paths.counts);
    let counts = read_counts(&counts_path)?;
    let edges = read_edges(&cfg.resolve(&paths.edges))?;
    let n = counts
        .iter()
        .map(|r| r.region + 1)
        .chain(edges.iter().map(|&(i, j)| i.max(j) + 1))
        .max()
        .ok_or_else(|| parse_err(&counts_path, "no rows"))?;
    let q = counts.iter().map(|r| r.disease + 1).max().unwrap_or(0);
    let mut graph = RegionGraph::new(n, edges)?;
    if let Some(c) = &paths.centroids {
        graph = graph.with_centroids(read_centroids(&cfg.resolve(c), n)?)?;
    }

    let mut report = IngestReport { regions: n, diseases: q, ..IngestReport::default() };
    let mut count = vec![0u64; n * q];
    let mut seen = vec![false; n * q];
    let mut given_expected = vec![None; n * q];
    for r in &counts {
        let c = r.disease * n + r.region;
        if seen[c] {
            return Err(parse_err(
                &counts_path,
                format!("duplicate cell (region {}, disease {})", r.region + 1, r.disease + 1),
            ));
        }
        seen[c] = true;
        count[c] = r.count;
        given_expected[c] = r.expected;
    }
    let expected: Vec<f64> = if seen.iter().zip(&given_expected).all(|(s, e)| !s || e.is_some()) {
        given_expected.iter().map(|e| e.unwrap_or(1.0)).collect()
    } else if let Some(s) = &paths.strata {
        report.notes.push("expected counts computed from strata".into());
        expected_counts(n, q, &read_strata(&cfg.resolve(s))?)?
    } else {
        return Err(parse_err(&counts_path, "expected counts missing and no strata file given"));
    };
    let mut observed = seen.clone();
    for c in 0..n * q {
        if !seen[c] {
            report.unobserved_cells.push((c % n + 1, c / n + 1));
        } else if !(expected[c] > 0.0) {
            observed[c] = false;
            report.notes.push(format!(
                "region {} disease {} has zero expected count and is left out",
                c % n + 1,
                c / n + 1
            ));
        }
    }

    let dissimilarity = match paths.dissimilarity.as_slice() {
        [one] => vec![read_dissimilarity(&cfg.resolve(one), &graph)?; q],
        many if many.len() == q => {
            many.iter().map(|p| read_dissimilarity(&cfg.resolve(p), &graph)).collect::<Result<Vec<_>>>()?
        }
        many => {
            return Err(Error::Config(format!("{} dissimilarity files for {q} diseases", many.len())));
        }
    };
    let expected = expected.iter().zip(&observed).map(|(&e, &o)| if o { e } else { e.max(1.0) }).collect();
    let mut data = ObservedData::new(n, q, count, expected, dissimilarity)?;
    data.observed = observed;
    if let Some(p) = &paths.covariates {
        let (names, table) = read_covariates(&cfg.resolve(p), n, q)?;
        data = data.with_covariates(names, table)?;
    }
    Ok(Ingested { graph, data, report })
}

/// SHA-256 of a byte string, hex encoded.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `contents` after the manifest comment line.
fn write_with_manifest(path: &Path, manifest: &str, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "# manifest: {manifest}")?;
    f.write_all(contents)?;
    Ok(())
}

fn write_table(path: &Path, manifest: &str, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_with_manifest(path, manifest, &bytes)
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// JSON with a top-level `manifest` field.
pub fn write_json<T: Serialize>(path: &Path, manifest: &str, value: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        manifest: &'a str,
        #[serde(flatten)]
        value: &'a T,
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut text = serde_json::to_string_pretty(&Wrapped { manifest, value })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn write_edges(path: &Path, manifest: &str, graph: &RegionGraph) -> Result<()> {
    let rows = graph.edges().iter().map(|&(i, j)| vec![(i + 1).to_string(), (j + 1).to_string()]);
    write_table(path, manifest, &strings(&["region_i", "region_j"]), rows)
}

pub fn write_counts(path: &Path, manifest: &str, data: &ObservedData) -> Result<()> {
    let rows = (0..data.cells()).filter(|&c| data.observed[c]).map(|c| {
        vec![
            (c % data.n + 1).to_string(),
            (c / data.n + 1).to_string(),
            data.counts[c].to_string(),
            data.expected[c].to_string(),
        ]
    });
    write_table(path, manifest, &strings(&["region_id", "disease_id", "count", "expected"]), rows)
}

pub fn write_dissimilarity(path: &Path, manifest: &str, z: &EdgeDissimilarity) -> Result<()> {
    let mut header = strings(&["region_i", "region_j"]);
    header.extend((0..z.dim()).map(|r| format!("z{}", r + 1)));
    let rows = z.edges().iter().enumerate().map(|(k, e)| {
        let mut row = vec![(e.child + 1).to_string(), (e.parent + 1).to_string()];
        row.extend(z.get(k).iter().map(f64::to_string));
        row
    });
    write_table(path, manifest, &header, rows)
}

/// Files written by [`write_sim_output`], relative to its directory.
pub const SIM_EDGES: &str = "edges.csv";
pub const SIM_CENTROIDS: &str = "centroids.csv";
pub const SIM_DISSIMILARITY: &str = "dissimilarity.csv";

pub fn sim_counts_file(r: usize) -> String {
    format!("counts_{}.csv", r + 1)
}

/// Writes a simulated map: inputs for fitting (edges, centroids,
/// dissimilarity, one counts file per replicate), the truth, and one
/// ready-to-run config per replicate.
pub fn write_sim_output(dir: &Path, out: &SimOutput, manifest: &str) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    write_edges(&dir.join(SIM_EDGES), manifest, &out.graph)?;
    let centroids = out.graph.centroids().expect("hex lattice has centroids");
    write_table(
        &dir.join(SIM_CENTROIDS),
        manifest,
        &strings(&["region_id", "x", "y"]),
        centroids.iter().enumerate().map(|(i, c)| vec![(i + 1).to_string(), c[0].to_string(), c[1].to_string()]),
    )?;
    write_dissimilarity(&dir.join(SIM_DISSIMILARITY), manifest, &out.dissimilarity)?;
    write_table(
        &dir.join("covariate.csv"),
        manifest,
        &strings(&["region_id", "value"]),
        out.covariate.iter().enumerate().map(|(i, x)| vec![(i + 1).to_string(), x.to_string()]),
    )?;
    let n = out.n();
    write_table(
        &dir.join("truth.csv"),
        manifest,
        &strings(&["region_id", "disease_id", "label", "phi", "gamma"]),
        (0..n * out.q()).map(|c| {
            vec![
                (c % n + 1).to_string(),
                (c / n + 1).to_string(),
                (out.labels[c] + 1).to_string(),
                out.phi[c].to_string(),
                out.gamma[c].to_string(),
            ]
        }),
    )?;
    let mut flags = Vec::new();
    for kind in ProbeKind::all(out.q()) {
        for (f, &(i, j)) in out.true_boundaries(kind)?.iter().zip(out.graph.edges()) {
            flags.push(vec![kind.to_string(), (i + 1).to_string(), (j + 1).to_string(), (*f as u8).to_string()]);
        }
    }
    write_table(
        &dir.join("true_boundaries.csv"),
        manifest,
        &strings(&["probe", "edge_i", "edge_j", "flag"]),
        flags.into_iter(),
    )?;
    let mut adj = Vec::new();
    for (d, a) in out.adjacency.iter().enumerate() {
        for (e, &keep) in out.dissimilarity.edges().iter().zip(a.mask()) {
            adj.push(vec![
                (e.child.min(e.parent) + 1).to_string(),
                (e.child.max(e.parent) + 1).to_string(),
                (d + 1).to_string(),
                (keep as u8).to_string(),
            ]);
        }
    }
    write_table(
        &dir.join("true_adjacency.csv"),
        manifest,
        &strings(&["edge_i", "edge_j", "disease_id", "w"]),
        adj.into_iter(),
    )?;
    write_json(&dir.join("scenario.json"), manifest, &out.scenario)?;

    let mut configs = Vec::new();
    for r in 0..out.counts.len() {
        let data = out.observed(r)?;
        let counts_file = sim_counts_file(r);
        write_counts(&dir.join(&counts_file), manifest, &data)?;
        let cfg = sim_run_config(out, r, counts_file);
        let path = dir.join(format!("run_{}.toml", r + 1));
        fs::write(&path, cfg.to_toml()?)?;
        configs.push(path);
    }
    Ok(configs)
}

fn sim_run_config(out: &SimOutput, r: usize, counts: String) -> RunConfig {
    use crate::config::{ChainSection, DataPaths, PriorOverrides, SCHEMA_VERSION};
    RunConfig {
        schema_version: SCHEMA_VERSION,
        variant: out.scenario.spec.variant,
        seed: out.scenario.seed,
        output_dir: PathBuf::from(format!("fit_{}", r + 1)),
        zeta: 0.05,
        probes: Vec::new(),
        adjacency_cutoff: 0.5,
        correlogram_bins: None,
        data: DataPaths {
            edges: SIM_EDGES.into(),
            counts: counts.into(),
            strata: None,
            covariates: None,
            dissimilarity: vec![SIM_DISSIMILARITY.into()],
            centroids: Some(SIM_CENTROIDS.into()),
        },
        disease_graph: disease_graph_config(&out.scenario.spec),
        chain: ChainSection::default(),
        priors: PriorOverrides { k: Some(out.scenario.dp.k), ..PriorOverrides::default() },
        base_dir: PathBuf::new(),
    }
}

fn disease_graph_config(spec: &crate::graph::DiseaseGraphSpec) -> Option<crate::config::DiseaseGraphConfig> {
    let links = match spec.variant {
        Variant::Unstructured => return None,
        Variant::Directed => spec.parent_links().iter().map(|&(d, h)| [d + 1, h + 1]).collect(),
        Variant::Undirected => {
            let mut out = Vec::new();
            for a in 0..spec.q {
                for b in a + 1..spec.q {
                    if spec.adjacency[a][b] {
                        out.push([a + 1, b + 1]);
                    }
                }
            }
            out
        }
    };
    Some(crate::config::DiseaseGraphConfig { links })
}

/// Sample store file names, one per parameter block.
const BLOCKS: [&str; 10] = ["beta", "theta", "tau_s", "v", "gamma", "rho", "eta", "cross", "labels", "step_sizes"];

fn block_rows(s: &PosteriorSamples, block: &str, t: usize) -> Vec<String> {
    let f = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>();
    match block {
        "beta" => f(&s.beta[t]),
        "theta" => f(&s.theta[t]),
        "tau_s" => vec![s.tau_s[t].to_string()],
        "v" => f(&s.v[t]),
        "gamma" => f(&s.gamma[t]),
        "rho" => f(&s.rho[t]),
        "eta" => f(&s.eta[t]),
        "cross" => f(&s.cross[t]),
        "labels" => s.labels[t].iter().map(|u| (u + 1).to_string()).collect(),
        "step_sizes" => {
            let st = &s.step_sizes[t];
            f(&[st.beta, st.theta, st.gamma, st.v, st.rho, st.eta, st.a_diag, st.a_offdiag, st.rho_dis])
        }
        _ => unreachable!("unknown block"),
    }
}

fn block_header(s: &PosteriorSamples, block: &str, cross_names: &[String]) -> Vec<String> {
    let width = match block {
        "tau_s" => 1,
        "step_sizes" => 9,
        _ if s.is_empty() => 0,
        _ => block_rows(s, block, 0).len(),
    };
    let names: Vec<String> = match block {
        "tau_s" => vec!["tau_s".into()],
        "cross" => cross_names.to_vec(),
        "step_sizes" => strings(&["beta", "theta", "gamma", "v", "rho", "eta", "a_diag", "a_offdiag", "rho_dis"]),
        "gamma" | "labels" => (0..width).map(|c| format!("{block}_{}_{}", c % s.n + 1, c / s.n + 1)).collect(),
        _ => (0..width).map(|k| format!("{block}_{}", k + 1)).collect(),
    };
    let mut header = strings(&["chain", "draw"]);
    header.extend(names);
    header
}

/// Columnar sample store: one CSV per block with `chain,draw` keys.
pub fn write_samples(dir: &Path, manifest: &str, chains: &[PosteriorSamples], cross_names: &[String]) -> Result<()> {
    let first = chains.first().ok_or_else(|| Error::InvalidInput("no chains to store".into()))?;
    for block in BLOCKS {
        let header = block_header(first, block, cross_names);
        let rows = chains.iter().enumerate().flat_map(|(c, s)| {
            (0..s.len()).map(move |t| {
                let mut row = vec![(c + 1).to_string(), (t + 1).to_string()];
                row.extend(block_rows(s, block, t));
                row
            })
        });
        write_table(&dir.join(format!("{block}.csv")), manifest, &header, rows)?;
    }
    let proposals = chains.iter().enumerate().flat_map(|(c, s)| {
        s.proposals.iter().map(move |p| {
            let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
            vec![
                (c + 1).to_string(),
                p.iteration.to_string(),
                p.block.clone(),
                p.log_ratio.to_string(),
                (p.accepted as u8).to_string(),
                join(&p.current),
                join(&p.proposed),
            ]
        })
    });
    if chains.iter().any(|s| !s.proposals.is_empty()) {
        write_table(
            &dir.join("proposals.csv"),
            manifest,
            &strings(&["chain", "iteration", "block", "log_ratio", "accepted", "current", "proposed"]),
            proposals,
        )?;
    }
    Ok(())
}

/// Reads a sample store written by [`write_samples`]. Acceptance counts
/// come from the fit manifest and are not restored here.
pub fn read_samples(dir: &Path, n: usize, q: usize, variant: Variant, eta_dims: Vec<usize>) -> Result<Vec<PosteriorSamples>> {
    let mut chains: Vec<PosteriorSamples> = Vec::new();
    for block in BLOCKS {
        let path = dir.join(format!("{block}.csv"));
        let (_, rows) = read_rows(&path)?;
        for (l, r) in rows.iter().enumerate() {
            let line = l + 1;
            let c = id(&path, r, 0, line, "chain")?;
            while chains.len() <= c {
                chains.push(PosteriorSamples::empty(n, q, variant, eta_dims.clone()));
            }
            let s = &mut chains[c];
            let values = || (2..r.len()).map(|k| real(&path, r, k, line)).collect::<Result<Vec<f64>>>();
            match block {
                "beta" => s.beta.push(values()?),
                "theta" => s.theta.push(values()?),
                "tau_s" => s.tau_s.push(real(&path, r, 2, line)?),
                "v" => s.v.push(values()?),
                "gamma" => s.gamma.push(values()?),
                "rho" => s.rho.push(values()?),
                "eta" => s.eta.push(values()?),
                "cross" => s.cross.push(values()?),
                "labels" => s.labels.push((2..r.len()).map(|k| id(&path, r, k, line, "label")).collect::<Result<_>>()?),
                "step_sizes" => {
                    let v = values()?;
                    if v.len() != 9 {
                        return Err(parse_err(&path, format!("row {line}: expected 9 step sizes")));
                    }
                    s.step_sizes.push(StepSizes {
                        beta: v[0],
                        theta: v[1],
                        gamma: v[2],
                        v: v[3],
                        rho: v[4],
                        eta: v[5],
                        a_diag: v[6],
                        a_offdiag: v[7],
                        rho_dis: v[8],
                    });
                }
                _ => unreachable!("unknown block"),
            }
        }
    }
    let proposals = dir.join("proposals.csv");
    if proposals.exists() {
        let (_, rows) = read_rows(&proposals)?;
        for (l, r) in rows.iter().enumerate() {
            let line = l + 1;
            let c = id(&proposals, r, 0, line, "chain")?;
            let split = |k: usize| -> Result<Vec<f64>> {
                let s = field(&proposals, r, k, line)?;
                if s.is_empty() {
                    return Ok(Vec::new());
                }
                s.split(';').map(|x| x.parse().map_err(|_| parse_err(&proposals, format!("row {line}: bad number")))).collect()
            };
            let record = ProposalRecord {
                iteration: field(&proposals, r, 1, line)?.parse().map_err(|_| parse_err(&proposals, "bad iteration"))?,
                block: field(&proposals, r, 2, line)?.to_string(),
                log_ratio: field(&proposals, r, 3, line)?.parse().map_err(|_| parse_err(&proposals, "bad ratio"))?,
                accepted: field(&proposals, r, 4, line)? == "1",
                current: split(5)?,
                proposed: split(6)?,
            };
            if let Some(s) = chains.get_mut(c) {
                s.proposals.push(record);
            }
        }
    }
    for s in &chains {
        let len = s.len();
        if [s.beta.len(), s.theta.len(), s.v.len(), s.gamma.len(), s.rho.len(), s.eta.len(), s.cross.len(), s.labels.len()]
            .iter()
            .any(|&l| l != len)
        {
            return Err(parse_err(dir, "sample store blocks disagree on the number of draws"));
        }
    }
    Ok(chains)
}

/// Provenance of a fit, written as `manifest.json` next to the samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub manifest_hash: String,
    pub variant: Variant,
    pub seed: u64,
    pub regions: usize,
    pub diseases: usize,
    pub eta_dims: Vec<usize>,
    pub chains: usize,
    pub draws_per_chain: Vec<usize>,
    pub input_hashes: BTreeMap<String, String>,
    pub config: RunConfig,
    pub ingest: IngestReport,
    pub acceptance: Vec<BTreeMap<String, AcceptanceStats>>,
    pub final_step_sizes: Vec<Option<StepSizes>>,
}

pub fn read_manifest(path: &Path) -> Result<FitManifest> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| parse_err(path, e.to_string()))
}

/// Hash over the configuration and the contents of every input file.
pub fn run_manifest_hash(cfg: &RunConfig) -> Result<(String, BTreeMap<String, String>)> {
    let d = &cfg.data;
    let mut files: Vec<&PathBuf> = vec![&d.edges, &d.counts];
    files.extend(d.strata.iter());
    files.extend(d.covariates.iter());
    files.extend(d.dissimilarity.iter());
    files.extend(d.centroids.iter());
    let mut hashes = BTreeMap::new();
    for f in files {
        let bytes = fs::read(cfg.resolve(f))?;
        hashes.insert(f.display().to_string(), sha256_hex(&bytes));
    }
    let canonical = serde_json::to_string(&(cfg, &hashes))?;
    Ok((sha256_hex(canonical.as_bytes()), hashes))
}

/// `probe,edge_i,edge_j,disease_d,disease_dprime,v,selected`.
pub fn write_boundaries(path: &Path, manifest: &str, results: &[(BoundaryProbe, FdrCurve)]) -> Result<()> {
    let rows = results.iter().flat_map(|(p, c)| {
        let (d, e) = p.kind.diseases();
        p.edges.iter().zip(&p.v).zip(&c.selected).map(move |((&(i, j), v), s)| {
            vec![
                p.kind.to_string(),
                (i + 1).to_string(),
                (j + 1).to_string(),
                (d + 1).to_string(),
                (e + 1).to_string(),
                v.to_string(),
                (*s as u8).to_string(),
            ]
        })
    });
    let header = strings(&["probe", "edge_i", "edge_j", "disease_d", "disease_dprime", "v", "selected"]);
    write_table(path, manifest, &header, rows)
}

/// `probe,t,fdr_hat,fnr_hat,n_selected`; undefined estimates are blank.
pub fn write_fdr_curves(path: &Path, manifest: &str, results: &[(BoundaryProbe, FdrCurve)]) -> Result<()> {
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    let rows = results.iter().flat_map(|(p, c)| {
        c.points.iter().map(move |pt| {
            vec![p.kind.to_string(), pt.t.to_string(), opt(pt.fdr_hat), opt(pt.fnr_hat), pt.n_selected.to_string()]
        })
    });
    write_table(path, manifest, &strings(&["probe", "t", "fdr_hat", "fnr_hat", "n_selected"]), rows)
}

/// `edge_i,edge_j,disease_id,p_nonadjacent,detected`.
pub fn write_adjacency(path: &Path, manifest: &str, report: &AdjacencyReport) -> Result<()> {
    let rows = report.prob.iter().enumerate().flat_map(|(d, probs)| {
        report.edges.iter().zip(probs).map(move |(&(i, j), p)| {
            vec![
                (i + 1).to_string(),
                (j + 1).to_string(),
                (d + 1).to_string(),
                p.to_string(),
                ((*p > report.cutoff) as u8).to_string(),
            ]
        })
    });
    write_table(path, manifest, &strings(&["edge_i", "edge_j", "disease_id", "p_nonadjacent", "detected"]), rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::{generate, SimScenario};

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    fn minimal(dir: &Path, counts: &str) -> RunConfig {
        write(dir, "edges.csv", "region_i,region_j\n1,2\n2,3\n");
        write(dir, "z.csv", "region_i,region_j,z1\n1,2,0.5\n3,2,1.5\n");
        write(dir, "counts.csv", counts);
        let text = "schema_version = 1\nvariant = \"unstructured\"\nseed = 1\noutput_dir = \"out\"\n\
                    [data]\nedges = \"edges.csv\"\ncounts = \"counts.csv\"\ndissimilarity = [\"z.csv\"]\n";
        RunConfig::from_toml(text, dir).unwrap()
    }

    #[test]
    fn ingests_small_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal(dir.path(), "region_id,disease_id,count,expected\n1,1,3,2.0\n2,1,0,1.5\n3,1,7,4\n");
        let got = ingest(&cfg).unwrap();
        assert_eq!((got.data.n, got.data.q), (3, 1));
        assert_eq!(got.data.counts, vec![3, 0, 7]);
        assert_eq!(got.data.dissimilarity[0].column(0), vec![0.5, 1.5]);
    }

    #[test]
    fn duplicate_cell_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal(dir.path(), "region_id,disease_id,count,expected\n1,1,3,2\n1,1,4,2\n2,1,0,1\n3,1,1,1\n");
        let msg = ingest(&cfg).unwrap_err().to_string();
        assert!(msg.contains("duplicate cell (region 1, disease 1)"), "{msg}");
    }

    #[test]
    fn negative_count_and_unknown_region_fail() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal(dir.path(), "region_id,disease_id,count,expected\n1,1,-3,2\n2,1,0,1\n3,1,1,1\n");
        assert!(ingest(&cfg).unwrap_err().to_string().contains("negative count"));
        let cfg = minimal(dir.path(), "region_id,disease_id,count,expected\n1,1,3,2\n2,1,0,1\n3,1,1,1\n");
        write(dir.path(), "edges.csv", "region_i,region_j\n1,2\n2,0\n");
        assert!(ingest(&cfg).is_err());
    }

    #[test]
    fn missing_dissimilarity_pair_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = minimal(dir.path(), "region_id,disease_id,count,expected\n1,1,3,2\n2,1,0,1\n3,1,1,1\n");
        write(dir.path(), "z.csv", "region_i,region_j,z1\n1,2,0.5\n");
        let msg = ingest(&cfg).unwrap_err().to_string();
        assert!(msg.contains("missing dissimilarity row for regions (3, 2)"), "{msg}");
    }

    #[test]
    fn strata_supply_expected_counts() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = minimal(dir.path(), "region_id,disease_id,count\n1,1,10\n2,1,30\n3,1,0\n");
        write(
            dir.path(),
            "strata.csv",
            "region_id,disease_id,group_id,cases,population\n1,1,1,10,100\n2,1,1,30,300\n3,1,1,0,100\n",
        );
        cfg.data.strata = Some("strata.csv".into());
        let got = ingest(&cfg).unwrap();
        assert_eq!(got.data.expected, vec![8.0, 24.0, 8.0]);
    }

    #[test]
    fn covariates_extend_the_design() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = minimal(dir.path(), "region_id,disease_id,count,expected\n1,1,3,2\n2,1,0,1\n3,1,1,1\n");
        write(dir.path(), "x.csv", "region_id,disease_id,name,value\n1,1,smoke,0.1\n2,1,smoke,0.2\n3,1,smoke,-0.3\n");
        cfg.data.covariates = Some("x.csv".into());
        let got = ingest(&cfg).unwrap();
        assert_eq!(got.data.covariate_names, vec!["intercept", "smoke"]);
        assert_eq!(got.data.design[2], vec![1.0, -0.3]);
        write(dir.path(), "x.csv", "region_id,disease_id,name,value\n1,1,smoke,0.1\n");
        assert!(ingest(&cfg).unwrap_err().to_string().contains("missing for region 2"));
    }

    #[test]
    fn simulation_round_trip_is_exact() {
        let mut s = SimScenario::small(Variant::Directed, 15, 5);
        s.replicates = 2;
        let out = generate(&s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let configs = write_sim_output(dir.path(), &out, "abc").unwrap();
        for (r, path) in configs.iter().enumerate() {
            let cfg = RunConfig::load(path).unwrap();
            let got = ingest(&cfg).unwrap();
            let want = out.observed(r).unwrap();
            assert_eq!(got.data, want);
            assert_eq!(got.graph, out.graph);
            assert_eq!(cfg.disease_graph(4).unwrap(), out.scenario.spec);
        }
    }

    #[test]
    fn sample_store_round_trip_is_exact() {
        use crate::sampler::{run_chains, ChainConfig, Model};
        let out = generate(&SimScenario::small(Variant::Undirected, 12, 4)).unwrap();
        let model = Model::new(out.graph.clone(), out.scenario.spec.clone(), out.observed(0).unwrap()).unwrap();
        let cfg = ChainConfig { iterations: 30, burn_in: 10, thin: 2, record_proposals: true, ..ChainConfig::default() };
        let chains = run_chains(&model, &cfg, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_samples(dir.path(), "h", &chains, &["rho_dis".into()]).unwrap();
        let back = read_samples(dir.path(), 12, 4, Variant::Undirected, vec![1; 4]).unwrap();
        for (a, b) in chains.iter().zip(&back) {
            let mut a = a.clone();
            a.acceptance.clear();
            assert_eq!(&a, b);
        }
        let first = fs::read_to_string(dir.path().join("beta.csv")).unwrap();
        assert!(first.starts_with("# manifest: h\n"));
    }
}
