use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("region index {index} out of range for {n} regions")]
    RegionOutOfRange { index: usize, n: usize },
    #[error("disease index {index} out of range for {q} diseases")]
    DiseaseOutOfRange { index: usize, q: usize },
    #[error("self-loop on region {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("invalid topological order: {0}")]
    InvalidOrder(String),
    #[error("region centroids are required")]
    MissingCentroids,
    #[error("distance bins must be strictly increasing and start above zero")]
    InvalidBins,
    #[error("disease graph: {0}")]
    DiseaseGraph(String),
    #[error("disease {0} has no neighbors in the disease graph")]
    IsolatedDisease(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("parameter `{name}` = {value} outside its support {support}")]
    OutOfSupport { name: &'static str, value: f64, support: String },
    #[error("missing dissimilarity for regions ({0}, {1})")]
    MissingDissimilarity(usize, usize),
    #[error("negative dissimilarity {value} for regions ({i}, {j})")]
    NegativeDissimilarity { i: usize, j: usize, value: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid stick fractions: {0}")]
    InvalidSticks(String),
    #[error("label {label} out of range for {k} atoms")]
    LabelOutOfRange { label: usize, k: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("no discoveries at threshold {0}")]
    NoDiscoveries(f64),
    #[error("every edge is selected at threshold {0}")]
    AllSelected(f64),
    #[error("{0}")]
    InvalidInput(String),
    #[error("zero variance in {0}")]
    ZeroVariance(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable short code used in machine-readable CLI errors.
    pub fn code(&self) -> &'static str {
        match self {
            Error::RegionOutOfRange { .. } | Error::DiseaseOutOfRange { .. } => "index_out_of_range",
            Error::SelfLoop(_) | Error::DuplicateEdge(..) => "invalid_edge",
            Error::InvalidOrder(_) => "invalid_order",
            Error::MissingCentroids | Error::InvalidBins => "invalid_correlogram",
            Error::DiseaseGraph(_) | Error::IsolatedDisease(_) => "invalid_disease_graph",
            Error::Dimension(_) => "dimension_mismatch",
            Error::OutOfSupport { .. } => "out_of_support",
            Error::MissingDissimilarity(..) | Error::NegativeDissimilarity { .. } => {
                "invalid_dissimilarity"
            }
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::InvalidSticks(_) | Error::LabelOutOfRange { .. } => "invalid_dp_state",
            Error::NonFinite(_) => "non_finite",
            Error::NoDiscoveries(_) | Error::AllSelected(_) => "degenerate_selection",
            Error::InvalidInput(_) | Error::ZeroVariance(_) => "invalid_input",
            Error::Config(_) => "config",
            Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
