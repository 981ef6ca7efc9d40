//! Difference-boundary detection on areal disease maps.
//!
//! Spatial effects for `q` diseases on `n` regions follow a Dirichlet
//! process whose latent Gaussian field uses DAGAR precisions with
//! covariate-thresholded adjacency, coupled across diseases through an
//! unstructured, directed, or undirected disease graph.

pub mod boundary;
pub mod cli;
pub mod config;
pub mod covariance;
pub mod data;
pub mod dagar;
pub mod diagnostics;
pub mod dp;
pub mod error;
pub mod graph;
pub mod io;
pub mod sampler;
pub mod simgen;
pub mod sparse;
pub mod stats;

pub use error::{Error, Result};
