//! Accelerated UMAP via spectrum-preserving dataset coarsening.
//!
//! The pipeline compresses a dataset before embedding it: build a weighted
//! k-NN graph, smooth random test vectors with Gauss-Seidel sweeps on the
//! graph Laplacian, greedily aggregate spectrally correlated points into
//! pseudo-samples, then run UMAP on the much smaller compressed set.
//!
//! Modules follow the pipeline stages:
//!
//! - [`dataset`]: CSV I/O and synthetic generators.
//! - [`knn_graph`]: exact k-NN graph construction and the graph Laplacian.
//! - [`spectral`]: spectral feature vectors (exact or smoothed) and the
//!   pairwise spectral affinity.
//! - [`coarsen`]: affinity-driven aggregation into pseudo-samples, iterated
//!   to a requested compression ratio.
//! - [`umap`]: self-contained UMAP (fuzzy simplicial set + SGD optimizer).
//! - [`metrics`]: embedding fidelity and compression quality measures.
//! - [`plot`]: static SVG scatter rendering.
//! - [`cli`]: the `sumap` command-line interface.

use std::path::PathBuf;

pub mod cli;
pub mod coarsen;
pub mod dataset;
mod eigen;
pub mod knn_graph;
pub mod metrics;
pub mod plot;
pub mod spectral;
pub mod umap;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("empty input: {path}")]
    EmptyInput { path: PathBuf },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
