use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported AR order {0} (only 1 and 2 are supported)")]
    Order(usize),

    #[error("value outside its domain: {0}")]
    Domain(String),

    #[error("singular parameter transform: {0}")]
    Singularity(String),

    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    #[error("optimizer did not converge after {iterations} iterations (objective {objective:.6e}, gradient norm {grad_norm:.3e})")]
    Convergence {
        best: Vec<f64>,
        objective: f64,
        grad_norm: f64,
        iterations: usize,
    },

    #[error("grid cell {cell} failed: {failures} of {replicates} replicates needed resimulation")]
    CellFailure {
        cell: usize,
        failures: usize,
        replicates: usize,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("rank-deficient design matrix ({rows} rows, {cols} columns)")]
    RankDeficient { rows: usize, cols: usize },

    #[error("correction map is not strictly increasing near {at}")]
    NotMonotone { at: f64 },

    #[error("order/method/n mismatch: {0}")]
    Mismatch(String),

    #[error("table format version {found} is not supported (expected {expected})")]
    TableVersion { found: u32, expected: u32 },

    #[error("table checksum mismatch (stored {stored}, computed {computed})")]
    Checksum { stored: String, computed: String },

    #[error("table file is truncated: {0}")]
    Truncated(String),

    #[error("malformed table at line {line}: {msg}")]
    TableParse { line: usize, msg: String },

    #[error("calibration table not found: {}", .0.display())]
    MissingTable(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
