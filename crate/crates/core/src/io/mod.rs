//! Files, processes and configuration.

mod adapter;
mod artifacts;
mod config;
mod container;
mod ingest;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::ModelError;

pub use adapter::subprocess_adapter;
pub use artifacts::{
    read_explanations, read_model, read_patterns, write_diagnostics, write_explanations, write_heatmap, write_matrix_csv,
    write_model, write_patterns, ExplanationSet, ModelFile, PatternSet,
};
pub use config::{RunConfig, ShapeHint};
pub(crate) use config::is_safe_class_id;
pub use container::{decode_chain, encode_chain, read_chain, write_chain, ChainHeader, CHAIN_MAGIC};
pub use ingest::{load_dataset, parse_matrix_csv, read_labels, read_matrix_csv, DatasetSource, ResponseSource, Table};

/// Version stamped into every file this crate writes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{source_name}, line {line}: {message}")]
    Parse { source_name: String, line: u64, message: String },
    #[error("{0}")]
    Mismatch(String),
    #[error("adapter failed: {message}{}", if .stderr.is_empty() { String::new() } else { format!("\n--- child stderr ---\n{}", .stderr.trim_end()) })]
    Adapter { message: String, stderr: String },
    #[error("persistence error: {0}")]
    Persistence(String),
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
}

pub(crate) fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.to_path_buf(), source }
}

pub(crate) fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> IoError + '_ {
    move |source| IoError::Json { path: path.to_path_buf(), source }
}
