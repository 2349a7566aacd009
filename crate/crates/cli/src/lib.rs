//! Pipeline stages behind the `offense` binary.
//!
//! Each stage reads files, writes its artifacts atomically into the output
//! directory and records hashes of everything it read and wrote in
//! `manifest.json` there.

pub mod cli;
pub mod config;
pub mod fixture;
pub mod output;
pub mod stages;

use offense_core::analytics::AnalyticsError;
use offense_core::classifier::ClassifierError;
use offense_core::corpus::CorpusError;
use offense_core::embedding::EmbeddingError;
use offense_core::hatemodel::HateModelError;
use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("provenance mismatch: {0}")]
    Provenance(String),
}

impl CliError {
    /// 0 success, 1 usage, 2 data, 3 provenance.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Provenance(_) => 3,
        }
    }

    pub fn data(e: impl std::fmt::Display) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e)
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::data(e)
    }
}

impl From<EmbeddingError> for CliError {
    fn from(e: EmbeddingError) -> Self {
        CliError::data(e)
    }
}

impl From<ClassifierError> for CliError {
    fn from(e: ClassifierError) -> Self {
        CliError::data(e)
    }
}

impl From<AnalyticsError> for CliError {
    fn from(e: AnalyticsError) -> Self {
        CliError::data(e)
    }
}

impl From<HateModelError> for CliError {
    fn from(e: HateModelError) -> Self {
        match e {
            HateModelError::ProvenanceMismatch { .. } | HateModelError::NormalizerMismatch { .. } => {
                CliError::Provenance(e.to_string())
            }
            other => CliError::data(other),
        }
    }
}
