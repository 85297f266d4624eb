//! File formats, dataset directories, checkpoints and parallel evaluation on
//! top of `rrn-core`. The `rrn` binary is a thin layer over this crate.

use std::path::PathBuf;

use rrn_core::datagen::DatagenError;
use rrn_core::dsl::ParseError;
use rrn_core::harness::HarnessError;
use rrn_core::kb::KbError;
use rrn_core::rrn::RrnError;
use thiserror::Error;

pub mod checkpoint;
pub mod dataset;
pub mod fixtures;
pub mod io;
pub mod parallel;

#[derive(Debug, Error)]
pub enum WorkbenchError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{source}", path.display())]
    Parse {
        path: PathBuf,
        #[source]
        source: ParseError,
    },
    #[error("{}:{line}: {message}", path.display())]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("vocabulary hash mismatch: checkpoint has {expected}, ontology has {found}")]
    VocabularyMismatch { expected: String, found: String },
    #[error("checkpoint {}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error("dataset {}: {message}", path.display())]
    Dataset { path: PathBuf, message: String },
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Datagen(#[from] DatagenError),
    #[error(transparent)]
    Rrn(#[from] RrnError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

pub type Result<T, E = WorkbenchError> = std::result::Result<T, E>;
