//! File formats: campaign tables, simulation scenarios, forecast inputs and
//! plot-ready grids.

pub mod campaign_file;
pub mod forecast_input;
pub mod grid;
pub mod scenario;

use std::path::PathBuf;

use thiserror::Error;

use crate::domain::DomainError;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, field `{field}`: {message}")]
    Parse {
        line: u64,
        field: String,
        message: String,
    },
    #[error("line {line}: {cause}")]
    Validation { line: u64, cause: DomainError },
    #[error("scenario: {0}")]
    Scenario(String),
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String, FileError> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_owned(),
        source,
    })
}

pub(crate) fn csv_error(err: csv::Error, field: &str) -> FileError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    FileError::Parse {
        line,
        field: field.to_owned(),
        message: err.to_string(),
    }
}
