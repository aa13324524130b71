//! Reading and writing `.xlsx` (OOXML) workbooks.
//!
//! The reader streams worksheet XML without materializing empty cells, so
//! memory is proportional to non-empty cells plus embedded images. The
//! writer produces deterministic archives (fixed entry order and
//! timestamps), which the benchmark generator relies on: the same inputs
//! produce byte-identical files.
//!
//! Only `.xlsx` is supported; legacy `.xls` is not a zip archive and is
//! rejected as such.

mod read;
mod write;

pub use read::{ingest_workbook, list_sheets, IngestOptions, IngestResult};
pub use write::{serial_to_iso, write_workbook, WriteOptions};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum XlsxError {
    #[error("{path}: not a zip archive (only .xlsx is supported)")]
    NotZip { path: String },
    #[error("missing required archive member {member:?}")]
    MissingPart { member: String },
    #[error("malformed XML in {member}: {message}")]
    Xml { member: String, message: String },
    #[error("cell count exceeds max_cells={limit} while reading {member}")]
    TooManyCells { limit: u64, member: String },
    #[error("invalid ingest options: {0}")]
    BadOptions(String),
    #[error("invalid cell reference in {member}: {source}")]
    Addr {
        member: String,
        source: crate::addr::AddrError,
    },
    #[error(transparent)]
    Model(#[from] crate::workbook::ModelError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl XlsxError {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        XlsxError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn xml(member: impl Into<String>, message: impl std::fmt::Display) -> Self {
        XlsxError::Xml {
            member: member.into(),
            message: message.to_string(),
        }
    }
}
