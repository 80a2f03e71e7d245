use thiserror::Error;

/// Errors produced by the library.
///
/// Variants are grouped so front ends can map them onto exit codes:
/// geometry/parse problems are caller mistakes, size and infeasibility
/// errors mean the request cannot be served as posed.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("size limit exceeded: {what} is {count}, cap is {cap}")]
    Size { what: String, count: u64, cap: u64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("schedule error in block {block}, stage {stage}: {detail}")]
    Schedule {
        block: usize,
        stage: usize,
        detail: String,
    },

    #[error("multi-step partition violated at vertex {vertex}: {clause}")]
    Partition { vertex: u32, clause: String },

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("training error: {0}")]
    Training(String),

    #[error("invalid argument: {0}")]
    Argument(String),
}

impl Error {
    /// True for errors that mean "no answer exists within the limits".
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            Error::Size { .. } | Error::Infeasible(_) | Error::Schedule { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
