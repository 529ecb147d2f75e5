use thiserror::Error;

/// Failure modes shared by every module.
///
/// Callers that need a process exit status (the CLI) map `Domain` to a
/// configuration error, `Size` and `Degenerate` to a feasibility error and
/// `Internal` to an assertion failure.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// The instance exceeds a hard enumeration or memory cap.
    #[error("size limit exceeded: {0}")]
    Size(String),
    /// The channel is valid but degenerate for the requested construction.
    #[error("degenerate channel: {0}")]
    Degenerate(String),
    /// An invariant that should be impossible to break was broken.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn size(msg: impl Into<String>) -> Error {
    Error::Size(msg.into())
}
