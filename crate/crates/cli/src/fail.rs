use std::fmt;

use nwbeam_core::{Error, StoreError};

/// Bad flags, configuration or architecture.
pub const USAGE: u8 = 2;
/// Unreadable, unwritable or corrupt files.
pub const IO: u8 = 3;
/// Channel count, length or sample rate disagreement.
pub const MISMATCH: u8 = 4;
/// Anything else that stops a command midway.
pub const RUNTIME: u8 = 1;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self { code, message: message.into() }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(IO, message)
    }

    pub fn mismatch(message: impl Into<String>) -> Self {
        Self::new(MISMATCH, message)
    }

    /// Prefixes the message with what was being done.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidSpec(_) => USAGE,
            Error::Store(_) | Error::Wav(_) | Error::Io(_) => IO,
            Error::ShapeMismatch(_) | Error::EmptySignal => MISMATCH,
            _ => RUNTIME,
        };
        Self::new(code, e.to_string())
    }
}

impl From<StoreError> for Failure {
    fn from(e: StoreError) -> Self {
        Self::io(e.to_string())
    }
}

pub type CliResult<T = ()> = Result<T, Failure>;

/// Attaches a path to I/O-flavored errors.
pub trait WithPath<T> {
    fn at(self, path: &std::path::Path) -> CliResult<T>;
}

impl<T, E: Into<Failure>> WithPath<T> for Result<T, E> {
    fn at(self, path: &std::path::Path) -> CliResult<T> {
        self.map_err(|e| e.into().context(path.display()))
    }
}
