use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised across the crate.
///
/// The `Display` form is `<module>: <detail>`, which the command-line front end
/// prefixes with `error: `.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("codecs: {0}")]
    Framing(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error("dsp: {0}")]
    Dsp(String),
    #[error("tinyml: {0}")]
    Model(String),
    #[error("pipeline: {0}")]
    Pipeline(String),
    #[error("energy: {0}")]
    Energy(String),
    #[error("wav: {0}")]
    Wav(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// True for errors caused by invalid user input or configuration rather
    /// than I/O failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_))
    }
}
