use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the reconstruction pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("value {value} outside supported range [{min}, {max}]")]
    Range { value: f64, min: f64, max: f64 },

    #[error("energy {energy} GeV below magnetic cutoff (transverse kick {kick} GeV)")]
    BelowCutoff { energy: f64, kick: f64 },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("empty problem: {0}")]
    EmptyProblem(String),

    #[error("problem size {n} exceeds limit {max} for {what}")]
    Size { n: usize, max: usize, what: &'static str },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("undeflected track: |sin(theta)| = {0:e}")]
    UndeflectedTrack(f64),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: {msg}")]
    Parse { file: String, line: u64, msg: String },

    #[error("join error: {0}")]
    Join(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Input data (files, rows, joins) was malformed, as opposed to a
    /// configuration or programming error.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Io { .. } | Error::Parse { .. } | Error::Join(_))
    }
}
