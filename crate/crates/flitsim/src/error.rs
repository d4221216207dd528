use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("topology line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("host {host} is unreachable")]
    Disconnected { host: String },

    #[error("routing hole: switch {switch} has no route to host {dest}")]
    RoutingHole { switch: String, dest: String },

    #[error("model invariant violated at t={at_ps}ps: {msg}")]
    Invariant { at_ps: u64, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Json { .. } => 2,
            Error::Topology(_) | Error::Disconnected { .. } | Error::RoutingHole { .. } => 3,
            Error::Invariant { .. } => 4,
            Error::Io { .. } | Error::Csv { .. } => 1,
        }
    }
}
