use std::path::PathBuf;

use thiserror::Error;

use crate::grid::Vertex;
use crate::subdb::SolutionDatabase;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid vertex {0}")]
    InvalidVertex(Vertex),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("capacity exceeded: requested {requested}, available {available}")]
    Capacity { requested: usize, available: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("start {start} and goal {goal} of robot {robot} are in different components")]
    Disconnected {
        robot: usize,
        start: Vertex,
        goal: Vertex,
    },

    #[error("monotone path from {from} to {to} is blocked by obstacles")]
    NotApplicable { from: Vertex, to: Vertex },

    #[error("no path from {from} to {to}{}", robot.map(|r| format!(" (robot {r})")).unwrap_or_default())]
    NoPath {
        robot: Option<usize>,
        from: Vertex,
        to: Vertex,
    },

    #[error("group action {action} is not valid for shape {shape}")]
    InvalidAction { action: String, shape: String },

    #[error("database integrity: {0}")]
    DatabaseIntegrity(String),

    #[error("database does not cover {robots} robots (stored up to {nmax}, no lazy fallback)")]
    NotCovered { robots: usize, nmax: usize },

    #[error("database build exceeded budget of {cap} entries after completing n <= {completed}")]
    BudgetExceeded {
        cap: usize,
        completed: usize,
        checkpoint: Box<SolutionDatabase>,
    },

    #[error("engine stalled at step {clock}: {reason}\n{dump}")]
    Stall {
        clock: usize,
        reason: String,
        dump: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
