//! Crate-wide error type.

use crate::entity::EntityId;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A structurally broken input row; the message carries file and line.
    #[error("{path}:{line}: {msg}")]
    Malformed { path: PathBuf, line: u64, msg: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("graph error: {0}")]
    Graph(String),

    /// Transport between measures is impossible because a destination node
    /// cannot be reached from the source support.
    #[error("measure supports are disconnected: no path from {from} to {to}")]
    DisconnectedSupport { from: EntityId, to: EntityId },

    /// The explicit Euler step would drive an edge weight through zero.
    #[error(
        "flow step too large on edge ({u}, {v}): eta * |kappa| = {product} >= 1 (kappa = {kappa})"
    )]
    StepSize {
        u: EntityId,
        v: EntityId,
        kappa: f64,
        product: f64,
    },

    #[error("non-finite weight on edge ({u}, {v}) at flow iteration {iteration}")]
    NonFinite {
        u: EntityId,
        v: EntityId,
        iteration: usize,
    },

    #[error("curvature kind mismatch: {left} vs {right}")]
    KindMismatch { left: String, right: String },

    #[error("schema mismatch in {path}: expected version {expected}, found {found}")]
    Schema {
        path: PathBuf,
        expected: u32,
        found: String,
    },

    #[error("config hash mismatch in {path}: expected {expected}, found {found}")]
    HashMismatch {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CoreError>,
    },
}

impl CoreError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: u64, msg: impl Into<String>) -> Self {
        CoreError::Malformed {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &'static str) -> Self {
        CoreError::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
