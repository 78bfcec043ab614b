use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the measurement pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("frame {frame}: {reason}")]
    Ingest { frame: usize, reason: String },

    #[error("no frames found in {0}")]
    EmptySequence(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {reason}")]
    Parse { what: String, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("phantom generation failed: {0}")]
    Phantom(String),

    #[error("dice score undefined: both masks are empty")]
    EmptyMasks,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("frame {frame}: region of interest has zero area")]
    DegenerateRoi { frame: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("mask has no foreground pixels")]
    EmptyMask,

    #[error("no interior trough reachable from column {start}")]
    NoInteriorTrough { start: usize },

    #[error("no interior peak on the {side} side of column {center}")]
    NoFlankPeak { side: Side, center: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("{stage} failed on frame {frame}: {source}")]
    Stage {
        stage: &'static str,
        frame: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Wraps an error with the pipeline stage and frame it came from.
    pub fn at_stage(self, stage: &'static str, frame: usize) -> Self {
        Error::Stage {
            stage,
            frame,
            source: Box::new(self),
        }
    }

    /// Name of the innermost pipeline stage, if the error was tagged with one.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}

/// Which flank of the sheath an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::Left => f.write_str("left"),
            Side::Right => f.write_str("right"),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
