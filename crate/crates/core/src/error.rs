use std::path::PathBuf;

use thiserror::Error;

use crate::quadrature::QuadError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("mesh lower bound must be positive and finite, got {0}")]
    NonPositiveLower(f64),
    #[error("mesh range is empty: lo = {lo}, hi = {hi}")]
    EmptyRange { lo: f64, hi: f64 },
    #[error("mesh density must be at least one point per decade")]
    ZeroDensity,
    #[error("mesh step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("step {step} does not divide the range [{lo}, {hi}]")]
    NonDividingStep { lo: f64, hi: f64, step: f64 },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] MeshError),

    #[error(transparent)]
    Quadrature(#[from] QuadError),

    #[error("exponent gamma = {0} is outside (0, 2)")]
    InvalidGamma(f64),

    #[error("{what} must be {constraint}, got {value}")]
    Domain {
        what: &'static str,
        constraint: &'static str,
        value: f64,
    },

    #[error("quadrature failed at x = {x}, t = {t}, gamma = {gamma}: {source}")]
    GreenFunction {
        x: f64,
        t: f64,
        gamma: f64,
        #[source]
        source: QuadError,
    },

    #[error("evaluation failed at node t = {t}, s = {s}: {source}")]
    FieldNode {
        t: f64,
        s: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("non-positive density {value} at node t = {t}, s = {s}")]
    NonPositiveDensity { t: f64, s: f64, value: f64 },

    #[error("levy constant extrapolation did not converge; samples {samples:?}")]
    Extrapolation { samples: Vec<(f64, f64)> },

    #[error("slope fit needs at least {needed} points, window has {found}")]
    FitWindow { needed: usize, found: usize },

    #[error("gamma mismatch: {0} vs {1}")]
    GammaMismatch(f64, f64),

    #[error("computation cancelled")]
    Cancelled,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed {kind} file {path}: {reason}")]
    Parse {
        kind: &'static str,
        path: PathBuf,
        reason: String,
    },

    #[error("plan checksum {found} does not match spec checksum {expected}; replan first")]
    StalePlan { expected: String, found: String },

    #[error("task gamma = {gamma:.2} is marked done but artifact {path} is missing or unreadable")]
    MissingArtifact { gamma: f64, path: PathBuf },

    #[error("no completed tasks under {0}")]
    NothingToAggregate(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by file access rather than numerics.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } | Error::MissingArtifact { .. } | Error::Parse { .. } => true,
            Error::FieldNode { source, .. } => source.is_io(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn require_positive(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            constraint: "positive and finite",
            value,
        })
    }
}
