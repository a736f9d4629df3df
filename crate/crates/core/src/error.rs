use thiserror::Error;

use crate::classifier::PairKey;
use crate::geometry::Agent;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("coincident point")]
    CoincidentPoint,
    #[error("gaze direction is zero or not finite")]
    DegenerateDirection,
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("duplicate object id `{0}`")]
    DuplicateObject(String),
    #[error("scene poses must be (self, other)")]
    PoseRole,
    #[error("invalid geometry config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EventError {
    #[error("time regression: frame at t={current} follows t={previous}")]
    TimeRegression { previous: f64, current: f64 },
    #[error("mixed agents in sample stream: expected {expected}, found {found}")]
    MixedAgents { expected: Agent, found: Agent },
    #[error("sample at t={current} precedes t={previous}")]
    Unordered { previous: f64, current: f64 },
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("invalid segmenter config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("fixations out of order at index {index}")]
    Unordered { index: usize },
    #[error("invalid classifier config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("transition model has no row for {0}")]
    MissingRow(PairKey),
    #[error("transition row {0} is invalid: {1}")]
    InvalidRow(PairKey, &'static str),
    #[error("no referent available for {0}")]
    NoReferent(&'static str),
    #[error("unknown object id `{0}`")]
    UnknownObject(String),
    #[error("invalid behavior profile: {0}")]
    Profile(&'static str),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Top-level error for engine, simulator and session use.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("empty trace")]
    EmptyTrace,
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
