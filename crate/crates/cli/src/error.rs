//! Error type and the exit-code contract: 0 success, 1 runtime failure,
//! 2 input error.

use hardneg_core::batch_engine::BatchError;
use hardneg_core::geometry::GeometryError;
use hardneg_core::losses::LossError;
use hardneg_core::segment_solver::SegmentError;
use hardneg_core::trainer::TrainError;
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("output: {0}")]
    Output(String),
}

/// The JSON object printed to stderr on failure.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Read { .. } => "ReadError",
            CliError::Parse { .. } => "ParseError",
            CliError::InvalidInput(_) => "InvalidInput",
            CliError::Geometry(GeometryError::DegenerateArc { .. }) => "DegenerateArc",
            CliError::Geometry(_) => "GeometryError",
            CliError::Segment(SegmentError::DegenerateSegment) => "DegenerateSegment",
            CliError::Segment(_) => "GeometryError",
            CliError::Batch(_) => "BatchError",
            CliError::Loss(_) => "LossError",
            CliError::Train(TrainError::DivergenceDetected { .. }) => "DivergenceDetected",
            CliError::Train(TrainError::InvalidConfig(_) | TrainError::InvalidSpec(_)) => "ConfigError",
            CliError::Train(_) => "TrainError",
            CliError::Write { .. } | CliError::Output(_) => "OutputError",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Write { .. } | CliError::Output(_) => 1,
            CliError::Train(e) => match e {
                TrainError::InvalidConfig(_)
                | TrainError::InvalidSpec(_)
                | TrainError::Batch(_)
                | TrainError::Geometry(_)
                | TrainError::InsufficientSamples { .. } => 2,
                _ => 1,
            },
            CliError::Loss(LossError::Csv(_)) => 1,
            _ => 2,
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}
