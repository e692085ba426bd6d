//! Instance files: `{"x1": [...], "x2": [...], "y1": [...], "y2": [...], "variant": "arc"}`.

use crate::error::CliError;
use hardneg_core::arc_solver::ArcProblem;
use hardneg_core::batch_engine::{LabeledBatch, Variant};
use hardneg_core::geometry::normalize;
use hardneg_core::segment_solver::SegmentProblem;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use std::fs;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    #[serde(default)]
    pub variant: Option<Variant>,
}

impl Instance {
    /// Arc endpoints are normalized onto the sphere.
    pub fn arc_problem(&self) -> Result<ArcProblem, CliError> {
        let n = |v: &[f64]| normalize(v);
        Ok(ArcProblem::new(n(&self.x1)?, n(&self.x2)?, n(&self.y1)?, n(&self.y2)?)?)
    }

    /// Segment endpoints are taken as given.
    pub fn segment_problem(&self) -> Result<SegmentProblem, CliError> {
        Ok(SegmentProblem::new(
            self.x1.clone(),
            self.x2.clone(),
            self.y1.clone(),
            self.y2.clone(),
        )?)
    }

    /// The flag wins over the file; arcs by default.
    pub fn resolve_variant(&self, flag: Option<Variant>) -> Variant {
        flag.or(self.variant).unwrap_or_default()
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Batch from `.json` (`{"labels", "embeddings"}`) or headerless CSV rows
/// `label, c1, c2, …`.
pub fn read_batch(path: &Path) -> Result<LabeledBatch, CliError> {
    let text = read_text(path)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        LabeledBatch::read_json(text.as_bytes())
    } else {
        LabeledBatch::read_csv(text.as_bytes())
    };
    parsed.map_err(|e| match e {
        hardneg_core::batch_engine::BatchError::Json(_)
        | hardneg_core::batch_engine::BatchError::Csv(_)
        | hardneg_core::batch_engine::BatchError::MalformedRow { .. } => CliError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
        other => other.into(),
    })
}
