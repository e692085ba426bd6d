//! Desk-scale training on synthetic clustered data.
//!
//! The trainable object is the embedding table itself: every step evaluates
//! the chosen loss over the full batch, takes a gradient step in the tangent
//! space of each embedding and projects back onto the sphere.

mod gradcheck;
mod homoscedasticity;
mod metrics;
mod synthetic;

pub use gradcheck::{
    analytic_loop_triplet_grad, finite_diff_grad, project_tangent, relative_error, LoopTripletGrad, KINK_TOL,
};
pub use homoscedasticity::{homoscedasticity_check, scale_class, HomoscedasticityReport, Projection, MIN_SAMPLES_PER_CLASS};
pub use metrics::{
    evaluate, f1, f1_from_assignments, kmeans, nmi, nmi_from_assignments, recall_at_k, EvalReport, KMEANS_MAX_ITERS,
    KMEANS_SEED,
};
pub use synthetic::{generate_synthetic, generate_with_means, random_unit, sample_vmf, SyntheticSpec, DEFAULT_CONCENTRATION};

use crate::batch_engine::{optimal_distance_table, BatchError, Label, LabeledBatch, Variant};
use crate::geometry::{self, GeometryError};
use crate::losses::{self, LossConfig, LossError, LossKind};
use serde::{Deserialize, Serialize};
use std::io::Write;

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("loss became non-finite at step {step}")]
    DivergenceDetected { step: usize },
    #[error("nondifferentiable point: {0}")]
    NondifferentiablePoint(String),
    #[error("class {label} has {count} samples; at least {MIN_SAMPLES_PER_CLASS} are needed")]
    InsufficientSamples { label: Label, count: usize },
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub loss: f64,
    pub recall_at_1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub embeddings: LabeledBatch,
    pub step: usize,
    pub learning_rate: f64,
    /// One entry per step before its update, plus the final state.
    pub history: Vec<HistoryEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub loss: LossKind,
    pub loss_config: LossConfig,
    pub steps: usize,
    pub learning_rate: f64,
    pub variant: Variant,
}

fn loss_and_grad(
    batch: &LabeledBatch,
    opts: &TrainOptions,
) -> Result<(f64, Vec<Vec<f64>>), TrainError> {
    let table = if opts.loss.uses_table() {
        Some(optimal_distance_table(batch, opts.variant)?)
    } else {
        None
    };
    let (value, grads) = losses::evaluate_with_gradient(opts.loss, batch, table.as_ref(), &opts.loss_config)?;
    Ok((value.total, grads))
}

/// Full-batch gradient descent on the embedding table from `initial`.
pub fn train_batch(initial: LabeledBatch, opts: &TrainOptions) -> Result<TrainState, TrainError> {
    let mut batch = initial;
    let mut history = Vec::with_capacity(opts.steps + 1);
    for step in 0..=opts.steps {
        let (loss, grads) = loss_and_grad(&batch, opts)?;
        if !loss.is_finite() {
            return Err(TrainError::DivergenceDetected { step });
        }
        history.push(HistoryEntry {
            step,
            loss,
            recall_at_1: recall_at_k(&batch, 1),
        });
        if step == opts.steps {
            break;
        }
        let next = batch
            .embeddings()
            .iter()
            .zip(&grads)
            .map(|(x, g)| {
                let t = project_tangent(x, g);
                let moved: Vec<f64> = x.as_slice().iter().zip(&t).map(|(v, d)| v - opts.learning_rate * d).collect();
                if moved == x.as_slice() {
                    Ok(x.clone())
                } else {
                    geometry::normalize(&moved)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        batch = batch.with_embeddings(next)?;
    }
    Ok(TrainState {
        embeddings: batch,
        step: opts.steps,
        learning_rate: opts.learning_rate,
        history,
    })
}

/// Generates the synthetic table for `spec` with `seed` in place of
/// `spec.seed` and trains it with the geodesic-arc variant.
pub fn train(
    spec: &SyntheticSpec,
    loss: LossKind,
    config: &LossConfig,
    steps: usize,
    learning_rate: f64,
    seed: u64,
) -> Result<TrainState, TrainError> {
    let initial = generate_synthetic(&SyntheticSpec { seed, ..*spec })?;
    train_batch(
        initial,
        &TrainOptions {
            loss,
            loss_config: *config,
            steps,
            learning_rate,
            variant: Variant::Arc,
        },
    )
}

/// Means of consecutive non-overlapping windows of the loss history.
pub fn window_means(history: &[HistoryEntry], window: usize) -> Vec<f64> {
    history
        .chunks_exact(window)
        .map(|w| w.iter().map(|h| h.loss).sum::<f64>() / window as f64)
        .collect()
}

/// True when no window mean exceeds the one before it.
pub fn windows_nonincreasing(history: &[HistoryEntry], window: usize) -> bool {
    window_means(history, window).windows(2).all(|w| w[1] <= w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub spec: SyntheticSpec,
    pub losses: Vec<LossKind>,
    pub loss_config: LossConfig,
    pub steps: usize,
    pub learning_rate: f64,
    pub seeds: Vec<u64>,
    pub variant: Variant,
    pub recall_ks: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            spec: SyntheticSpec::default(),
            losses: vec![LossKind::Triplet, LossKind::LoopTriplet, LossKind::Hphn, LossKind::LoopHphn],
            loss_config: LossConfig::default(),
            steps: 500,
            learning_rate: DEFAULT_LEARNING_RATE,
            seeds: (0..5).collect(),
            variant: Variant::Arc,
            recall_ks: vec![1, 2, 4, 8],
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        self.spec.validate()?;
        self.loss_config.validate()?;
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if self.losses.is_empty() {
            return bad("losses must not be empty");
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.recall_ks.iter().any(|&k| k == 0) {
            return bad("recall_ks entries must be at least 1");
        }
        if self.spec.num_classes < 2 {
            return bad("training needs at least two classes");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub loss: LossKind,
    pub seed: u64,
    pub history: Vec<HistoryEntry>,
    pub final_eval: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub loss: LossKind,
    pub median_recall_at_1: f64,
    pub median_nmi: f64,
    pub median_f1: f64,
    pub median_final_loss: f64,
    pub window_monotone_runs: usize,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<LossSummary>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Window length for the monotone-decrease summary.
pub const MONOTONE_WINDOW: usize = 50;

/// Trains every loss on every seed and summarizes per loss.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, TrainError> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for &loss in &cfg.losses {
        for &seed in &cfg.seeds {
            let initial = generate_synthetic(&SyntheticSpec { seed, ..cfg.spec })?;
            let state = train_batch(
                initial,
                &TrainOptions {
                    loss,
                    loss_config: cfg.loss_config,
                    steps: cfg.steps,
                    learning_rate: cfg.learning_rate,
                    variant: cfg.variant,
                },
            )?;
            let mut ks = cfg.recall_ks.clone();
            if !ks.contains(&1) {
                ks.insert(0, 1);
            }
            runs.push(RunRecord {
                loss,
                seed,
                final_eval: evaluate(&state.embeddings, &ks),
                history: state.history,
            });
        }
    }
    let summary = cfg
        .losses
        .iter()
        .map(|&loss| {
            let mine: Vec<&RunRecord> = runs.iter().filter(|r| r.loss == loss).collect();
            let pick = |f: &dyn Fn(&RunRecord) -> f64| median(&mine.iter().map(|r| f(r)).collect::<Vec<_>>());
            LossSummary {
                loss,
                median_recall_at_1: pick(&|r| r.final_eval.recall_at_k[&1]),
                median_nmi: pick(&|r| r.final_eval.nmi),
                median_f1: pick(&|r| r.final_eval.f1),
                median_final_loss: pick(&|r| r.history.last().map_or(f64::NAN, |h| h.loss)),
                window_monotone_runs: mine.iter().filter(|r| windows_nonincreasing(&r.history, MONOTONE_WINDOW)).count(),
                runs: mine.len(),
            }
        })
        .collect();
    Ok(ExperimentResult { runs, summary })
}

impl ExperimentResult {
    /// One row per recorded step: `loss, seed, step, loss_value, recall_at_1`.
    pub fn write_metrics_csv<W: Write>(&self, writer: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["loss", "seed", "step", "loss_value", "recall_at_1"])?;
        for r in &self.runs {
            for h in &r.history {
                w.write_record(&[
                    r.loss.to_string(),
                    r.seed.to_string(),
                    h.step.to_string(),
                    h.loss.to_string(),
                    h.recall_at_1.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
