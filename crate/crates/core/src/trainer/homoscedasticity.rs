//! Shape comparison of class distributions via covariance eigenvalues.
//!
//! Identically shaped classes have matching leading eigenvalues, so the
//! spread of each eigenvalue position across classes (std/mean) measures how
//! far a batch is from homoscedastic.

use super::TrainError;
use crate::batch_engine::Label;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub const MIN_SAMPLES_PER_CLASS: usize = 4;

/// Where the three leading eigenvalues are taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// Top three eigenvalues of each class covariance in the full space.
    #[default]
    PerClass,
    /// Project every sample onto the top three principal directions of the
    /// whole set first, then take the class covariance eigenvalues there.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomoscedasticityReport {
    pub per_class: Vec<(Label, [f64; 3])>,
    pub mean: [f64; 3],
    /// Population standard deviation across classes.
    pub std: [f64; 3],
}

impl HomoscedasticityReport {
    /// `std / mean` per eigenvalue position.
    pub fn ratios(&self) -> [f64; 3] {
        std::array::from_fn(|p| self.std[p] / self.mean[p])
    }
}

fn covariance(rows: &[&[f64]]) -> DMatrix<f64> {
    let n = rows.len();
    let dim = rows[0].len();
    let x = DMatrix::from_fn(n, dim, |r, c| rows[r][c]);
    let mean = x.row_mean();
    let centred = DMatrix::from_fn(n, dim, |r, c| x[(r, c)] - mean[c]);
    centred.transpose() * &centred / (n as f64 - 1.0)
}

/// Eigen-decomposition with eigenpairs sorted by decreasing eigenvalue.
fn sorted_eigen(cov: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn top3(values: &[f64]) -> [f64; 3] {
    std::array::from_fn(|p| values.get(p).copied().unwrap_or(0.0).max(0.0))
}

/// Leading covariance eigenvalues per class and their spread across classes.
pub fn homoscedasticity_check<V: AsRef<[f64]>>(
    points: &[V],
    labels: &[Label],
    projection: Projection,
) -> Result<HomoscedasticityReport, TrainError> {
    assert_eq!(points.len(), labels.len(), "one label per point");
    let mut classes: Vec<Label> = Vec::new();
    for &l in labels {
        if !classes.contains(&l) {
            classes.push(l);
        }
    }
    let rows: Vec<&[f64]> = points.iter().map(|p| p.as_ref()).collect();
    let projected: Vec<Vec<f64>>;
    let rows: Vec<&[f64]> = match projection {
        Projection::PerClass => rows,
        Projection::Global => {
            let (_, vecs) = sorted_eigen(covariance(&rows));
            let k = vecs.ncols().min(3);
            projected = rows
                .iter()
                .map(|r| (0..k).map(|c| (0..r.len()).map(|m| r[m] * vecs[(m, c)]).sum()).collect())
                .collect();
            projected.iter().map(|v| v.as_slice()).collect()
        }
    };
    let mut per_class = Vec::with_capacity(classes.len());
    for &c in &classes {
        let members: Vec<&[f64]> = rows.iter().zip(labels).filter(|(_, &l)| l == c).map(|(r, _)| *r).collect();
        if members.len() < MIN_SAMPLES_PER_CLASS {
            return Err(TrainError::InsufficientSamples {
                label: c,
                count: members.len(),
            });
        }
        let (values, _) = sorted_eigen(covariance(&members));
        per_class.push((c, top3(&values)));
    }
    let n = per_class.len() as f64;
    let mean: [f64; 3] = std::array::from_fn(|p| per_class.iter().map(|(_, e)| e[p]).sum::<f64>() / n);
    let std: [f64; 3] = std::array::from_fn(|p| {
        (per_class.iter().map(|(_, e)| (e[p] - mean[p]).powi(2)).sum::<f64>() / n).sqrt()
    });
    Ok(HomoscedasticityReport { per_class, mean, std })
}

/// Scales every sample of class `label` away from its class mean by
/// `factor`; the result is generally off the sphere.
pub fn scale_class<V: AsRef<[f64]>>(points: &[V], labels: &[Label], label: Label, factor: f64) -> Vec<Vec<f64>> {
    let members: Vec<&[f64]> = points
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == label)
        .map(|(p, _)| p.as_ref())
        .collect();
    let dim = points.first().map_or(0, |p| p.as_ref().len());
    let mean: Vec<f64> = (0..dim)
        .map(|m| members.iter().map(|p| p[m]).sum::<f64>() / members.len().max(1) as f64)
        .collect();
    points
        .iter()
        .zip(labels)
        .map(|(p, &l)| {
            let p = p.as_ref();
            if l == label {
                p.iter().zip(&mean).map(|(v, c)| c + factor * (v - c)).collect()
            } else {
                p.to_vec()
            }
        })
        .collect()
}
