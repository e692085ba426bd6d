//! Retrieval and clustering metrics: recall@k, NMI and pairwise F1.

use crate::batch_engine::{Label, LabeledBatch};
use crate::losses::pairwise;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// Seed that picks the first k-means centre.
pub const KMEANS_SEED: u64 = 0;
pub const KMEANS_MAX_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub recall_at_k: BTreeMap<usize, f64>,
    pub nmi: f64,
    pub f1: f64,
}

/// Neighbours of every sample ordered by distance, ties by index.
fn neighbour_lists(batch: &LabeledBatch) -> Vec<Vec<usize>> {
    let pw = pairwise(batch);
    let n = batch.len();
    (0..n)
        .map(|i| {
            let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| pw.dist(i, a).total_cmp(&pw.dist(i, b)).then(a.cmp(&b)));
            others
        })
        .collect()
}

fn recall_from_lists(batch: &LabeledBatch, lists: &[Vec<usize>], k: usize) -> f64 {
    let labels = batch.labels();
    let hits = lists
        .iter()
        .enumerate()
        .filter(|(i, nb)| nb.iter().take(k).any(|&j| labels[j] == labels[*i]))
        .count();
    hits as f64 / batch.len() as f64
}

/// Fraction of samples with a same-class sample among their `k` nearest
/// neighbours (self excluded).
pub fn recall_at_k(batch: &LabeledBatch, k: usize) -> f64 {
    assert!(k >= 1, "k must be at least 1");
    recall_from_lists(batch, &neighbour_lists(batch), k)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centres: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, centre) in centres.iter().enumerate() {
        let d = sq_dist(point, centre);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

/// Deterministic k-means: farthest-point initialisation from a seeded first
/// centre, Lloyd iterations until the assignment is stable. A cluster that
/// empties keeps its previous centre.
pub fn kmeans(points: &[&[f64]], k: usize, seed: u64) -> Vec<usize> {
    let n = points.len();
    assert!(k >= 1 && n >= 1);
    let k = k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].to_vec()];
    while centres.len() < k {
        let mut far = (0, f64::NEG_INFINITY);
        for (i, p) in points.iter().enumerate() {
            let d = centres.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min);
            if d > far.1 {
                far = (i, d);
            }
        }
        centres.push(points[far.0].to_vec());
    }
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centres)).collect();
    for _ in 0..KMEANS_MAX_ITERS {
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p.iter()).for_each(|(s, v)| *s += v);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centres[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centres)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    assign
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `2 I(Y; C) / (H(Y) + H(C))`; 1 when both partitions are trivial.
pub fn nmi_from_assignments(labels: &[Label], clusters: &[usize]) -> f64 {
    let n = labels.len() as f64;
    let mut joint: HashMap<(Label, usize), usize> = HashMap::new();
    let mut by_label: HashMap<Label, usize> = HashMap::new();
    let mut by_cluster: HashMap<usize, usize> = HashMap::new();
    for (&y, &c) in labels.iter().zip(clusters) {
        *joint.entry((y, c)).or_default() += 1;
        *by_label.entry(y).or_default() += 1;
        *by_cluster.entry(c).or_default() += 1;
    }
    let h_y = entropy(by_label.values().copied(), n);
    let h_c = entropy(by_cluster.values().copied(), n);
    if h_y + h_c == 0.0 {
        return 1.0;
    }
    let mutual: f64 = joint
        .iter()
        .map(|(&(y, c), &nyc)| {
            let p = nyc as f64 / n;
            p * (p * n * n / (by_label[&y] as f64 * by_cluster[&c] as f64)).ln()
        })
        .sum();
    (2.0 * mutual / (h_y + h_c)).clamp(0.0, 1.0)
}

/// Harmonic mean of pairwise precision and recall over co-clustered pairs.
pub fn f1_from_assignments(labels: &[Label], clusters: &[usize]) -> f64 {
    let n = labels.len();
    let (mut tp, mut same_cluster, mut same_class) = (0usize, 0usize, 0usize);
    for i in 0..n {
        for j in i + 1..n {
            let sc = clusters[i] == clusters[j];
            let sy = labels[i] == labels[j];
            same_cluster += sc as usize;
            same_class += sy as usize;
            tp += (sc && sy) as usize;
        }
    }
    if tp == 0 {
        return 0.0;
    }
    let precision = tp as f64 / same_cluster as f64;
    let recall = tp as f64 / same_class as f64;
    2.0 * precision * recall / (precision + recall)
}

fn cluster(batch: &LabeledBatch, num_clusters: usize) -> Vec<usize> {
    let points: Vec<&[f64]> = batch.embeddings().iter().map(|e| e.as_slice()).collect();
    kmeans(&points, num_clusters, KMEANS_SEED)
}

pub fn nmi(batch: &LabeledBatch, num_clusters: usize) -> f64 {
    nmi_from_assignments(batch.labels(), &cluster(batch, num_clusters))
}

pub fn f1(batch: &LabeledBatch, num_clusters: usize) -> f64 {
    f1_from_assignments(batch.labels(), &cluster(batch, num_clusters))
}

/// Recall at each `k` in `ks`, NMI and F1 with one cluster per class.
pub fn evaluate(batch: &LabeledBatch, ks: &[usize]) -> EvalReport {
    let lists = neighbour_lists(batch);
    let recall_at_k = ks.iter().map(|&k| (k, recall_from_lists(batch, &lists, k))).collect();
    let clusters = cluster(batch, batch.classes().len());
    EvalReport {
        recall_at_k,
        nmi: nmi_from_assignments(batch.labels(), &clusters),
        f1: f1_from_assignments(batch.labels(), &clusters),
    }
}
