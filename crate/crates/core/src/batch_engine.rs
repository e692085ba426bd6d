//! Pair construction and the optimal-distance table for a labelled batch.
//!
//! Same-class samples are paired positionally: the occurrences of each class
//! are taken in batch order and grouped two at a time. Every pair of pairs
//! with different classes is one solver instance, so a balanced batch of
//! `B_S` samples with `N` per class yields `B_S(B_S − N)/8` instances.

use crate::arc_solver::{optimal_arc_distance, ArcProblem};
use crate::geometry::{self, Arc, GeometryError, UnitVec};
use crate::segment_solver::{optimal_segment_distance, SegmentError, SegmentProblem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};

pub type Label = u32;

#[derive(Debug, thiserror::Error)]
pub enum BatchError {
    #[error("class {label} has an odd number of samples ({count})")]
    OddClassCount { label: Label, count: usize },
    #[error("invalid batch shape: B_S = {batch_size}, N = {samples_per_class}")]
    InvalidBatchShape { batch_size: usize, samples_per_class: usize },
    #[error("{embeddings} embeddings but {labels} labels")]
    LengthMismatch { embeddings: usize, labels: usize },
    #[error("the batch is empty")]
    EmptyBatch,
    #[error("the batch holds a single class, so there are no negatives")]
    SingleClass,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
}

/// Which curve joins the two samples of a positive pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Geodesic arc on the unit sphere.
    #[default]
    Arc,
    /// Straight segment between the unit-norm endpoints.
    Segment,
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "arc" => Ok(Variant::Arc),
            "segment" => Ok(Variant::Segment),
            other => Err(format!("unknown variant `{other}` (expected arc or segment)")),
        }
    }
}

/// Unit-norm embeddings with their class labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBatch", into = "RawBatch")]
pub struct LabeledBatch {
    embeddings: Vec<UnitVec>,
    labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct RawBatch {
    labels: Vec<Label>,
    embeddings: Vec<Vec<f64>>,
}

impl TryFrom<RawBatch> for LabeledBatch {
    type Error = BatchError;

    fn try_from(raw: RawBatch) -> Result<Self, Self::Error> {
        let embeddings = raw
            .embeddings
            .iter()
            .map(|v| geometry::normalize(v))
            .collect::<Result<Vec<_>, _>>()?;
        LabeledBatch::new(embeddings, raw.labels)
    }
}

impl From<LabeledBatch> for RawBatch {
    fn from(b: LabeledBatch) -> Self {
        RawBatch {
            labels: b.labels,
            embeddings: b.embeddings.into_iter().map(UnitVec::into_inner).collect(),
        }
    }
}

impl LabeledBatch {
    pub fn new(embeddings: Vec<UnitVec>, labels: Vec<Label>) -> Result<Self, BatchError> {
        if embeddings.len() != labels.len() {
            return Err(BatchError::LengthMismatch {
                embeddings: embeddings.len(),
                labels: labels.len(),
            });
        }
        let first = embeddings.first().ok_or(BatchError::EmptyBatch)?;
        for e in &embeddings {
            geometry::check_same_dim(first.dim(), e.dim())?;
        }
        build_pairs(&labels)?;
        Ok(LabeledBatch { embeddings, labels })
    }

    pub fn embeddings(&self) -> &[UnitVec] {
        &self.embeddings
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.embeddings[0].dim()
    }

    /// Distinct labels in order of first appearance.
    pub fn classes(&self) -> Vec<Label> {
        let mut seen = Vec::new();
        for &l in &self.labels {
            if !seen.contains(&l) {
                seen.push(l);
            }
        }
        seen
    }

    /// `N` when every class has the same number of samples.
    pub fn samples_per_class(&self) -> Option<usize> {
        let counts = class_counts(&self.labels);
        let n = counts.first()?.1;
        counts.iter().all(|&(_, c)| c == n).then_some(n)
    }

    /// Replaces the embeddings, keeping labels; used by the trainer.
    pub fn with_embeddings(&self, embeddings: Vec<UnitVec>) -> Result<Self, BatchError> {
        Self::new(embeddings, self.labels.clone())
    }

    /// Reads rows of `label, c1, c2, …` without a header; each row is
    /// normalized onto the sphere.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self, BatchError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut labels = Vec::new();
        let mut embeddings = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let malformed = |reason: String| BatchError::MalformedRow { row, reason };
            let mut fields = rec.iter();
            let label = fields
                .next()
                .ok_or_else(|| malformed("empty row".into()))?
                .parse::<Label>()
                .map_err(|e| malformed(format!("label: {e}")))?;
            let coords = fields
                .map(|f| f.parse::<f64>().map_err(|e| malformed(format!("coordinate `{f}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            labels.push(label);
            embeddings.push(geometry::normalize(&coords)?);
        }
        Self::new(embeddings, labels)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BatchError> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for (l, e) in self.labels.iter().zip(&self.embeddings) {
            let mut row = vec![l.to_string()];
            row.extend(e.as_slice().iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// JSON form `{"labels": [...], "embeddings": [[...], ...]}`.
    pub fn read_json<R: Read>(reader: R) -> Result<Self, BatchError> {
        let raw: RawBatch = serde_json::from_reader(reader)?;
        raw.try_into()
    }
}

fn class_counts(labels: &[Label]) -> Vec<(Label, usize)> {
    let mut counts: Vec<(Label, usize)> = Vec::new();
    for &l in labels {
        match counts.iter_mut().find(|(c, _)| *c == l) {
            Some((_, n)) => *n += 1,
            None => counts.push((l, 1)),
        }
    }
    counts
}

/// One same-class pair `(i, j)` with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositivePair {
    pub i: usize,
    pub j: usize,
    pub label: Label,
}

/// Groups each class's occurrences two at a time in batch order; pairs are
/// listed by their first index.
pub fn build_pairs(labels: &[Label]) -> Result<Vec<PositivePair>, BatchError> {
    let mut open: HashMap<Label, usize> = HashMap::new();
    let mut pairs = Vec::with_capacity(labels.len() / 2);
    for (idx, &label) in labels.iter().enumerate() {
        match open.remove(&label) {
            Some(i) => pairs.push(PositivePair { i, j: idx, label }),
            None => {
                open.insert(label, idx);
            }
        }
    }
    if let Some((&label, _)) = open.iter().min_by_key(|(_, &i)| i) {
        let count = labels.iter().filter(|&&l| l == label).count();
        return Err(BatchError::OddClassCount { label, count });
    }
    pairs.sort_by_key(|p| p.i);
    Ok(pairs)
}

/// `B_S(B_S − N)/8` for a balanced batch.
pub fn combination_count(batch_size: usize, samples_per_class: usize) -> Result<usize, BatchError> {
    let bad = BatchError::InvalidBatchShape {
        batch_size,
        samples_per_class,
    };
    if samples_per_class < 2 || samples_per_class % 2 != 0 || batch_size % samples_per_class != 0 {
        return Err(bad);
    }
    Ok(batch_size * (batch_size - samples_per_class) / 8)
}

/// Pairs of pair indices `(p, q)`, `p < q`, with different classes, in
/// lexicographic order.
pub fn enumerate_combinations(pairs: &[PositivePair]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for p in 0..pairs.len() {
        for q in p + 1..pairs.len() {
            if pairs[p].label != pairs[q].label {
                out.push((p, q));
            }
        }
    }
    out
}

/// The solved instance for one combination. `p1` and `params.0` belong to
/// the lower pair index, `p2` and `params.1` to the higher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationEntry {
    pub pair_a: usize,
    pub pair_b: usize,
    pub case_id: u8,
    /// `(α, β)` for arcs, `(k1, k2)` for segments.
    pub params: (f64, f64),
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub distance: f64,
}

impl CombinationEntry {
    /// The optimal point on pair `pair` (which must be one of the two).
    pub fn point_on(&self, pair: usize) -> &[f64] {
        if pair == self.pair_a {
            &self.p1
        } else {
            &self.p2
        }
    }

    pub fn param_on(&self, pair: usize) -> f64 {
        if pair == self.pair_a {
            self.params.0
        } else {
            self.params.1
        }
    }

    pub fn other(&self, pair: usize) -> usize {
        if pair == self.pair_a {
            self.pair_b
        } else {
            self.pair_a
        }
    }
}

/// Optimal distances for every cross-class combination plus the per-pair
/// minimum over negatives.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalDistanceTable {
    pub variant: Variant,
    pub positive_pairs: Vec<PositivePair>,
    pub combinations: Vec<CombinationEntry>,
    /// Dense `pair × pair` lookup into `combinations`.
    index: Vec<Option<usize>>,
    pub per_pair_min: Vec<f64>,
    /// Index into `combinations` attaining `per_pair_min`.
    pub per_pair_argmin: Vec<usize>,
}

impl OptimalDistanceTable {
    pub fn num_pairs(&self) -> usize {
        self.positive_pairs.len()
    }

    /// Combination between pair indices `p` and `q`, in either order.
    pub fn entry(&self, p: usize, q: usize) -> Option<&CombinationEntry> {
        let n = self.num_pairs();
        if p >= n || q >= n {
            return None;
        }
        self.index[p * n + q].map(|k| &self.combinations[k])
    }

    pub fn pair_distance(&self, p: usize, q: usize) -> Option<f64> {
        self.entry(p, q).map(|e| e.distance)
    }

    /// Pair index of a sample.
    pub fn pair_of(&self, sample: usize) -> Option<usize> {
        self.positive_pairs.iter().position(|p| p.i == sample || p.j == sample)
    }

    /// `d_{i,j,k,l}` keyed by sample indices; `(i, j)` and `(k, l)` must be
    /// pairs from `build_pairs` (either orientation).
    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Option<f64> {
        let find = |a: usize, b: usize| {
            self.positive_pairs
                .iter()
                .position(|p| (p.i == a && p.j == b) || (p.i == b && p.j == a))
        };
        self.pair_distance(find(i, j)?, find(k, l)?)
    }

    /// Rows of `(i, j, k, l, distance)`, both orientations of every
    /// combination, sorted lexicographically.
    pub fn rows(&self) -> Vec<(usize, usize, usize, usize, f64)> {
        let mut rows: Vec<_> = self
            .combinations
            .iter()
            .flat_map(|c| {
                let (a, b) = (self.positive_pairs[c.pair_a], self.positive_pairs[c.pair_b]);
                [(a.i, a.j, b.i, b.j, c.distance), (b.i, b.j, a.i, a.j, c.distance)]
            })
            .collect();
        rows.sort_by(|x, y| (x.0, x.1, x.2, x.3).cmp(&(y.0, y.1, y.2, y.3)));
        rows
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BatchError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "k", "l", "distance"])?;
        for (i, j, k, l, d) in self.rows() {
            w.write_record(&[i.to_string(), j.to_string(), k.to_string(), l.to_string(), d.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

fn solve_arc_pair(a: &Arc, b: &Arc, pa: usize, pb: usize) -> Result<CombinationEntry, GeometryError> {
    let problem = ArcProblem::from_arcs(a.clone(), b.clone())?;
    let s = optimal_arc_distance(&problem);
    Ok(CombinationEntry {
        pair_a: pa,
        pair_b: pb,
        case_id: s.candidate.case_id,
        params: (s.candidate.alpha, s.candidate.beta),
        p1: s.p1.into_inner(),
        p2: s.p2.into_inner(),
        distance: s.distance,
    })
}

fn solve_segment_pair(
    x: (&UnitVec, &UnitVec),
    y: (&UnitVec, &UnitVec),
    pa: usize,
    pb: usize,
) -> Result<CombinationEntry, GeometryError> {
    let problem = SegmentProblem::new(
        x.0.as_slice().to_vec(),
        x.1.as_slice().to_vec(),
        y.0.as_slice().to_vec(),
        y.1.as_slice().to_vec(),
    )?;
    let entry = match optimal_segment_distance(&problem) {
        Ok(s) => CombinationEntry {
            pair_a: pa,
            pair_b: pb,
            case_id: s.candidate.case_id,
            params: (s.candidate.k1, s.candidate.k2),
            distance: s.distance,
            p1: s.p1,
            p2: s.p2,
        },
        // Both segments are points: the distance between them is the answer.
        Err(SegmentError::DegenerateSegment) => CombinationEntry {
            pair_a: pa,
            pair_b: pb,
            case_id: 5,
            params: (0.0, 0.0),
            distance: geometry::norm(
                &x.0.as_slice().iter().zip(y.0.as_slice()).map(|(p, q)| p - q).collect::<Vec<_>>(),
            ),
            p1: x.0.as_slice().to_vec(),
            p2: y.0.as_slice().to_vec(),
        },
        Err(SegmentError::Geometry(e)) => return Err(e),
    };
    Ok(entry)
}

/// Solves every cross-class combination of the batch.
pub fn optimal_distance_table(batch: &LabeledBatch, variant: Variant) -> Result<OptimalDistanceTable, BatchError> {
    let pairs = build_pairs(batch.labels())?;
    if batch.classes().len() < 2 {
        return Err(BatchError::SingleClass);
    }
    let combos = enumerate_combinations(&pairs);
    let emb = batch.embeddings();
    let combinations: Vec<CombinationEntry> = match variant {
        Variant::Arc => {
            let arcs = pairs
                .iter()
                .map(|p| Arc::new(emb[p.i].clone(), emb[p.j].clone()))
                .collect::<Result<Vec<_>, _>>()?;
            combos
                .par_iter()
                .map(|&(p, q)| solve_arc_pair(&arcs[p], &arcs[q], p, q))
                .collect::<Result<Vec<_>, _>>()?
        }
        Variant::Segment => combos
            .par_iter()
            .map(|&(p, q)| {
                let (a, b) = (pairs[p], pairs[q]);
                solve_segment_pair((&emb[a.i], &emb[a.j]), (&emb[b.i], &emb[b.j]), p, q)
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    let n = pairs.len();
    let mut index = vec![None; n * n];
    let mut per_pair_min = vec![f64::INFINITY; n];
    let mut per_pair_argmin = vec![usize::MAX; n];
    for (k, c) in combinations.iter().enumerate() {
        index[c.pair_a * n + c.pair_b] = Some(k);
        index[c.pair_b * n + c.pair_a] = Some(k);
    }
    for p in 0..n {
        for q in 0..n {
            if let Some(k) = index[p * n + q] {
                if combinations[k].distance < per_pair_min[p] {
                    per_pair_min[p] = combinations[k].distance;
                    per_pair_argmin[p] = k;
                }
            }
        }
    }
    Ok(OptimalDistanceTable {
        variant,
        positive_pairs: pairs,
        combinations,
        index,
        per_pair_min,
        per_pair_argmin,
    })
}
