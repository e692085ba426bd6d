//! Metric-learning losses over a labelled batch, plain and LoOp.
//!
//! The plain losses mine negatives among the batch samples; the LoOp forms
//! replace the mined negative distance with the optimal distance between the
//! positive pair's curve and a negative pair's curve, read from an
//! [`OptimalDistanceTable`]. Every loss can also return its gradient with
//! respect to the embeddings (ambient coordinates). For the LoOp forms the
//! gradient flows through the optimal points with the optimal parameters held
//! fixed, except that a parameter at its lower or upper bound pins the point
//! to the corresponding sample.

use crate::batch_engine::{build_pairs, BatchError, CombinationEntry, LabeledBatch, OptimalDistanceTable, Variant};
use crate::geometry::{self, UnitVec};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum LossError {
    #[error("the batch has a single class, so there are no negatives")]
    NoNegatives,
    #[error("the distance table was built on a different pairing of the batch")]
    TableMismatch,
    #[error("a LoOp loss needs an optimal-distance table")]
    MissingTable,
    #[error("invalid loss configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Batch(#[from] BatchError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Denominator used to average the summed terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Divide by the number of terms summed.
    #[default]
    PerTerm,
    /// Divide by the number of classes in the batch.
    PerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    pub margin: f64,
    pub ms_epsilon: f64,
    pub ms_margin: f64,
    pub ms_alpha: f64,
    pub ms_beta: f64,
    pub normalization: Normalization,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            margin: 0.2,
            ms_epsilon: 0.1,
            ms_margin: 0.5,
            ms_alpha: 2.0,
            ms_beta: 50.0,
            normalization: Normalization::PerTerm,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), LossError> {
        let bad = |m: &str| Err(LossError::InvalidConfig(m.into()));
        if !(self.margin >= 0.0) {
            return bad("margin must be non-negative");
        }
        if !(self.ms_alpha > 0.0 && self.ms_beta > 0.0) {
            return bad("ms_alpha and ms_beta must be positive");
        }
        if !(self.ms_margin > -1.0 && self.ms_margin < 1.0) {
            return bad("ms_margin must lie in (-1, 1)");
        }
        if !self.ms_epsilon.is_finite() {
            return bad("ms_epsilon must be finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Triplet,
    LoopTriplet,
    Hphn,
    LoopHphn,
    LiftedStructure,
    LoopLs,
    Ms,
    LoopMs,
}

impl LossKind {
    pub const ALL: [LossKind; 8] = [
        LossKind::Triplet,
        LossKind::LoopTriplet,
        LossKind::Hphn,
        LossKind::LoopHphn,
        LossKind::LiftedStructure,
        LossKind::LoopLs,
        LossKind::Ms,
        LossKind::LoopMs,
    ];

    pub fn uses_table(self) -> bool {
        matches!(self, LossKind::LoopTriplet | LossKind::LoopHphn | LossKind::LoopLs | LossKind::LoopMs)
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Triplet => "triplet",
            LossKind::LoopTriplet => "loop_triplet",
            LossKind::Hphn => "hphn",
            LossKind::LoopHphn => "loop_hphn",
            LossKind::LiftedStructure => "lifted_structure",
            LossKind::LoopLs => "loop_ls",
            LossKind::Ms => "ms",
            LossKind::LoopMs => "loop_ms",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown loss `{s}`"))
    }
}

/// Sample indices identifying one summed term: `(i, j, k)` for triplet,
/// `(i, j, k, l)` for LoOp triplet, `(i, j)` for pair losses, `(i)` for MS.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TermKey(pub Vec<usize>);

impl fmt::Display for TermKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossValue {
    pub total: f64,
    pub per_term: Vec<(TermKey, f64)>,
}

impl LossValue {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), LossError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["term", "contribution"])?;
        for (k, v) in &self.per_term {
            w.write_record(&[k.to_string(), v.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Distances `d = ‖X[i] − X[j]‖` and similarities `s = 1 − d²/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairwise {
    n: usize,
    d: Vec<f64>,
    s: Vec<f64>,
}

impl Pairwise {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.n + j]
    }

    pub fn sim(&self, i: usize, j: usize) -> f64 {
        self.s[i * self.n + j]
    }
}

/// Computes each unordered pair once and mirrors it, so both tables are
/// exactly symmetric.
pub fn pairwise(batch: &LabeledBatch) -> Pairwise {
    let emb = batch.embeddings();
    let n = emb.len();
    let mut d = vec![0.0; n * n];
    let mut s = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let dij = geometry::chord_distance(&emb[i], &emb[j]);
            let sij = 1.0 - dij * dij / 2.0;
            d[i * n + j] = dij;
            d[j * n + i] = dij;
            s[i * n + j] = sij;
            s[j * n + i] = sij;
        }
    }
    Pairwise { n, d, s }
}

fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

/// Shared state: batch, distances, pairing and the optional gradient sink.
struct Ctx<'a> {
    batch: &'a LabeledBatch,
    pw: Pairwise,
    pairs: Vec<(usize, usize)>,
    pair_of: Vec<usize>,
    grads: Option<Vec<Vec<f64>>>,
}

impl<'a> Ctx<'a> {
    fn new(batch: &'a LabeledBatch, with_grad: bool) -> Result<Self, LossError> {
        if batch.classes().len() < 2 {
            return Err(LossError::NoNegatives);
        }
        let pairs: Vec<(usize, usize)> = build_pairs(batch.labels())?.iter().map(|p| (p.i, p.j)).collect();
        let mut pair_of = vec![0; batch.len()];
        for (p, &(i, j)) in pairs.iter().enumerate() {
            pair_of[i] = p;
            pair_of[j] = p;
        }
        let grads = with_grad.then(|| vec![vec![0.0; batch.dim()]; batch.len()]);
        Ok(Ctx {
            batch,
            pw: pairwise(batch),
            pairs,
            pair_of,
            grads,
        })
    }

    fn label(&self, i: usize) -> u32 {
        self.batch.labels()[i]
    }

    fn x(&self, i: usize) -> &[f64] {
        self.batch.embeddings()[i].as_slice()
    }

    fn same(&self, i: usize, k: usize) -> bool {
        self.label(i) == self.label(k)
    }

    /// Adds `coef · ∂d_ab` to the gradient sink.
    fn add_dist(&mut self, a: usize, b: usize, coef: f64) {
        let d = self.pw.dist(a, b);
        if self.grads.is_none() || d == 0.0 || coef == 0.0 {
            return;
        }
        let scale = coef / d;
        let diff: Vec<f64> = self.x(a).iter().zip(self.x(b)).map(|(p, q)| scale * (p - q)).collect();
        let g = self.grads.as_mut().expect("checked");
        for (t, v) in g[a].iter_mut().zip(&diff) {
            *t += v;
        }
        for (t, v) in g[b].iter_mut().zip(&diff) {
            *t -= v;
        }
    }

    /// Adds `coef · ∂s_ab` with `s = 1 − d²/2`.
    fn add_sim(&mut self, a: usize, b: usize, coef: f64) {
        if self.grads.is_none() || coef == 0.0 {
            return;
        }
        let diff: Vec<f64> = self.x(a).iter().zip(self.x(b)).map(|(p, q)| coef * (p - q)).collect();
        let g = self.grads.as_mut().expect("checked");
        for (t, v) in g[a].iter_mut().zip(&diff) {
            *t -= v;
        }
        for (t, v) in g[b].iter_mut().zip(&diff) {
            *t += v;
        }
    }

    /// Adds `coef · ∂D` for the optimal distance of combination `entry`.
    fn add_table(&mut self, variant: Variant, entry: &CombinationEntry, coef: f64) {
        if self.grads.is_none() || entry.distance == 0.0 || coef == 0.0 {
            return;
        }
        let scale = coef / entry.distance;
        let g: Vec<f64> = entry.p1.iter().zip(&entry.p2).map(|(a, b)| scale * (a - b)).collect();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        for (pair, gp) in [(entry.pair_a, g), (entry.pair_b, neg)] {
            let (i, j) = self.pairs[pair];
            let theta = entry.param_on(pair);
            let (gi, gj) = match variant {
                Variant::Arc => {
                    let emb = self.batch.embeddings();
                    let bound = param_bound(entry.case_id, pair == entry.pair_a);
                    arc_point_pullback(&emb[i], &emb[j], theta, bound, &gp)
                }
                Variant::Segment => segment_point_pullback(theta, &gp),
            };
            let sink = self.grads.as_mut().expect("checked");
            sink[i].iter_mut().zip(&gi).for_each(|(t, v)| *t += v);
            sink[j].iter_mut().zip(&gj).for_each(|(t, v)| *t += v);
        }
    }

    fn finish(self, terms: Vec<(TermKey, f64)>, cfg: &LossConfig) -> (LossValue, Option<Vec<Vec<f64>>>) {
        let denom = match cfg.normalization {
            Normalization::PerTerm => terms.len(),
            Normalization::PerClass => self.batch.classes().len(),
        }
        .max(1) as f64;
        let total = terms.iter().map(|(_, v)| v).sum::<f64>() / denom;
        let grads = self.grads.map(|mut g| {
            g.iter_mut().flatten().for_each(|v| *v /= denom);
            g
        });
        (LossValue { total, per_term: terms }, grads)
    }
}

/// Where a curve parameter sits in the winning KKT case.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamBound {
    Lower,
    Upper,
    Free,
}

/// Bound status of the first (`α`, `k1`) or second (`β`, `k2`) parameter
/// for a case id.
pub fn param_bound(case_id: u8, first: bool) -> ParamBound {
    let (lower, upper): (&[u8], &[u8]) = if first {
        (&[1, 5, 6], &[2, 7, 8])
    } else {
        (&[3, 5, 7], &[4, 6, 8])
    };
    if lower.contains(&case_id) {
        ParamBound::Lower
    } else if upper.contains(&case_id) {
        ParamBound::Upper
    } else {
        ParamBound::Free
    }
}

/// Pulls a gradient `g` at the arc point `p(θ)` back onto the endpoints
/// `x1`, `x2`, holding `θ` fixed. A parameter at a bound pins the point to
/// that endpoint, so the gradient passes to it unchanged.
pub fn arc_point_pullback(x1: &UnitVec, x2: &UnitVec, theta: f64, bound: ParamBound, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dim = g.len();
    match bound {
        ParamBound::Lower => return (g.to_vec(), vec![0.0; dim]),
        ParamBound::Upper => return (vec![0.0; dim], g.to_vec()),
        ParamBound::Free => {}
    }
    let c12 = x1.dot(x2);
    let (a, b) = (x1.as_slice(), x2.as_slice());
    let r: Vec<f64> = b.iter().zip(a).map(|(q, p)| q - c12 * p).collect();
    let r_norm = geometry::norm(&r);
    if r_norm == 0.0 {
        return (g.to_vec(), vec![0.0; dim]);
    }
    let n2: Vec<f64> = r.iter().map(|v| v / r_norm).collect();
    let (s, c) = theta.sin_cos();
    let n2g = geometry::dot(&n2, g);
    let g_r: Vec<f64> = g.iter().zip(&n2).map(|(gv, nv)| s * (gv - n2g * nv) / r_norm).collect();
    let x1gr = geometry::dot(a, &g_r);
    let g_x2: Vec<f64> = g_r.iter().zip(a).map(|(v, p)| v - x1gr * p).collect();
    let g_x1: Vec<f64> = (0..dim).map(|m| c * g[m] - c12 * g_r[m] - b[m] * x1gr).collect();
    (g_x1, g_x2)
}

/// Pullback through `p = (1 − k)·x1 + k·x2` with `k` fixed.
pub fn segment_point_pullback(k: f64, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (g.iter().map(|v| (1.0 - k) * v).collect(), g.iter().map(|v| k * v).collect())
}

fn check_table(ctx: &Ctx<'_>, table: &OptimalDistanceTable) -> Result<(), LossError> {
    let same = table.positive_pairs.len() == ctx.pairs.len()
        && table.positive_pairs.iter().zip(&ctx.pairs).all(|(p, &(i, j))| p.i == i && p.j == j);
    if same {
        Ok(())
    } else {
        Err(LossError::TableMismatch)
    }
}

fn triplet_impl(ctx: &mut Ctx<'_>, cfg: &LossConfig) -> Vec<(TermKey, f64)> {
    let n = ctx.batch.len();
    let mut terms = Vec::new();
    for p in 0..ctx.pairs.len() {
        let (i0, j0) = ctx.pairs[p];
        for (i, j) in [(i0, j0), (j0, i0)] {
            for k in 0..n {
                if ctx.same(i, k) {
                    continue;
                }
                let v = hinge(ctx.pw.dist(i, j) - ctx.pw.dist(i, k) + cfg.margin);
                if v > 0.0 {
                    ctx.add_dist(i, j, 1.0);
                    ctx.add_dist(i, k, -1.0);
                }
                terms.push((TermKey(vec![i, j, k]), v));
            }
        }
    }
    terms
}

fn loop_triplet_impl(ctx: &mut Ctx<'_>, table: &OptimalDistanceTable, cfg: &LossConfig) -> Vec<(TermKey, f64)> {
    let mut terms = Vec::new();
    for p in 0..ctx.pairs.len() {
        let (i, j) = ctx.pairs[p];
        for q in 0..ctx.pairs.len() {
            let Some(entry) = table.entry(p, q) else { continue };
            let (k, l) = ctx.pairs[q];
            let v = hinge(ctx.pw.dist(i, j) - entry.distance + cfg.margin);
            if v > 0.0 {
                ctx.add_dist(i, j, 1.0);
                ctx.add_table(table.variant, entry, -1.0);
            }
            terms.push((TermKey(vec![i, j, k, l]), v));
        }
    }
    terms
}

/// Farthest positive and nearest negative of sample `i` with the attaining
/// indices (first index on ties).
fn hardest(ctx: &Ctx<'_>, i: usize) -> ((f64, usize), (f64, usize)) {
    let mut pos = (f64::NEG_INFINITY, usize::MAX);
    let mut neg = (f64::INFINITY, usize::MAX);
    for k in 0..ctx.batch.len() {
        if k == i {
            continue;
        }
        let d = ctx.pw.dist(i, k);
        if ctx.same(i, k) {
            if d > pos.0 {
                pos = (d, k);
            }
        } else if d < neg.0 {
            neg = (d, k);
        }
    }
    (pos, neg)
}

#[derive(Clone, Copy)]
enum PosTerm {
    Hardest,
    Pair,
}

/// Pair-level hinge shared by HPHN and lifted structure, plain and LoOp,
/// `[pos + m − neg]_+` with one term per positive pair.
fn pair_hinge_impl(
    ctx: &mut Ctx<'_>,
    table: Option<&OptimalDistanceTable>,
    pos_term: PosTerm,
    cfg: &LossConfig,
) -> Vec<(TermKey, f64)> {
    let mut terms = Vec::new();
    for p in 0..ctx.pairs.len() {
        let (i, j) = ctx.pairs[p];
        let ((pos_i, pk_i), (neg_i, nk_i)) = hardest(ctx, i);
        let ((pos_j, pk_j), (neg_j, nk_j)) = hardest(ctx, j);
        let (pos, pos_pair) = match pos_term {
            PosTerm::Hardest if pos_j > pos_i => (pos_j, (j, pk_j)),
            PosTerm::Hardest => (pos_i, (i, pk_i)),
            PosTerm::Pair => (ctx.pw.dist(i, j), (i, j)),
        };
        let neg = match table {
            Some(t) => t.per_pair_min[p],
            None => neg_i.min(neg_j),
        };
        let v = hinge(pos + cfg.margin - neg);
        if v > 0.0 {
            ctx.add_dist(pos_pair.0, pos_pair.1, 1.0);
            match table {
                Some(t) => {
                    let entry = &t.combinations[t.per_pair_argmin[p]];
                    ctx.add_table(t.variant, entry, -1.0);
                }
                None if neg_j < neg_i => ctx.add_dist(j, nk_j, -1.0),
                None => ctx.add_dist(i, nk_i, -1.0),
            }
        }
        terms.push((TermKey(vec![i, j]), v));
    }
    terms
}

/// Mined pairs `(anchor, other)` of the MS loss.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MinedPairs {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

/// Mining thresholds of anchor `i`: smallest positive and largest negative
/// similarity.
fn ms_thresholds(ctx: &Ctx<'_>, i: usize) -> (f64, f64) {
    let mut min_pos = f64::INFINITY;
    let mut max_neg = f64::NEG_INFINITY;
    for k in 0..ctx.batch.len() {
        if k == i {
            continue;
        }
        let s = ctx.pw.sim(i, k);
        if ctx.same(i, k) {
            min_pos = min_pos.min(s);
        } else {
            max_neg = max_neg.max(s);
        }
    }
    (min_pos, max_neg)
}

fn ms_mine(ctx: &Ctx<'_>, table: Option<&OptimalDistanceTable>, cfg: &LossConfig) -> MinedPairs {
    let mut mined = MinedPairs::default();
    for i in 0..ctx.batch.len() {
        let (min_pos, max_neg) = ms_thresholds(ctx, i);
        for k in 0..ctx.batch.len() {
            if k == i {
                continue;
            }
            let s = ctx.pw.sim(i, k);
            if ctx.same(i, k) {
                if s < max_neg + cfg.ms_epsilon {
                    mined.positives.push((i, k));
                }
            } else {
                let s_neg = match table {
                    Some(t) => {
                        let d = t
                            .pair_distance(ctx.pair_of[i], ctx.pair_of[k])
                            .expect("cross-class pairs are tabulated");
                        1.0 - d * d / 2.0
                    }
                    None => s,
                };
                if s_neg > min_pos - cfg.ms_epsilon {
                    mined.negatives.push((i, k));
                }
            }
        }
    }
    mined
}

fn ms_impl(ctx: &mut Ctx<'_>, table: Option<&OptimalDistanceTable>, cfg: &LossConfig) -> Vec<(TermKey, f64)> {
    let mined = ms_mine(ctx, table, cfg);
    let (alpha, beta, lambda) = (cfg.ms_alpha, cfg.ms_beta, cfg.ms_margin);
    let n = ctx.batch.len();
    let mut pos_by_anchor: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut neg_by_anchor: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, k) in &mined.positives {
        pos_by_anchor[i].push(k);
    }
    for &(i, k) in &mined.negatives {
        neg_by_anchor[i].push(k);
    }
    let mut terms = Vec::with_capacity(n);
    for i in 0..n {
        let pos_w: Vec<f64> = pos_by_anchor[i].iter().map(|&k| (-alpha * (ctx.pw.sim(i, k) - lambda)).exp()).collect();
        let neg_w: Vec<f64> = neg_by_anchor[i].iter().map(|&k| (beta * (ctx.pw.sim(i, k) - lambda)).exp()).collect();
        let pos_sum: f64 = pos_w.iter().sum();
        let neg_sum: f64 = neg_w.iter().sum();
        let v = pos_sum.ln_1p() / alpha + neg_sum.ln_1p() / beta;
        for (&k, w) in pos_by_anchor[i].iter().zip(&pos_w) {
            ctx.add_sim(i, k, -w / (1.0 + pos_sum));
        }
        for (&k, w) in neg_by_anchor[i].iter().zip(&neg_w) {
            ctx.add_sim(i, k, w / (1.0 + neg_sum));
        }
        terms.push((TermKey(vec![i]), v));
    }
    terms
}

fn run(
    kind: LossKind,
    batch: &LabeledBatch,
    table: Option<&OptimalDistanceTable>,
    cfg: &LossConfig,
    with_grad: bool,
) -> Result<(LossValue, Option<Vec<Vec<f64>>>), LossError> {
    cfg.validate()?;
    let mut ctx = Ctx::new(batch, with_grad)?;
    let table = if kind.uses_table() {
        let t = table.ok_or(LossError::MissingTable)?;
        check_table(&ctx, t)?;
        Some(t)
    } else {
        None
    };
    let terms = match kind {
        LossKind::Triplet => triplet_impl(&mut ctx, cfg),
        LossKind::LoopTriplet => loop_triplet_impl(&mut ctx, table.expect("checked"), cfg),
        LossKind::Hphn | LossKind::LoopHphn => pair_hinge_impl(&mut ctx, table, PosTerm::Hardest, cfg),
        LossKind::LiftedStructure | LossKind::LoopLs => pair_hinge_impl(&mut ctx, table, PosTerm::Pair, cfg),
        LossKind::Ms | LossKind::LoopMs => ms_impl(&mut ctx, table, cfg),
    };
    Ok(ctx.finish(terms, cfg))
}

/// Loss value of `kind`; `table` is required for the LoOp losses.
pub fn evaluate(
    kind: LossKind,
    batch: &LabeledBatch,
    table: Option<&OptimalDistanceTable>,
    cfg: &LossConfig,
) -> Result<LossValue, LossError> {
    Ok(run(kind, batch, table, cfg, false)?.0)
}

/// Loss value and its gradient with respect to every embedding.
pub fn evaluate_with_gradient(
    kind: LossKind,
    batch: &LabeledBatch,
    table: Option<&OptimalDistanceTable>,
    cfg: &LossConfig,
) -> Result<(LossValue, Vec<Vec<f64>>), LossError> {
    let (v, g) = run(kind, batch, table, cfg, true)?;
    Ok((v, g.expect("requested")))
}

pub fn triplet(batch: &LabeledBatch, cfg: &LossConfig) -> Result<LossValue, LossError> {
    evaluate(LossKind::Triplet, batch, None, cfg)
}

pub fn loop_triplet(batch: &LabeledBatch, table: &OptimalDistanceTable, cfg: &LossConfig) -> Result<LossValue, LossError> {
    evaluate(LossKind::LoopTriplet, batch, Some(table), cfg)
}

pub fn hphn_triplet(batch: &LabeledBatch, cfg: &LossConfig) -> Result<LossValue, LossError> {
    evaluate(LossKind::Hphn, batch, None, cfg)
}

pub fn loop_hphn(batch: &LabeledBatch, table: &OptimalDistanceTable, cfg: &LossConfig) -> Result<LossValue, LossError> {
    evaluate(LossKind::LoopHphn, batch, Some(table), cfg)
}

pub fn lifted_structure(batch: &LabeledBatch, cfg: &LossConfig) -> Result<LossValue, LossError> {
    evaluate(LossKind::LiftedStructure, batch, None, cfg)
}

pub fn loop_ls(batch: &LabeledBatch, table: &OptimalDistanceTable, cfg: &LossConfig) -> Result<LossValue, LossError> {
    evaluate(LossKind::LoopLs, batch, Some(table), cfg)
}

pub fn ms_loss(batch: &LabeledBatch, cfg: &LossConfig) -> Result<LossValue, LossError> {
    evaluate(LossKind::Ms, batch, None, cfg)
}

pub fn loop_ms_loss(batch: &LabeledBatch, table: &OptimalDistanceTable, cfg: &LossConfig) -> Result<LossValue, LossError> {
    evaluate(LossKind::LoopMs, batch, Some(table), cfg)
}

/// Pairs selected by the plain MS mining step.
pub fn ms_mining(batch: &LabeledBatch, cfg: &LossConfig) -> Result<MinedPairs, LossError> {
    let ctx = Ctx::new(batch, false)?;
    Ok(ms_mine(&ctx, None, cfg))
}

/// Pairs selected when the negative test uses the optimal similarity
/// `1 − d²_{i,j,k,l}/2`; positive mining is unchanged.
pub fn loop_ms_mining(batch: &LabeledBatch, table: &OptimalDistanceTable, cfg: &LossConfig) -> Result<MinedPairs, LossError> {
    let ctx = Ctx::new(batch, false)?;
    check_table(&ctx, table)?;
    Ok(ms_mine(&ctx, Some(table), cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch_engine::optimal_distance_table;
    use crate::geometry::normalize;

    fn batch(rows: &[(&[f64], u32)]) -> LabeledBatch {
        LabeledBatch::new(
            rows.iter().map(|(v, _)| normalize(v).unwrap()).collect(),
            rows.iter().map(|(_, l)| *l).collect(),
        )
        .unwrap()
    }

    fn planar(angles: &[(f64, u32)]) -> LabeledBatch {
        LabeledBatch::new(
            angles.iter().map(|&(t, _)| normalize(&[t.cos(), t.sin(), 0.0]).unwrap()).collect(),
            angles.iter().map(|&(_, l)| l).collect(),
        )
        .unwrap()
    }

    #[test]
    fn pairwise_examples() {
        let b = batch(&[(&[1.0, 0.0], 0), (&[1.0, 0.0], 0), (&[-1.0, 0.0], 1), (&[0.0, 1.0], 1)]);
        let pw = pairwise(&b);
        assert_eq!((pw.dist(0, 1), pw.sim(0, 1)), (0.0, 1.0));
        assert_eq!((pw.dist(0, 2), pw.sim(0, 2)), (2.0, -1.0));
        assert!((pw.dist(0, 3) - 2f64.sqrt()).abs() < 1e-15 && pw.sim(0, 3).abs() < 1e-15);
        assert_eq!(pw.dist(3, 0), pw.dist(0, 3));
    }

    #[test]
    fn hinge_arithmetic() {
        let m = 0.2;
        assert_eq!(hinge(0.5 - 1.0 + m), 0.0);
        assert!((hinge(1.0 - 0.5 + m) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn triplet_matches_enumeration() {
        let b = planar(&[(0.0, 0), (0.4, 0), (0.3, 1), (1.2, 1)]);
        let cfg = LossConfig::default();
        let pw = pairwise(&b);
        let mut sum = 0.0;
        let mut count = 0;
        for (i, j) in [(0, 1), (1, 0), (2, 3), (3, 2)] {
            for k in 0..4 {
                if b.labels()[k] != b.labels()[i] {
                    sum += (pw.dist(i, j) - pw.dist(i, k) + 0.2f64).max(0.0);
                    count += 1;
                }
            }
        }
        let v = triplet(&b, &cfg).unwrap();
        assert_eq!(v.per_term.len(), count);
        assert!((v.total - sum / count as f64).abs() < 1e-15);
    }

    #[test]
    fn loop_triplet_single_pair() {
        // Pair (i,j) at distance 0.3, negative pair touching it: D = 0.
        let t = 2.0 * (0.15f64).asin();
        let b = planar(&[(0.0, 0), (t, 0), (0.0, 1), (-1.0, 1)]);
        let table = optimal_distance_table(&b, Variant::Arc).unwrap();
        assert_eq!(table.per_pair_min[0], 0.0);
        let v = loop_triplet(&b, &table, &LossConfig::default()).unwrap();
        let first = v.per_term.iter().find(|(k, _)| k.0 == vec![0, 1, 2, 3]).unwrap();
        assert!((first.1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn hphn_equals_ls_for_two_per_class() {
        let b = planar(&[(0.0, 0), (0.5, 0), (0.7, 1), (1.5, 1), (2.5, 2), (2.0, 2)]);
        let cfg = LossConfig { margin: 0.5, ..LossConfig::default() };
        let h = hphn_triplet(&b, &cfg).unwrap();
        let l = lifted_structure(&b, &cfg).unwrap();
        assert_eq!(h, l);
        assert!(h.total > 0.0);
    }

    #[test]
    fn separated_classes_give_zero() {
        let b = planar(&[(0.0, 0), (0.01, 0), (3.0, 1), (3.01, 1)]);
        let cfg = LossConfig::default();
        let table = optimal_distance_table(&b, Variant::Arc).unwrap();
        for kind in LossKind::ALL {
            if matches!(kind, LossKind::Ms | LossKind::LoopMs) {
                continue;
            }
            assert_eq!(evaluate(kind, &b, Some(&table), &cfg).unwrap().total, 0.0, "{kind}");
        }
    }

    #[test]
    fn ms_ties_are_excluded() {
        // Orthonormal samples: every similarity is 0, so at ε = 0 both strict
        // tests fail.
        let b = batch(&[(&[1.0, 0.0, 0.0, 0.0], 0), (&[0.0, 1.0, 0.0, 0.0], 0), (&[0.0, 0.0, 1.0, 0.0], 1), (&[0.0, 0.0, 0.0, 1.0], 1)]);
        let cfg = LossConfig { ms_epsilon: 0.0, ..LossConfig::default() };
        let m = ms_mining(&b, &cfg).unwrap();
        assert!(m.positives.is_empty() && m.negatives.is_empty());
        assert_eq!(ms_loss(&b, &cfg).unwrap().total, 0.0);
        let m = ms_mining(&b, &LossConfig::default()).unwrap();
        assert_eq!(m.positives.len(), 4);
        assert_eq!(m.negatives.len(), 8);
    }

    #[test]
    fn ms_value_by_hand() {
        let b = planar(&[(0.0, 0), (0.3, 0), (0.5, 1), (2.0, 1)]);
        let cfg = LossConfig::default();
        let pw = pairwise(&b);
        // Anchor 0: positive 1, negatives 2, 3.
        let min_pos = pw.sim(0, 1);
        let max_neg = pw.sim(0, 2).max(pw.sim(0, 3));
        let mut pos = 0.0;
        if pw.sim(0, 1) < max_neg + 0.1 {
            pos += (-2.0 * (pw.sim(0, 1) - 0.5)).exp();
        }
        let mut neg = 0.0;
        for k in [2, 3] {
            if pw.sim(0, k) > min_pos - 0.1 {
                neg += (50.0 * (pw.sim(0, k) - 0.5)).exp();
            }
        }
        let expected = (1.0 + pos).ln() / 2.0 + (1.0 + neg).ln() / 50.0;
        let v = ms_loss(&b, &cfg).unwrap();
        assert!((v.per_term[0].1 - expected).abs() < 1e-12);
    }

    #[test]
    fn per_class_normalization() {
        let b = planar(&[(0.0, 0), (0.4, 0), (0.3, 1), (1.2, 1)]);
        let per_term = triplet(&b, &LossConfig::default()).unwrap();
        let cfg = LossConfig { normalization: Normalization::PerClass, ..LossConfig::default() };
        let per_class = triplet(&b, &cfg).unwrap();
        let sum: f64 = per_term.per_term.iter().map(|(_, v)| v).sum();
        assert!((per_class.total - sum / 2.0).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let one = planar(&[(0.0, 0), (0.4, 0)]);
        assert!(matches!(triplet(&one, &LossConfig::default()), Err(LossError::NoNegatives)));
        let b = planar(&[(0.0, 0), (0.4, 0), (0.3, 1), (1.2, 1)]);
        assert!(matches!(evaluate(LossKind::LoopTriplet, &b, None, &LossConfig::default()), Err(LossError::MissingTable)));
        let bad = LossConfig { ms_alpha: 0.0, ..LossConfig::default() };
        assert!(matches!(ms_loss(&b, &bad), Err(LossError::InvalidConfig(_))));
        let other = planar(&[(0.0, 0), (0.3, 1), (0.4, 0), (1.2, 1)]);
        let t = optimal_distance_table(&other, Variant::Arc).unwrap();
        assert!(matches!(loop_triplet(&b, &t, &LossConfig::default()), Err(LossError::TableMismatch)));
    }

    #[test]
    fn loss_kind_names_round_trip() {
        for k in LossKind::ALL {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn terms_export_csv() {
        let b = planar(&[(0.0, 0), (0.4, 0), (0.3, 1), (1.2, 1)]);
        let v = hphn_triplet(&b, &LossConfig::default()).unwrap();
        let mut out = Vec::new();
        v.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert!(s.starts_with("term,contribution\n0-1,"));
        assert_eq!(s.lines().count(), 3);
    }
}
