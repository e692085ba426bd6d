//! Closed-form minimum distance between two bounded geodesic arcs.
//!
//! Minimizes `f(α, β) = −p1(α)·p2(β)` over the box `[0, α0] × [0, β0]` by
//! enumerating the nine active-set cases of the KKT system
//!
//! ```text
//! L = f − Σ λi gi,   g1 = −α, g2 = α − α0, g3 = −β, g4 = β − β0
//! ∂f/∂α + λ1 − λ2 = 0,   ∂f/∂β + λ3 − λ4 = 0,   λi gi = 0,   λi ≤ 0,   gi ≤ 0
//! ```
//!
//! Case 0 leaves every constraint slack, cases 1–4 pin one angle to a bound
//! and cases 5–8 are the box corners. Every case is evaluated, candidates that
//! violate the multiplier sign or feasibility conditions are discarded, and the
//! global minimum over the survivors (corners always included) wins.
//!
//! Note the multiplier sign convention: with `L = f − Σλg` the multipliers of
//! a minimizer are non-positive.

use crate::geometry::{self, Arc, GeometryError, ObjectiveCoeffs, UnitVec};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::{FRAC_PI_2, PI};

/// Slack on the multiplier sign test `λi ≤ 0`.
pub const LAMBDA_SLACK: f64 = 1e-9;
/// Slack on the box feasibility test.
pub const FEASIBILITY_SLACK: f64 = 1e-9;
/// Below this magnitude a tan-quadratic coefficient is treated as zero.
const QUADRATIC_EPS: f64 = 1e-12;

/// Two arcs, one per class, and the derived objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcProblem {
    x: Arc,
    y: Arc,
    coeffs: ObjectiveCoeffs,
}

impl ArcProblem {
    pub fn new(x1: UnitVec, x2: UnitVec, y1: UnitVec, y2: UnitVec) -> Result<Self, GeometryError> {
        geometry::check_same_dim(x1.dim(), y1.dim())?;
        let x = Arc::new(x1, x2)?;
        let y = Arc::new(y1, y2)?;
        Self::from_arcs(x, y)
    }

    pub fn from_arcs(x: Arc, y: Arc) -> Result<Self, GeometryError> {
        let coeffs = geometry::objective_coeffs(x.basis(), y.basis())?;
        Ok(ArcProblem { x, y, coeffs })
    }

    pub fn x(&self) -> &Arc {
        &self.x
    }

    pub fn y(&self) -> &Arc {
        &self.y
    }

    pub fn coeffs(&self) -> &ObjectiveCoeffs {
        &self.coeffs
    }

    pub fn alpha0(&self) -> f64 {
        self.x.extent()
    }

    pub fn beta0(&self) -> f64 {
        self.y.extent()
    }

    /// The same geometry with the roles of the two arcs exchanged.
    pub fn swapped(&self) -> Self {
        Self::from_arcs(self.y.clone(), self.x.clone()).expect("dimensions already agree")
    }
}

/// One KKT case candidate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktCandidate {
    pub case_id: u8,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: [f64; 4],
    pub f_value: f64,
}

/// The selected optimum and the optimal hard-negative pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktSolution {
    pub candidate: KktCandidate,
    pub p1: UnitVec,
    pub p2: UnitVec,
    pub distance: f64,
}

/// Every candidate evaluated for a problem, with its KKT verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub candidates: Vec<(KktCandidate, bool)>,
    pub winner: usize,
}

/// Maps a root of `tan θ = num / den` into `[0, π)`. A zero denominator
/// takes the `±π/2` limit; `0/0` (objective flat in θ) returns 0.
fn branch_angle(num: f64, den: f64) -> f64 {
    let theta = if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            FRAC_PI_2
        }
    } else {
        (num / den).atan()
    };
    if theta < 0.0 {
        theta + PI
    } else {
        theta + 0.0
    }
}

/// Roots of `cross·t² − lin·t − cross = 0` for `t = tan θ`, as angles in
/// `[0, π)`. `None` when both coefficients vanish (every θ is stationary).
fn tan_quadratic_angles(lin: f64, cross: f64) -> Option<[f64; 2]> {
    if cross.abs() < QUADRATIC_EPS {
        if lin.abs() < QUADRATIC_EPS {
            return None;
        }
        // Linear residual −lin·t = 0 plus the root at infinity.
        return Some([0.0, FRAC_PI_2]);
    }
    // (lin ± √(lin² + 4 cross²)) / (2 cross), evaluated without cancellation;
    // the roots multiply to −1.
    let disc = (lin * lin + 4.0 * cross * cross).sqrt();
    let q = if lin >= 0.0 { lin + disc } else { lin - disc };
    let t1 = q / (2.0 * cross);
    let t2 = -2.0 * cross / q;
    Some([branch_angle(t1, 1.0), branch_angle(t2, 1.0)])
}

fn interior_candidate(coeffs: &ObjectiveCoeffs, alpha: f64, beta: f64) -> KktCandidate {
    KktCandidate {
        case_id: 0,
        alpha,
        beta,
        lambda: [0.0; 4],
        f_value: coeffs.evaluate(alpha, beta),
    }
}

/// Case 0: stationary points of `f` with all multipliers zero.
///
/// `tan α` solves `(ab+cd) t² − A t − (ab+cd) = 0` with `A = a²−b²+c²−d²`
/// and `tan β` solves the analogue with `ac+bd` and `B = a²+b²−c²−d²`. Each
/// root is matched with its partner angle from the other stationarity
/// equation; roots whose partner equation is identically zero are paired
/// with the other quadratic's unmatched roots. When a quadratic degenerates
/// completely the objective is stationary along that whole angle and the
/// interval endpoints `0` and `alpha0` (or `beta0`) stand in.
pub fn solve_interior(coeffs: &ObjectiveCoeffs, alpha0: f64, beta0: f64) -> Vec<KktCandidate> {
    let ObjectiveCoeffs { a, b, c, d } = *coeffs;
    let big_a = a * a - b * b + c * c - d * d;
    let big_b = a * a + b * b - c * c - d * d;
    let alphas = tan_quadratic_angles(big_a, a * b + c * d).unwrap_or([0.0, alpha0]);
    let betas = tan_quadratic_angles(big_b, a * c + b * d).unwrap_or([0.0, beta0]);

    // ∂f/∂β = 0 at fixed α  ⇔  tan β = (a sinα + b cosα) / (c sinα + d cosα)
    let beta_for = |alpha: f64| {
        let (s, co) = alpha.sin_cos();
        let (num, den) = (a * s + b * co, c * s + d * co);
        (num.hypot(den) >= QUADRATIC_EPS).then(|| branch_angle(num, den))
    };
    // ∂f/∂α = 0 at fixed β  ⇔  tan α = (a sinβ + c cosβ) / (b sinβ + d cosβ)
    let alpha_for = |beta: f64| {
        let (s, co) = beta.sin_cos();
        let (num, den) = (a * s + c * co, b * s + d * co);
        (num.hypot(den) >= QUADRATIC_EPS).then(|| branch_angle(num, den))
    };

    let mut out: Vec<KktCandidate> = Vec::with_capacity(4);
    let mut push = |alpha: f64, beta: f64| {
        let dup = out
            .iter()
            .any(|k| (k.alpha - alpha).abs() < 1e-12 && (k.beta - beta).abs() < 1e-12);
        if !dup {
            out.push(interior_candidate(coeffs, alpha, beta));
        }
    };
    let matched_b: Vec<Option<f64>> = betas.iter().map(|&bt| alpha_for(bt)).collect();
    for &alpha in &alphas {
        match beta_for(alpha) {
            Some(beta) => push(alpha, beta),
            None => {
                for (&beta, m) in betas.iter().zip(&matched_b) {
                    if m.is_none() {
                        push(alpha, beta);
                    }
                }
            }
        }
    }
    for (&beta, m) in betas.iter().zip(&matched_b) {
        if let Some(alpha) = m {
            push(*alpha, beta);
        }
    }
    out
}

/// Error for case ids outside `1..=8`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("boundary case id {0} is outside 1..=8")]
pub struct InvalidCase(pub u8);

/// Cases 1–8: one or both angles pinned to a bound, multipliers from the
/// stationarity equations of the pinned directions.
pub fn solve_boundary_case(
    case_id: u8,
    coeffs: &ObjectiveCoeffs,
    alpha0: f64,
    beta0: f64,
) -> Result<KktCandidate, InvalidCase> {
    let ObjectiveCoeffs { a, b, c, d } = *coeffs;
    let (alpha, beta) = match case_id {
        1 => (0.0, branch_angle(b, d)),
        2 => {
            let (s, co) = alpha0.sin_cos();
            (alpha0, branch_angle(a * s + b * co, c * s + d * co))
        }
        3 => (branch_angle(c, d), 0.0),
        4 => {
            let (s, co) = beta0.sin_cos();
            (branch_angle(a * s + c * co, b * s + d * co), beta0)
        }
        5 => (0.0, 0.0),
        6 => (0.0, beta0),
        7 => (alpha0, 0.0),
        8 => (alpha0, beta0),
        other => return Err(InvalidCase(other)),
    };
    let (fa, fb) = coeffs.gradient(alpha, beta);
    let mut lambda = [0.0; 4];
    match case_id {
        1 => lambda[0] = -fa,
        2 => lambda[1] = fa,
        3 => lambda[2] = -fb,
        4 => lambda[3] = fb,
        5 => {
            lambda[0] = -fa;
            lambda[2] = -fb;
        }
        6 => {
            lambda[0] = -fa;
            lambda[3] = fb;
        }
        7 => {
            lambda[1] = fa;
            lambda[2] = -fb;
        }
        _ => {
            lambda[1] = fa;
            lambda[3] = fb;
        }
    }
    Ok(KktCandidate {
        case_id,
        alpha,
        beta,
        lambda,
        f_value: coeffs.evaluate(alpha, beta),
    })
}

/// Multiplier sign (`λi ≤ ε_λ`) and box feasibility (within `ε_g`).
pub fn check_kkt(candidate: &KktCandidate, alpha0: f64, beta0: f64, eps_lambda: f64, eps_g: f64) -> bool {
    let KktCandidate { alpha, beta, lambda, .. } = *candidate;
    lambda.iter().all(|&l| l <= eps_lambda)
        && alpha >= -eps_g
        && alpha <= alpha0 + eps_g
        && beta >= -eps_g
        && beta <= beta0 + eps_g
}

/// Residuals of the two stationarity equations,
/// `∂f/∂α + λ1 − λ2` and `∂f/∂β + λ3 − λ4`. An angle that is pinned because
/// its arc collapsed to a point is not a decision variable and reports 0.
pub fn kkt_residuals(problem: &ArcProblem, candidate: &KktCandidate) -> [f64; 2] {
    let (fa, fb) = problem.coeffs.gradient(candidate.alpha, candidate.beta);
    let l = candidate.lambda;
    let ra = if problem.x.is_collapsed() { 0.0 } else { fa + l[0] - l[1] };
    let rb = if problem.y.is_collapsed() { 0.0 } else { fb + l[2] - l[3] };
    [ra, rb]
}

fn is_corner(case_id: u8) -> bool {
    (5..=8).contains(&case_id)
}

/// Candidates for an arc pair where one or both arcs are collapsed: the
/// collapsed angle is fixed at zero and only the free angle's subproblem
/// remains (cases 1, 5, 6 for a collapsed x-arc; 3, 5, 7 for a collapsed
/// y-arc; 5 alone when both collapse).
fn collapsed_cases(problem: &ArcProblem) -> Vec<KktCandidate> {
    let (x_fixed, y_fixed) = (problem.x.is_collapsed(), problem.y.is_collapsed());
    let ids: &[u8] = match (x_fixed, y_fixed) {
        (true, true) => &[5],
        (true, false) => &[1, 5, 6],
        (false, true) => &[3, 5, 7],
        (false, false) => unreachable!(),
    };
    ids.iter()
        .map(|&id| {
            let mut k = solve_boundary_case(id, &problem.coeffs, problem.alpha0(), problem.beta0())
                .expect("valid case id");
            if x_fixed {
                k.lambda[0] = 0.0;
                k.lambda[1] = 0.0;
            }
            if y_fixed {
                k.lambda[2] = 0.0;
                k.lambda[3] = 0.0;
            }
            k
        })
        .collect()
}

fn candidate_order(p: &KktCandidate, q: &KktCandidate) -> Ordering {
    p.f_value
        .total_cmp(&q.f_value)
        .then(p.case_id.cmp(&q.case_id))
        .then(p.alpha.total_cmp(&q.alpha))
        .then(p.beta.total_cmp(&q.beta))
}

/// Evaluates all cases and marks which ones satisfy the KKT conditions.
/// The winner is the minimum-`f` candidate among the KKT-feasible ones and
/// the four corners.
pub fn enumerate_candidates(problem: &ArcProblem) -> CandidateSet {
    let (alpha0, beta0) = (problem.alpha0(), problem.beta0());
    let raw: Vec<KktCandidate> = if problem.x.is_collapsed() || problem.y.is_collapsed() {
        collapsed_cases(problem)
    } else {
        let mut v = solve_interior(&problem.coeffs, alpha0, beta0);
        v.extend((1..=8).map(|id| {
            solve_boundary_case(id, &problem.coeffs, alpha0, beta0).expect("valid case id")
        }));
        v
    };
    let candidates: Vec<(KktCandidate, bool)> = raw
        .into_iter()
        .map(|k| {
            let ok = check_kkt(&k, alpha0, beta0, LAMBDA_SLACK, FEASIBILITY_SLACK);
            (k, ok)
        })
        .collect();
    let winner = candidates
        .iter()
        .enumerate()
        .filter(|(_, (k, ok))| *ok || is_corner(k.case_id))
        .min_by(|(_, (p, _)), (_, (q, _))| candidate_order(p, q))
        .map(|(i, _)| i)
        .expect("corner candidates are always present");
    CandidateSet { candidates, winner }
}

/// Optimal hard-negative pair between the two arcs of `problem`.
pub fn optimal_arc_distance(problem: &ArcProblem) -> KktSolution {
    let set = enumerate_candidates(problem);
    let mut candidate = set.candidates[set.winner].0;
    candidate.alpha = candidate.alpha.clamp(0.0, problem.alpha0());
    candidate.beta = candidate.beta.clamp(0.0, problem.beta0());
    let p1 = problem.x.point(candidate.alpha);
    let p2 = problem.y.point(candidate.beta);
    let distance = geometry::chord_distance(&p1, &p2);
    KktSolution {
        candidate,
        p1,
        p2,
        distance,
    }
}

/// Convenience wrapper building the problem from raw endpoints.
pub fn solve_arcs(
    x1: UnitVec,
    x2: UnitVec,
    y1: UnitVec,
    y2: UnitVec,
) -> Result<KktSolution, GeometryError> {
    Ok(optimal_arc_distance(&ArcProblem::new(x1, x2, y1, y2)?))
}
