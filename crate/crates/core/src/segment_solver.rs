//! Minimum distance between two straight segments in Euclidean space.
//!
//! With `u = x1 − x2`, `v = y1 − y2`, `w = x1 − y1` the points are
//! `p1 = x1 − k1·u` and `p2 = y1 − k2·v`, and the objective is
//! `f(k1, k2) = ½‖k1·u − k2·v − w‖²` over `[0, 1]²`. Its partials are
//!
//! ```text
//! ∂f/∂k1 = a·k1 + b·k2 + c,    a = u·u,   b = −u·v, c = −u·w
//! ∂f/∂k2 = a′·k1 + b′·k2 + c′, a′ = −v·u, b′ = v·v, c′ = v·w
//! ```
//!
//! and the nine KKT cases mirror the arc solver: one interior solve of the
//! 2×2 linear system, four edges with one parameter pinned, four corners.
//! The optimal points are not projected back onto the sphere.

use crate::arc_solver::{FEASIBILITY_SLACK, LAMBDA_SLACK};
use crate::geometry::{self, GeometryError};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

/// Below this length a segment is treated as a single point.
pub const SEGMENT_DEGENERACY: f64 = 1e-12;
/// Relative threshold on the interior determinant for parallel segments.
const PARALLEL_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SegmentError {
    #[error("both segments collapse to points")]
    DegenerateSegment,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Two segments and the difference vectors `u`, `v`, `w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProblem {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

fn sub(p: &[f64], q: &[f64]) -> Vec<f64> {
    p.iter().zip(q).map(|(a, b)| a - b).collect()
}

fn lerp(p: &[f64], q: &[f64], k: f64) -> Vec<f64> {
    p.iter().zip(q).map(|(a, b)| (1.0 - k) * a + k * b).collect()
}

impl SegmentProblem {
    pub fn new(x1: Vec<f64>, x2: Vec<f64>, y1: Vec<f64>, y2: Vec<f64>) -> Result<Self, GeometryError> {
        let dim = x1.len();
        if dim == 0 {
            return Err(GeometryError::DimensionTooSmall(0));
        }
        for p in [&x2, &y1, &y2] {
            geometry::check_same_dim(dim, p.len())?;
        }
        if [&x1, &x2, &y1, &y2].iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(GeometryError::NonFinite);
        }
        let u = sub(&x1, &x2);
        let v = sub(&y1, &y2);
        let w = sub(&x1, &y1);
        Ok(SegmentProblem { x1, x2, y1, y2, u, v, w })
    }

    pub fn dim(&self) -> usize {
        self.x1.len()
    }

    pub fn x_collapsed(&self) -> bool {
        geometry::norm(&self.u) <= SEGMENT_DEGENERACY
    }

    pub fn y_collapsed(&self) -> bool {
        geometry::norm(&self.v) <= SEGMENT_DEGENERACY
    }

    pub fn coeffs(&self) -> SegmentCoeffs {
        let (u, v, w) = (&self.u, &self.v, &self.w);
        let uv = geometry::dot(u, v);
        SegmentCoeffs {
            a: geometry::dot(u, u),
            b: -uv,
            c: -geometry::dot(u, w),
            a2: -uv,
            b2: geometry::dot(v, v),
            c2: geometry::dot(v, w),
        }
    }

    pub fn point_x(&self, k1: f64) -> Vec<f64> {
        if k1 == 0.0 {
            self.x1.clone()
        } else if k1 == 1.0 {
            self.x2.clone()
        } else {
            lerp(&self.x1, &self.x2, k1)
        }
    }

    pub fn point_y(&self, k2: f64) -> Vec<f64> {
        if k2 == 0.0 {
            self.y1.clone()
        } else if k2 == 1.0 {
            self.y2.clone()
        } else {
            lerp(&self.y1, &self.y2, k2)
        }
    }

    /// The same geometry with the roles of the two segments exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.y1.clone(), self.y2.clone(), self.x1.clone(), self.x2.clone())
            .expect("already validated")
    }
}

/// Coefficients of the two linear stationarity equations; `a2`, `b2`, `c2`
/// are the primed coefficients of `∂f/∂k2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a2: f64,
    pub b2: f64,
    pub c2: f64,
}

impl SegmentCoeffs {
    pub fn gradient(&self, k1: f64, k2: f64) -> (f64, f64) {
        (
            self.a * k1 + self.b * k2 + self.c,
            self.a2 * k1 + self.b2 * k2 + self.c2,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentCandidate {
    pub case_id: u8,
    pub k1: f64,
    pub k2: f64,
    pub lambda: [f64; 4],
    /// Squared distance `‖p1 − p2‖²`, i.e. `2f`.
    pub sq_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSolution {
    pub candidate: SegmentCandidate,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub distance: f64,
}

impl SegmentSolution {
    pub fn case_id(&self) -> u8 {
        self.candidate.case_id
    }

    pub fn k1(&self) -> f64 {
        self.candidate.k1
    }

    pub fn k2(&self) -> f64 {
        self.candidate.k2
    }
}

fn sq_distance(problem: &SegmentProblem, k1: f64, k2: f64) -> f64 {
    let (u, v, w) = (&problem.u, &problem.v, &problem.w);
    (0..u.len())
        .map(|i| {
            let r = k1 * u[i] - k2 * v[i] - w[i];
            r * r
        })
        .sum()
}

/// Case `case_id` of the nine; `None` for Case 0 on (near-)parallel
/// segments and for ids outside `0..=8`.
pub fn segment_case(problem: &SegmentProblem, coeffs: &SegmentCoeffs, case_id: u8) -> Option<SegmentCandidate> {
    let SegmentCoeffs { a, b, c, a2, b2, c2 } = *coeffs;
    let (k1, k2) = match case_id {
        0 => {
            let den = a2 * b - a * b2;
            if den.abs() < PARALLEL_EPS * a * b2 || den == 0.0 {
                return None;
            }
            ((b2 * c - b * c2) / den, (a * c2 - a2 * c) / den)
        }
        1 => (0.0, -c2 / b2),
        2 => (1.0, -(a2 + c2) / b2),
        3 => (-c / a, 0.0),
        4 => (-(b + c) / a, 1.0),
        5 => (0.0, 0.0),
        6 => (0.0, 1.0),
        7 => (1.0, 0.0),
        8 => (1.0, 1.0),
        _ => return None,
    };
    let (g1, g2) = coeffs.gradient(k1, k2);
    let mut lambda = [0.0; 4];
    match case_id {
        1 => lambda[0] = -g1,
        2 => lambda[1] = g1,
        3 => lambda[2] = -g2,
        4 => lambda[3] = g2,
        5 => {
            lambda[0] = -g1;
            lambda[2] = -g2;
        }
        6 => {
            lambda[0] = -g1;
            lambda[3] = g2;
        }
        7 => {
            lambda[1] = g1;
            lambda[2] = -g2;
        }
        8 => {
            lambda[1] = g1;
            lambda[3] = g2;
        }
        _ => {}
    }
    Some(SegmentCandidate {
        case_id,
        k1,
        k2,
        lambda,
        sq_distance: sq_distance(problem, k1, k2),
    })
}

/// Multiplier sign and `[0, 1]²` feasibility.
pub fn check_segment_kkt(candidate: &SegmentCandidate, eps_lambda: f64, eps_g: f64) -> bool {
    let SegmentCandidate { k1, k2, lambda, .. } = *candidate;
    k1.is_finite()
        && k2.is_finite()
        && lambda.iter().all(|&l| l <= eps_lambda)
        && (-eps_g..=1.0 + eps_g).contains(&k1)
        && (-eps_g..=1.0 + eps_g).contains(&k2)
}

/// Stationarity residuals `∂f/∂k1 + λ1 − λ2` and `∂f/∂k2 + λ3 − λ4`;
/// a parameter of a collapsed segment reports 0.
pub fn segment_kkt_residuals(problem: &SegmentProblem, candidate: &SegmentCandidate) -> [f64; 2] {
    let (g1, g2) = problem.coeffs().gradient(candidate.k1, candidate.k2);
    let l = candidate.lambda;
    let r1 = if problem.x_collapsed() { 0.0 } else { g1 + l[0] - l[1] };
    let r2 = if problem.y_collapsed() { 0.0 } else { g2 + l[2] - l[3] };
    [r1, r2]
}

fn candidate_order(p: &SegmentCandidate, q: &SegmentCandidate) -> Ordering {
    p.sq_distance
        .total_cmp(&q.sq_distance)
        .then(p.case_id.cmp(&q.case_id))
        .then(p.k1.total_cmp(&q.k1))
        .then(p.k2.total_cmp(&q.k2))
}

/// Evaluates every applicable case with its KKT verdict.
pub fn enumerate_segment_candidates(
    problem: &SegmentProblem,
) -> Result<Vec<(SegmentCandidate, bool)>, SegmentError> {
    let (x_fixed, y_fixed) = (problem.x_collapsed(), problem.y_collapsed());
    let ids: &[u8] = match (x_fixed, y_fixed) {
        (true, true) => return Err(SegmentError::DegenerateSegment),
        (true, false) => &[1, 5, 6],
        (false, true) => &[3, 5, 7],
        (false, false) => &[0, 1, 2, 3, 4, 5, 6, 7, 8],
    };
    let coeffs = problem.coeffs();
    Ok(ids
        .iter()
        .filter_map(|&id| segment_case(problem, &coeffs, id))
        .map(|mut k| {
            if x_fixed {
                k.lambda[0] = 0.0;
                k.lambda[1] = 0.0;
            }
            if y_fixed {
                k.lambda[2] = 0.0;
                k.lambda[3] = 0.0;
            }
            (k, check_segment_kkt(&k, LAMBDA_SLACK, FEASIBILITY_SLACK))
        })
        .collect())
}

/// Closest pair of points between the two segments.
pub fn optimal_segment_distance(problem: &SegmentProblem) -> Result<SegmentSolution, SegmentError> {
    let set = enumerate_segment_candidates(problem)?;
    let mut candidate = set
        .iter()
        .filter(|(k, ok)| *ok || (5..=8).contains(&k.case_id))
        .map(|(k, _)| *k)
        .min_by(candidate_order)
        .expect("corners always compete");
    candidate.k1 = candidate.k1.clamp(0.0, 1.0);
    candidate.k2 = candidate.k2.clamp(0.0, 1.0);
    let p1 = problem.point_x(candidate.k1);
    let p2 = problem.point_y(candidate.k2);
    let distance = geometry::norm(&sub(&p1, &p2));
    Ok(SegmentSolution {
        candidate,
        p1,
        p2,
        distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> SegmentProblem {
        SegmentProblem::new(x1.to_vec(), x2.to_vec(), y1.to_vec(), y2.to_vec()).unwrap()
    }

    fn brute(p: &SegmentProblem, steps: usize) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let (k1, k2) = (i as f64 / steps as f64, j as f64 / steps as f64);
                best = best.min(sq_distance(p, k1, k2));
            }
        }
        best.sqrt()
    }

    #[test]
    fn difference_vectors() {
        let p = seg(&[1.0, 2.0], &[0.0, 1.0], &[3.0, 3.0], &[2.0, 5.0]);
        assert_eq!(p.u, vec![1.0, 1.0]);
        assert_eq!(p.v, vec![1.0, -2.0]);
        assert_eq!(p.w, vec![-2.0, -1.0]);
    }

    #[test]
    fn parallel_offset() {
        let p = seg(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[1.0, 1.0, 0.0]);
        let s = optimal_segment_distance(&p).unwrap();
        assert!((s.distance - 1.0).abs() < 1e-12);
        assert!((s.k1() - s.k2()).abs() < 1e-12);
    }

    #[test]
    fn skew_perpendicular() {
        let p = seg(&[-1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, -1.0, 1.0], &[0.0, 1.0, 1.0]);
        assert_eq!(p.u, vec![-2.0, 0.0, 0.0]);
        assert_eq!(p.v, vec![0.0, -2.0, 0.0]);
        assert_eq!(p.w, vec![-1.0, 1.0, -1.0]);
        let s = optimal_segment_distance(&p).unwrap();
        assert_eq!(s.case_id(), 0);
        assert!((s.k1() - 0.5).abs() < 1e-12 && (s.k2() - 0.5).abs() < 1e-12);
        assert!((s.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shared_endpoint() {
        let p = seg(&[0.3, 0.1, 0.9], &[1.0, 0.0, 0.0], &[0.3, 0.1, 0.9], &[0.0, 1.0, 0.0]);
        assert_eq!(optimal_segment_distance(&p).unwrap().distance, 0.0);
    }

    #[test]
    fn collapsed_segments() {
        let p = seg(&[0.0, 0.0, 1.0], &[0.0, 0.0, 1.0], &[-1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        let s = optimal_segment_distance(&p).unwrap();
        assert_eq!(s.case_id(), 1);
        assert!((s.distance - 1.0).abs() < 1e-12);
        assert!((s.k2() - 0.5).abs() < 1e-12);

        let p = seg(&[0.0; 3], &[0.0; 3], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert_eq!(optimal_segment_distance(&p), Err(SegmentError::DegenerateSegment));
    }

    #[test]
    fn matches_brute_force_and_residuals() {
        let p = seg(&[0.2, -0.4, 0.7, 0.1], &[0.9, 0.3, -0.1, 0.2], &[-0.3, 0.5, 0.5, 0.6], &[0.4, 0.1, 0.8, -0.3]);
        let s = optimal_segment_distance(&p).unwrap();
        let g = brute(&p, 1000);
        assert!(s.distance <= g + 1e-9 && g - s.distance < 2e-3);
        let [r1, r2] = segment_kkt_residuals(&p, &s.candidate);
        assert!(r1.abs() <= 1e-8 && r2.abs() <= 1e-8);
    }

    #[test]
    fn mismatched_dimensions_rejected() {
        let r = SegmentProblem::new(vec![0.0; 3], vec![1.0; 3], vec![0.0; 2], vec![1.0; 3]);
        assert!(matches!(r, Err(GeometryError::DimensionMismatch { .. })));
    }
}
