//! Brute-force grid search over the parameter box of either solver.
//!
//! The oracle shares only point construction with the solvers. Both arcs (or
//! segments) live in a subspace of dimension at most four, so the grid is
//! evaluated in an orthonormal frame of that subspace built here with its own
//! modified Gram–Schmidt pass; this keeps 512-dimensional sweeps cheap without
//! touching the closed-form machinery.

use crate::arc_solver::ArcProblem;
use crate::segment_solver::SegmentProblem;
use serde::{Deserialize, Serialize};

pub const DEFAULT_RESOLUTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// `(α, β)` for arcs, `(k1, k2)` for segments.
    pub best_params: (f64, f64),
    pub best_distance: f64,
    pub resolution: f64,
    pub evaluations: u64,
}

/// Grid `0, r, 2r, …` over `[0, extent]` with `extent` itself appended, so
/// halving the resolution yields a superset of the previous grid.
pub fn grid_points(extent: f64, resolution: f64) -> Vec<f64> {
    assert!(resolution > 0.0, "resolution must be positive");
    let mut pts: Vec<f64> = (0u64..)
        .map(|i| i as f64 * resolution)
        .take_while(|&t| t < extent)
        .collect();
    pts.push(extent.max(0.0));
    pts
}

/// Orthonormal coordinates of `vectors` in a frame of their span.
fn frame_coordinates(vectors: &[&[f64]]) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    for v in vectors {
        let mut r = v.to_vec();
        for _ in 0..2 {
            for e in &frame {
                let p: f64 = r.iter().zip(e).map(|(a, b)| a * b).sum();
                r.iter_mut().zip(e).for_each(|(a, b)| *a -= p * b);
            }
        }
        let n = r.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-10 {
            r.iter_mut().for_each(|a| *a /= n);
            frame.push(r);
        }
    }
    vectors
        .iter()
        .map(|v| {
            let mut c: Vec<f64> = frame
                .iter()
                .map(|e| v.iter().zip(e).map(|(a, b)| a * b).sum())
                .collect();
            c.resize(4, 0.0);
            c
        })
        .collect()
}

/// Row-major minimum of `‖P[i] − Q[j]‖²`; strict comparison keeps the first
/// minimizer.
fn grid_min(ps: &[[f64; 4]], qs: &[[f64; 4]]) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::INFINITY);
    for (i, p) in ps.iter().enumerate() {
        for (j, q) in qs.iter().enumerate() {
            let d0 = p[0] - q[0];
            let d1 = p[1] - q[1];
            let d2 = p[2] - q[2];
            let d3 = p[3] - q[3];
            let sq = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3;
            if sq < best.2 {
                best = (i, j, sq);
            }
        }
    }
    best
}

fn to4(v: &[f64]) -> [f64; 4] {
    [v[0], v[1], v[2], v[3]]
}

/// Start direction, orthonormal in-plane direction and angular extent of the
/// arc from `a` to `b`, all in frame coordinates.
fn arc_frame(a: &[f64; 4], b: &[f64; 4]) -> ([f64; 4], [f64; 4], f64) {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let e1 = a.map(|v| v / na);
    let c: f64 = e1.iter().zip(b).map(|(p, q)| p * q).sum();
    let r: [f64; 4] = std::array::from_fn(|m| b[m] - c * e1[m]);
    let s = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s < 1e-15 {
        return (e1, [0.0; 4], 0.0);
    }
    (e1, r.map(|v| v / s), s.atan2(c))
}

/// Grid minimum of the chord distance over both arcs, each parametrized by
/// the angle from its start endpoint.
pub fn grid_min_arc(problem: &ArcProblem, resolution: f64) -> GridResult {
    let (x, y) = (problem.x(), problem.y());
    let coords = frame_coordinates(&[
        x.start().as_slice(),
        x.end().as_slice(),
        y.start().as_slice(),
        y.end().as_slice(),
    ]);
    let (n1, n2, alpha0) = arc_frame(&to4(&coords[0]), &to4(&coords[1]));
    let (n3, n4, beta0) = arc_frame(&to4(&coords[2]), &to4(&coords[3]));
    let alphas = grid_points(alpha0, resolution);
    let betas = grid_points(beta0, resolution);
    let on_arc = |e1: &[f64; 4], e2: &[f64; 4], t: f64| {
        let (s, c) = t.sin_cos();
        [
            c * e1[0] + s * e2[0],
            c * e1[1] + s * e2[1],
            c * e1[2] + s * e2[2],
            c * e1[3] + s * e2[3],
        ]
    };
    let ps: Vec<[f64; 4]> = alphas.iter().map(|&a| on_arc(&n1, &n2, a)).collect();
    let qs: Vec<[f64; 4]> = betas.iter().map(|&b| on_arc(&n3, &n4, b)).collect();
    let (i, j, sq) = grid_min(&ps, &qs);
    GridResult {
        best_params: (alphas[i], betas[j]),
        best_distance: sq.sqrt(),
        resolution,
        evaluations: (ps.len() * qs.len()) as u64,
    }
}

/// Grid minimum of `‖p1(k1) − p2(k2)‖` over `[0, 1]²`.
pub fn grid_min_segment(problem: &SegmentProblem, resolution: f64) -> GridResult {
    let rel = |p: &[f64]| -> Vec<f64> { p.iter().zip(&problem.x1).map(|(a, b)| a - b).collect() };
    let (dx, dy1, dy2) = (rel(&problem.x2), rel(&problem.y1), rel(&problem.y2));
    let coords = frame_coordinates(&[&dx, &dy1, &dy2]);
    let (ex, ey1, ey2) = (to4(&coords[0]), to4(&coords[1]), to4(&coords[2]));
    let ks = grid_points(1.0, resolution);
    let lerp = |p: &[f64; 4], q: &[f64; 4], k: f64| {
        let mut r = [0.0; 4];
        for m in 0..4 {
            r[m] = (1.0 - k) * p[m] + k * q[m];
        }
        r
    };
    let origin = [0.0; 4];
    let ps: Vec<[f64; 4]> = ks.iter().map(|&k| lerp(&origin, &ex, k)).collect();
    let qs: Vec<[f64; 4]> = ks.iter().map(|&k| lerp(&ey1, &ey2, k)).collect();
    let (i, j, sq) = grid_min(&ps, &qs);
    GridResult {
        best_params: (ks[i], ks[j]),
        best_distance: sq.sqrt(),
        resolution,
        evaluations: (ps.len() * qs.len()) as u64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize;
    use std::f64::consts::SQRT_2;

    fn arc(x1: &[f64], x2: &[f64], y1: &[f64], y2: &[f64]) -> ArcProblem {
        let n = |v: &[f64]| normalize(v).unwrap();
        ArcProblem::new(n(x1), n(x2), n(y1), n(y2)).unwrap()
    }

    #[test]
    fn grid_includes_endpoints() {
        let g = grid_points(1.0, 0.3);
        assert_eq!(g, vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(grid_points(0.0, 0.1), vec![0.0]);
    }

    #[test]
    fn shared_endpoint_at_corner() {
        let p = arc(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]);
        let r = grid_min_arc(&p, 1e-2);
        assert_eq!(r.best_params, (0.0, 0.0));
        assert!(r.best_distance < 1e-15);
    }

    #[test]
    fn orthogonal_spans_constant() {
        let p = arc(
            &[1.0, 0.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0, 1.0],
        );
        let r = grid_min_arc(&p, 1e-2);
        assert!((r.best_distance - SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn parallel_segments() {
        let p = SegmentProblem::new(vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![1.0, 1.0, 0.0])
            .unwrap();
        let r = grid_min_segment(&p, 1e-2);
        assert!((r.best_distance - 1.0).abs() < 1e-12);
        assert_eq!(r.evaluations, 101 * 101);
    }

    #[test]
    fn refinement_is_monotone() {
        let p = arc(&[0.9, 0.1, 0.3, -0.2], &[0.1, 0.8, -0.2, 0.4], &[0.2, 0.7, 0.5, 0.1], &[0.7, 0.3, -0.4, 0.3]);
        let coarse = grid_min_arc(&p, 0.03);
        let fine = grid_min_arc(&p, 0.015);
        assert!(fine.best_distance <= coarse.best_distance);
    }
}
