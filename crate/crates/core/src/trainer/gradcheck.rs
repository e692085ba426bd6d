//! Finite-difference gradients and the single-instance LoOp triplet gradient.

use super::TrainError;
use crate::arc_solver::{ArcProblem, KktSolution};
use crate::batch_engine::LabeledBatch;
use crate::geometry::{self, UnitVec};
use crate::losses::{arc_point_pullback, param_bound, ParamBound};

/// Distance to a kink below which a point counts as nondifferentiable.
pub const KINK_TOL: f64 = 1e-12;

/// Central differences of `loss_fn` in each coordinate of sample `index`.
/// Each perturbed sample is renormalized, so the result is the gradient
/// projected onto the tangent space at that sample.
pub fn finite_diff_grad<F>(loss_fn: F, batch: &LabeledBatch, index: usize, h: f64) -> Vec<f64>
where
    F: Fn(&LabeledBatch) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let x = batch.embeddings()[index].as_slice().to_vec();
    let eval = |delta: f64, m: usize| {
        let mut v = x.clone();
        v[m] += delta;
        let mut emb = batch.embeddings().to_vec();
        emb[index] = geometry::normalize(&v).expect("small step keeps the norm positive");
        loss_fn(&batch.with_embeddings(emb).expect("same shape"))
    };
    (0..x.len()).map(|m| (eval(h, m) - eval(-h, m)) / (2.0 * h)).collect()
}

/// `(I − x xᵀ) g`.
pub fn project_tangent(x: &UnitVec, g: &[f64]) -> Vec<f64> {
    let p = geometry::dot(x.as_slice(), g);
    g.iter().zip(x.as_slice()).map(|(gv, xv)| gv - p * xv).collect()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(p, q)| p - q).collect();
    let scale = geometry::norm(a).max(geometry::norm(b));
    if scale == 0.0 {
        0.0
    } else {
        geometry::norm(&diff) / scale
    }
}

/// Gradients of `[d(x1, x2) − D + m]_+` with respect to the four samples.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopTripletGrad {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

fn check_param(
    bound: ParamBound,
    theta: f64,
    extent: f64,
    lambda_lower: f64,
    lambda_upper: f64,
    collapsed: bool,
) -> Result<(), TrainError> {
    if collapsed {
        return Ok(());
    }
    let ok = match bound {
        ParamBound::Lower => lambda_lower.abs() > KINK_TOL,
        ParamBound::Upper => lambda_upper.abs() > KINK_TOL,
        ParamBound::Free => theta > KINK_TOL && theta < extent - KINK_TOL,
    };
    if ok {
        Ok(())
    } else {
        Err(TrainError::NondifferentiablePoint("optimum sits on a case boundary".into()))
    }
}

/// LoOp triplet gradient for positive pair `(x1, x2)` against negative pair
/// `(y1, y2)` under the frozen-optimum convention: the optimal angles are held
/// fixed, and an angle at a bound pins its point to that endpoint.
pub fn analytic_loop_triplet_grad(
    problem: &ArcProblem,
    solution: &KktSolution,
    margin: f64,
) -> Result<LoopTripletGrad, TrainError> {
    let (x, y) = (problem.x(), problem.y());
    let dim = x.dim();
    let d12 = geometry::chord_distance(x.start(), x.end());
    let arg = d12 - solution.distance + margin;
    if arg.abs() <= KINK_TOL {
        return Err(TrainError::NondifferentiablePoint("hinge kink".into()));
    }
    if arg < 0.0 {
        let z = vec![0.0; dim];
        return Ok(LoopTripletGrad { x1: z.clone(), x2: z.clone(), y1: z.clone(), y2: z });
    }
    if d12 == 0.0 || solution.distance == 0.0 {
        return Err(TrainError::NondifferentiablePoint("zero distance".into()));
    }
    let k = &solution.candidate;
    let (bx, by) = (param_bound(k.case_id, true), param_bound(k.case_id, false));
    check_param(bx, k.alpha, problem.alpha0(), k.lambda[0], k.lambda[1], x.is_collapsed())?;
    check_param(by, k.beta, problem.beta0(), k.lambda[2], k.lambda[3], y.is_collapsed())?;

    let (p1, p2) = (solution.p1.as_slice(), solution.p2.as_slice());
    let g: Vec<f64> = p1.iter().zip(p2).map(|(a, b)| (a - b) / solution.distance).collect();
    let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
    let (px1, px2) = arc_point_pullback(x.start(), x.end(), k.alpha, bx, &g);
    let (py1, py2) = arc_point_pullback(y.start(), y.end(), k.beta, by, &neg_g);
    let dpos: Vec<f64> = x
        .start()
        .as_slice()
        .iter()
        .zip(x.end().as_slice())
        .map(|(a, b)| (a - b) / d12)
        .collect();
    Ok(LoopTripletGrad {
        x1: dpos.iter().zip(&px1).map(|(a, b)| a - b).collect(),
        x2: dpos.iter().zip(&px2).map(|(a, b)| -a - b).collect(),
        y1: py1.iter().map(|v| -v).collect(),
        y2: py2.iter().map(|v| -v).collect(),
    })
}
