//! Unit-hypersphere primitives.
//!
//! Everything here works on plain `f64` coordinate vectors. A geodesic arc
//! between `x1` and `x2` is parameterized by the rotation angle from `x1`:
//!
//! ```text
//! p(α) = n1 cos α + n2 sin α,    α ∈ [0, α0],  α0 = arccos(x1 · x2)
//! ```
//!
//! where `(n1, n2)` is the Gram–Schmidt basis of `span{x1, x2}`. For two arcs
//! with bases `(n1, n2)` and `(n3, n4)` the negated dot product of their points
//! is the bilinear form
//!
//! ```text
//! f(α, β) = a sinα sinβ + b cosα sinβ + c sinα cosβ + d cosα cosβ
//! ```
//!
//! with `a = −n2·n4`, `b = −n1·n4`, `c = −n2·n3`, `d = −n1·n3`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vectors with norm at or below this are rejected by [`normalize`].
pub const MIN_NORM: f64 = 1e-12;

/// Arcs whose endpoints satisfy `|x1·x2| ≥ 1 − DEGENERACY_EPS` are parallel
/// (collapsed to a point) or antipodal (rejected).
pub const DEGENERACY_EPS: f64 = 1e-7;

/// Tolerance on the unit-norm invariant of [`UnitVec`].
pub const UNIT_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("vector norm {norm:e} is too small to normalize")]
    NearZeroVector { norm: f64 },
    /// Endpoints are parallel (`dot > 0`) or antipodal (`dot < 0`).
    #[error("degenerate arc: endpoints are parallel or antipodal (x1·x2 = {dot})")]
    DegenerateArc { dot: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension {0} is below the minimum of 2")]
    DimensionTooSmall(usize),
    #[error("vector is not unit norm (norm = {norm})")]
    NotUnitNorm { norm: f64 },
    #[error("non-finite coordinate in input vector")]
    NonFinite,
}

/// A point on the unit hypersphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitVec(Vec<f64>);

impl UnitVec {
    /// Wraps coordinates that are already unit norm (within [`UNIT_NORM_TOL`]).
    pub fn try_from_unit(coords: Vec<f64>) -> Result<Self, GeometryError> {
        check_finite(&coords)?;
        if coords.len() < 2 {
            return Err(GeometryError::DimensionTooSmall(coords.len()));
        }
        let norm = norm(&coords);
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(GeometryError::NotUnitNorm { norm });
        }
        Ok(UnitVec(coords))
    }

    /// Caller guarantees unit norm up to rounding.
    pub(crate) fn from_unit_unchecked(coords: Vec<f64>) -> Self {
        debug_assert!((norm(&coords) - 1.0).abs() <= 1e-6);
        UnitVec(coords)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, other: &UnitVec) -> f64 {
        dot(&self.0, &other.0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for UnitVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Orthonormal basis `(n1, n2)` of the plane containing an arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoBasis {
    pub n1: UnitVec,
    pub n2: UnitVec,
}

/// Coefficients of the bilinear objective `f(α, β) = −p1(α)·p2(β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveCoeffs {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl ObjectiveCoeffs {
    pub fn evaluate(&self, alpha: f64, beta: f64) -> f64 {
        let (sa, ca) = alpha.sin_cos();
        let (sb, cb) = beta.sin_cos();
        self.a * sa * sb + self.b * ca * sb + self.c * sa * cb + self.d * ca * cb
    }

    /// `(∂f/∂α, ∂f/∂β)`.
    pub fn gradient(&self, alpha: f64, beta: f64) -> (f64, f64) {
        let (sa, ca) = alpha.sin_cos();
        let (sb, cb) = beta.sin_cos();
        let (a, b, c, d) = (self.a, self.b, self.c, self.d);
        let df_da = a * ca * sb - b * sa * sb + c * ca * cb - d * sa * cb;
        let df_db = a * sa * cb + b * ca * cb - c * sa * sb - d * ca * sb;
        (df_da, df_db)
    }
}

pub(crate) fn dot(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter().zip(q).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn check_finite(v: &[f64]) -> Result<(), GeometryError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(GeometryError::NonFinite)
    }
}

pub(crate) fn check_same_dim(expected: usize, found: usize) -> Result<(), GeometryError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, found })
    }
}

/// Scales `v` onto the unit sphere.
pub fn normalize(v: &[f64]) -> Result<UnitVec, GeometryError> {
    check_finite(v)?;
    if v.len() < 2 {
        return Err(GeometryError::DimensionTooSmall(v.len()));
    }
    let n = norm(v);
    if n <= MIN_NORM {
        return Err(GeometryError::NearZeroVector { norm: n });
    }
    Ok(UnitVec(v.iter().map(|x| x / n).collect()))
}

/// Gram–Schmidt basis of `span{x1, x2}`: `n1 = x1`, `n2 ∝ x2 − (x1·x2) x1`.
///
/// Rejects both parallel and antipodal endpoints; [`Arc::new`] collapses the
/// parallel case to a point instead.
pub fn gram_schmidt_basis(x1: &UnitVec, x2: &UnitVec) -> Result<OrthoBasis, GeometryError> {
    check_same_dim(x1.dim(), x2.dim())?;
    let dot12 = x1.dot(x2);
    if dot12.abs() >= 1.0 - DEGENERACY_EPS {
        return Err(GeometryError::DegenerateArc { dot: dot12 });
    }
    let residual: Vec<f64> = x2
        .as_slice()
        .iter()
        .zip(x1.as_slice())
        .map(|(b, a)| b - dot12 * a)
        .collect();
    let n2 = normalize(&residual)?;
    Ok(OrthoBasis {
        n1: x1.clone(),
        n2,
    })
}

/// Deterministic unit vector orthogonal to `n1`; used as a stand-in second
/// basis vector for arcs collapsed to a single point.
pub(crate) fn orthogonal_complement(n1: &UnitVec) -> UnitVec {
    let v = n1.as_slice();
    let axis = v
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| x.abs().total_cmp(&y.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut r: Vec<f64> = v.iter().map(|x| -v[axis] * x).collect();
    r[axis] += 1.0;
    // |v[axis]| ≤ 1/√D ≤ 1/√2, so the residual norm is at least 1/√2.
    normalize(&r).expect("complement of a unit vector in D >= 2 is non-zero")
}

/// `n1 cos θ + n2 sin θ`.
pub fn point_on_arc(basis: &OrthoBasis, angle: f64) -> UnitVec {
    let (s, c) = angle.sin_cos();
    let coords = basis
        .n1
        .as_slice()
        .iter()
        .zip(basis.n2.as_slice())
        .map(|(a, b)| a * c + b * s)
        .collect();
    UnitVec::from_unit_unchecked(coords)
}

/// Euclidean distance between two unit vectors, `√(2(1 − p·q))`, clamped
/// to `[0, 2]`. Evaluated as `‖p − q‖`, which equals the dot form on the
/// sphere but keeps full relative precision for nearby points.
pub fn chord_distance(p: &UnitVec, q: &UnitVec) -> f64 {
    let sq: f64 = p.0.iter().zip(&q.0).map(|(a, b)| (a - b) * (a - b)).sum();
    sq.sqrt().min(2.0)
}

pub fn objective_coeffs(
    basis_x: &OrthoBasis,
    basis_y: &OrthoBasis,
) -> Result<ObjectiveCoeffs, GeometryError> {
    check_same_dim(basis_x.n1.dim(), basis_y.n1.dim())?;
    Ok(ObjectiveCoeffs {
        a: -basis_x.n2.dot(&basis_y.n2),
        b: -basis_x.n1.dot(&basis_y.n2),
        c: -basis_x.n2.dot(&basis_y.n1),
        d: -basis_x.n1.dot(&basis_y.n1),
    })
}

pub fn evaluate_objective(coeffs: &ObjectiveCoeffs, alpha: f64, beta: f64) -> f64 {
    coeffs.evaluate(alpha, beta)
}

/// A bounded great-circle arc from `start` to `end`.
///
/// Endpoints closer than the degeneracy threshold collapse to a point: the
/// extent is zero and `basis.n2` is an arbitrary orthogonal direction that
/// never contributes (the angle is pinned at zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    start: UnitVec,
    end: UnitVec,
    basis: OrthoBasis,
    extent: f64,
}

impl Arc {
    pub fn new(start: UnitVec, end: UnitVec) -> Result<Self, GeometryError> {
        match gram_schmidt_basis(&start, &end) {
            Ok(basis) => {
                let along = end.dot(&basis.n2);
                let across = end.dot(&basis.n1);
                let extent = along.atan2(across);
                Ok(Arc {
                    start,
                    end,
                    basis,
                    extent,
                })
            }
            Err(GeometryError::DegenerateArc { dot }) if dot > 0.0 => {
                let n2 = orthogonal_complement(&start);
                Ok(Arc {
                    basis: OrthoBasis {
                        n1: start.clone(),
                        n2,
                    },
                    start,
                    end,
                    extent: 0.0,
                })
            }
            Err(e) => Err(e),
        }
    }

    pub fn start(&self) -> &UnitVec {
        &self.start
    }

    pub fn end(&self) -> &UnitVec {
        &self.end
    }

    pub fn basis(&self) -> &OrthoBasis {
        &self.basis
    }

    /// Angular length `α0` of the arc; zero when collapsed.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn is_collapsed(&self) -> bool {
        self.extent == 0.0
    }

    pub fn dim(&self) -> usize {
        self.start.dim()
    }

    /// Point at `angle` along the arc. The two bounds return the stored
    /// endpoints exactly so that corner solutions reproduce sample distances
    /// bit for bit.
    pub fn point(&self, angle: f64) -> UnitVec {
        if angle == 0.0 {
            self.start.clone()
        } else if angle == self.extent && !self.is_collapsed() {
            self.end.clone()
        } else {
            point_on_arc(&self.basis, angle)
        }
    }
}
