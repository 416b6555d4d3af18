//! Closed convex constraint sets and Euclidean projections onto them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{LureError, Result};
use crate::linalg;

/// Target of the secular-equation solve: `|y^T W y - c| <= ELLIPSOID_TOL * max(c, 1)`.
pub const ELLIPSOID_TOL: f64 = 1e-12;
const ELLIPSOID_MAX_ITER: usize = 200;
const DYKSTRA_TOL: f64 = 1e-13;
const DYKSTRA_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone)]
pub enum ConstraintSet {
    /// `R^d`.
    Whole { dim: usize },
    Box { lower: DVector<f64>, upper: DVector<f64> },
    /// `{y : a^T y <= b}`.
    Halfspace { normal: DVector<f64>, offset: f64 },
    Ball { center: DVector<f64>, radius: f64 },
    /// `{y : y^T W y <= c}`; the eigendecomposition of `W` is cached.
    Ellipsoid { w: DMatrix<f64>, level: f64, eig: SymmetricEigen<f64, nalgebra::Dyn> },
    /// `{y : a_i^T y <= b_i for all i}`.
    Halfspaces { normals: Vec<DVector<f64>>, offsets: Vec<f64> },
}

impl ConstraintSet {
    pub fn whole(dim: usize) -> Self {
        Self::Whole { dim }
    }

    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(LureError::DimensionMismatch("box bounds differ in length".into()));
        }
        if let Some(i) = (0..lower.len()).find(|&i| lower[i].is_nan() || upper[i].is_nan() || lower[i] > upper[i]) {
            return Err(LureError::EmptySet(format!("box bound {i}: [{}, {}]", lower[i], upper[i])));
        }
        Ok(Self::Box { lower, upper })
    }

    pub fn halfspace(normal: DVector<f64>, offset: f64) -> Result<Self> {
        if !offset.is_finite() || normal.iter().any(|v| !v.is_finite()) {
            return Err(LureError::InvalidInput("halfspace data must be finite".into()));
        }
        if normal.norm() == 0.0 {
            return if offset >= 0.0 {
                Ok(Self::Whole { dim: normal.len() })
            } else {
                Err(LureError::EmptySet(format!("0^T y <= {offset}")))
            };
        }
        Ok(Self::Halfspace { normal, offset })
    }

    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if radius.is_nan() || radius < 0.0 {
            return Err(LureError::EmptySet(format!("ball radius {radius}")));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn ellipsoid(w: DMatrix<f64>, level: f64) -> Result<Self> {
        if !w.is_square() {
            return Err(LureError::DimensionMismatch("ellipsoid shape matrix must be square".into()));
        }
        if linalg::asymmetry(&w) > 1e-12 * w.amax().max(1.0) {
            return Err(LureError::InvalidInput("ellipsoid shape matrix must be symmetric".into()));
        }
        let w = linalg::symmetrize(&w);
        let eig = w.clone().symmetric_eigen();
        let min_eig = eig.eigenvalues.min();
        if min_eig <= 0.0 {
            return Err(LureError::NotPositiveDefinite { min_eig });
        }
        if level.is_nan() || level < 0.0 {
            return Err(LureError::EmptySet(format!("ellipsoid level {level}")));
        }
        Ok(Self::Ellipsoid { w, level, eig })
    }

    pub fn halfspaces(normals: Vec<DVector<f64>>, offsets: Vec<f64>) -> Result<Self> {
        if normals.is_empty() || normals.len() != offsets.len() {
            return Err(LureError::DimensionMismatch("need one offset per normal and at least one halfspace".into()));
        }
        let d = normals[0].len();
        if normals.iter().any(|a| a.len() != d) {
            return Err(LureError::DimensionMismatch("halfspace normals differ in length".into()));
        }
        for (a, b) in normals.iter().zip(&offsets) {
            if a.norm() == 0.0 && *b < 0.0 {
                return Err(LureError::EmptySet(format!("0^T y <= {b}")));
            }
        }
        Ok(Self::Halfspaces { normals, offsets })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Whole { dim } => *dim,
            Self::Box { lower, .. } => lower.len(),
            Self::Halfspace { normal, .. } => normal.len(),
            Self::Ball { center, .. } => center.len(),
            Self::Ellipsoid { w, .. } => w.nrows(),
            Self::Halfspaces { normals, .. } => normals[0].len(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Whole { .. } => "whole",
            Self::Box { .. } => "box",
            Self::Halfspace { .. } => "halfspace",
            Self::Ball { .. } => "ball",
            Self::Ellipsoid { .. } => "ellipsoid",
            Self::Halfspaces { .. } => "halfspaces",
        }
    }

    /// Largest constraint violation at `y` (zero inside the set).
    pub fn violation(&self, y: &DVector<f64>) -> f64 {
        match self {
            Self::Whole { .. } => 0.0,
            Self::Box { lower, upper } => {
                (0..y.len()).map(|i| (lower[i] - y[i]).max(y[i] - upper[i]).max(0.0)).fold(0.0, f64::max)
            }
            Self::Halfspace { normal, offset } => (normal.dot(y) - offset).max(0.0),
            Self::Ball { center, radius } => ((y - center).norm() - radius).max(0.0),
            Self::Ellipsoid { w, level, .. } => (y.dot(&(w * y)) - level).max(0.0),
            Self::Halfspaces { normals, offsets } => {
                normals.iter().zip(offsets).map(|(a, b)| (a.dot(y) - b).max(0.0)).fold(0.0, f64::max)
            }
        }
    }

    pub fn contains(&self, y: &DVector<f64>) -> bool {
        self.violation(y) == 0.0
    }
}

/// `argmin_{y in set} ||point - y||_2`.
pub fn project_euclidean(set: &ConstraintSet, point: &DVector<f64>) -> Result<DVector<f64>> {
    if point.len() != set.dim() {
        return Err(LureError::DimensionMismatch(format!(
            "point has dimension {}, {} set has {}",
            point.len(),
            set.kind(),
            set.dim()
        )));
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(LureError::InvalidInput("cannot project a non-finite point".into()));
    }
    match set {
        ConstraintSet::Whole { .. } => Ok(point.clone()),
        ConstraintSet::Box { lower, upper } => Ok(DVector::from_fn(point.len(), |i, _| point[i].clamp(lower[i], upper[i]))),
        ConstraintSet::Halfspace { normal, offset } => Ok(project_halfspace(normal, *offset, point)),
        ConstraintSet::Ball { center, radius } => {
            let v = point - center;
            let norm = v.norm();
            if norm <= *radius {
                Ok(point.clone())
            } else {
                Ok(center + v * (radius / norm))
            }
        }
        ConstraintSet::Ellipsoid { w, level, eig } => project_ellipsoid(w, *level, eig, point),
        ConstraintSet::Halfspaces { normals, offsets } => dykstra(normals, offsets, point),
    }
}

fn project_halfspace(a: &DVector<f64>, b: f64, p: &DVector<f64>) -> DVector<f64> {
    let excess = a.dot(p) - b;
    if excess <= 0.0 {
        p.clone()
    } else {
        p - a * (excess / a.norm_squared())
    }
}

/// Solves `phi(lambda) = sum_i w_i q_i^2 / (1 + lambda w_i)^2 - c = 0` for
/// `lambda > 0` by Newton's method inside a shrinking bracket; `phi` is convex
/// and decreasing, so Newton steps from the left never overshoot in exact
/// arithmetic and bisection only guards against rounding.
fn project_ellipsoid(
    w: &DMatrix<f64>,
    level: f64,
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    p: &DVector<f64>,
) -> Result<DVector<f64>> {
    if p.dot(&(w * p)) <= level {
        return Ok(p.clone());
    }
    if level == 0.0 {
        return Ok(DVector::zeros(p.len()));
    }
    let lam = &eig.eigenvalues;
    let q = eig.eigenvectors.transpose() * p;
    let phi = |t: f64| -> (f64, f64) {
        let mut val = -level;
        let mut der = 0.0;
        for i in 0..q.len() {
            let den = 1.0 + t * lam[i];
            let s = lam[i] * q[i] * q[i] / (den * den);
            val += s;
            der -= 2.0 * s * lam[i] / den;
        }
        (val, der)
    };
    let (mut lo, mut hi) = (0.0, p.norm() / (level * lam.min()).sqrt());
    while phi(hi).0 > 0.0 {
        hi *= 2.0;
    }
    let tol = ELLIPSOID_TOL * level.max(1.0);
    let mut t = 0.0;
    let mut converged = false;
    for _ in 0..ELLIPSOID_MAX_ITER {
        let (val, der) = phi(t);
        if val.abs() <= tol {
            converged = true;
            break;
        }
        if val > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let newton = t - val / der;
        t = if der < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(LureError::ConvergenceFailure(format!("ellipsoid multiplier search stopped at {t:.6e}")));
    }
    let y_rot = DVector::from_fn(q.len(), |i, _| q[i] / (1.0 + t * lam[i]));
    let mut y = &eig.eigenvectors * y_rot;
    let val = y.dot(&(w * &y));
    if val > level {
        y *= (level / val).sqrt();
    }
    Ok(y)
}

fn dykstra(normals: &[DVector<f64>], offsets: &[f64], p: &DVector<f64>) -> Result<DVector<f64>> {
    let inside = |y: &DVector<f64>| normals.iter().zip(offsets).all(|(a, b)| a.dot(y) <= *b);
    if inside(p) {
        return Ok(p.clone());
    }
    let scale = p.amax().max(1.0);
    let mut x = p.clone();
    let mut incr = vec![DVector::zeros(p.len()); normals.len()];
    for _ in 0..DYKSTRA_MAX_ITER {
        let prev = x.clone();
        for (i, (a, b)) in normals.iter().zip(offsets).enumerate() {
            let shifted = &x + &incr[i];
            let next = project_halfspace(a, *b, &shifted);
            incr[i] = shifted - &next;
            x = next;
        }
        let violation = normals.iter().zip(offsets).map(|(a, b)| (a.dot(&x) - b).max(0.0)).fold(0.0, f64::max);
        if (&x - prev).amax() <= DYKSTRA_TOL * scale && violation <= DYKSTRA_TOL * scale {
            return Ok(x);
        }
    }
    let violation = normals.iter().zip(offsets).map(|(a, b)| (a.dot(&x) - b).max(0.0)).fold(0.0, f64::max);
    if violation > 1e-6 * scale {
        Err(LureError::EmptySet(format!("halfspace intersection looks empty (violation {violation:.3e})")))
    } else {
        Err(LureError::ConvergenceFailure(format!("Dykstra iteration stalled (violation {violation:.3e})")))
    }
}

/// Serializable description of a constraint set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConstraintSpec {
    Whole { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Halfspace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    Ellipsoid { w: Vec<Vec<f64>>, level: f64 },
    Halfspaces { normals: Vec<Vec<f64>>, offsets: Vec<f64> },
}

impl TryFrom<&ConstraintSpec> for ConstraintSet {
    type Error = LureError;

    fn try_from(spec: &ConstraintSpec) -> Result<Self> {
        let vec = |v: &[f64]| DVector::from_column_slice(v);
        match spec {
            ConstraintSpec::Whole { dim } => Ok(Self::whole(*dim)),
            ConstraintSpec::Box { lower, upper } => Self::boxed(vec(lower), vec(upper)),
            ConstraintSpec::Halfspace { normal, offset } => Self::halfspace(vec(normal), *offset),
            ConstraintSpec::Ball { center, radius } => Self::ball(vec(center), *radius),
            ConstraintSpec::Ellipsoid { w, level } => {
                let w = linalg::from_rows(w).ok_or_else(|| LureError::DimensionMismatch("ellipsoid `w` is ragged".into()))?;
                Self::ellipsoid(w, *level)
            }
            ConstraintSpec::Halfspaces { normals, offsets } => {
                Self::halfspaces(normals.iter().map(|a| vec(a)).collect(), offsets.clone())
            }
        }
    }
}

impl From<&ConstraintSet> for ConstraintSpec {
    fn from(set: &ConstraintSet) -> Self {
        let v = |x: &DVector<f64>| x.iter().copied().collect::<Vec<_>>();
        match set {
            ConstraintSet::Whole { dim } => Self::Whole { dim: *dim },
            ConstraintSet::Box { lower, upper } => Self::Box { lower: v(lower), upper: v(upper) },
            ConstraintSet::Halfspace { normal, offset } => Self::Halfspace { normal: v(normal), offset: *offset },
            ConstraintSet::Ball { center, radius } => Self::Ball { center: v(center), radius: *radius },
            ConstraintSet::Ellipsoid { w, level, .. } => Self::Ellipsoid { w: linalg::to_rows(w), level: *level },
            ConstraintSet::Halfspaces { normals, offsets } => {
                Self::Halfspaces { normals: normals.iter().map(v).collect(), offsets: offsets.clone() }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn interior_points_are_fixed() {
        let sets = [
            ConstraintSet::boxed(v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap(),
            ConstraintSet::ball(v(&[0.0, 0.0]), 1.0).unwrap(),
            ConstraintSet::ellipsoid(DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 2.0]), 10.0).unwrap(),
            ConstraintSet::halfspace(v(&[1.0, 1.0]), 1.0).unwrap(),
        ];
        let p = v(&[0.3, -0.2]);
        for s in &sets {
            assert_eq!(project_euclidean(s, &p).unwrap(), p, "{}", s.kind());
        }
    }

    #[test]
    fn ball_projection_scales_radially() {
        let s = ConstraintSet::ball(v(&[0.0, 0.0]), 1.0).unwrap();
        let y = project_euclidean(&s, &v(&[2.0, 0.0])).unwrap();
        assert!((y - v(&[1.0, 0.0])).norm() < 1e-15);
    }

    #[test]
    fn ellipsoid_projection_satisfies_the_kkt_conditions() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 2.0]);
        let s = ConstraintSet::ellipsoid(w.clone(), 10.0).unwrap();
        let p = v(&[5.0, 5.0]);
        let y = project_euclidean(&s, &p).unwrap();
        assert!((y.dot(&(&w * &y)) - 10.0).abs() < 1e-10);
        // p - y is parallel to the outward normal W y
        let n = &w * &y;
        let r = &p - &y;
        assert!((r[0] * n[1] - r[1] * n[0]).abs() < 1e-9);
        assert!(r.dot(&n) > 0.0);
    }

    #[test]
    fn halfspace_intersection_corner() {
        let s = ConstraintSet::halfspaces(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])], vec![0.0, 0.0]).unwrap();
        let y = project_euclidean(&s, &v(&[2.0, 3.0])).unwrap();
        assert!(y.norm() < 1e-12);
        let y = project_euclidean(&s, &v(&[-2.0, 3.0])).unwrap();
        assert!((y - v(&[-2.0, 0.0])).norm() < 1e-12);
    }

    #[test]
    fn empty_sets_are_rejected() {
        assert!(matches!(ConstraintSet::boxed(v(&[1.0]), v(&[0.0])), Err(LureError::EmptySet(_))));
        assert!(matches!(ConstraintSet::ball(v(&[0.0]), -1.0), Err(LureError::EmptySet(_))));
        assert!(matches!(ConstraintSet::halfspace(v(&[0.0]), -1.0), Err(LureError::EmptySet(_))));
        let s = ConstraintSet::halfspaces(vec![v(&[1.0]), v(&[-1.0])], vec![-1.0, -1.0]).unwrap();
        assert!(matches!(project_euclidean(&s, &v(&[3.0])), Err(LureError::EmptySet(_))));
        assert!(matches!(
            ConstraintSet::ellipsoid(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), 1.0),
            Err(LureError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn spec_roundtrip() {
        let s = ConstraintSet::ellipsoid(DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 2.0]), 10.0).unwrap();
        let spec = ConstraintSpec::from(&s);
        let json = serde_json::to_string(&spec).unwrap();
        assert!(json.contains("\"kind\":\"ellipsoid\""));
        let back: ConstraintSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert_eq!(ConstraintSet::try_from(&back).unwrap().kind(), "ellipsoid");
    }
}
