//! Kronecker-reduced LTI systems in feedback with a gradient oracle.
//!
//! An algorithm `x+ = A x + B grad f(C x)` on `R^d` whose matrices are all of
//! the form `(.) kron I_d` is stored through its base matrices (`d = 1`).
//! Every analysis runs on the base system; `d` only matters at run time.

use nalgebra::{DMatrix, DVector};

use crate::error::{LureError, Result};
use crate::linalg;
use crate::oracles::ObjectiveOracle;

/// Relative Frobenius tolerance for detecting `(.) kron I_d` structure.
pub const KRONECKER_TOL: f64 = 1e-12;
/// Scale-relative threshold of the Markov-parameter zero test.
pub const RELATIVE_DEGREE_TOL: f64 = 1e-10;
/// Tolerance for "A has an eigenvalue at one", relative to `max(1, ||A||)`.
pub const INTEGRATOR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedLti {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    d: usize,
}

/// Relative degree `r` together with the first nonzero Markov parameter
/// `g = c A^(r-1) b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeDegree {
    pub r: usize,
    pub g: f64,
}

impl ReducedLti {
    /// `c` is the output row stored as a column vector.
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, d: usize) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || d == 0 {
            return Err(LureError::DimensionMismatch("need n >= 1 and d >= 1".into()));
        }
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(LureError::DimensionMismatch(format!(
                "A is {:?}, B has {} rows, C has {} columns",
                a.shape(),
                b.len(),
                c.len()
            )));
        }
        if a.iter().chain(b.iter()).chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(LureError::InvalidInput("system matrices contain non-finite entries".into()));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// State order in blocks.
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Ambient decision dimension.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn with_dimension(&self, d: usize) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone(), d)
    }

    /// Full matrices `(A kron I_d, B kron I_d, C kron I_d)`.
    pub fn expand(&self) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let b = DMatrix::from_column_slice(self.n(), 1, self.b.as_slice());
        let c = DMatrix::from_row_slice(1, self.n(), self.c.as_slice());
        (
            linalg::kron_identity(&self.a, self.d),
            linalg::kron_identity(&b, self.d),
            linalg::kron_identity(&c, self.d),
        )
    }

    /// Similarity transform `x~ = T x`.
    pub fn transformed(&self, t: &DMatrix<f64>) -> Result<Self> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| LureError::StructureUnreachable("transform is singular".into()))?;
        let a = t * &self.a * &t_inv;
        let b = t * &self.b;
        let c = t_inv.transpose() * &self.c;
        Self::new(a, b, c, self.d)
    }

    /// Smallest `r >= 1` with `|c A^(r-1) b| > 1e-10 ||A||^(r-1) ||b|| ||c||`.
    pub fn relative_degree(&self) -> Result<RelativeDegree> {
        let norm_a = linalg::singular_values(&self.a)[0];
        let scale = self.b.norm() * self.c.norm();
        let mut v = self.b.clone();
        for r in 1..=self.n() {
            let g = self.c.dot(&v);
            let threshold = RELATIVE_DEGREE_TOL * norm_a.powi(r as i32 - 1) * scale;
            if g.abs() > threshold {
                return Ok(RelativeDegree { r, g });
            }
            v = &self.a * v;
        }
        Err(LureError::NoFiniteRelativeDegree { order: self.n() })
    }

    /// Whether `b = e1` and the first row of `A` is `e1^T` (within `tol`).
    pub fn is_observable_form(&self, tol: f64) -> bool {
        let n = self.n();
        (0..n).all(|j| {
            let e = if j == 0 { 1.0 } else { 0.0 };
            (self.a[(0, j)] - e).abs() <= tol && (self.b[j] - e).abs() <= tol
        })
    }

    /// Similarity transform to the integrator form with `b = e1` and first
    /// row of `A` equal to `e1^T`.
    ///
    /// The first row of the transform is a left eigenvector `w` of `A` at one
    /// scaled to `w^T b = 1`; the remaining rows span the orthogonal
    /// complement of `b`.
    pub fn to_observable_form(&self) -> Result<Self> {
        self.observable_form_transform().map(|(sys, _)| sys)
    }

    /// Same as [`Self::to_observable_form`], also returning the state map `T`
    /// (`x_new = T x`).
    pub fn observable_form_transform(&self) -> Result<(Self, DMatrix<f64>)> {
        let n = self.n();
        if self.is_observable_form(1e-12) {
            return Ok((self.clone(), DMatrix::identity(n, n)));
        }
        let w = self.integrator_left_vector()?;
        let bt = DMatrix::from_row_slice(1, n, self.b.as_slice());
        let s = linalg::row_space_complement(&bt, 1e-12);
        let mut t = DMatrix::zeros(n, n);
        t.row_mut(0).copy_from(&w.transpose());
        if n > 1 {
            t.view_mut((1, 0), (n - 1, n)).copy_from(&s);
        }
        let mut out = self.transformed(&t)?;
        let dev = (0..n)
            .map(|j| {
                let e = if j == 0 { 1.0 } else { 0.0 };
                (out.a[(0, j)] - e).abs().max((out.b[j] - e).abs())
            })
            .fold(0.0, f64::max);
        if dev > 1e-8 * self.a.amax().max(1.0) {
            return Err(LureError::StructureUnreachable(format!(
                "transformed system deviates from the integrator form by {dev:.3e}"
            )));
        }
        for j in 0..n {
            let e = if j == 0 { 1.0 } else { 0.0 };
            out.a[(0, j)] = e;
            out.b[j] = e;
        }
        Ok((out, t))
    }

    /// Left eigenvector of `A` at one with `w^T b = 1`.
    fn integrator_left_vector(&self) -> Result<DVector<f64>> {
        let n = self.n();
        let k = (&self.a - DMatrix::identity(n, n)).transpose();
        let scale = self.a.norm().max(1.0);
        // Right singular vectors of (A - I)^T with tiny singular values span
        // the left null space of A - I.
        let svd = k.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let idx: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i] <= INTEGRATOR_TOL * scale)
            .collect();
        if idx.is_empty() {
            let smallest = svd.singular_values.min();
            return Err(LureError::StructureUnreachable(format!(
                "A has no eigenvalue at one (smallest singular value of A - I is {smallest:.3e})"
            )));
        }
        let basis = DMatrix::from_fn(n, idx.len(), |i, j| v_t[(idx[j], i)]);
        let w = &basis * (basis.transpose() * &self.b);
        let wb = w.dot(&self.b);
        if wb.abs() <= 1e-10 * self.b.norm() {
            return Err(LureError::StructureUnreachable(
                "the integrating mode is not excited by the gradient input".into(),
            ));
        }
        Ok(w / wb)
    }
}

/// Reduce full matrices `(A, B, C)` of sizes `nd x nd`, `nd x d`, `d x nd`
/// to their base matrices.
pub fn reduce(a_full: &DMatrix<f64>, b_full: &DMatrix<f64>, c_full: &DMatrix<f64>, d: usize) -> Result<ReducedLti> {
    if d == 0 || a_full.nrows() % d != 0 || a_full.nrows() == 0 {
        return Err(LureError::DimensionMismatch(format!(
            "A has {} rows, not a positive multiple of d = {d}",
            a_full.nrows()
        )));
    }
    let nd = a_full.nrows();
    let n = nd / d;
    if a_full.shape() != (nd, nd) || b_full.shape() != (nd, d) || c_full.shape() != (d, nd) {
        return Err(LureError::DimensionMismatch(format!(
            "expected A {nd}x{nd}, B {nd}x{d}, C {d}x{nd}; got {:?}, {:?}, {:?}",
            a_full.shape(),
            b_full.shape(),
            c_full.shape()
        )));
    }
    let a = DMatrix::from_fn(n, n, |i, j| a_full[(i * d, j * d)]);
    let b = DVector::from_fn(n, |i, _| b_full[(i * d, 0)]);
    let c = DVector::from_fn(n, |j, _| c_full[(0, j * d)]);
    let sys = ReducedLti::new(a, b, c, d)?;
    let (ea, eb, ec) = sys.expand();
    for (name, full, expanded) in [("A", a_full, &ea), ("B", b_full, &eb), ("C", c_full, &ec)] {
        let deviation = linalg::relative_deviation(expanded, full);
        if deviation > KRONECKER_TOL {
            return Err(LureError::NonKroneckerStructure { name, deviation });
        }
    }
    Ok(sys)
}

/// LTI system closed with `u = grad f(y)`.
#[derive(Debug, Clone, Copy)]
pub struct LureLoop<'a> {
    pub sys: &'a ReducedLti,
    pub oracle: &'a dyn ObjectiveOracle,
}

impl<'a> LureLoop<'a> {
    pub fn new(sys: &'a ReducedLti, oracle: &'a dyn ObjectiveOracle) -> Result<Self> {
        if oracle.dim() != sys.d() {
            return Err(LureError::DimensionMismatch(format!(
                "oracle acts on R^{} but the system has d = {}",
                oracle.dim(),
                sys.d()
            )));
        }
        Ok(Self { sys, oracle })
    }
}

/// Recorded closed-loop run. `states`, `outputs` and `inputs` all hold
/// `K + 1` entries (`k = 0..=K`), with `inputs[k] = grad f(outputs[k])`.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub states: Vec<DMatrix<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub inputs: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Output `y = C x` of a block state.
pub fn output(c: &DVector<f64>, x: &DMatrix<f64>) -> DVector<f64> {
    (x.transpose() * c).into()
}

/// Iterate `x_{k+1} = A x_k + B grad f(C x_k)` for `k_max` steps from the
/// block state `x0` (`n x d`).
pub fn simulate(lp: &LureLoop<'_>, x0: &DMatrix<f64>, k_max: usize) -> Result<Trajectory> {
    let sys = lp.sys;
    if x0.shape() != (sys.n(), sys.d()) {
        return Err(LureError::DimensionMismatch(format!(
            "initial state is {:?}, expected {}x{}",
            x0.shape(),
            sys.n(),
            sys.d()
        )));
    }
    let mut traj = Trajectory {
        states: Vec::with_capacity(k_max + 1),
        outputs: Vec::with_capacity(k_max + 1),
        inputs: Vec::with_capacity(k_max + 1),
    };
    let mut x = x0.clone();
    for k in 0..=k_max {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LureError::NonFiniteState { step: k });
        }
        let y = output(&sys.c, &x);
        let u = lp.oracle.gradient(&y);
        if k < k_max {
            let next = &sys.a * &x + &sys.b * u.transpose();
            traj.states.push(std::mem::replace(&mut x, next));
        } else {
            traj.states.push(x.clone());
        }
        traj.outputs.push(y);
        traj.inputs.push(u);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::quadratic;

    fn gradient_descent(alpha: f64, d: usize) -> ReducedLti {
        ReducedLti::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -alpha),
            DVector::from_element(1, 1.0),
            d,
        )
        .unwrap()
    }

    #[test]
    fn reduce_recovers_scalar_bases_of_gradient_descent() {
        let alpha = 0.3;
        let sys = reduce(
            &DMatrix::identity(2, 2),
            &(DMatrix::identity(2, 2) * -alpha),
            &DMatrix::identity(2, 2),
            2,
        )
        .unwrap();
        assert_eq!(sys.n(), 1);
        assert_eq!(sys.a()[(0, 0)], 1.0);
        assert_eq!(sys.b()[0], -alpha);
        assert_eq!(sys.c()[0], 1.0);
    }

    #[test]
    fn reduce_rejects_distinct_diagonal_blocks() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let err = reduce(&a, &DMatrix::identity(2, 2), &DMatrix::identity(2, 2), 2).unwrap_err();
        assert!(matches!(err, LureError::NonKroneckerStructure { name: "A", .. }));
    }

    #[test]
    fn reduce_rejects_inconsistent_shapes() {
        let err = reduce(&DMatrix::identity(4, 4), &DMatrix::zeros(4, 1), &DMatrix::zeros(2, 4), 2).unwrap_err();
        assert!(matches!(err, LureError::DimensionMismatch(_)));
        let err = reduce(&DMatrix::identity(3, 3), &DMatrix::zeros(3, 2), &DMatrix::zeros(2, 3), 2).unwrap_err();
        assert!(matches!(err, LureError::DimensionMismatch(_)));
    }

    #[test]
    fn relative_degree_examples() {
        let rd = gradient_descent(0.25, 1).relative_degree().unwrap();
        assert_eq!(rd, RelativeDegree { r: 1, g: -0.25 });

        let chain = ReducedLti::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            DVector::from_vec(vec![1.0, 0.0]),
            1,
        )
        .unwrap();
        assert_eq!(chain.relative_degree().unwrap(), RelativeDegree { r: 2, g: 1.0 });
    }

    #[test]
    fn zero_transfer_function_has_no_relative_degree() {
        let sys = ReducedLti::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.5]),
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0]),
            1,
        )
        .unwrap();
        assert!(matches!(sys.relative_degree(), Err(LureError::NoFiniteRelativeDegree { order: 2 })));
    }

    #[test]
    fn gradient_descent_observable_form_scales_the_state() {
        let alpha = 0.2;
        let obs = gradient_descent(alpha, 1).to_observable_form().unwrap();
        assert!((obs.a()[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((obs.b()[0] - 1.0).abs() < 1e-15);
        assert!((obs.c()[0] + alpha).abs() < 1e-15);
    }

    #[test]
    fn observable_form_is_a_fixed_point_of_the_transform() {
        let sys = ReducedLti::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.3, 0.4]),
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![-0.5, 0.2]),
            1,
        )
        .unwrap();
        let obs = sys.to_observable_form().unwrap();
        assert!((obs.a() - sys.a()).amax() <= 1e-12);
        assert_eq!(obs, sys);
    }

    #[test]
    fn missing_integrator_is_rejected() {
        let sys = ReducedLti::new(
            DMatrix::from_element(1, 1, 0.5),
            DVector::from_element(1, -0.1),
            DVector::from_element(1, 1.0),
            1,
        )
        .unwrap();
        assert!(matches!(sys.to_observable_form(), Err(LureError::StructureUnreachable(_))));
    }

    #[test]
    fn gradient_descent_with_unit_step_converges_in_one_step() {
        let sys = gradient_descent(1.0, 1);
        let f = quadratic(DMatrix::identity(1, 1), DVector::zeros(1)).unwrap();
        let lp = LureLoop::new(&sys, &f).unwrap();
        let traj = simulate(&lp, &DMatrix::from_element(1, 1, 1.0), 5).unwrap();
        let ys: Vec<f64> = traj.outputs.iter().map(|y| y[0]).collect();
        assert_eq!(ys, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(traj.horizon(), 5);
    }

    #[test]
    fn equilibrium_trajectory_is_constant() {
        let sys = gradient_descent(0.1, 2);
        let f = quadratic(DMatrix::identity(2, 2) * 3.0, DVector::from_vec(vec![3.0, -6.0])).unwrap();
        let lp = LureLoop::new(&sys, &f).unwrap();
        let x_star = DMatrix::from_row_slice(1, 2, &[-1.0, 2.0]);
        let traj = simulate(&lp, &x_star, 10).unwrap();
        assert!(traj.states.iter().all(|x| (x - &x_star).amax() < 1e-15));
    }

    #[test]
    fn divergence_is_reported() {
        let sys = gradient_descent(10.0, 1);
        let f = quadratic(DMatrix::identity(1, 1) * 10.0, DVector::zeros(1)).unwrap();
        let lp = LureLoop::new(&sys, &f).unwrap();
        let err = simulate(&lp, &DMatrix::from_element(1, 1, 1.0), 2000).unwrap_err();
        assert!(matches!(err, LureError::NonFiniteState { .. }));
    }

    #[test]
    fn oracle_dimension_must_match() {
        let sys = gradient_descent(0.1, 2);
        let f = quadratic(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        assert!(LureLoop::new(&sys, &f).is_err());
    }
}
