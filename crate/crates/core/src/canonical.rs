//! Output-stack canonical realization and its structural identities.
//!
//! A canonical system of relative degree `r` has state
//! `(y_{k+r-1}, ..., y_k, xi2)`: the gradient enters only the first block
//! (`B = g e1`), block rows `2..r` of `A` are a pure down-shift and the
//! output is the `r`-th block.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LureError, Result};
use crate::linalg;
use crate::oracles::ObjectiveOracle;
use crate::sssys::{simulate, LureLoop, ReducedLti};

/// Singular values of `Q_r` above this fraction of the largest count toward the rank.
pub const RANK_TOL: f64 = 1e-9;
/// Singular value band (relative) in which the rank decision is refused.
pub const RANK_AMBIGUOUS_BAND: (f64, f64) = (1e-11, 1e-7);
/// Tolerance of the structural checks.
pub const FIXED_POINT_TOL: f64 = 1e-8;
const STRUCTURE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSystem {
    sys: ReducedLti,
    r: usize,
    g: f64,
}

impl CanonicalSystem {
    /// Validate the canonical block pattern of `sys` for relative degree `r`.
    pub fn new(sys: ReducedLti, r: usize) -> Result<Self> {
        let n = sys.n();
        if r == 0 || r > n {
            return Err(LureError::DimensionMismatch(format!("relative degree {r} outside 1..={n}")));
        }
        let scale = sys.a().amax().max(sys.b().amax()).max(1.0);
        let tol = STRUCTURE_TOL * scale;
        let g = sys.b()[0];
        if g.abs() <= tol {
            return Err(LureError::InvalidInput("first block of B is zero".into()));
        }
        if sys.b().iter().skip(1).any(|v| v.abs() > tol) {
            return Err(LureError::InvalidInput("B has nonzero entries below the first block".into()));
        }
        for j in 0..n {
            let e = if j == r - 1 { 1.0 } else { 0.0 };
            if (sys.c()[j] - e).abs() > tol {
                return Err(LureError::InvalidInput(format!("C is not e_{r}")));
            }
        }
        for i in 1..r {
            for j in 0..n {
                let e = if j + 1 == i { 1.0 } else { 0.0 };
                if (sys.a()[(i, j)] - e).abs() > tol {
                    return Err(LureError::InvalidInput(format!("row {} of A is not a shift row", i + 1)));
                }
            }
        }
        Ok(Self { sys, r, g })
    }

    pub fn system(&self) -> &ReducedLti {
        &self.sys
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn d(&self) -> usize {
        self.sys.d()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        self.sys.a()
    }

    pub fn a11(&self) -> DMatrix<f64> {
        self.a().view((0, 0), (self.r, self.r)).into_owned()
    }

    pub fn a12(&self) -> DMatrix<f64> {
        self.a().view((0, self.r), (self.r, self.n() - self.r)).into_owned()
    }

    pub fn a21(&self) -> DMatrix<f64> {
        self.a().view((self.r, 0), (self.n() - self.r, self.r)).into_owned()
    }

    pub fn a22(&self) -> DMatrix<f64> {
        let m = self.n() - self.r;
        self.a().view((self.r, self.r), (m, m)).into_owned()
    }

    /// `K = A - I`.
    pub fn k(&self) -> DMatrix<f64> {
        let n = self.n();
        self.a() - DMatrix::identity(n, n)
    }

    pub fn k1(&self) -> DMatrix<f64> {
        self.k().columns(0, self.r).into_owned()
    }

    pub fn k2(&self) -> DMatrix<f64> {
        self.k().columns(self.r, self.n() - self.r).into_owned()
    }

    pub fn with_dimension(&self, d: usize) -> Result<Self> {
        Ok(Self { sys: self.sys.with_dimension(d)?, ..self.clone() })
    }

    /// `-K2^+ K1 1_r`: the `xi2` part of the fixed point for `y* = 1`.
    pub fn xi2_gain(&self) -> Result<DVector<f64>> {
        let k2 = self.k2();
        if k2.ncols() == 0 {
            return Ok(DVector::zeros(0));
        }
        let sv = linalg::singular_values(&k2);
        let sigma_min = *sv.last().expect("nonempty");
        let scale = self.k().norm().max(1.0);
        if sv.len() < k2.ncols() || sigma_min <= 1e-10 * scale {
            return Err(LureError::SingularK2 { sigma_min });
        }
        let k1_ones = self.k1() * DVector::from_element(self.r, 1.0);
        Ok(-linalg::pinv(&k2) * k1_ones)
    }

    /// Equilibrium `xi* = (1_r kron y*, -K2^+ K1 (1_r kron y*))` as a block state.
    pub fn fixed_point(&self, y_star: &DVector<f64>) -> Result<DMatrix<f64>> {
        if y_star.len() != self.d() {
            return Err(LureError::DimensionMismatch(format!(
                "y* has {} entries, system has d = {}",
                y_star.len(),
                self.d()
            )));
        }
        let w = self.xi2_gain()?;
        let mut v = DVector::from_element(self.n(), 1.0);
        v.rows_mut(self.r, w.len()).copy_from(&w);
        Ok(&v * y_star.transpose())
    }
}

/// Serialized form of a canonical system.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalFile {
    pub r: usize,
    pub g: f64,
    pub d: usize,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl From<&CanonicalSystem> for CanonicalFile {
    fn from(c: &CanonicalSystem) -> Self {
        Self {
            r: c.r,
            g: c.g,
            d: c.d(),
            a: linalg::to_rows(c.a()),
            b: c.sys.b().iter().copied().collect(),
            c: c.sys.c().iter().copied().collect(),
        }
    }
}

impl TryFrom<CanonicalFile> for CanonicalSystem {
    type Error = LureError;

    fn try_from(f: CanonicalFile) -> Result<Self> {
        let a = linalg::from_rows(&f.a).ok_or_else(|| LureError::InvalidInput("ragged A".into()))?;
        let sys = ReducedLti::new(a, DVector::from_vec(f.b), DVector::from_vec(f.c), f.d)?;
        Self::new(sys, f.r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchChoice {
    /// Decide from the numerical rank of `Q_r`.
    #[default]
    Auto,
    /// Always stack delayed outputs, even when `Q_r` has full rank.
    ForceAugmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// Input was already canonical.
    Identity,
    /// Similarity transform `T = [Q_r; 0 S2]`.
    FullRank,
    /// Transform by `[c A^(r-1); 0 I]` and stack `r - 1` delayed outputs.
    Augmented,
}

/// Canonical system plus the linear map from original to canonical states.
#[derive(Debug, Clone)]
pub struct Canonicalization {
    pub canon: CanonicalSystem,
    pub branch: Branch,
    /// `n~ x n` matrix with `x~_0 = state_map x_0`.
    pub state_map: DMatrix<f64>,
    /// Singular values of `Q_r` (empty for the identity branch).
    pub q_singular_values: Vec<f64>,
}

fn is_canonical(sys: &ReducedLti, r: usize) -> bool {
    CanonicalSystem::new(sys.clone(), r).is_ok()
}

/// Rows `c A^(r-1), ..., c A, c` (top to bottom).
fn output_prediction_matrix(sys: &ReducedLti, r: usize) -> DMatrix<f64> {
    let n = sys.n();
    let mut rows = Vec::with_capacity(r);
    let mut row = sys.c().transpose();
    for _ in 0..r {
        rows.push(row.clone());
        row = &row * sys.a();
    }
    rows.reverse();
    DMatrix::from_fn(r, n, |i, j| rows[i][j])
}

/// Canonicalize a system that is already canonical or in the integrator form
/// (`b = e1`, first row of `A` equal to `e1^T`).
pub fn canonicalize(sys: &ReducedLti, choice: BranchChoice) -> Result<Canonicalization> {
    let rd = sys.relative_degree()?;
    let n = sys.n();
    if choice == BranchChoice::Auto && is_canonical(sys, rd.r) {
        return Ok(Canonicalization {
            canon: CanonicalSystem::new(sys.clone(), rd.r)?,
            branch: Branch::Identity,
            state_map: DMatrix::identity(n, n),
            q_singular_values: Vec::new(),
        });
    }
    if !sys.is_observable_form(1e-12) {
        return Err(LureError::NotObservableForm);
    }
    let r = rd.r;
    let q = output_prediction_matrix(sys, r);
    let sv = linalg::singular_values(&q);
    let top = sv[0];
    if let Some(&s) = sv
        .iter()
        .find(|&&s| s >= RANK_AMBIGUOUS_BAND.0 * top && s <= RANK_AMBIGUOUS_BAND.1 * top)
    {
        return Err(LureError::RankDecisionAmbiguous { ratio: s / top });
    }
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * top).count();
    let (canon, branch, state_map) = if rank == r && choice == BranchChoice::Auto {
        let (c, t) = full_rank_branch(sys, r, &q)?;
        (c, Branch::FullRank, t)
    } else {
        let (c, t) = augmented_branch(sys, r, &q)?;
        (c, Branch::Augmented, t)
    };
    Ok(Canonicalization { canon, branch, state_map, q_singular_values: sv })
}

/// Bring an arbitrary system to the integrator form when needed, then
/// canonicalize. The returned state map is relative to `sys`.
pub fn canonicalize_system(sys: &ReducedLti, choice: BranchChoice) -> Result<Canonicalization> {
    if choice == BranchChoice::Auto {
        if let Ok(rd) = sys.relative_degree() {
            if is_canonical(sys, rd.r) {
                return canonicalize(sys, choice);
            }
        }
    }
    let (obs, t_obs) = sys.observable_form_transform()?;
    let mut out = canonicalize(&obs, choice)?;
    out.state_map = &out.state_map * t_obs;
    Ok(out)
}

fn full_rank_branch(sys: &ReducedLti, r: usize, q: &DMatrix<f64>) -> Result<(CanonicalSystem, DMatrix<f64>)> {
    let n = sys.n();
    let mut t = DMatrix::zeros(n, n);
    t.view_mut((0, 0), (r, n)).copy_from(q);
    if r < n {
        // Rows 2..r of Q_r vanish in the first coordinate (b = e1 and
        // c A^j b = 0 for j < r - 1), so complete them within the last n - 1.
        let tail = q.view((1, 1), (r - 1, n - 1)).into_owned();
        let s2 = linalg::row_space_complement(&tail, 1e-12);
        if s2.nrows() != n - r {
            return Err(LureError::StructureUnreachable(format!(
                "complement of the output rows has dimension {}, expected {}",
                s2.nrows(),
                n - r
            )));
        }
        t.view_mut((r, 1), (n - r, n - 1)).copy_from(&s2);
    }
    let transformed = sys.transformed(&t)?;
    let canon = snap_canonical(transformed, r)?;
    Ok((canon, t))
}

fn augmented_branch(sys: &ReducedLti, r: usize, q: &DMatrix<f64>) -> Result<(CanonicalSystem, DMatrix<f64>)> {
    let n = sys.n();
    let d = sys.d();
    // T_bar = [c A^(r-1); 0 I_{n-1}] is invertible because its (0, 0) entry is g.
    let mut t_bar = DMatrix::identity(n, n);
    t_bar.row_mut(0).copy_from(&q.row(0));
    let t_inv = t_bar
        .clone()
        .try_inverse()
        .ok_or_else(|| LureError::StructureUnreachable("leading Markov row is degenerate".into()))?;
    let top = q.row(0) * sys.a() * &t_inv; // next y_{k+r} without the input
    let rest = (t_bar.rows(1, n - 1) * sys.a() * &t_inv).into_owned();
    let m = n + r - 1;
    // state: (ybar, stack of r-1 delayed outputs, xi_bar of size n-1)
    let mut a = DMatrix::zeros(m, m);
    a[(0, 0)] = top[0];
    for j in 1..n {
        a[(0, r - 1 + j)] = top[j];
    }
    for i in 1..r {
        a[(i, i - 1)] = 1.0;
    }
    for i in 0..n - 1 {
        a[(r + i, 0)] = rest[(i, 0)];
        for j in 1..n {
            a[(r + i, r - 1 + j)] = rest[(i, j)];
        }
    }
    let mut b = DVector::zeros(m);
    b[0] = q.row(0).dot(&sys.b().transpose());
    let mut c = DVector::zeros(m);
    c[r - 1] = 1.0;
    let canon = CanonicalSystem::new(ReducedLti::new(a, b, c, d)?, r)?;
    // Delayed outputs y_j = c A^j x_0 for j < r do not depend on the inputs.
    let mut state_map = DMatrix::zeros(m, n);
    state_map.view_mut((0, 0), (r, n)).copy_from(q);
    state_map.view_mut((r, 1), (n - 1, n - 1)).fill_with_identity();
    Ok((canon, state_map))
}

/// Check the canonical pattern to a loose tolerance and set it exactly.
fn snap_canonical(sys: ReducedLti, r: usize) -> Result<CanonicalSystem> {
    let n = sys.n();
    let mut a = sys.a().clone();
    let mut b = sys.b().clone();
    let mut c = sys.c().clone();
    let tol = 1e-8 * a.amax().max(1.0);
    let mut dev: f64 = 0.0;
    for i in 1..r {
        for j in 0..n {
            let e = if j + 1 == i { 1.0 } else { 0.0 };
            dev = dev.max((a[(i, j)] - e).abs());
            a[(i, j)] = e;
        }
    }
    for j in 0..n {
        if j > 0 {
            dev = dev.max(b[j].abs());
            b[j] = 0.0;
        }
        let e = if j == r - 1 { 1.0 } else { 0.0 };
        dev = dev.max((c[j] - e).abs());
        c[j] = e;
    }
    if dev > tol {
        return Err(LureError::StructureUnreachable(format!(
            "transformed system misses the canonical pattern by {dev:.3e}"
        )));
    }
    CanonicalSystem::new(ReducedLti::new(a, b, c, sys.d())?, r)
}

/// Move the integrating eigenvalue of a canonical system exactly to one.
///
/// Printed coefficients are often rounded, which shifts the eigenvalue at one
/// slightly and makes the fixed-point identity fail at the rounding level.
/// The smallest Frobenius change of the non-shift rows of `A` that makes
/// `(1_r, w)` a right eigenvector at one is applied, where `w` is the
/// least-squares fit of `K2 w = -K1 1_r`. Fails when an entry would move by
/// more than `max_change`. Returns the repaired system and the largest entry change.
pub fn restore_integrator(canon: &CanonicalSystem, max_change: f64) -> Result<(CanonicalSystem, f64)> {
    let n = canon.n();
    let r = canon.r();
    let rows: Vec<usize> = std::iter::once(0).chain(r..n).collect();
    let k = canon.k();
    let ke = k.select_rows(rows.iter());
    let k1 = ke.columns(0, r).into_owned();
    let k2 = ke.columns(r, n - r).into_owned();
    let rhs = -(&k1 * DVector::from_element(r, 1.0));
    let w = if n > r { linalg::pinv(&k2) * rhs } else { DVector::zeros(0) };
    let mut v = DVector::from_element(n, 1.0);
    v.rows_mut(r, n - r).copy_from(&w);
    let res = &ke * &v;
    let delta = -(&res * v.transpose()) / v.norm_squared();
    let required = delta.amax();
    if required > max_change {
        return Err(LureError::IntegratorOutOfTolerance { required, allowed: max_change });
    }
    let mut a = canon.a().clone();
    for (idx, &row) in rows.iter().enumerate() {
        for j in 0..n {
            a[(row, j)] += delta[(idx, j)];
        }
    }
    let sys = ReducedLti::new(a, canon.sys.b().clone(), canon.sys.c().clone(), canon.d())?;
    Ok((CanonicalSystem::new(sys, r)?, required))
}

/// Outcome of the structural checks on a canonical system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub r: usize,
    pub n: usize,
    pub g: f64,
    pub k2_rank: usize,
    /// `||(I - K2 K2^+) K1 1_r||`: solvability of the fixed-point equations
    /// for every output value.
    pub fixed_point_residual: f64,
    /// `||(I - K2 K2^+) K1||` (informational; nonzero whenever `r >= 2`).
    pub fixed_point_matrix_residual: f64,
    /// Largest residual of the two block equations `A xi* = xi*` at `y* = 1`.
    pub fixed_point_pair_residual: f64,
    /// Largest output deviation between original and canonical runs.
    pub io_equivalence_error: Option<f64>,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Evaluate the fixed-point identities, `rank K2` and the sign of `g`.
pub fn structural_checks(canon: &CanonicalSystem) -> StructureReport {
    let n = canon.n();
    let r = canon.r();
    let k1 = canon.k1();
    let k2 = canon.k2();
    let proj_perp = if k2.ncols() == 0 {
        DMatrix::identity(n, n)
    } else {
        DMatrix::identity(n, n) - &k2 * linalg::pinv(&k2)
    };
    let k2_rank = if k2.ncols() == 0 { 0 } else { linalg::rank(&k2, 1e-10) };
    let ones = DVector::from_element(r, 1.0);
    let fixed_point_residual = (&proj_perp * &k1 * &ones).norm();
    let fixed_point_matrix_residual = (&proj_perp * &k1).norm();

    let fixed_point_pair_residual = match canon.xi2_gain() {
        Ok(w) => {
            let mut v = DVector::from_element(n, 1.0);
            v.rows_mut(r, n - r).copy_from(&w);
            let res = canon.a() * &v - &v;
            res.amax()
        }
        Err(_) => f64::INFINITY,
    };

    let mut failures = Vec::new();
    if k2_rank != n - r {
        failures.push(format!("rank K2 = {k2_rank}, expected {}", n - r));
    }
    if !(fixed_point_residual <= FIXED_POINT_TOL) {
        failures.push(format!("fixed-point identity residual {fixed_point_residual:.3e} > {FIXED_POINT_TOL:e}"));
    }
    if !(fixed_point_pair_residual <= FIXED_POINT_TOL) {
        failures.push(format!(
            "block fixed-point residual {fixed_point_pair_residual:.3e} > {FIXED_POINT_TOL:e}"
        ));
    }
    if canon.g() >= 0.0 {
        failures.push(format!("g = {} is not negative", canon.g()));
    }
    StructureReport {
        r,
        n,
        g: canon.g(),
        k2_rank,
        fixed_point_residual,
        fixed_point_matrix_residual,
        fixed_point_pair_residual,
        io_equivalence_error: None,
        passed: failures.is_empty(),
        failures,
    }
}

/// Largest output deviation between the original loop started at `x0` and
/// the canonical loop started at `state_map x0`, over `steps` steps.
pub fn io_deviation(
    original: &ReducedLti,
    canon: &Canonicalization,
    oracle: &dyn ObjectiveOracle,
    x0: &DMatrix<f64>,
    steps: usize,
) -> Result<f64> {
    let d = oracle.dim();
    let orig = original.with_dimension(d)?;
    let can = canon.canon.system().with_dimension(d)?;
    let a = simulate(&LureLoop::new(&orig, oracle)?, x0, steps)?;
    let b = simulate(&LureLoop::new(&can, oracle)?, &(&canon.state_map * x0), steps)?;
    Ok(a.outputs
        .iter()
        .zip(&b.outputs)
        .map(|(p, q)| (p - q).amax())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::quadratic;

    fn sys(a: &[f64], b: &[f64], c: &[f64]) -> ReducedLti {
        let n = b.len();
        ReducedLti::new(
            DMatrix::from_row_slice(n, n, a),
            DVector::from_row_slice(b),
            DVector::from_row_slice(c),
            1,
        )
        .unwrap()
    }

    #[test]
    fn gradient_descent_in_integrator_form() {
        let alpha = 0.2;
        let out = canonicalize(&sys(&[1.0], &[1.0], &[-alpha]), BranchChoice::Auto).unwrap();
        assert_eq!(out.branch, Branch::FullRank);
        assert_eq!(out.canon.r(), 1);
        assert_eq!(out.canon.a11()[(0, 0)], 1.0);
        assert!((out.canon.g() + alpha).abs() < 1e-15);
        assert_eq!(out.canon.a12().ncols(), 0);
        let rep = structural_checks(&out.canon);
        assert!(rep.passed, "{:?}", rep.failures);
        assert_eq!(rep.fixed_point_residual, 0.0);
    }

    #[test]
    fn non_integrator_form_is_rejected() {
        let s = sys(&[1.0, 0.0, 0.5, 0.5], &[0.0, 1.0], &[1.0, 1.0]);
        assert!(matches!(canonicalize(&s, BranchChoice::Auto), Err(LureError::NotObservableForm)));
    }

    #[test]
    fn chain_of_relative_degree_two() {
        // x1+ = x1 + u, x2+ = 0.5 x2 + x1; y = x2 has r = 2.
        let s = sys(&[1.0, 0.0, 1.0, 0.5], &[1.0, 0.0], &[0.0, -0.3]);
        let out = canonicalize(&s, BranchChoice::Auto).unwrap();
        assert_eq!(out.canon.r(), 2);
        assert!((out.canon.g() + 0.3).abs() < 1e-14);
        let f = quadratic(DMatrix::identity(1, 1) * 2.0, DVector::from_element(1, 1.0)).unwrap();
        let x0 = DMatrix::from_row_slice(2, 1, &[0.4, -0.7]);
        assert!(io_deviation(&s, &out, &f, &x0, 100).unwrap() < 1e-12);
    }

    #[test]
    fn forced_augmentation_adds_delay_states() {
        let s = sys(
            &[1.0, 0.0, 0.0, 1.0, 0.2, 0.0, 0.0, 1.0, 0.3],
            &[1.0, 0.0, 0.0],
            &[0.0, 0.0, -0.1],
        );
        let full = canonicalize(&s, BranchChoice::Auto).unwrap();
        assert_eq!(full.canon.r(), 3);
        assert_eq!(full.canon.n(), 3);
        let aug = canonicalize(&s, BranchChoice::ForceAugmented).unwrap();
        assert_eq!(aug.branch, Branch::Augmented);
        assert_eq!(aug.canon.n(), 3 + 2);
        let f = quadratic(DMatrix::identity(1, 1) * 5.0, DVector::from_element(1, -2.0)).unwrap();
        let x0 = DMatrix::from_row_slice(3, 1, &[0.1, 0.9, -0.4]);
        assert!(io_deviation(&s, &aug, &f, &x0, 100).unwrap() < 1e-9);
        assert!(io_deviation(&s, &full, &f, &x0, 100).unwrap() < 1e-9);
    }

    #[test]
    fn corrupted_matrix_fails_the_fixed_point_identity() {
        let s = sys(&[1.0], &[-0.1], &[1.0]);
        let mut a = s.a().clone();
        a[(0, 0)] += 0.1;
        let bad = CanonicalSystem::new(ReducedLti::new(a, s.b().clone(), s.c().clone(), 1).unwrap(), 1).unwrap();
        let rep = structural_checks(&bad);
        assert!(!rep.passed);
        assert!(rep.fixed_point_residual > 1e-3);
    }

    #[test]
    fn restore_integrator_is_a_no_op_on_exact_data() {
        let hb = sys(&[1.5, -0.5, 1.0, 0.0], &[-0.1, 0.0], &[1.0, 0.0]);
        let canon = CanonicalSystem::new(hb, 1).unwrap();
        let (fixed, change) = restore_integrator(&canon, 1e-12).unwrap();
        assert!(change < 1e-15);
        assert_eq!(fixed.a(), canon.a());
    }

    #[test]
    fn canonical_file_roundtrip() {
        let hb = CanonicalSystem::new(sys(&[1.5, -0.5, 1.0, 0.0], &[-0.1, 0.0], &[1.0, 0.0]), 1).unwrap();
        let json = serde_json::to_string(&CanonicalFile::from(&hb)).unwrap();
        let back: CanonicalFile = serde_json::from_str(&json).unwrap();
        assert_eq!(CanonicalSystem::try_from(back).unwrap(), hb);
    }

    #[test]
    fn fixed_point_of_gradient_descent_is_the_output() {
        let canon = CanonicalSystem::new(sys(&[1.0], &[-0.1], &[1.0]), 1).unwrap();
        let x = canon.fixed_point(&DVector::from_element(1, 3.5)).unwrap();
        assert_eq!(x[(0, 0)], 3.5);
    }
}
