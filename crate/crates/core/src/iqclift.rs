//! Lifting filter, augmented system and Zames-Falb type multipliers.
//!
//! The filter keeps the last `ell` outputs and gradients in two shift
//! registers so that its output is the lifted signal
//! `z_k = (y_k, ..., y_{k-ell}, u_k, ..., u_{k-ell})`.

use nalgebra::{DMatrix, DVector};

use crate::canonical::CanonicalSystem;
use crate::error::{LureError, Result};
use crate::linalg;
use crate::oracles::Sector;

/// Tolerance of the doubly-hyperdominance test.
pub const CONE_TOL: f64 = 1e-10;

/// Base matrices of the lifting filter
/// `zeta+ = a zeta + b_y y + b_u u`, `z = c zeta + d_y y + d_u u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftFilter {
    pub ell: usize,
    pub a: DMatrix<f64>,
    pub b_y: DVector<f64>,
    pub b_u: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d_y: DVector<f64>,
    pub d_u: DVector<f64>,
}

/// Shift register of length `ell` for one scalar channel.
fn shift_register(ell: usize) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let a0 = DMatrix::from_fn(ell, ell, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let b0 = DVector::from_fn(ell, |i, _| if i == 0 { 1.0 } else { 0.0 });
    let c0 = DMatrix::from_fn(ell + 1, ell, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
    let d0 = DVector::from_fn(ell + 1, |i, _| if i == 0 { 1.0 } else { 0.0 });
    (a0, b0, c0, d0)
}

pub fn build_filter(ell: usize) -> LiftFilter {
    let (a0, b0, c0, d0) = shift_register(ell);
    let s = ell;
    let z = ell + 1;
    let mut a = DMatrix::zeros(2 * s, 2 * s);
    a.view_mut((0, 0), (s, s)).copy_from(&a0);
    a.view_mut((s, s), (s, s)).copy_from(&a0);
    let mut b_y = DVector::zeros(2 * s);
    b_y.rows_mut(0, s).copy_from(&b0);
    let mut b_u = DVector::zeros(2 * s);
    b_u.rows_mut(s, s).copy_from(&b0);
    let mut c = DMatrix::zeros(2 * z, 2 * s);
    c.view_mut((0, 0), (z, s)).copy_from(&c0);
    c.view_mut((z, s), (z, s)).copy_from(&c0);
    let mut d_y = DVector::zeros(2 * z);
    d_y.rows_mut(0, z).copy_from(&d0);
    let mut d_u = DVector::zeros(2 * z);
    d_u.rows_mut(z, z).copy_from(&d0);
    LiftFilter { ell, a, b_y, b_u, c, d_y, d_u }
}

/// Canonical system in series with the lifting filter. State ordering is
/// `(y_{k+r-1}, y_{k+r-2}, ..., y_k, xi2, zeta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    /// Order of the canonical part.
    pub n: usize,
    pub r: usize,
    pub ell: usize,
}

impl AugmentedSystem {
    /// Total base order `n + 2 ell`.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Index of `y_k` in the state.
    pub fn output_index(&self) -> usize {
        self.r - 1
    }

    /// Indices of the trailing block `(xi2, zeta)` that the projection corrects.
    pub fn tail_range(&self) -> std::ops::Range<usize> {
        self.r..self.order()
    }
}

pub fn augment(canon: &CanonicalSystem, filter: &LiftFilter) -> Result<AugmentedSystem> {
    let n = canon.n();
    let s = filter.a.nrows();
    let zdim = filter.c.nrows();
    if filter.b_y.len() != s || filter.b_u.len() != s || filter.c.ncols() != s || filter.d_y.len() != zdim {
        return Err(LureError::DimensionMismatch("inconsistent filter matrices".into()));
    }
    let sys = canon.system();
    let c_row = sys.c().transpose();
    let big = n + s;
    let mut a = DMatrix::zeros(big, big);
    a.view_mut((0, 0), (n, n)).copy_from(sys.a());
    a.view_mut((n, 0), (s, n)).copy_from(&(&filter.b_y * &c_row));
    a.view_mut((n, n), (s, s)).copy_from(&filter.a);
    let mut b = DVector::zeros(big);
    b.rows_mut(0, n).copy_from(sys.b());
    b.rows_mut(n, s).copy_from(&filter.b_u);
    let mut c = DMatrix::zeros(zdim, big);
    c.view_mut((0, 0), (zdim, n)).copy_from(&(&filter.d_y * &c_row));
    c.view_mut((0, n), (zdim, s)).copy_from(&filter.c);
    Ok(AugmentedSystem { a, b, c, d: filter.d_u.clone(), n, r: canon.r(), ell: filter.ell })
}

/// Lifted stack `(y_k, ..., y_{k-ell}, u_k, ..., u_{k-ell})` as a
/// `2(ell+1) x d` block matrix, zero-padded before the first sample.
pub fn lifted_stack(outputs: &[DVector<f64>], inputs: &[DVector<f64>], k: usize, ell: usize) -> DMatrix<f64> {
    let d = outputs[k].len();
    let mut z = DMatrix::zeros(2 * (ell + 1), d);
    for j in 0..=ell {
        if j <= k {
            z.row_mut(j).copy_from(&outputs[k - j].transpose());
            z.row_mut(ell + 1 + j).copy_from(&inputs[k - j].transpose());
        }
    }
    z
}

/// Off-diagonals nonpositive, row and column sums nonnegative.
pub fn is_doubly_hyperdominant(q: &DMatrix<f64>) -> bool {
    if !q.is_square() {
        return false;
    }
    let n = q.nrows();
    let off_ok = (0..n).all(|i| (0..n).all(|j| i == j || q[(i, j)] <= CONE_TOL));
    let rows_ok = (0..n).all(|i| q.row(i).sum() >= -CONE_TOL);
    let cols_ok = (0..n).all(|j| q.column(j).sum() >= -CONE_TOL);
    off_ok && rows_ok && cols_ok
}

/// Multiplier `M = M_Q + M_Qt` acting on lifted `(y, u)` stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    pub q: DMatrix<f64>,
    pub qt: DMatrix<f64>,
    pub rho: f64,
    pub sector: Sector,
    pub m_q: DMatrix<f64>,
    pub m_qt: DMatrix<f64>,
    pub m: DMatrix<f64>,
}

/// Loop transformation `[[L, -1], [-m, 1]] kron I_{ell+1}`.
pub fn loop_transformation(sector: Sector, ell: usize) -> DMatrix<f64> {
    let t = DMatrix::from_row_slice(2, 2, &[sector.l, -1.0, -sector.m, 1.0]);
    linalg::kron_identity(&t, ell + 1)
}

/// `T^T [[0, X^T], [X, 0]] T` for a square `X` of size `ell + 1`.
pub fn sector_form(x: &DMatrix<f64>, sector: Sector) -> DMatrix<f64> {
    let k = x.nrows();
    let t = loop_transformation(sector, k - 1);
    let mut inner = DMatrix::zeros(2 * k, 2 * k);
    inner.view_mut((0, k), (k, k)).copy_from(&x.transpose());
    inner.view_mut((k, 0), (k, k)).copy_from(x);
    t.transpose() * inner * t
}

/// `diag(1, rho, ..., rho^ell)`.
pub fn rho_weights(rho: f64, ell: usize) -> DMatrix<f64> {
    DMatrix::from_fn(ell + 1, ell + 1, |i, j| if i == j { rho.powi(i as i32) } else { 0.0 })
}

/// Assemble `M` without validating the cone (used for affine expansions).
pub fn multiplier_matrices(
    q: &DMatrix<f64>,
    qt: &DMatrix<f64>,
    rho: f64,
    sector: Sector,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let ell = q.nrows() - 1;
    let w = rho_weights(rho, ell);
    (sector_form(q, sector), sector_form(&(&w * qt * &w), sector))
}

pub fn build_multiplier(q: DMatrix<f64>, qt: DMatrix<f64>, rho: f64, sector: Sector, ell: usize) -> Result<Multiplier> {
    if q.shape() != (ell + 1, ell + 1) || qt.shape() != (ell + 1, ell + 1) {
        return Err(LureError::DimensionMismatch(format!("Q and Qt must be {0}x{0}", ell + 1)));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(LureError::InvalidSector(format!("rate {rho} outside (0, 1)")));
    }
    let sector = Sector::new(sector.m, sector.l)?;
    if !is_doubly_hyperdominant(&q) {
        return Err(LureError::InvalidCone("Q"));
    }
    if !is_doubly_hyperdominant(&qt) {
        return Err(LureError::InvalidCone("Qt"));
    }
    let (m_q, m_qt) = multiplier_matrices(&q, &qt, rho, sector);
    let m = linalg::symmetrize(&(&m_q + &m_qt));
    Ok(Multiplier { q, qt, rho, sector, m_q, m_qt, m })
}

/// `sum_j trace((z - z*)^T M (z - z*))` for block stacks.
pub fn quadratic_form(m: &DMatrix<f64>, z: &DMatrix<f64>, z_star: &DMatrix<f64>) -> f64 {
    let e = z - z_star;
    e.component_mul(&(m * &e)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sssys::ReducedLti;

    fn simulate_filter(f: &LiftFilter, ys: &[f64], us: &[f64]) -> Vec<DVector<f64>> {
        let mut zeta = DVector::zeros(f.a.nrows());
        let mut out = Vec::new();
        for (&y, &u) in ys.iter().zip(us) {
            out.push(&f.c * &zeta + &f.d_y * y + &f.d_u * u);
            zeta = &f.a * &zeta + &f.b_y * y + &f.b_u * u;
        }
        out
    }

    #[test]
    fn empty_filter_passes_the_signals_through() {
        let f = build_filter(0);
        assert_eq!(f.a.shape(), (0, 0));
        let z = simulate_filter(&f, &[2.0], &[3.0]);
        assert_eq!(z[0].as_slice(), &[2.0, 3.0]);
    }

    #[test]
    fn unit_filter_stacks_one_delay() {
        let f = build_filter(1);
        assert_eq!(f.a, DMatrix::zeros(2, 2));
        let ys: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let us: Vec<f64> = (0..10).map(|k| -2.0 * k as f64).collect();
        let z = simulate_filter(&f, &ys, &us);
        for k in 1..10 {
            assert_eq!(z[k].as_slice(), &[ys[k], ys[k - 1], us[k], us[k - 1]]);
        }
    }

    #[test]
    fn filter_state_dimension_is_twice_the_lift() {
        assert_eq!(build_filter(9).a.nrows(), 18);
    }

    #[test]
    fn gradient_descent_augmentation_without_lift() {
        let sys = ReducedLti::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, -0.1),
            DVector::from_element(1, 1.0),
            1,
        )
        .unwrap();
        let canon = CanonicalSystem::new(sys, 1).unwrap();
        let aug = augment(&canon, &build_filter(0)).unwrap();
        assert_eq!(aug.a, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(aug.b, DVector::from_element(1, -0.1));
        assert_eq!(aug.c, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]));
        assert_eq!(aug.d, DVector::from_vec(vec![0.0, 1.0]));
    }

    #[test]
    fn hyperdominance_examples() {
        assert!(is_doubly_hyperdominant(&DMatrix::identity(3, 3)));
        assert!(!is_doubly_hyperdominant(&DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.0, 1.0])));
        assert!(is_doubly_hyperdominant(&DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0])));
    }

    #[test]
    fn scalar_multiplier_is_the_weighted_sector_constraint() {
        let s = Sector::new(1.0, 10.0).unwrap();
        let q = 0.7;
        let m = build_multiplier(DMatrix::from_element(1, 1, q), DMatrix::zeros(1, 1), 0.5, s, 0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-2.0 * 10.0, 11.0, 11.0, -2.0]) * q;
        assert!((m.m - expected).amax() < 1e-14);
    }

    #[test]
    fn zero_multiplier_and_invalid_inputs() {
        let s = Sector::new(1.0, 10.0).unwrap();
        let m = build_multiplier(DMatrix::zeros(2, 2), DMatrix::zeros(2, 2), 0.9, s, 1).unwrap();
        assert_eq!(m.m, DMatrix::zeros(4, 4));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(
            build_multiplier(bad, DMatrix::zeros(2, 2), 0.9, s, 1).unwrap_err(),
            LureError::InvalidCone("Q")
        );
        assert!(matches!(
            build_multiplier(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), 1.0, s, 0),
            Err(LureError::InvalidSector(_))
        ));
    }
}
