//! Objective oracles for the class S(m, L) of m-strongly convex functions
//! with L-Lipschitz gradients.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{LureError, Result};
use crate::linalg;

/// Sector bounds `0 < m <= L` of the gradient map.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Sector {
    pub m: f64,
    pub l: f64,
}

impl Sector {
    pub fn new(m: f64, l: f64) -> Result<Self> {
        if !(m.is_finite() && l.is_finite() && m > 0.0 && m <= l) {
            return Err(LureError::InvalidSector(format!("need 0 < m <= L, got m={m}, L={l}")));
        }
        Ok(Self { m, l })
    }

    pub fn condition_number(&self) -> f64 {
        self.l / self.m
    }
}

/// A differentiable objective in S(m, L) with exact gradients.
pub trait ObjectiveOracle: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn value(&self, y: &DVector<f64>) -> f64;
    fn gradient(&self, y: &DVector<f64>) -> DVector<f64>;
    /// Declared sector bounds.
    fn sector(&self) -> Sector;
    /// Unconstrained minimizer, when known in closed form.
    fn minimizer(&self) -> Option<DVector<f64>> {
        None
    }
}

/// `f(y) = 1/2 y^T F y + p^T y` with `F` symmetric positive definite.
#[derive(Debug, Clone)]
pub struct Quadratic {
    f: DMatrix<f64>,
    p: DVector<f64>,
    sector: Sector,
    minimizer: DVector<f64>,
}

impl Quadratic {
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.f
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.p
    }
}

/// Build a quadratic oracle; `m` and `L` are the extreme eigenvalues of `F`.
pub fn quadratic(f: DMatrix<f64>, p: DVector<f64>) -> Result<Quadratic> {
    if !f.is_square() || f.nrows() != p.len() || p.is_empty() {
        return Err(LureError::DimensionMismatch(format!(
            "quadratic needs a square F matching p, got {:?} and {}",
            f.shape(),
            p.len()
        )));
    }
    let scale = f.amax().max(1.0);
    if linalg::asymmetry(&f) > 1e-12 * scale {
        return Err(LureError::InvalidInput("quadratic Hessian F is not symmetric".into()));
    }
    let f = linalg::symmetrize(&f);
    let ev = linalg::sym_eigenvalues(&f);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if lo <= 0.0 {
        return Err(LureError::NotPositiveDefinite { min_eig: lo });
    }
    let minimizer = -f
        .clone()
        .cholesky()
        .ok_or(LureError::NotPositiveDefinite { min_eig: lo })?
        .solve(&p);
    Ok(Quadratic { f, p, sector: Sector { m: lo, l: hi }, minimizer })
}

impl ObjectiveOracle for Quadratic {
    fn dim(&self) -> usize {
        self.p.len()
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        0.5 * y.dot(&(&self.f * y)) + self.p.dot(y)
    }

    fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.f * y + &self.p
    }

    fn sector(&self) -> Sector {
        self.sector
    }

    fn minimizer(&self) -> Option<DVector<f64>> {
        Some(self.minimizer.clone())
    }
}

/// Regularized log-sum-exp:
/// `f(y) = mu/2 ||y||^2 + log(sum_i exp(a_i^T y + b_i))`.
///
/// The softmax Jacobian `diag(s) - s s^T` has spectral norm at most 1/2, so
/// `f` lies in `S(mu, mu + ||A||_2^2 / 2)`.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    a: DMatrix<f64>,
    b: DVector<f64>,
    mu: f64,
    sector: Sector,
}

pub fn log_sum_exp(a: DMatrix<f64>, b: DVector<f64>, mu: f64) -> Result<LogSumExp> {
    if a.nrows() != b.len() || a.nrows() == 0 || a.ncols() == 0 {
        return Err(LureError::DimensionMismatch(format!(
            "log-sum-exp needs A with one row per offset, got {:?} and {}",
            a.shape(),
            b.len()
        )));
    }
    let norm2 = linalg::singular_values(&a)[0];
    let sector = Sector::new(mu, mu + 0.5 * norm2 * norm2)?;
    Ok(LogSumExp { a, b, mu, sector })
}

impl LogSumExp {
    fn softmax(&self, y: &DVector<f64>) -> (DVector<f64>, f64) {
        let z = &self.a * y + &self.b;
        let top = z.max();
        let e = z.map(|v| (v - top).exp());
        let total = e.sum();
        (e / total, top + total.ln())
    }
}

impl ObjectiveOracle for LogSumExp {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, y: &DVector<f64>) -> f64 {
        0.5 * self.mu * y.norm_squared() + self.softmax(y).1
    }

    fn gradient(&self, y: &DVector<f64>) -> DVector<f64> {
        let (s, _) = self.softmax(y);
        y * self.mu + self.a.transpose() * s
    }

    fn sector(&self) -> Sector {
        self.sector
    }
}

/// Sampled two-sided sector test
/// `m |x-y|^2 <= (grad f(x) - grad f(y))^T (x-y) <= L |x-y|^2` with slack 1e-9.
pub fn membership_check<R: Rng + ?Sized>(
    oracle: &dyn ObjectiveOracle,
    m: f64,
    l: f64,
    samples: usize,
    rng: &mut R,
) -> bool {
    let d = oracle.dim();
    let slack = 1e-9;
    (0..samples.max(1)).all(|_| {
        let x = DVector::from_fn(d, |_, _| rng.random_range(-10.0..10.0));
        let y = DVector::from_fn(d, |_, _| rng.random_range(-10.0..10.0));
        let dx = &x - &y;
        let dg = oracle.gradient(&x) - oracle.gradient(&y);
        let inner = dg.dot(&dx);
        let sq = dx.norm_squared();
        let tol = slack * sq.max(1.0);
        inner >= m * sq - tol && inner <= l * sq + tol
    })
}

/// Unconstrained minimizer: closed form when available, otherwise gradient
/// descent with step `2/(m+L)` until the gradient norm is below `tol`.
pub fn unconstrained_minimizer(oracle: &dyn ObjectiveOracle, tol: f64) -> Result<DVector<f64>> {
    if let Some(y) = oracle.minimizer() {
        return Ok(y);
    }
    let s = oracle.sector();
    let step = 2.0 / (s.m + s.l);
    let mut y = DVector::zeros(oracle.dim());
    for _ in 0..200_000 {
        let g = oracle.gradient(&y);
        if g.norm() <= tol {
            return Ok(y);
        }
        y -= g * step;
    }
    Err(LureError::ConvergenceFailure("gradient descent for the unconstrained minimizer".into()))
}

/// Random quadratic with spectrum inside `[m, L]`, both ends attained.
pub fn random_quadratic<R: Rng + ?Sized>(d: usize, sector: Sector, rng: &mut R) -> Quadratic {
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let eig = DVector::from_fn(d, |i, _| match i {
        0 if d > 1 => sector.m,
        1 => sector.l,
        _ => rng.random_range(sector.m..=sector.l),
    });
    let f = linalg::symmetrize(&(&q * DMatrix::from_diagonal(&eig) * q.transpose()));
    let p = DVector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
    quadratic(f, p).expect("spectrum is positive by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_quadratic() -> Quadratic {
        quadratic(
            DMatrix::from_row_slice(2, 2, &[9.88, -1.0, -1.0, 1.117]),
            DVector::from_vec(vec![1.0, 5.0]),
        )
        .unwrap()
    }

    #[test]
    fn identity_quadratic_has_unit_sector() {
        let q = quadratic(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        assert_eq!(q.sector(), Sector { m: 1.0, l: 1.0 });
        assert_eq!(q.minimizer().unwrap(), DVector::zeros(3));
    }

    #[test]
    fn example_quadratic_sector_matches_recomputed_eigenvalues() {
        let q = example_quadratic();
        let s = q.sector();
        assert!((s.m - 1.004).abs() < 1e-3, "m = {}", s.m);
        assert!((s.l - 9.993).abs() < 1e-3, "L = {}", s.l);
        let grad = q.gradient(&q.minimizer().unwrap());
        assert!(grad.norm() < 1e-12);
    }

    #[test]
    fn indefinite_hessian_is_rejected() {
        let err = quadratic(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), DVector::zeros(2));
        assert!(matches!(err, Err(LureError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn membership_accepts_true_bounds_and_rejects_wrong_ones() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = quadratic(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!(membership_check(&q, 1.0, 1.0, 100, &mut rng));
        assert!(!membership_check(&q, 2.0, 3.0, 100, &mut rng));
        let q2 = example_quadratic();
        assert!(membership_check(&q2, 1.0, 10.0, 10_000, &mut rng));
    }

    #[test]
    fn random_quadratics_satisfy_their_declared_sector() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..5 {
            let q = random_quadratic(5, Sector::new(1.0, 10.0).unwrap(), &mut rng);
            let s = q.sector();
            assert!((s.m - 1.0).abs() < 1e-9 && (s.l - 10.0).abs() < 1e-9);
            assert!(membership_check(&q, s.m, s.l, 500, &mut rng));
        }
    }

    fn central_difference(o: &dyn ObjectiveOracle, y: &DVector<f64>) -> DVector<f64> {
        let h = 1e-5;
        DVector::from_fn(y.len(), |i, _| {
            let mut a = y.clone();
            let mut b = y.clone();
            a[i] += h;
            b[i] -= h;
            (o.value(&a) - o.value(&b)) / (2.0 * h)
        })
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lse = log_sum_exp(
            DMatrix::from_fn(4, 3, |_, _| rng.random_range(-1.0..1.0)),
            DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0)),
            0.5,
        )
        .unwrap();
        let quad = random_quadratic(3, Sector::new(1.0, 10.0).unwrap(), &mut rng);
        let oracles: [&dyn ObjectiveOracle; 2] = [&lse, &quad];
        for o in oracles {
            for _ in 0..100 {
                let y = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
                let g = o.gradient(&y);
                let fd = central_difference(o, &y);
                assert!((&g - fd).norm() <= 1e-6 * g.norm().max(1.0));
            }
        }
    }

    #[test]
    fn log_sum_exp_is_slope_restricted_in_its_declared_sector() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lse = log_sum_exp(
            DMatrix::from_fn(5, 2, |_, _| rng.random_range(-2.0..2.0)),
            DVector::from_fn(5, |_, _| rng.random_range(-1.0..1.0)),
            1.0,
        )
        .unwrap();
        let s = lse.sector();
        assert!(membership_check(&lse, s.m, s.l, 2000, &mut rng));
        let y = unconstrained_minimizer(&lse, 1e-12).unwrap();
        assert!(lse.gradient(&y).norm() <= 1e-12);
    }
}
