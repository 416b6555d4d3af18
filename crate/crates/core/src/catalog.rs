//! Built-in algorithms and the delayed-gradient example data.

use nalgebra::{DMatrix, DVector};

use crate::canonical::{restore_integrator, CanonicalSystem};
use crate::error::Result;
use crate::oracles::{quadratic, Quadratic};
use crate::sssys::ReducedLti;

/// Largest entry change accepted when restoring the integrator of the
/// printed (3-decimal) delayed-gradient coefficients: half a unit in the
/// last printed digit.
pub const PRINTED_ROUNDING: f64 = 5e-4;

fn lti(a: DMatrix<f64>, b: &[f64], c: &[f64]) -> ReducedLti {
    ReducedLti::new(a, DVector::from_row_slice(b), DVector::from_row_slice(c), 1).expect("catalog data is well formed")
}

/// `x+ = x - alpha grad f(x)`.
pub fn gradient_descent(alpha: f64) -> ReducedLti {
    lti(DMatrix::from_element(1, 1, 1.0), &[-alpha], &[1.0])
}

/// `x+ = x + beta (x - x_prev) - alpha grad f(x)` with state `(x_k, x_{k-1})`.
pub fn heavy_ball(alpha: f64, beta: f64) -> ReducedLti {
    let a = DMatrix::from_row_slice(2, 2, &[1.0 + beta, -beta, 1.0, 0.0]);
    lti(a, &[-alpha, 0.0], &[1.0, 0.0])
}

/// Nesterov's method: gradient evaluated at `x + beta (x - x_prev)`.
pub fn nesterov(alpha: f64, beta: f64) -> ReducedLti {
    let a = DMatrix::from_row_slice(2, 2, &[1.0 + beta, -beta, 1.0, 0.0]);
    lti(a, &[-alpha, 0.0], &[1.0 + beta, -beta])
}

/// Triple momentum method tuned for `S(m, L)`.
pub fn triple_momentum(m: f64, l: f64) -> ReducedLti {
    let rho = 1.0 - (m / l).sqrt();
    let alpha = (1.0 + rho) / l;
    let beta = rho * rho / (2.0 - rho);
    let gamma = rho * rho / ((1.0 + rho) * (2.0 - rho));
    let a = DMatrix::from_row_slice(2, 2, &[1.0 + beta, -beta, 1.0, 0.0]);
    lti(a, &[-alpha, 0.0], &[1.0 + gamma, -gamma])
}

/// Textbook heavy-ball tuning for `S(m, L)`.
pub fn heavy_ball_tuned(m: f64, l: f64) -> ReducedLti {
    let (sm, sl) = (m.sqrt(), l.sqrt());
    heavy_ball(4.0 / (sl + sm).powi(2), ((sl - sm) / (sl + sm)).powi(2))
}

/// Textbook Nesterov tuning for `S(m, L)`.
pub fn nesterov_tuned(m: f64, l: f64) -> ReducedLti {
    let k = (l / m).sqrt();
    nesterov(1.0 / l, (k - 1.0) / (k + 1.0))
}

/// Delayed-gradient method as printed (three decimals), already in
/// canonical form with state `(y_{k+1}, y_k, xi2)`.
pub fn delayed_gradient_printed() -> ReducedLti {
    let a = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.342, 2.297, 0.204, -0.157, //
            1.0, 0.0, 0.0, 0.0, //
            -6.583, -17.788, -2.044, 1.571, //
            0.0, -24.838, -3.104, 2.386,
        ],
    );
    lti(a, &[-0.1519, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0])
}

/// Printed delayed-gradient method with its integrating eigenvalue moved
/// back to exactly one.
pub fn delayed_gradient() -> Result<CanonicalSystem> {
    let printed = CanonicalSystem::new(delayed_gradient_printed(), 2)?;
    restore_integrator(&printed, PRINTED_ROUNDING).map(|(c, _)| c)
}

/// Test quadratic of the constrained example (`d = 2`).
pub fn example_quadratic() -> Quadratic {
    quadratic(
        DMatrix::from_row_slice(2, 2, &[9.88, -1.0, -1.0, 1.117]),
        DVector::from_vec(vec![1.0, 5.0]),
    )
    .expect("positive definite")
}

/// Shape matrix and level of the example ellipse `{y : y^T W y <= c}`.
pub fn example_ellipse() -> (DMatrix<f64>, f64) {
    (DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 2.0]), 10.0)
}

/// Named catalog used for structural checks, with `S(m, L)` tunings.
pub fn catalog(m: f64, l: f64) -> Result<Vec<(&'static str, ReducedLti)>> {
    Ok(vec![
        ("gradient-descent", gradient_descent(2.0 / (m + l))),
        ("heavy-ball", heavy_ball_tuned(m, l)),
        ("nesterov", nesterov_tuned(m, l)),
        ("triple-momentum", triple_momentum(m, l)),
        ("delayed-gradient", delayed_gradient()?.system().clone()),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;

    #[test]
    fn printed_delayed_gradient_misses_the_unit_eigenvalue() {
        let a = delayed_gradient_printed().a().clone();
        let det = (a - DMatrix::identity(4, 4)).determinant();
        assert!((det + 0.00166).abs() < 2e-5, "det(A - I) = {det}");
    }

    #[test]
    fn restored_delayed_gradient_stays_within_rounding() {
        let fixed = delayed_gradient().unwrap();
        let printed = delayed_gradient_printed();
        let change = (fixed.a() - printed.a()).amax();
        assert!(change < PRINTED_ROUNDING && change > 1e-4, "change {change}");
        let det = (fixed.a() - DMatrix::identity(4, 4)).determinant();
        assert!(det.abs() < 1e-12);
    }

    #[test]
    fn example_quadratic_optimum_is_outside_the_ellipse() {
        let q = example_quadratic();
        let (w, c) = example_ellipse();
        let y = crate::oracles::ObjectiveOracle::minimizer(&q).unwrap();
        assert!(y.dot(&(&w * &y)) > c);
        assert!(linalg::min_eigenvalue(&w) > 0.0);
    }
}
