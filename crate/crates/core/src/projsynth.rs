//! Projected algorithms in the Lyapunov-induced norm.
//!
//! For a canonical system with certificate `P` on the augmented state
//! `x = (y_{k+r-1}, ybar_k, eta_k)`, projecting the half-step in the `P` norm
//! onto `Omega x {stack consistent} x R^*` reduces to a Euclidean projection
//! of the leading output followed by the correction
//! `eta <- eta - corr (y_{k+r} - y_{k+r-1/2})` with
//! `corr = P_{r+ r+}^-1 P_{1 r+}^T`. Only the first `n - r` entries of `corr`
//! (the gain `chi`) act on the algorithm; the remaining entries move the
//! filter states of a shadow copy used to measure `P`-norm errors.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::canonical::CanonicalSystem;
use crate::certify::{self, RateCertificate};
use crate::error::{LureError, Result};
use crate::iqclift::{self, AugmentedSystem};
use crate::linalg;
use crate::oracles::ObjectiveOracle;
use crate::projection::{project_euclidean, ConstraintSet};

/// Displacement below which a run counts as converged for `check_fixed_point`.
pub const CONVERGED_DISPLACEMENT: f64 = 1e-9;
/// Displacement targeted by `find_fixed_point`.
pub const FIXED_POINT_DISPLACEMENT: f64 = 1e-12;
/// Errors below this fraction of the trajectory scale are dominated by
/// rounding and excluded from contraction ratios.
pub const RATIO_NOISE_FLOOR: f64 = 1e-6;

/// `s = P11 - P1t Ptt^-1 P1t^T` and `corr = Ptt^-1 P1t^T` where `t` is the
/// trailing block `r..`.
pub fn schur_parts(p: &DMatrix<f64>, r: usize) -> Result<(f64, DVector<f64>)> {
    let order = p.nrows();
    if !p.is_square() || r == 0 || r > order {
        return Err(LureError::PartitionMismatch(format!("P is {:?}, relative degree {r}", p.shape())));
    }
    let t = order - r;
    if t == 0 {
        return Ok((p[(0, 0)], DVector::zeros(0)));
    }
    let ptt = p.view((r, r), (t, t)).clone_owned();
    let p1t = DVector::from_iterator(t, p.view((0, r), (1, t)).iter().copied());
    let chol = linalg::symmetrize(&ptt)
        .cholesky()
        .ok_or(LureError::NotPositiveDefinite { min_eig: linalg::min_eigenvalue(&ptt) })?;
    let corr = chol.solve(&p1t);
    Ok((p[(0, 0)] - p1t.dot(&corr), corr))
}

#[derive(Debug, Clone)]
pub struct ProjectedAlgorithm {
    canon: CanonicalSystem,
    aug: AugmentedSystem,
    p: DMatrix<f64>,
    corr: DVector<f64>,
    chi: DVector<f64>,
    s: f64,
    set: ConstraintSet,
    rho: f64,
}

/// Build the projected algorithm for `canon` from a certificate of its
/// augmentation.
pub fn synthesize(canon: &CanonicalSystem, cert: &RateCertificate, set: ConstraintSet) -> Result<ProjectedAlgorithm> {
    if cert.r != canon.r() || cert.n != canon.n() {
        return Err(LureError::PartitionMismatch(format!(
            "certificate has (n, r) = ({}, {}), system has ({}, {})",
            cert.n,
            cert.r,
            canon.n(),
            canon.r()
        )));
    }
    if cert.system_hash != certify::system_hash(canon) {
        return Err(LureError::PartitionMismatch("system hash differs".into()));
    }
    let aug = iqclift::augment(canon, &iqclift::build_filter(cert.ell))?;
    let check = certify::check_certificate(cert, &aug)?;
    if !check.valid {
        return Err(LureError::InvalidInput(format!(
            "certificate fails its recheck (LMI {:.3e}, P {:.3e}, cone {})",
            check.lmi_max_eig, check.p_min_eig, check.cone_ok
        )));
    }
    let p = cert.p_matrix();
    let (s, corr) = schur_parts(&p, canon.r())?;
    if s <= 0.0 || !s.is_finite() {
        return Err(LureError::NonPositiveSchur { s });
    }
    let chi = corr.rows(0, canon.n() - canon.r()).into_owned();
    Ok(ProjectedAlgorithm { canon: canon.clone(), aug, p, corr, chi, s, set, rho: cert.rho })
}

/// Where the lifting filter of the shadow state starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreHistory {
    /// Zero delayed outputs and gradients.
    Zero,
    /// Delayed outputs equal to `y_0` and gradients equal to the gradient at `y_0`.
    Steady,
}

/// Output of one projected step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub next: DMatrix<f64>,
    pub y_half: DVector<f64>,
    pub y_next: DVector<f64>,
    pub gradient: DVector<f64>,
}

impl StepInfo {
    /// `y_{k+r} - y_{k+r-1/2}`.
    pub fn residual(&self) -> DVector<f64> {
        &self.y_next - &self.y_half
    }
}

fn check_state(x: &DMatrix<f64>, rows: usize, d: usize) -> Result<()> {
    if x.shape() != (rows, d) {
        return Err(LureError::DimensionMismatch(format!("state is {:?}, expected ({rows}, {d})", x.shape())));
    }
    Ok(())
}

/// Half-step `A x + B grad f(y_k)` followed by projection of row 0 and
/// the correction `-gain (y+ - y_half)` on rows `r..`.
fn projected_update(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    r: usize,
    gain: &DVector<f64>,
    set: &ConstraintSet,
    x: &DMatrix<f64>,
    oracle: &dyn ObjectiveOracle,
) -> Result<StepInfo> {
    let y: DVector<f64> = x.row(r - 1).transpose();
    let gradient = oracle.gradient(&y);
    let mut next = a * x + b * gradient.transpose();
    let y_half: DVector<f64> = next.row(0).transpose();
    if y_half.iter().any(|v| !v.is_finite()) {
        return Err(LureError::NonFiniteState { step: 0 });
    }
    let y_next = project_euclidean(set, &y_half)?;
    next.row_mut(0).copy_from(&y_next.transpose());
    let delta = (&y_next - &y_half).transpose();
    if gain.len() > 0 {
        let mut tail = next.rows_mut(r, gain.len());
        tail -= gain * &delta;
    }
    Ok(StepInfo { next, y_half, y_next, gradient })
}

impl ProjectedAlgorithm {
    pub fn canon(&self) -> &CanonicalSystem {
        &self.canon
    }

    pub fn augmented(&self) -> &AugmentedSystem {
        &self.aug
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// Correction gain on `xi2` (first `n - r` entries of `corr`).
    pub fn chi(&self) -> &DVector<f64> {
        &self.chi
    }

    /// Full correction `P_{r+ r+}^-1 P_{1 r+}^T` including filter states.
    pub fn correction(&self) -> &DVector<f64> {
        &self.corr
    }

    /// Schur complement of `P` on the projected coordinate.
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn set(&self) -> &ConstraintSet {
        &self.set
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn ell(&self) -> usize {
        self.aug.ell
    }

    /// One step of the algorithm on the `n x d` canonical state
    /// `(y_{k+r-1}, ..., y_k, xi2)`.
    pub fn step(&self, state: &DMatrix<f64>, oracle: &dyn ObjectiveOracle) -> Result<StepInfo> {
        check_state(state, self.canon.n(), self.set.dim())?;
        let sys = self.canon.system();
        projected_update(sys.a(), sys.b(), self.canon.r(), &self.chi, &self.set, state, oracle)
    }

    /// The same step on the augmented state; the filter states receive
    /// their share of the correction.
    pub fn step_augmented(&self, x: &DMatrix<f64>, oracle: &dyn ObjectiveOracle) -> Result<StepInfo> {
        check_state(x, self.aug.order(), self.set.dim())?;
        projected_update(&self.aug.a, &self.aug.b, self.canon.r(), &self.corr, &self.set, x, oracle)
    }

    /// Augmented state for the canonical state `x0`.
    pub fn lift_state(&self, x0: &DMatrix<f64>, oracle: &dyn ObjectiveOracle, history: PreHistory) -> Result<DMatrix<f64>> {
        let (n, ell, d) = (self.canon.n(), self.aug.ell, self.set.dim());
        check_state(x0, n, d)?;
        let mut x = DMatrix::zeros(self.aug.order(), d);
        x.rows_mut(0, n).copy_from(x0);
        if history == PreHistory::Steady {
            let y0 = x0.row(self.canon.r() - 1).into_owned();
            let u0 = oracle.gradient(&y0.transpose()).transpose();
            for j in 0..ell {
                x.row_mut(n + j).copy_from(&y0);
                x.row_mut(n + ell + j).copy_from(&u0);
            }
        }
        Ok(x)
    }

    /// `k_max` steps from `x0`, tracking the shadow augmented state.
    pub fn run(
        &self,
        oracle: &dyn ObjectiveOracle,
        x0: &DMatrix<f64>,
        k_max: usize,
        history: PreHistory,
    ) -> Result<ProjectedRun> {
        let mut xa = self.lift_state(x0, oracle, history)?;
        let n = self.canon.n();
        let mut run = ProjectedRun::default();
        for k in 0..k_max {
            let info = self.step_augmented(&xa, oracle).map_err(|e| at_step(e, k))?;
            run.push(&xa, n, self.canon.r(), info.gradient.norm(), info.residual().norm());
            xa = info.next;
        }
        let y: DVector<f64> = xa.row(self.canon.r() - 1).transpose();
        run.push(&xa, n, self.canon.r(), oracle.gradient(&y).norm(), f64::NAN);
        Ok(run)
    }

    /// Iterate from `x0` until the step displacement drops below
    /// `FIXED_POINT_DISPLACEMENT` (relative to the state size), then solve
    /// for the matching shadow filter state.
    pub fn find_fixed_point(&self, oracle: &dyn ObjectiveOracle, x0: &DMatrix<f64>, max_steps: usize) -> Result<FixedPoint> {
        let mut x = x0.clone();
        let mut displacement = f64::INFINITY;
        for k in 0..max_steps {
            let info = self.step(&x, oracle).map_err(|e| at_step(e, k))?;
            displacement = (&info.next - &x).amax();
            x = info.next;
            if displacement <= FIXED_POINT_DISPLACEMENT * x.amax().max(1.0) {
                // a few more steps let the last digits settle
                for _ in 0..5 {
                    x = self.step(&x, oracle)?.next;
                }
                return self.fixed_point_from(oracle, x);
            }
        }
        Err(LureError::NotConverged { displacement })
    }

    /// Complete a converged canonical state to a fixed point of the shadow
    /// dynamics: the filter rows solve `(I - A_ff) F = A_fx xi + B_f u - corr_f r`.
    pub fn fixed_point_from(&self, oracle: &dyn ObjectiveOracle, state: DMatrix<f64>) -> Result<FixedPoint> {
        let info = self.step(&state, oracle)?;
        let displacement = (&info.next - &state).amax();
        let (n, order, r) = (self.canon.n(), self.aug.order(), self.canon.r());
        let f = order - n;
        let d = self.set.dim();
        let residual = info.residual();
        let mut aug_state = DMatrix::zeros(order, d);
        aug_state.rows_mut(0, n).copy_from(&state);
        if f > 0 {
            let a = &self.aug.a;
            let aff = a.view((n, n), (f, f));
            let lhs = DMatrix::identity(f, f) - aff;
            let corr_f = self.corr.rows(n - r, f);
            let rhs = a.view((n, 0), (f, n)) * &state + self.aug.b.rows(n, f) * info.gradient.transpose()
                - corr_f * residual.transpose();
            let sol = lhs.lu().solve(&rhs).ok_or_else(|| LureError::ConvergenceFailure("filter block is singular".into()))?;
            aug_state.rows_mut(n, f).copy_from(&sol);
        }
        Ok(FixedPoint {
            y_star: state.row(r - 1).transpose(),
            state,
            aug_state,
            gradient: info.gradient,
            y_half: info.y_half,
            displacement,
        })
    }
}

fn at_step(e: LureError, k: usize) -> LureError {
    match e {
        LureError::NonFiniteState { .. } => LureError::NonFiniteState { step: k },
        other => other,
    }
}

/// Naive variant: Euclidean projection of the leading output, no correction.
pub fn naive_step(
    canon: &CanonicalSystem,
    set: &ConstraintSet,
    state: &DMatrix<f64>,
    oracle: &dyn ObjectiveOracle,
) -> Result<StepInfo> {
    check_state(state, canon.n(), set.dim())?;
    let sys = canon.system();
    projected_update(sys.a(), sys.b(), canon.r(), &DVector::zeros(0), set, state, oracle)
}

/// Canonical states of the naive variant.
pub fn run_naive(
    canon: &CanonicalSystem,
    set: &ConstraintSet,
    oracle: &dyn ObjectiveOracle,
    x0: &DMatrix<f64>,
    k_max: usize,
) -> Result<ProjectedRun> {
    let mut x = x0.clone();
    let mut run = ProjectedRun::default();
    let (n, r) = (canon.n(), canon.r());
    for k in 0..k_max {
        let info = naive_step(canon, set, &x, oracle).map_err(|e| at_step(e, k))?;
        run.push(&x, n, r, info.gradient.norm(), info.residual().norm());
        x = info.next;
    }
    let y: DVector<f64> = x.row(r - 1).transpose();
    run.push(&x, n, r, oracle.gradient(&y).norm(), f64::NAN);
    Ok(run)
}

/// States of a run. `aug_states` holds the full states that were stepped;
/// `states` their canonical part.
#[derive(Debug, Clone, Default)]
pub struct ProjectedRun {
    pub states: Vec<DMatrix<f64>>,
    pub aug_states: Vec<DMatrix<f64>>,
    pub outputs: Vec<DVector<f64>>,
    pub grad_norms: Vec<f64>,
    /// `||y_{k+r} - y_{k+r-1/2}||` of the step leaving `k` (NaN for the last sample).
    pub proj_residuals: Vec<f64>,
}

impl ProjectedRun {
    fn push(&mut self, x: &DMatrix<f64>, n: usize, r: usize, grad_norm: f64, proj_residual: f64) {
        self.states.push(x.rows(0, n).into_owned());
        self.aug_states.push(x.clone());
        self.outputs.push(x.row(r - 1).transpose());
        self.grad_norms.push(grad_norm);
        self.proj_residuals.push(proj_residual);
    }

    pub fn horizon(&self) -> usize {
        self.states.len().saturating_sub(1)
    }
}

/// Converged point of a projected algorithm.
#[derive(Debug, Clone)]
pub struct FixedPoint {
    pub y_star: DVector<f64>,
    /// Canonical state `n x d`.
    pub state: DMatrix<f64>,
    /// Shadow augmented state.
    pub aug_state: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub y_half: DVector<f64>,
    /// Largest entry change of one more step.
    pub displacement: f64,
}

#[derive(Debug, Clone)]
pub struct FixedPointReport {
    pub y_star: DVector<f64>,
    pub gamma: f64,
    /// `||Pi(y* - grad f(y*)) - y*||`.
    pub kkt_residual: f64,
    /// The same test with step 0.1.
    pub kkt_residual_short: f64,
    /// `||A_r1 xi1 - (I - A_rr) xi2||` on the output stack.
    pub stack_residual: f64,
    /// `||(A - I) xi* + B u* + H r*||` of the full stationarity system.
    pub stationarity_residual: f64,
    pub displacement: f64,
}

impl FixedPointReport {
    pub fn passed(&self, kkt_tol: f64) -> bool {
        self.gamma > 0.0 && self.kkt_residual <= kkt_tol && self.kkt_residual_short <= kkt_tol
    }
}

/// `gamma = (E^T N E)^-1 E^T N H` with `N = I - K2 K2^+`, `E = e_1`,
/// `H = (1, 0, -chi)`.
pub fn gamma(canon: &CanonicalSystem, chi: &DVector<f64>) -> f64 {
    let n = canon.n();
    let k2 = canon.k2();
    let proj = if k2.ncols() == 0 { DMatrix::identity(n, n) } else { DMatrix::identity(n, n) - &k2 * linalg::pinv(&k2) };
    let mut h = DVector::zeros(n);
    h[0] = 1.0;
    h.rows_mut(canon.r(), n - canon.r()).copy_from(&(-chi));
    let ne = proj.column(0);
    ne.dot(&h) / proj[(0, 0)]
}

pub fn check_fixed_point(alg: &ProjectedAlgorithm, oracle: &dyn ObjectiveOracle, fp: &FixedPoint) -> Result<FixedPointReport> {
    if !(fp.displacement <= CONVERGED_DISPLACEMENT * fp.state.amax().max(1.0)) {
        return Err(LureError::NotConverged { displacement: fp.displacement });
    }
    let y = &fp.y_star;
    let grad = oracle.gradient(y);
    let kkt = |t: f64| -> Result<f64> { Ok((project_euclidean(alg.set(), &(y - &grad * t))? - y).norm()) };
    let canon = alg.canon();
    let (n, r) = (canon.n(), canon.r());
    let a = canon.a();
    let stack = a.view((1, 0), (r - 1, 1)) * fp.state.rows(0, 1) + a.view((1, 1), (r - 1, r - 1)) * fp.state.rows(1, r - 1)
        - fp.state.rows(1, r - 1);
    let mut h = DVector::zeros(n);
    h[0] = 1.0;
    h.rows_mut(r, n - r).copy_from(&(-alg.chi()));
    let resid = &fp.state.row(0) - fp.y_half.transpose();
    let stationarity = (a - DMatrix::identity(n, n)) * &fp.state
        + canon.system().b() * fp.gradient.transpose()
        + &h * resid;
    Ok(FixedPointReport {
        y_star: y.clone(),
        gamma: gamma(canon, alg.chi()),
        kkt_residual: kkt(1.0)?,
        kkt_residual_short: kkt(0.1)?,
        stack_residual: stack.norm(),
        stationarity_residual: stationarity.norm(),
        displacement: fp.displacement,
    })
}

/// Per-step ratios `||x_{k+1} - x*||_P / ||x_k - x*||_P` for `k >= first`,
/// skipping samples under the rounding floor.
pub fn contraction_ratios(p: &DMatrix<f64>, states: &[DMatrix<f64>], x_star: &DMatrix<f64>, first: usize) -> Vec<(usize, f64)> {
    let errs: Vec<f64> = states.iter().map(|x| linalg::block_pnorm(p, &(x - x_star))).collect();
    let scale = errs.first().copied().unwrap_or(0.0).max(linalg::block_pnorm(p, x_star));
    let floor = RATIO_NOISE_FLOOR * scale;
    (first..errs.len().saturating_sub(1))
        .filter(|&k| errs[k] > floor && errs[k + 1] > floor)
        .map(|k| (k, errs[k + 1] / errs[k]))
        .collect()
}

/// Worst per-step ratio (1 if there is nothing to measure).
pub fn worst_ratio(p: &DMatrix<f64>, states: &[DMatrix<f64>], x_star: &DMatrix<f64>, first: usize) -> f64 {
    contraction_ratios(p, states, x_star, first).into_iter().map(|(_, v)| v).fold(0.0, f64::max)
}

/// Reference data for the error columns of a CSV export.
pub struct CsvReference<'a> {
    /// Metric for `err_Pnorm`, sized like the exported states.
    pub p: &'a DMatrix<f64>,
    pub x_star: &'a DMatrix<f64>,
    pub rho: f64,
}

/// Columns `k, y0..y{d-1}, grad_norm, proj_residual, err_2norm, err_Pnorm, envelope`.
/// `err_2norm` is `||y_k - y*||_2`; the envelope is `||x_0 - x*||_P rho^k`.
pub fn write_trajectory_csv<W: Write>(
    out: W,
    states: &[DMatrix<f64>],
    outputs: &[DVector<f64>],
    grad_norms: &[f64],
    proj_residuals: &[f64],
    reference: Option<CsvReference<'_>>,
    y_star: Option<&DVector<f64>>,
) -> Result<()> {
    let d = outputs.first().map_or(0, |y| y.len());
    let io = |e: csv::Error| LureError::InvalidInput(format!("CSV output failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((0..d).map(|i| format!("y{i}")));
    header.extend(["grad_norm", "proj_residual", "err_2norm", "err_Pnorm", "envelope"].map(String::from));
    w.write_record(&header).map_err(io)?;
    let e0 = reference.as_ref().map(|rf| linalg::block_pnorm(rf.p, &(&states[0] - rf.x_star)));
    let fmt = |v: f64| if v.is_nan() { String::new() } else { format!("{v:.17e}") };
    for k in 0..states.len() {
        let mut rec = vec![k.to_string()];
        rec.extend(outputs[k].iter().map(|v| fmt(*v)));
        rec.push(fmt(grad_norms[k]));
        rec.push(fmt(proj_residuals[k]));
        rec.push(y_star.map_or(String::new(), |ys| fmt((&outputs[k] - ys).norm())));
        match (&reference, e0) {
            (Some(rf), Some(e0)) => {
                rec.push(fmt(linalg::block_pnorm(rf.p, &(&states[k] - rf.x_star))));
                rec.push(fmt(e0 * rf.rho.powi(k as i32)));
            }
            _ => {
                rec.push(String::new());
                rec.push(String::new());
            }
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| LureError::InvalidInput(format!("CSV output failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::certify::{BisectOptions, RateCertificate};
    use crate::oracles::{quadratic, Sector};
    use crate::sdp::InteriorPoint;

    fn gd_certificate() -> (CanonicalSystem, RateCertificate) {
        let canon = crate::canonical::canonicalize_system(&catalog::gradient_descent(0.1), Default::default())
            .unwrap()
            .canon;
        let (_, bis) = certify::certify(&canon, Sector::new(1.0, 10.0).unwrap(), 0, BisectOptions::default(), &InteriorPoint::default())
            .unwrap();
        (canon, bis.certificate)
    }

    #[test]
    fn schur_parts_of_a_two_by_two() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let (s, corr) = schur_parts(&p, 1).unwrap();
        assert!((s - 1.75).abs() < 1e-15);
        assert!((corr[0] - 0.5).abs() < 1e-15);
        let (s, corr) = schur_parts(&p, 2).unwrap();
        assert_eq!((s, corr.len()), (2.0, 0));
    }

    #[test]
    fn gradient_descent_has_no_correction_and_unit_gamma() {
        let (canon, cert) = gd_certificate();
        let set = ConstraintSet::ball(DVector::from_element(1, 0.0), 1.0).unwrap();
        let alg = synthesize(&canon, &cert, set).unwrap();
        assert_eq!(alg.chi().len(), 0);
        assert!((alg.s() - cert.p_matrix()[(0, 0)]).abs() < 1e-15);
        assert!((gamma(&canon, alg.chi()) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn projected_gradient_matches_the_classical_update() {
        let (canon, cert) = gd_certificate();
        let set = ConstraintSet::boxed(DVector::from_element(1, -1.0), DVector::from_element(1, 1.0)).unwrap();
        let alg = synthesize(&canon, &cert, set.clone()).unwrap();
        let f = quadratic(DMatrix::from_element(1, 1, 4.0), DVector::from_element(1, -20.0)).unwrap();
        let x0 = DMatrix::from_element(1, 1, 0.3);
        let info = alg.step(&x0, &f).unwrap();
        // canonical GD: y+ = y + g grad with g = -alpha
        let expect = (0.3 - canon.g().abs() * (4.0 * 0.3 - 20.0)).clamp(-1.0, 1.0);
        assert!((info.next[(0, 0)] - expect).abs() < 1e-14);
        assert_eq!(naive_step(&canon, &set, &x0, &f).unwrap().next, info.next);
        let fp = alg.find_fixed_point(&f, &x0, 1000).unwrap();
        assert!((fp.y_star[0] - 1.0).abs() < 1e-12);
        let rep = check_fixed_point(&alg, &f, &fp).unwrap();
        assert!(rep.passed(1e-10), "{rep:?}");
    }

    #[test]
    fn foreign_certificates_are_rejected() {
        let (_, cert) = gd_certificate();
        let other = crate::canonical::canonicalize_system(&catalog::gradient_descent(0.2), Default::default())
            .unwrap()
            .canon;
        let set = ConstraintSet::whole(1);
        assert!(matches!(synthesize(&other, &cert, set), Err(LureError::PartitionMismatch(_))));
    }

    #[test]
    fn csv_has_the_documented_columns() {
        let states = vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.5)];
        let outputs: Vec<DVector<f64>> = states.iter().map(|x| x.column(0).into_owned()).collect();
        let p = DMatrix::identity(1, 1);
        let xs = DMatrix::zeros(1, 1);
        let mut buf = Vec::new();
        write_trajectory_csv(
            &mut buf,
            &states,
            &outputs,
            &[1.0, 0.5],
            &[0.0, f64::NAN],
            Some(CsvReference { p: &p, x_star: &xs, rho: 0.5 }),
            Some(&DVector::zeros(1)),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "k,y0,grad_norm,proj_residual,err_2norm,err_Pnorm,envelope");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].ends_with("5.00000000000000000e-1,5.00000000000000000e-1"));
    }
}
