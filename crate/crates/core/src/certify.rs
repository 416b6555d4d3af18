//! Rate certificates from the lifted IQC linear matrix inequality.
//!
//! For a fixed rate `rho` the search for `(P, Q, Qt)` with
//!
//! ```text
//! [A B]^T P [A B] - rho^2 [I 0]^T P [I 0] + [C D]^T M(Q, Qt) [C D]  NSD,  P PD
//! ```
//!
//! is posed as an SDP that maximizes a margin `t` with `P >= t I`, the LMI
//! block `<= -w t I` (`w = LMI_MARGIN_WEIGHT`) and `tr P = 1`. The small
//! weight keeps `P` well away from singular near the critical rate.
//! Certificates are always re-verified by direct eigenvalue computation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::canonical::CanonicalSystem;
use crate::error::{LureError, Result};
use crate::iqclift::{self, AugmentedSystem};
use crate::linalg;
use crate::oracles::{unconstrained_minimizer, ObjectiveOracle, Sector};
use crate::sdp::{SdpBackend, SdpBlock, SdpInstance, SdpStatus};

/// Smallest eigenvalue required of the trace-normalized, diagonally
/// balanced `P` (`D^-1 P D^-1 / n` with `D = sqrt(diag P)`).
pub const EPS_P: f64 = 1e-6;
/// Required margin of the diagonally balanced LMI block: its largest
/// eigenvalue must not exceed `-EPS_L`.
pub const EPS_L: f64 = 1e-8;

/// Extra solves at one rate after rescaling the states by an uncertified `P`.
const REBALANCE_RETRIES: usize = 2;

/// Weight of the shared margin `t` in the LMI block relative to the `P` block.
pub const LMI_MARGIN_WEIGHT: f64 = 1e-2;

/// Decision-variable layout: `y = (t, P entries, Q entries, Qt entries)`.
/// `P[0][0]` is eliminated through the trace normalization.
#[derive(Debug, Clone)]
pub struct VariableLayout {
    pub order: usize,
    pub ell: usize,
    /// Upper-triangular `P` entries except `(0, 0)`.
    pub p_entries: Vec<(usize, usize)>,
}

impl VariableLayout {
    fn new(order: usize, ell: usize) -> Self {
        let p_entries = (0..order)
            .flat_map(|i| (i..order).map(move |j| (i, j)))
            .filter(|&e| e != (0, 0))
            .collect();
        Self { order, ell, p_entries }
    }

    pub fn num_vars(&self) -> usize {
        let k = self.ell + 1;
        1 + self.p_entries.len() + 2 * k * k
    }

    fn q_offset(&self) -> usize {
        1 + self.p_entries.len()
    }

    fn qt_offset(&self) -> usize {
        let k = self.ell + 1;
        self.q_offset() + k * k
    }

    /// Unpack `(P, Q, Qt)` from a decision vector.
    pub fn unpack(&self, y: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let n = self.order;
        let k = self.ell + 1;
        let mut p = DMatrix::zeros(n, n);
        for (idx, &(i, j)) in self.p_entries.iter().enumerate() {
            p[(i, j)] = y[1 + idx];
            p[(j, i)] = y[1 + idx];
        }
        let q = DMatrix::from_fn(k, k, |i, j| y[self.q_offset() + i * k + j]);
        let qt = DMatrix::from_fn(k, k, |i, j| y[self.qt_offset() + i * k + j]);
        p[(0, 0)] = 1.0 - (p.trace() - p[(0, 0)]);
        (p, q, qt)
    }
}

/// Assembled SDP for one rate, possibly in diagonally rescaled coordinates
/// `x' = w .* x`.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub rho: f64,
    pub sector: Sector,
    pub ell: usize,
    pub layout: VariableLayout,
    pub scaling: DVector<f64>,
    pub instance: SdpInstance,
}

/// Left-hand side of the LMI at `(P, M)`.
pub fn lmi_matrix(aug: &AugmentedSystem, p: &DMatrix<f64>, m: &DMatrix<f64>, rho: f64) -> DMatrix<f64> {
    let n = aug.order();
    let mut ab = DMatrix::zeros(n, n + 1);
    ab.view_mut((0, 0), (n, n)).copy_from(&aug.a);
    ab.column_mut(n).copy_from(&aug.b);
    let mut cd = DMatrix::zeros(aug.c.nrows(), n + 1);
    cd.view_mut((0, 0), (aug.c.nrows(), n)).copy_from(&aug.c);
    cd.column_mut(n).copy_from(&aug.d);
    let mut f = ab.transpose() * p * &ab + cd.transpose() * m * &cd;
    let mut block = f.view_mut((0, 0), (n, n));
    block -= p * (rho * rho);
    linalg::symmetrize(&f)
}

fn multiplier_of(q: &DMatrix<f64>, qt: &DMatrix<f64>, rho: f64, sector: Sector) -> DMatrix<f64> {
    let (mq, mqt) = iqclift::multiplier_matrices(q, qt, rho, sector);
    linalg::symmetrize(&(mq + mqt))
}

fn rescale(aug: &AugmentedSystem, w: &DVector<f64>) -> AugmentedSystem {
    let n = aug.order();
    let a = DMatrix::from_fn(n, n, |i, j| w[i] * aug.a[(i, j)] / w[j]);
    let b = DVector::from_fn(n, |i, _| w[i] * aug.b[i]);
    let c = DMatrix::from_fn(aug.c.nrows(), n, |i, j| aug.c[(i, j)] / w[j]);
    AugmentedSystem { a, b, c, ..aug.clone() }
}

pub fn assemble_lmi(aug: &AugmentedSystem, rho: f64, sector: Sector) -> Result<SdpProblem> {
    assemble_lmi_scaled(aug, rho, sector, &DVector::from_element(aug.order(), 1.0))
}

/// Assemble the SDP in coordinates `x' = w .* x`; certificates are mapped
/// back by `P = W P' W`.
pub fn assemble_lmi_scaled(aug: &AugmentedSystem, rho: f64, sector: Sector, w: &DVector<f64>) -> Result<SdpProblem> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(LureError::InvalidSector(format!("rate {rho} outside (0, 1)")));
    }
    let sector = Sector::new(sector.m, sector.l)?;
    let n = aug.order();
    let ell = aug.ell;
    let k = ell + 1;
    if w.len() != n || w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(LureError::DimensionMismatch("scaling must be a positive vector of the state order".into()));
    }
    if aug.c.shape() != (2 * k, n) || aug.b.len() != n || aug.d.len() != 2 * k {
        return Err(LureError::DimensionMismatch("augmented system does not match its lift".into()));
    }
    let scaled = rescale(aug, w);
    let layout = VariableLayout::new(n, ell);
    let nv = layout.num_vars();
    let zero_k = DMatrix::zeros(k, k);
    let zero_p = DMatrix::zeros(n, n);
    let e00 = DMatrix::from_fn(n, n, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });

    let f0 = lmi_matrix(&scaled, &e00, &DMatrix::zeros(2 * k, 2 * k), rho);
    let mut lmi_a = Vec::with_capacity(nv);
    let mut pos_a = Vec::with_capacity(nv);
    lmi_a.push(DMatrix::identity(n + 1, n + 1) * LMI_MARGIN_WEIGHT);
    pos_a.push(DMatrix::identity(n, n));
    for &(i, j) in &layout.p_entries {
        let mut pv = DMatrix::zeros(n, n);
        if i == j {
            pv[(i, i)] = 1.0;
            pv[(0, 0)] = -1.0;
        } else {
            pv[(i, j)] = 1.0;
            pv[(j, i)] = 1.0;
        }
        lmi_a.push(lmi_matrix(&scaled, &pv, &DMatrix::zeros(2 * k, 2 * k), rho));
        pos_a.push(-pv);
    }
    for which in 0..2 {
        for i in 0..k {
            for j in 0..k {
                let mut unit = zero_k.clone();
                unit[(i, j)] = 1.0;
                let (q, qt) = if which == 0 { (&unit, &zero_k) } else { (&zero_k, &unit) };
                let m = multiplier_of(q, qt, rho, sector);
                lmi_a.push(lmi_matrix(&scaled, &zero_p, &m, rho));
                pos_a.push(zero_p.clone());
            }
        }
    }

    // Cone constraints c - G y >= 0.
    let mut rows: Vec<DVector<f64>> = Vec::new();
    for off in [layout.q_offset(), layout.qt_offset()] {
        let idx = |i: usize, j: usize| off + i * k + j;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    let mut g = DVector::zeros(nv);
                    g[idx(i, j)] = 1.0;
                    rows.push(g);
                }
            }
            let mut row_sum = DVector::zeros(nv);
            let mut col_sum = DVector::zeros(nv);
            for j in 0..k {
                row_sum[idx(i, j)] = -1.0;
                col_sum[idx(j, i)] = -1.0;
            }
            rows.push(row_sum);
            rows.push(col_sum);
        }
    }
    let lp_g = DMatrix::from_fn(rows.len(), nv, |r, c| rows[r][c]);
    let mut b = DVector::zeros(nv);
    b[0] = 1.0;
    let instance = SdpInstance {
        b,
        blocks: vec![
            SdpBlock { c: -f0, a: lmi_a },
            SdpBlock { c: e00, a: pos_a },
        ],
        lp_c: DVector::zeros(rows.len()),
        lp_g,
    };
    Ok(SdpProblem { rho, sector, ell, layout, scaling: w.clone(), instance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub rho: f64,
    pub ell: usize,
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
    /// Relative degree and canonical order of the certified system.
    pub r: usize,
    pub n: usize,
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub qt: Vec<Vec<f64>>,
    /// Largest eigenvalue of the diagonally balanced LMI block (at most `-EPS_L`).
    pub lmi_residual: f64,
    /// Smallest eigenvalue of the balanced, trace-normalized `P` (at least `EPS_P`).
    pub p_min_eig: f64,
    /// SHA-256 of the canonical system matrices.
    pub system_hash: String,
}

impl RateCertificate {
    pub fn p_matrix(&self) -> DMatrix<f64> {
        linalg::from_rows(&self.p).unwrap_or_else(|| DMatrix::zeros(0, 0))
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        linalg::from_rows(&self.q).unwrap_or_else(|| DMatrix::zeros(0, 0))
    }

    pub fn qt_matrix(&self) -> DMatrix<f64> {
        linalg::from_rows(&self.qt).unwrap_or_else(|| DMatrix::zeros(0, 0))
    }

    pub fn sector(&self) -> Sector {
        Sector { m: self.m, l: self.l }
    }
}

/// Hash identifying a canonical system (matrices, relative degree).
pub fn system_hash(canon: &CanonicalSystem) -> String {
    let mut h = Sha256::new();
    h.update((canon.n() as u64).to_le_bytes());
    h.update((canon.r() as u64).to_le_bytes());
    let sys = canon.system();
    for v in sys.a().iter().chain(sys.b().iter()).chain(sys.c().iter()) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// Independent recheck of a certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateCheck {
    pub lmi_max_eig: f64,
    pub p_min_eig: f64,
    pub cone_ok: bool,
    pub valid: bool,
}

/// Normalize `(P, Q, Qt)` to `max diag P = 1` and verify all constraints.
fn normalize_and_check(
    aug: &AugmentedSystem,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    qt: &DMatrix<f64>,
    rho: f64,
    sector: Sector,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, CertificateCheck) {
    let scale = p.diagonal().max();
    let (p, q, qt) = if scale > 0.0 && scale.is_finite() {
        (linalg::symmetrize(p) / scale, q / scale, qt / scale)
    } else {
        (linalg::symmetrize(p), q.clone(), qt.clone())
    };
    let check = check_certificate_parts(aug, &p, &q, &qt, rho, sector);
    (p, q, qt, check)
}

/// `D^-1 M D^-1` with `D = sqrt(|diag M|)`; zero diagonal entries are left unscaled.
/// Diagonal congruence keeps the inertia, so margins measured on the result
/// do not depend on the state scaling or on the overall scale of `P`.
pub fn balanced(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.diagonal().map(|v| if v != 0.0 { 1.0 / v.abs().sqrt() } else { 1.0 });
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)] * d[j])
}

fn check_certificate_parts(
    aug: &AugmentedSystem,
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    qt: &DMatrix<f64>,
    rho: f64,
    sector: Sector,
) -> CertificateCheck {
    let m = multiplier_of(q, qt, rho, sector);
    let lmi_max_eig = linalg::max_eigenvalue(&balanced(&lmi_matrix(aug, p, &m, rho)));
    let p_min_eig = linalg::min_eigenvalue(&balanced(p)) / p.nrows() as f64;
    let cone_ok = iqclift::is_doubly_hyperdominant(q) && iqclift::is_doubly_hyperdominant(qt);
    let valid = cone_ok && p_min_eig >= EPS_P && lmi_max_eig <= -EPS_L;
    CertificateCheck { lmi_max_eig, p_min_eig, cone_ok, valid }
}

/// Recompute the eigenvalue margins of a stored certificate.
pub fn check_certificate(cert: &RateCertificate, aug: &AugmentedSystem) -> Result<CertificateCheck> {
    let p = cert.p_matrix();
    let k = cert.ell + 1;
    if p.shape() != (aug.order(), aug.order()) || cert.ell != aug.ell {
        return Err(LureError::PartitionMismatch(format!(
            "certificate has P {:?} and lift {}, system has order {} and lift {}",
            p.shape(),
            cert.ell,
            aug.order(),
            aug.ell
        )));
    }
    let (q, qt) = (cert.q_matrix(), cert.qt_matrix());
    if q.shape() != (k, k) || qt.shape() != (k, k) {
        return Err(LureError::PartitionMismatch("multiplier size does not match the lift".into()));
    }
    Ok(check_certificate_parts(aug, &p, &q, &qt, cert.rho, cert.sector()))
}

#[derive(Debug, Clone)]
pub enum Feasibility {
    Feasible(Box<RateCertificate>),
    /// The solver converged to a margin too small to certify. When only the
    /// `P` margin is short, `rebalance` holds a state scaling worth retrying with.
    Infeasible { margin: f64, lmi_residual: f64, p_min_eig: f64, rebalance: Option<DVector<f64>> },
}

/// Solve one rate. `canon` supplies the hash and partition metadata.
pub fn solve_feasibility(
    prob: &SdpProblem,
    aug: &AugmentedSystem,
    canon: &CanonicalSystem,
    backend: &dyn SdpBackend,
) -> Result<Feasibility> {
    let sol = backend.solve(&prob.instance)?;
    let margin = sol.y[0];
    let (p_s, q, qt) = prob.layout.unpack(&sol.y);
    let w = &prob.scaling;
    let p = DMatrix::from_fn(p_s.nrows(), p_s.ncols(), |i, j| w[i] * p_s[(i, j)] * w[j]);
    let (p, q, qt, check) = normalize_and_check(aug, &p, &q, &qt, prob.rho, prob.sector);
    if check.valid {
        return Ok(Feasibility::Feasible(Box::new(RateCertificate {
            rho: prob.rho,
            ell: prob.ell,
            m: prob.sector.m,
            l: prob.sector.l,
            r: canon.r(),
            n: canon.n(),
            p: linalg::to_rows(&p),
            q: linalg::to_rows(&q),
            qt: linalg::to_rows(&qt),
            lmi_residual: check.lmi_max_eig,
            p_min_eig: check.p_min_eig,
            system_hash: system_hash(canon),
        })));
    }
    if matches!(sol.status, SdpStatus::Optimal | SdpStatus::NearOptimal) {
        let rebalance = (check.cone_ok && check.lmi_max_eig <= -EPS_L && check.p_min_eig > 0.0)
            .then(|| DVector::from_fn(p.nrows(), |i, _| p[(i, i)].max(1e-12).sqrt()));
        Ok(Feasibility::Infeasible { margin, lmi_residual: check.lmi_max_eig, p_min_eig: check.p_min_eig, rebalance })
    } else {
        Err(LureError::SolverFailure(format!(
            "{:?} after {} iterations at rho = {} (margin {margin:.3e}, gap {:.2e}; \
             recheck: lmi {:.2e}, min eig P {:.2e}, cone {})",
            sol.status, sol.iterations, prob.rho, sol.relative_gap, check.lmi_max_eig, check.p_min_eig, check.cone_ok
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BisectOptions {
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self { rho_lo: 0.5, rho_hi: 0.999, tol: 1e-3, max_iter: 25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum StepOutcome {
    Feasible { lmi_residual: f64 },
    Infeasible { margin: f64, lmi_residual: f64, p_min_eig: f64 },
    SolverFailure { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub rho: f64,
    pub outcome: StepOutcome,
}

#[derive(Debug, Clone)]
pub struct Bisection {
    pub certificate: RateCertificate,
    pub log: Vec<BisectionStep>,
    /// Largest rate known not to be certifiable (bracket lower end).
    pub rho_lower: f64,
}

/// Bisect on `rho`. The first feasible certificate fixes a diagonal state
/// scaling `w_i = sqrt(P_ii)` that is refreshed from every later
/// certificate; it balances the SDP without changing feasibility.
/// Solver failures at interior points are logged and treated as infeasible.
pub fn bisect_rate(
    aug: &AugmentedSystem,
    canon: &CanonicalSystem,
    sector: Sector,
    opts: BisectOptions,
    backend: &dyn SdpBackend,
) -> Result<Bisection> {
    let BisectOptions { rho_lo, rho_hi, tol, max_iter } = opts;
    if !(0.0 < rho_lo && rho_lo < rho_hi && rho_hi < 1.0 && tol > 0.0) {
        return Err(LureError::InvalidInput(format!("invalid bracket [{rho_lo}, {rho_hi}] with tol {tol}")));
    }
    let mut log = Vec::new();
    let mut scaling = DVector::from_element(aug.order(), 1.0);
    let attempt = |rho: f64, scaling: &mut DVector<f64>, log: &mut Vec<BisectionStep>| -> Result<Option<RateCertificate>> {
        for _ in 0..=REBALANCE_RETRIES {
            let prob = assemble_lmi_scaled(aug, rho, sector, scaling)?;
            let (outcome, cert, retry) = match solve_feasibility(&prob, aug, canon, backend) {
                Ok(Feasibility::Feasible(c)) => (StepOutcome::Feasible { lmi_residual: c.lmi_residual }, Some(*c), None),
                Ok(Feasibility::Infeasible { margin, lmi_residual, p_min_eig, rebalance }) => {
                    (StepOutcome::Infeasible { margin, lmi_residual, p_min_eig }, None, rebalance)
                }
                Err(LureError::SolverFailure(message)) => (StepOutcome::SolverFailure { message }, None, None),
                Err(e) => return Err(e),
            };
            log.push(BisectionStep { rho, outcome });
            if let Some(c) = &cert {
                let p = c.p_matrix();
                *scaling = DVector::from_fn(p.nrows(), |i, _| p[(i, i)].max(1e-12).sqrt());
                return Ok(cert);
            }
            match retry {
                Some(w) => *scaling = w,
                None => return Ok(None),
            }
        }
        Ok(None)
    };

    let mut best = match attempt(rho_hi, &mut scaling, &mut log)? {
        Some(c) => c,
        None => {
            if let Some(BisectionStep { outcome: StepOutcome::SolverFailure { message }, .. }) = log.last() {
                return Err(LureError::SolverFailure(message.clone()));
            }
            return Err(LureError::BracketInfeasible { rho_hi });
        }
    };
    let (mut lo, mut hi) = (rho_lo, rho_hi);
    let mut iter = 0;
    while hi - lo > tol && iter < max_iter {
        let mid = 0.5 * (lo + hi);
        match attempt(mid, &mut scaling, &mut log)? {
            Some(c) => {
                hi = mid;
                best = c;
            }
            None => lo = mid,
        }
        iter += 1;
    }
    Ok(Bisection { certificate: best, log, rho_lower: lo })
}

/// Build the lift, augment and bisect.
pub fn certify(
    canon: &CanonicalSystem,
    sector: Sector,
    ell: usize,
    opts: BisectOptions,
    backend: &dyn SdpBackend,
) -> Result<(AugmentedSystem, Bisection)> {
    let aug = iqclift::augment(canon, &iqclift::build_filter(ell))?;
    let bis = bisect_rate(&aug, canon, sector, opts, backend)?;
    Ok((aug, bis))
}

/// Equilibrium of the augmented loop for the output `y*` with gradient `u*`.
pub fn augmented_equilibrium(
    canon: &CanonicalSystem,
    aug: &AugmentedSystem,
    y_star: &DVector<f64>,
    u_star: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let xi = canon.fixed_point(y_star)?;
    let d = y_star.len();
    let mut x = DMatrix::zeros(aug.order(), d);
    x.view_mut((0, 0), (canon.n(), d)).copy_from(&xi);
    for j in 0..aug.ell {
        x.row_mut(canon.n() + j).copy_from(&y_star.transpose());
        x.row_mut(canon.n() + aug.ell + j).copy_from(&u_star.transpose());
    }
    Ok(x)
}

/// Run the augmented loop `x+ = A x + B grad f(y_k)` for `steps` steps.
pub fn simulate_augmented(
    aug: &AugmentedSystem,
    oracle: &dyn ObjectiveOracle,
    x0: &DMatrix<f64>,
    steps: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let mut xs = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    for k in 0..steps {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LureError::NonFiniteState { step: k });
        }
        let y: DVector<f64> = x.row(aug.output_index()).transpose();
        let u = oracle.gradient(&y);
        let next = &aug.a * &x + &aug.b * u.transpose();
        xs.push(std::mem::replace(&mut x, next));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(LureError::NonFiniteState { step: steps });
    }
    xs.push(x);
    Ok(xs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub trials: usize,
    /// Largest `V(x_{k+1}) / V(x_k)` over `k >= ell`.
    pub worst_ratio: f64,
    pub rho_squared: f64,
    pub passed: bool,
}

/// Simulate `trials` random runs of the augmented loop (zero filter
/// pre-history) and check `V(x_{k+1}) <= rho^2 V(x_k) (1 + 1e-8)` for `k >= ell`.
pub fn validate_certificate<R: Rng + ?Sized>(
    cert: &RateCertificate,
    canon: &CanonicalSystem,
    aug: &AugmentedSystem,
    oracle: &dyn ObjectiveOracle,
    trials: usize,
    steps: usize,
    rng: &mut R,
) -> Result<ValidationReport> {
    let p = cert.p_matrix();
    if p.nrows() != aug.order() {
        return Err(LureError::PartitionMismatch("P does not match the augmented order".into()));
    }
    let d = oracle.dim();
    let canon = canon.with_dimension(d)?;
    let y_star = unconstrained_minimizer(oracle, 1e-13)?;
    let x_star = augmented_equilibrium(&canon, aug, &y_star, &DVector::zeros(d))?;
    let rho2 = cert.rho * cert.rho;
    let mut worst: f64 = 0.0;
    let mut passed = true;
    for _ in 0..trials {
        let mut x0 = DMatrix::zeros(aug.order(), d);
        for i in 0..canon.n() {
            for j in 0..d {
                x0[(i, j)] = y_star[j] + rng.random_range(-1.0..1.0);
            }
        }
        let xs = simulate_augmented(aug, oracle, &x0, steps)?;
        let v: Vec<f64> = xs.iter().map(|x| linalg::block_pnorm(&p, &(x - &x_star)).powi(2)).collect();
        let v0 = v[aug.ell.min(v.len() - 1)];
        for k in aug.ell..steps {
            if v[k] <= 1e-24 * v0.max(1e-300) {
                break;
            }
            let ratio = v[k + 1] / v[k];
            worst = worst.max(ratio);
            if v[k + 1] > rho2 * v[k] * (1.0 + 1e-8) {
                passed = false;
            }
        }
    }
    Ok(ValidationReport { trials, worst_ratio: worst, rho_squared: rho2, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::sdp::InteriorPoint;

    fn gd(alpha: f64) -> (CanonicalSystem, AugmentedSystem) {
        let canon = CanonicalSystem::new(catalog::gradient_descent(alpha), 1).unwrap();
        let aug = iqclift::augment(&canon, &iqclift::build_filter(0)).unwrap();
        (canon, aug)
    }

    #[test]
    fn gradient_descent_problem_sizes() {
        let (_, aug) = gd(0.1);
        let prob = assemble_lmi(&aug, 0.9, Sector::new(1.0, 10.0).unwrap()).unwrap();
        assert_eq!(prob.instance.blocks[0].c.nrows(), 2);
        assert_eq!(prob.instance.blocks[1].c.nrows(), 1);
        // t, Q, Qt (P00 is eliminated).
        assert_eq!(prob.layout.num_vars(), 3);
    }

    #[test]
    fn gradient_descent_feasibility_around_the_known_rate() {
        let (canon, aug) = gd(2.0 / 11.0);
        let s = Sector::new(1.0, 10.0).unwrap();
        let ip = InteriorPoint::default();
        let feas = solve_feasibility(&assemble_lmi(&aug, 0.83, s).unwrap(), &aug, &canon, &ip).unwrap();
        let Feasibility::Feasible(cert) = feas else { panic!("expected a certificate") };
        let check = check_certificate(&cert, &aug).unwrap();
        assert!(check.valid);
        assert!((check.lmi_max_eig - cert.lmi_residual).abs() < 1e-7);
        let infeas = solve_feasibility(&assemble_lmi(&aug, 0.7, s).unwrap(), &aug, &canon, &ip).unwrap();
        assert!(matches!(infeas, Feasibility::Infeasible { .. }));
    }

    #[test]
    fn certificate_json_roundtrip() {
        let (canon, aug) = gd(0.1);
        let s = Sector::new(1.0, 10.0).unwrap();
        let bis = bisect_rate(&aug, &canon, s, BisectOptions::default(), &InteriorPoint::default()).unwrap();
        let json = serde_json::to_string(&bis.certificate).unwrap();
        let back: RateCertificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back, bis.certificate);
        assert!((bis.certificate.rho - 0.9).abs() < 5e-3);
    }
}
