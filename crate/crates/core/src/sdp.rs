//! Dense primal-dual interior-point solver for small semidefinite programs.
//!
//! Problems are given in inequality form
//!
//! ```text
//! maximize    b^T y
//! subject to  C_k - sum_i y_i A_{k,i}  PSD   for every block k
//!             c - G y >= 0                   (linear block)
//! ```
//!
//! with symmetric `C_k`, `A_{k,i}`. The solver runs the HKM search direction
//! with Mehrotra's predictor-corrector from an infeasible starting point.

use nalgebra::{DMatrix, DVector};

use crate::error::{LureError, Result};

/// Residual level accepted when the iteration stops making progress.
pub const NEAR_OPTIMAL_TOL: f64 = 1e-6;
/// Iterations without reducing the worst residual by 10% before giving up.
const STALL_ITERATIONS: usize = 8;

/// One semidefinite block `C - sum_i y_i A_i`.
#[derive(Debug, Clone)]
pub struct SdpBlock {
    pub c: DMatrix<f64>,
    /// One symmetric matrix per decision variable.
    pub a: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct SdpInstance {
    pub b: DVector<f64>,
    pub blocks: Vec<SdpBlock>,
    pub lp_c: DVector<f64>,
    /// `lp_c.len() x b.len()`.
    pub lp_g: DMatrix<f64>,
}

impl SdpInstance {
    pub fn num_vars(&self) -> usize {
        self.b.len()
    }

    fn validate(&self) -> Result<()> {
        let m = self.b.len();
        for (k, blk) in self.blocks.iter().enumerate() {
            let n = blk.c.nrows();
            if !blk.c.is_square() || blk.a.len() != m || blk.a.iter().any(|a| a.shape() != (n, n)) {
                return Err(LureError::DimensionMismatch(format!("SDP block {k} is malformed")));
            }
        }
        if self.lp_g.shape() != (self.lp_c.len(), m) {
            return Err(LureError::DimensionMismatch("linear block is malformed".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    /// Converged to the requested tolerance.
    Optimal,
    /// Progress stopped with all residuals below `1e-6`.
    NearOptimal,
    /// Stopped with steps too short to make progress.
    Stalled,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub y: DVector<f64>,
    pub status: SdpStatus,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub relative_gap: f64,
}

/// Pluggable solver interface.
pub trait SdpBackend: Send + Sync {
    fn solve(&self, problem: &SdpInstance) -> Result<SdpSolution>;
}

#[derive(Debug, Clone, Copy)]
pub struct InteriorPoint {
    pub tol: f64,
    pub max_iter: usize,
    /// Print one progress line per iteration to stderr.
    pub verbose: bool,
}

impl Default for InteriorPoint {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 120, verbose: false }
    }
}

/// Per-block data flattened for fast Schur assembly: row `i` of `a_flat`
/// is `vec(A_i)`.
struct FlatBlock {
    n: usize,
    c: DMatrix<f64>,
    a_flat: DMatrix<f64>,
}

impl FlatBlock {
    fn new(b: &SdpBlock) -> Self {
        let n = b.c.nrows();
        let m = b.a.len();
        let mut a_flat = DMatrix::zeros(m, n * n);
        for (i, a) in b.a.iter().enumerate() {
            for (j, v) in a.iter().enumerate() {
                a_flat[(i, j)] = *v;
            }
        }
        Self { n, c: b.c.clone(), a_flat }
    }

    /// `A(X)_i = <A_i, X>`.
    fn apply(&self, x: &DMatrix<f64>) -> DVector<f64> {
        &self.a_flat * DVector::from_column_slice(x.as_slice())
    }

    /// `A^T(y) = sum_i y_i A_i`.
    fn adjoint(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let v = self.a_flat.transpose() * y;
        DMatrix::from_column_slice(self.n, self.n, v.as_slice())
    }
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Largest `alpha` keeping `X + alpha dX` positive semidefinite.
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    if n == 0 {
        return f64::INFINITY;
    }
    let Some(ch) = x.clone().cholesky() else { return 0.0 };
    let l = ch.l();
    let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).unwrap_or_else(|| DMatrix::identity(n, n));
    let m = sym(&(&linv * dx * linv.transpose()));
    let lmin = m.symmetric_eigenvalues().min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&v, &d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

fn inverse_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let sm = sym(m);
    sm.clone().cholesky().map(|c| c.inverse()).or_else(|| sm.try_inverse())
}

struct Iterate {
    xs: Vec<DMatrix<f64>>,
    zs: Vec<DMatrix<f64>>,
    x_lp: DVector<f64>,
    z_lp: DVector<f64>,
    y: DVector<f64>,
}

struct Direction {
    dy: DVector<f64>,
    dxs: Vec<DMatrix<f64>>,
    dzs: Vec<DMatrix<f64>>,
    dx_lp: DVector<f64>,
    dz_lp: DVector<f64>,
}

impl InteriorPoint {
    fn run(&self, p: &SdpInstance) -> Result<SdpSolution> {
        p.validate()?;
        let m = p.num_vars();
        let blocks: Vec<FlatBlock> = p.blocks.iter().map(FlatBlock::new).collect();
        let n_lp = p.lp_c.len();
        let total_dim = blocks.iter().map(|b| b.n).sum::<usize>() + n_lp;
        if total_dim == 0 {
            return Err(LureError::SolverFailure("problem has no cone constraints".into()));
        }

        // Starting point in the spirit of SDPT3.
        let mut it = Iterate {
            xs: Vec::new(),
            zs: Vec::new(),
            x_lp: DVector::zeros(n_lp),
            z_lp: DVector::zeros(n_lp),
            y: DVector::zeros(m),
        };
        for blk in &blocks {
            let nf = blk.n as f64;
            let a_norms: Vec<f64> = (0..m).map(|i| blk.a_flat.row(i).norm()).collect();
            let xi = (0..m)
                .map(|i| (1.0 + p.b[i].abs()) / (1.0 + a_norms[i]))
                .fold(10.0f64.max(nf.sqrt()), f64::max);
            let eta = a_norms.iter().copied().fold(10.0f64.max(nf.sqrt()).max(blk.c.norm()), f64::max);
            it.xs.push(DMatrix::identity(blk.n, blk.n) * xi);
            it.zs.push(DMatrix::identity(blk.n, blk.n) * eta);
        }
        if n_lp > 0 {
            let g_norms: Vec<f64> = (0..m).map(|i| p.lp_g.column(i).norm()).collect();
            let xi = (0..m).map(|i| (1.0 + p.b[i].abs()) / (1.0 + g_norms[i])).fold(10.0, f64::max);
            let eta = g_norms.iter().copied().fold(10.0f64.max(p.lp_c.norm()), f64::max);
            it.x_lp = DVector::from_element(n_lp, xi);
            it.z_lp = DVector::from_element(n_lp, eta);
        }

        let b_norm = p.b.norm();
        let c_norm = blocks.iter().map(|b| b.c.norm_squared()).sum::<f64>().sqrt() + p.lp_c.norm();
        let mut best: Option<(f64, SdpSolution)> = None;
        let mut since_best = 0;
        let mut iterations = 0;
        for iter in 0..self.max_iter {
            // Residuals.
            let mut rp = p.b.clone();
            for (blk, x) in blocks.iter().zip(&it.xs) {
                rp -= blk.apply(x);
            }
            rp -= p.lp_g.transpose() * &it.x_lp;
            let rds: Vec<DMatrix<f64>> = blocks
                .iter()
                .zip(&it.zs)
                .map(|(blk, z)| &blk.c - z - blk.adjoint(&it.y))
                .collect();
            let rd_lp = &p.lp_c - &it.z_lp - &p.lp_g * &it.y;

            let gap: f64 = it.xs.iter().zip(&it.zs).map(|(x, z)| x.dot(z)).sum::<f64>() + it.x_lp.dot(&it.z_lp);
            let mu = gap / total_dim as f64;
            let pobj: f64 =
                blocks.iter().zip(&it.xs).map(|(b, x)| b.c.dot(x)).sum::<f64>() + p.lp_c.dot(&it.x_lp);
            let dobj = p.b.dot(&it.y);
            let pinf = rp.norm() / (1.0 + b_norm);
            let dinf = (rds.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() + rd_lp.norm()) / (1.0 + c_norm);
            let rel_gap = gap.abs() / (1.0 + pobj.abs() + dobj.abs());
            if !mu.is_finite() || !pinf.is_finite() || !dinf.is_finite() {
                return Err(LureError::SolverFailure(format!("non-finite iterate at iteration {iter}")));
            }
            if self.verbose {
                eprintln!(
                    "{iter:3} pobj {pobj:+.10e} dobj {dobj:+.10e} pinf {pinf:.2e} dinf {dinf:.2e} gap {rel_gap:.2e} mu {mu:.2e}"
                );
            }
            let snapshot = SdpSolution {
                y: it.y.clone(),
                status: SdpStatus::MaxIterations,
                iterations: iter,
                primal_objective: pobj,
                dual_objective: dobj,
                primal_infeasibility: pinf,
                dual_infeasibility: dinf,
                relative_gap: rel_gap,
            };
            if pinf <= self.tol && dinf <= self.tol && rel_gap <= self.tol {
                return Ok(SdpSolution { status: SdpStatus::Optimal, ..snapshot });
            }
            iterations = iter;
            let metric = pinf.max(dinf).max(rel_gap);
            if best.as_ref().is_none_or(|(m, _)| metric < 0.9 * m) {
                best = Some((metric, snapshot));
                since_best = 0;
            } else {
                since_best += 1;
                let converging = best.as_ref().is_some_and(|(m, _)| *m <= NEAR_OPTIMAL_TOL);
                if converging && since_best >= STALL_ITERATIONS {
                    break;
                }
            }

            // Schur complement.
            let zinvs: Vec<DMatrix<f64>> = match it.zs.iter().map(inverse_spd).collect::<Option<Vec<_>>>() {
                Some(v) => v,
                None => break,
            };
            let mut schur = DMatrix::zeros(m, m);
            for ((blk, x), zinv) in blocks.iter().zip(&it.xs).zip(&zinvs) {
                let n = blk.n;
                let mut w = DMatrix::zeros(m, n * n);
                for i in 0..m {
                    let ai = DMatrix::from_row_slice(n, n, blk.a_flat.row(i).transpose().as_slice());
                    let wi = x * ai * zinv;
                    for (j, v) in wi.iter().enumerate() {
                        w[(i, j)] = *v;
                    }
                }
                schur += &blk.a_flat * w.transpose();
            }
            if n_lp > 0 {
                let ratio = it.x_lp.component_div(&it.z_lp);
                let scaled = DMatrix::from_fn(n_lp, m, |r, c| p.lp_g[(r, c)] * ratio[r]);
                schur += p.lp_g.transpose() * scaled;
            }
            let schur = sym(&schur);
            let diag_max = schur.diagonal().amax().max(1e-300);
            let factor = match schur.clone().cholesky() {
                Some(c) => SchurFactor::Chol(c),
                None => {
                    let mut reg = schur.clone();
                    for i in 0..m {
                        reg[(i, i)] += 1e-14 * diag_max;
                    }
                    match reg.clone().cholesky() {
                        Some(c) => SchurFactor::Chol(c),
                        None => SchurFactor::Lu(reg.lu()),
                    }
                }
            };

            let solve_dir = |rcs: &[DMatrix<f64>], rc_lp: &DVector<f64>| -> Option<Direction> {
                let mut rhs = rp.clone();
                for (((blk, x), zinv), (rc, rd)) in
                    blocks.iter().zip(&it.xs).zip(&zinvs).zip(rcs.iter().zip(&rds))
                {
                    rhs -= blk.apply(&(rc * zinv));
                    rhs += blk.apply(&(x * rd * zinv));
                }
                if n_lp > 0 {
                    let t = (rc_lp - it.x_lp.component_mul(&rd_lp)).component_div(&it.z_lp);
                    rhs -= p.lp_g.transpose() * t;
                }
                let dy = factor.solve(&rhs)?;
                let mut dxs = Vec::with_capacity(blocks.len());
                let mut dzs = Vec::with_capacity(blocks.len());
                for (((blk, x), zinv), (rc, rd)) in
                    blocks.iter().zip(&it.xs).zip(&zinvs).zip(rcs.iter().zip(&rds))
                {
                    let dz = rd - blk.adjoint(&dy);
                    let dx = sym(&((rc - x * &dz) * zinv));
                    dxs.push(dx);
                    dzs.push(dz);
                }
                let dz_lp = &rd_lp - &p.lp_g * &dy;
                let dx_lp = (rc_lp - it.x_lp.component_mul(&dz_lp)).component_div(&it.z_lp);
                Some(Direction { dy, dxs, dzs, dx_lp, dz_lp })
            };

            let steps = |d: &Direction| -> (f64, f64) {
                let mut ap = max_step_lp(&it.x_lp, &d.dx_lp);
                let mut ad = max_step_lp(&it.z_lp, &d.dz_lp);
                for (x, dx) in it.xs.iter().zip(&d.dxs) {
                    ap = ap.min(max_step_psd(x, dx));
                }
                for (z, dz) in it.zs.iter().zip(&d.dzs) {
                    ad = ad.min(max_step_psd(z, dz));
                }
                (ap, ad)
            };

            // Predictor.
            let rc_aff: Vec<DMatrix<f64>> = it.xs.iter().zip(&it.zs).map(|(x, z)| -(x * z)).collect();
            let rc_aff_lp = -it.x_lp.component_mul(&it.z_lp);
            let Some(aff) = solve_dir(&rc_aff, &rc_aff_lp) else { break };
            let (ap, ad) = steps(&aff);
            let (ap, ad) = (ap.min(1.0), ad.min(1.0));
            let mut gap_aff = 0.0;
            for k in 0..blocks.len() {
                let xn = &it.xs[k] + &aff.dxs[k] * ap;
                let zn = &it.zs[k] + &aff.dzs[k] * ad;
                gap_aff += xn.dot(&zn);
            }
            gap_aff += (&it.x_lp + &aff.dx_lp * ap).dot(&(&it.z_lp + &aff.dz_lp * ad));
            let mu_aff = gap_aff / total_dim as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // Corrector.
            let rc: Vec<DMatrix<f64>> = (0..blocks.len())
                .map(|k| {
                    let n = blocks[k].n;
                    DMatrix::identity(n, n) * (sigma * mu) - &it.xs[k] * &it.zs[k] - &aff.dxs[k] * &aff.dzs[k]
                })
                .collect();
            let rc_lp = DVector::from_element(n_lp, sigma * mu)
                - it.x_lp.component_mul(&it.z_lp)
                - aff.dx_lp.component_mul(&aff.dz_lp);
            let Some(dir) = solve_dir(&rc, &rc_lp) else { break };
            let (ap, ad) = steps(&dir);
            let ap = (0.95 * ap).min(1.0);
            let ad = (0.95 * ad).min(1.0);
            if ap < 1e-12 && ad < 1e-12 {
                break;
            }
            for k in 0..blocks.len() {
                it.xs[k] = sym(&(&it.xs[k] + &dir.dxs[k] * ap));
                it.zs[k] = sym(&(&it.zs[k] + &dir.dzs[k] * ad));
            }
            it.x_lp += &dir.dx_lp * ap;
            it.z_lp += &dir.dz_lp * ad;
            it.y += &dir.dy * ad;
        }
        let (metric, mut out) = best.ok_or_else(|| LureError::SolverFailure("no iterations performed".into()))?;
        out.status = if metric <= NEAR_OPTIMAL_TOL {
            SdpStatus::NearOptimal
        } else if iterations + 1 >= self.max_iter {
            SdpStatus::MaxIterations
        } else {
            SdpStatus::Stalled
        };
        out.iterations = iterations + 1;
        Ok(out)
    }
}

enum SchurFactor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl SchurFactor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let x = match self {
            SchurFactor::Chol(c) => c.solve(rhs),
            SchurFactor::Lu(l) => l.solve(rhs)?,
        };
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

impl SdpBackend for InteriorPoint {
    fn solve(&self, problem: &SdpInstance) -> Result<SdpSolution> {
        self.run(problem)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_lp(m: usize) -> (DVector<f64>, DMatrix<f64>) {
        (DVector::zeros(0), DMatrix::zeros(0, m))
    }

    #[test]
    fn off_diagonal_bound_of_a_psd_matrix() {
        // max y  s.t. [[1, y], [y, 1]] PSD
        let (lp_c, lp_g) = no_lp(1);
        let inst = SdpInstance {
            b: DVector::from_element(1, 1.0),
            blocks: vec![SdpBlock {
                c: DMatrix::identity(2, 2),
                a: vec![DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0])],
            }],
            lp_c,
            lp_g,
        };
        let sol = InteriorPoint::default().solve(&inst).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.y[0] - 1.0).abs() < 1e-7, "{}", sol.y[0]);
    }

    #[test]
    fn smallest_eigenvalue_as_an_sdp() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0]);
        let (lp_c, lp_g) = no_lp(1);
        let inst = SdpInstance {
            b: DVector::from_element(1, 1.0),
            blocks: vec![SdpBlock { c: m.clone(), a: vec![DMatrix::identity(3, 3)] }],
            lp_c,
            lp_g,
        };
        let sol = InteriorPoint::default().solve(&inst).unwrap();
        let expect = crate::linalg::min_eigenvalue(&m);
        assert!((sol.y[0] - expect).abs() < 1e-7, "{} vs {expect}", sol.y[0]);
    }

    #[test]
    fn linear_constraints_combine_with_a_block() {
        // max y1 + y2  s.t. y1 <= 1, y2 <= 2, y1 + y2 <= 2.5, y1 >= -10 (as a 1x1 block)
        let inst = SdpInstance {
            b: DVector::from_vec(vec![1.0, 1.0]),
            blocks: vec![SdpBlock {
                c: DMatrix::from_element(1, 1, 10.0),
                a: vec![DMatrix::from_element(1, 1, -1.0), DMatrix::zeros(1, 1)],
            }],
            lp_c: DVector::from_vec(vec![1.0, 2.0, 2.5]),
            lp_g: DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
        };
        let sol = InteriorPoint::default().solve(&inst).unwrap();
        assert!((sol.primal_objective - 2.5).abs() < 1e-6, "{}", sol.primal_objective);
        assert!(sol.y[0] <= 1.0 + 1e-7 && sol.y[1] <= 2.0 + 1e-7);
    }

    #[test]
    fn malformed_instance_is_rejected() {
        let (lp_c, lp_g) = no_lp(2);
        let inst = SdpInstance {
            b: DVector::from_element(2, 1.0),
            blocks: vec![SdpBlock { c: DMatrix::identity(2, 2), a: vec![DMatrix::identity(2, 2)] }],
            lp_c,
            lp_g,
        };
        assert!(matches!(InteriorPoint::default().solve(&inst), Err(LureError::DimensionMismatch(_))));
    }
}
