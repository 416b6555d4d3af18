//! Pipeline stages shared by the subcommands: canonicalize, certify,
//! synthesize and run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lure_forge::canonical::{self, Branch, CanonicalFile, CanonicalSystem, Canonicalization, StructureReport};
use lure_forge::certify::{self, Bisection, BisectionStep, RateCertificate};
use lure_forge::iqclift::{self, AugmentedSystem};
use lure_forge::oracles::{self, ObjectiveOracle};
use lure_forge::projection::{ConstraintSet, ConstraintSpec};
use lure_forge::projsynth::{self, CsvReference, FixedPoint, FixedPointReport, PreHistory, ProjectedAlgorithm, ProjectedRun};
use lure_forge::sdp::InteriorPoint;
use lure_forge::{linalg, LureError};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{History, InitialState, RunConfig};
use crate::CliError;

/// Steps used for the input/output equivalence check.
pub const IO_STEPS: usize = 100;
/// Largest accepted output deviation between original and canonical loops.
pub const IO_TOL: f64 = 1e-9;
/// Largest accepted `||Pi(y* - grad f(y*)) - y*||`.
pub const KKT_TOL: f64 = 1e-6;
/// Relative slack of the per-step contraction test.
pub const CONTRACTION_SLACK: f64 = 1e-8;

pub struct CanonStage {
    pub canonicalization: Canonicalization,
    /// Canonical system after the optional integrator restore.
    pub canon: CanonicalSystem,
    pub integrator_change: Option<f64>,
    pub report: StructureReport,
}

#[derive(Serialize)]
struct CanonicalDocument<'a> {
    canonical: CanonicalFile,
    branch: Branch,
    state_map: Vec<Vec<f64>>,
    q_singular_values: &'a [f64],
    integrator_change: Option<f64>,
}

fn io_oracle(cfg: &RunConfig) -> Result<std::sync::Arc<dyn ObjectiveOracle>, CliError> {
    if let Some(o) = &cfg.oracle {
        return Ok(o.clone());
    }
    let d = cfg.d;
    let spread = DVector::from_fn(d, |i, _| 1.0 + i as f64);
    Ok(std::sync::Arc::new(oracles::quadratic(
        DMatrix::from_diagonal(&spread),
        DVector::from_element(d, 1.0),
    )?))
}

pub fn canonical_stage(cfg: &RunConfig) -> Result<CanonStage, CliError> {
    let canonicalization = canonical::canonicalize_system(&cfg.system, cfg.branch)?;
    let (canon, integrator_change) = match cfg.restore {
        Some(tol) => {
            let (c, change) = canonical::restore_integrator(&canonicalization.canon, tol)?;
            (c, Some(change))
        }
        None => (canonicalization.canon.clone(), None),
    };
    let mut report = canonical::structural_checks(&canon);
    // Equivalence is a property of the transform, so it is measured before
    // any integrator restore.
    let oracle = io_oracle(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x0 = DMatrix::from_fn(cfg.system.n(), cfg.d, |_, _| rng.random_range(-1.0..1.0));
    let dev = canonical::io_deviation(&cfg.system, &canonicalization, oracle.as_ref(), &x0, IO_STEPS)?;
    report.io_equivalence_error = Some(dev);
    if !(dev <= IO_TOL) {
        report.failures.push(format!("input/output deviation {dev:.3e} > {IO_TOL:e}"));
        report.passed = false;
    }
    Ok(CanonStage { canonicalization, canon, integrator_change, report })
}

pub struct CertStage {
    pub aug: AugmentedSystem,
    pub certificate: RateCertificate,
    /// Absent when the certificate was loaded from a file.
    pub bisection: Option<Bisection>,
}

/// Read a certificate and check it against the canonical system.
pub fn load_certificate(path: &Path, canon: &CanonicalSystem, cfg: &RunConfig) -> Result<CertStage, CliError> {
    let text = fs::read_to_string(path)?;
    let cert: RateCertificate = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let bad = |msg: String| CliError::Validation(format!("{}: {msg}", path.display()));
    if cert.system_hash != certify::system_hash(canon) {
        return Err(bad("certificate belongs to a different system".into()));
    }
    if let Some(ell) = cfg.ell {
        if ell != cert.ell {
            return Err(bad(format!("certificate has ell = {}, configuration asks for {ell}", cert.ell)));
        }
    }
    if let Some(s) = cfg.sector {
        if cert.m > s.m || cert.l < s.l {
            return Err(bad(format!(
                "certificate covers S({}, {}), which does not contain the configured S({}, {})",
                cert.m, cert.l, s.m, s.l
            )));
        }
    }
    let aug = iqclift::augment(canon, &iqclift::build_filter(cert.ell))?;
    let check = certify::check_certificate(&cert, &aug)?;
    if !check.valid {
        return Err(bad(format!(
            "certificate fails re-validation (lmi max eig {:.3e}, P min eig {:.3e}, cone {})",
            check.lmi_max_eig, check.p_min_eig, check.cone_ok
        )));
    }
    Ok(CertStage { aug, certificate: cert, bisection: None })
}

pub fn certificate_stage(cfg: &RunConfig, canon: &CanonicalSystem, use_file: bool) -> Result<CertStage, CliError> {
    if use_file {
        if let Some(path) = &cfg.certificate {
            return load_certificate(path, canon, cfg);
        }
    }
    let sector = cfg.require_sector()?;
    let ell = cfg.lift();
    match certify::certify(canon, sector, ell, cfg.bisect, &InteriorPoint::default()) {
        Ok((aug, bis)) => Ok(CertStage { aug, certificate: bis.certificate.clone(), bisection: Some(bis) }),
        Err(LureError::BracketInfeasible { rho_hi }) => Err(CliError::Solver(format!(
            "no certificate at ell = {ell}: the feasibility frontier lies above rho_hi = {rho_hi}"
        ))),
        Err(e) => Err(e.into()),
    }
}

pub fn algorithm_stage(cfg: &RunConfig, canon: &CanonicalSystem, cert: &RateCertificate) -> Result<ProjectedAlgorithm, CliError> {
    let set = cfg.require_constraint()?.clone();
    Ok(projsynth::synthesize(canon, cert, set)?)
}

#[derive(Serialize)]
pub struct AlgorithmDocument {
    pub rho: f64,
    pub ell: usize,
    pub r: usize,
    pub n: usize,
    pub schur: f64,
    pub chi: Vec<f64>,
    pub correction: Vec<f64>,
    pub gamma: f64,
    pub constraint: ConstraintSpec,
    pub canonical: CanonicalFile,
    pub system_hash: String,
}

impl AlgorithmDocument {
    pub fn new(alg: &ProjectedAlgorithm) -> Self {
        Self {
            rho: alg.rho(),
            ell: alg.ell(),
            r: alg.canon().r(),
            n: alg.canon().n(),
            schur: alg.s(),
            chi: alg.chi().iter().copied().collect(),
            correction: alg.correction().iter().copied().collect(),
            gamma: projsynth::gamma(alg.canon(), alg.chi()),
            constraint: ConstraintSpec::from(alg.set()),
            canonical: CanonicalFile::from(alg.canon()),
            system_hash: certify::system_hash(alg.canon()),
        }
    }
}

/// Canonical initial state for the configured seed.
pub fn initial_state(cfg: &RunConfig, state_map: &DMatrix<f64>) -> DMatrix<f64> {
    let x0 = match &cfg.x0 {
        InitialState::Given(x) => x.clone(),
        InitialState::Uniform { lo, hi } => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut x = DMatrix::zeros(cfg.system.n(), cfg.d);
            for i in 0..x.nrows() {
                for j in 0..x.ncols() {
                    x[(i, j)] = rng.random_range(*lo..*hi);
                }
            }
            x
        }
    };
    state_map * x0
}

pub fn pre_history(h: History) -> PreHistory {
    match h {
        History::Zero => PreHistory::Zero,
        History::Steady => PreHistory::Steady,
    }
}

/// Projected run with its fixed point and contraction statistics.
pub struct RunResult {
    pub run: ProjectedRun,
    pub fixed_point: FixedPoint,
    pub report: FixedPointReport,
    /// Worst `||x_{k+1} - x*||_P / ||x_k - x*||_P` over `k >= ell`.
    pub worst_ratio: f64,
    pub contraction_ok: bool,
}

pub fn run_projected(
    alg: &ProjectedAlgorithm,
    oracle: &dyn ObjectiveOracle,
    x0: &DMatrix<f64>,
    horizon: usize,
    history: PreHistory,
    fixed_point_steps: usize,
) -> Result<RunResult, CliError> {
    let fixed_point = alg.find_fixed_point(oracle, x0, fixed_point_steps)?;
    let report = projsynth::check_fixed_point(alg, oracle, &fixed_point)?;
    let run = alg.run(oracle, x0, horizon, history)?;
    let worst_ratio = projsynth::worst_ratio(alg.p(), &run.aug_states, &fixed_point.aug_state, alg.ell());
    let contraction_ok = worst_ratio <= alg.rho() * (1.0 + CONTRACTION_SLACK);
    Ok(RunResult { run, fixed_point, report, worst_ratio, contraction_ok })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn reference<'a>(alg: &'a ProjectedAlgorithm, fp: &'a FixedPoint) -> CsvReference<'a> {
    CsvReference { p: alg.p(), x_star: &fp.aug_state, rho: alg.rho() }
}

fn write_run_csv(path: &Path, run: &ProjectedRun, reference: Option<CsvReference<'_>>, y_star: &DVector<f64>) -> Result<(), CliError> {
    let file = fs::File::create(path)?;
    projsynth::write_trajectory_csv(
        std::io::BufWriter::new(file),
        &run.aug_states,
        &run.outputs,
        &run.grad_norms,
        &run.proj_residuals,
        reference,
        Some(y_star),
    )?;
    Ok(())
}

fn vec_text(v: &DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.12e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn prepare_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}

pub fn structure_text(stage: &CanonStage) -> String {
    let r = &stage.report;
    let mut s = String::new();
    let _ = writeln!(s, "branch = {:?}", stage.canonicalization.branch);
    let _ = writeln!(s, "r = {}", r.r);
    let _ = writeln!(s, "n = {}", r.n);
    let _ = writeln!(s, "g = {:.6}", r.g);
    let _ = writeln!(s, "rank K2 = {}", r.k2_rank);
    let _ = writeln!(s, "fixed-point identity residual = {:.3e}", r.fixed_point_residual);
    let _ = writeln!(s, "fixed-point matrix residual = {:.3e}", r.fixed_point_matrix_residual);
    let _ = writeln!(s, "block fixed-point residual = {:.3e}", r.fixed_point_pair_residual);
    if let Some(dev) = r.io_equivalence_error {
        let _ = writeln!(s, "io deviation ({IO_STEPS} steps) = {dev:.3e}");
    }
    if let Some(c) = stage.integrator_change {
        let _ = writeln!(s, "integrator restore change = {c:.3e}");
    }
    let _ = writeln!(s, "structure = {}", if r.passed { "PASS" } else { "FAIL" });
    for f in &r.failures {
        let _ = writeln!(s, "  {f}");
    }
    s
}

pub fn cmd_canonicalize(cfg: &RunConfig) -> Result<String, CliError> {
    let stage = canonical_stage(cfg)?;
    let dir = prepare_dir(&cfg.out_dir)?;
    let c = &stage.canonicalization;
    write_json(
        &dir.join("canonical.json"),
        &CanonicalDocument {
            canonical: CanonicalFile::from(&stage.canon),
            branch: c.branch,
            state_map: linalg::to_rows(&c.state_map),
            q_singular_values: &c.q_singular_values,
            integrator_change: stage.integrator_change,
        },
    )?;
    write_json(&dir.join("structure.json"), &stage.report)?;
    let text = structure_text(&stage);
    if !stage.report.passed {
        return Err(CliError::Validation(format!("structural checks failed\n{text}")));
    }
    Ok(text)
}

pub fn bisection_text(log: &[BisectionStep]) -> String {
    let mut s = String::new();
    for step in log {
        let _ = writeln!(s, "rho = {:.6}: {}", step.rho, serde_json::to_string(&step.outcome).unwrap_or_default());
    }
    s
}

pub fn cmd_certify(cfg: &RunConfig) -> Result<String, CliError> {
    let stage = canonical_stage(cfg)?;
    let cert = certificate_stage(cfg, &stage.canon, false)?;
    let dir = prepare_dir(&cfg.out_dir)?;
    write_json(&dir.join("certificate.json"), &cert.certificate)?;
    let mut text = String::new();
    if let Some(bis) = &cert.bisection {
        write_json(&dir.join("bisection.json"), &bis.log)?;
        text.push_str(&bisection_text(&bis.log));
        let _ = writeln!(text, "rho lower = {:.6}", bis.rho_lower);
    }
    let c = &cert.certificate;
    let _ = writeln!(text, "rho = {:.6} (ell = {})", c.rho, c.ell);
    let _ = writeln!(text, "lmi residual = {:.3e}, P min eig = {:.3e}", c.lmi_residual, c.p_min_eig);
    Ok(text)
}

pub fn cmd_synthesize(cfg: &RunConfig) -> Result<String, CliError> {
    let stage = canonical_stage(cfg)?;
    let cert = certificate_stage(cfg, &stage.canon, true)?;
    let alg = algorithm_stage(cfg, &stage.canon, &cert.certificate)?;
    let dir = prepare_dir(&cfg.out_dir)?;
    let doc = AlgorithmDocument::new(&alg);
    write_json(&dir.join("algorithm.json"), &doc)?;
    if cert.bisection.is_some() {
        write_json(&dir.join("certificate.json"), &cert.certificate)?;
    }
    Ok(format!(
        "rho = {:.6}\nchi = {}\nschur = {:.6e}\ngamma = {:.6}\n",
        doc.rho,
        vec_text(alg.chi()),
        doc.schur,
        doc.gamma
    ))
}

pub fn cmd_run(cfg: &RunConfig) -> Result<String, CliError> {
    let stage = canonical_stage(cfg)?;
    let cert = certificate_stage(cfg, &stage.canon, true)?;
    let alg = algorithm_stage(cfg, &stage.canon, &cert.certificate)?;
    let oracle = cfg.require_oracle()?;
    let x0 = initial_state(cfg, &stage.canonicalization.state_map);
    let history = pre_history(cfg.history);
    let projected = run_projected(&alg, oracle, &x0, cfg.horizon, history, cfg.fixed_point_steps)?;

    let whole = projsynth::synthesize(&stage.canon, &cert.certificate, ConstraintSet::whole(cfg.d))?;
    let free = run_projected(&whole, oracle, &x0, cfg.horizon, history, cfg.fixed_point_steps)?;
    let naive = projsynth::run_naive(&stage.canon, alg.set(), oracle, &x0, cfg.horizon)?;

    let dir = prepare_dir(&cfg.out_dir)?;
    let fp = &projected.fixed_point;
    write_run_csv(&dir.join("projected.csv"), &projected.run, Some(reference(&alg, fp)), &fp.y_star)?;
    write_run_csv(
        &dir.join("unconstrained.csv"),
        &free.run,
        Some(reference(&whole, &free.fixed_point)),
        &free.fixed_point.y_star,
    )?;
    write_run_csv(&dir.join("naive.csv"), &naive, None, &fp.y_star)?;

    let naive_last = naive.outputs.last().expect("runs hold the initial state");
    let naive_kkt = {
        let g = oracle.gradient(naive_last);
        (lure_forge::projection::project_euclidean(alg.set(), &(naive_last - g))? - naive_last).norm()
    };
    let rep = &projected.report;
    let mut s = String::new();
    let _ = writeln!(s, "rho = {:.6}", alg.rho());
    let _ = writeln!(s, "ell = {}", alg.ell());
    let _ = writeln!(s, "horizon = {}", cfg.horizon);
    let _ = writeln!(s, "seed = {}", cfg.seed);
    let _ = writeln!(s, "y_star = {}", vec_text(&rep.y_star));
    let _ = writeln!(s, "gamma = {:.6}", rep.gamma);
    let _ = writeln!(s, "chi = {}", vec_text(alg.chi()));
    let _ = writeln!(s, "kkt_residual = {:.3e}", rep.kkt_residual);
    let _ = writeln!(s, "kkt_residual_step_0.1 = {:.3e}", rep.kkt_residual_short);
    let _ = writeln!(s, "worst_contraction_ratio = {:.9}", projected.worst_ratio);
    let _ = writeln!(s, "contraction_bound = {:.9}", alg.rho() * (1.0 + CONTRACTION_SLACK));
    let _ = writeln!(s, "unconstrained_worst_ratio = {:.9}", free.worst_ratio);
    let _ = writeln!(s, "naive_final_kkt_residual = {naive_kkt:.3e}");
    let _ = writeln!(s, "fixed_point = {}", if rep.passed(KKT_TOL) { "PASS" } else { "FAIL" });
    let _ = writeln!(s, "contraction = {}", if projected.contraction_ok { "PASS" } else { "FAIL" });
    fs::write(dir.join("summary.txt"), &s)?;
    Ok(s)
}
