//! Reproduction of the delayed-gradient example: certificate, figure data
//! with contraction envelopes, and the acceptance table.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use lure_forge::certify::{self, BisectOptions};
use lure_forge::linalg;
use lure_forge::oracles::{ObjectiveOracle, Sector};
use lure_forge::projection::ConstraintSet;
use lure_forge::projsynth::{self, FixedPoint, ProjectedAlgorithm, ProjectedRun};
use lure_forge::sdp::InteriorPoint;
use lure_forge::LureError;
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{self, Criterion, FigureRow, Status};
use crate::config::{Overrides, RunConfig};
use crate::pipeline::{self, RunResult};
use crate::CliError;

/// Example data: printed delayed-gradient coefficients, the test quadratic,
/// the ellipse constraint and S(1, 10) with a nine-step lift.
pub const REFERENCE_CONFIG: &str = r#"schema_version = 1

[system]
preset = "delayed-gradient"

[sector]
m = 1.0
L = 10.0

[certify]
ell = 9
tol = 1e-3

[constraint]
kind = "ellipsoid"
w = [[1.0, -0.5], [-0.5, 2.0]]
level = 10.0

[oracle]
kind = "quadratic"
f = [[9.88, -1.0], [-1.0, 1.117]]
p = [1.0, 5.0]

[run]
horizon = 100
seed = 1
x0_range = [0.0, 1.0]
history = "steady"
"#;

/// Correction gain printed alongside the example (reference only: it
/// depends on the normalization of `P`).
pub const REFERENCE_CHI: [f64; 2] = [-0.029, 0.036];

#[derive(Debug, Clone, Default)]
pub struct ReproOptions {
    pub ell: Option<usize>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// Additional lifts to certify in parallel.
    pub sweep: Vec<usize>,
    /// Reuse a certificate instead of bisecting.
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub ell: usize,
    pub outcome: String,
    pub rho: Option<f64>,
    pub rho_lower: Option<f64>,
    pub solves: usize,
}

pub struct ReproOutcome {
    pub ell: usize,
    /// Wall time of the bisection (zero for a reused certificate). Not written to disk.
    pub certify_seconds: f64,
    pub rho: f64,
    pub chi: Vec<f64>,
    pub gamma: f64,
    pub y_star: Vec<f64>,
    pub integrator_change: Option<f64>,
    pub closed_form: Vec<checks::ClosedFormRate>,
    pub instances: Vec<checks::InstanceResult>,
    pub structure: Vec<checks::StructureResult>,
    pub multipliers: checks::MultiplierResult,
    pub projections: checks::ProjectionReport,
    pub envelopes: Vec<checks::EnvelopeResult>,
    pub sweep: Vec<SweepRow>,
    pub criteria: Vec<Criterion>,
}

impl ReproOutcome {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.status != Status::Fail)
    }

    pub fn table(&self) -> String {
        self.criteria.iter().map(|c| format!("{c}\n")).collect()
    }
}

pub fn reference_config(opts: &ReproOptions) -> Result<RunConfig, CliError> {
    let overrides = Overrides { ell: opts.ell, seed: opts.seed, out: Some(opts.out.clone()) };
    RunConfig::parse(Path::new("<embedded>"), REFERENCE_CONFIG, &overrides)
}

pub fn figure_rows(alg: &ProjectedAlgorithm, oracle: &dyn ObjectiveOracle, run: &ProjectedRun, fp: &FixedPoint) -> Vec<FigureRow> {
    let p = alg.p();
    let lambda_min = linalg::min_eigenvalue(p);
    let e0 = linalg::block_pnorm(p, &(&run.aug_states[0] - &fp.aug_state));
    let c = e0 / lambda_min.sqrt();
    let f_star = oracle.value(&fp.y_star);
    let g_star = oracle.gradient(&fp.y_star).norm();
    let l = oracle.sector().l;
    (0..run.aug_states.len())
        .map(|k| {
            let decay = alg.rho().powi(k as i32);
            let y = &run.outputs[k];
            let y_env = c * decay;
            FigureRow {
                k,
                y: y.iter().copied().collect(),
                grad_norm: run.grad_norms[k],
                proj_residual: run.proj_residuals[k],
                err_2norm: (y - &fp.y_star).norm(),
                err_pnorm: linalg::block_pnorm(p, &(&run.aug_states[k] - &fp.aug_state)),
                envelope: e0 * decay,
                y_envelope: y_env,
                f_gap: oracle.value(y) - f_star,
                f_envelope: g_star * y_env + 0.5 * l * y_env * y_env,
            }
        })
        .collect()
}

pub fn write_figure_csv(path: &Path, rows: &[FigureRow]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let d = rows.first().map_or(0, |r| r.y.len());
    let mut header = vec!["k".to_string()];
    header.extend((0..d).map(|i| format!("y{i}")));
    header.extend(
        ["grad_norm", "proj_residual", "err_2norm", "err_Pnorm", "envelope", "y_envelope", "f_gap", "f_envelope"]
            .map(String::from),
    );
    w.write_record(&header).map_err(io)?;
    let fmt = |v: f64| if v.is_nan() { String::new() } else { format!("{v:.17e}") };
    for r in rows {
        let mut rec = vec![r.k.to_string()];
        rec.extend(r.y.iter().map(|v| fmt(*v)));
        rec.extend(
            [r.grad_norm, r.proj_residual, r.err_2norm, r.err_pnorm, r.envelope, r.y_envelope, r.f_gap, r.f_envelope].map(fmt),
        );
        w.write_record(&rec).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn sweep(canon: &lure_forge::canonical::CanonicalSystem, sector: Sector, opts: BisectOptions, ells: &[usize]) -> Vec<SweepRow> {
    ells.par_iter()
        .map(|&ell| match certify::certify(canon, sector, ell, opts, &InteriorPoint::default()) {
            Ok((_, bis)) => SweepRow {
                ell,
                outcome: "certified".into(),
                rho: Some(bis.certificate.rho),
                rho_lower: Some(bis.rho_lower),
                solves: bis.log.len(),
            },
            Err(e) => SweepRow {
                ell,
                outcome: match e {
                    LureError::BracketInfeasible { .. } => "bracket-infeasible".into(),
                    LureError::SolverFailure(_) => "solver-failure".into(),
                    other => format!("error: {other}"),
                },
                rho: None,
                rho_lower: None,
                solves: 0,
            },
        })
        .collect()
}

fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["ell", "outcome", "rho", "rho_lower", "solves"]).map_err(io)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
    for r in rows {
        w.write_record([r.ell.to_string(), r.outcome.clone(), opt(r.rho), opt(r.rho_lower), r.solves.to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

fn list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn repro_paper(opts: &ReproOptions) -> Result<ReproOutcome, CliError> {
    let cfg = reference_config(opts)?;
    let sector = cfg.require_sector()?;
    let oracle = cfg.require_oracle()?;
    let stage = pipeline::canonical_stage(&cfg)?;
    if !stage.report.passed {
        return Err(CliError::Validation(format!("structural checks failed\n{}", pipeline::structure_text(&stage))));
    }
    let canon = &stage.canon;
    let start = std::time::Instant::now();
    let cert_stage = match &opts.certificate {
        Some(path) => pipeline::load_certificate(path, canon, &cfg)?,
        None => pipeline::certificate_stage(&cfg, canon, false)?,
    };
    let certify_seconds = if cert_stage.bisection.is_some() { start.elapsed().as_secs_f64() } else { 0.0 };
    let cert = &cert_stage.certificate;
    let ell = cert.ell;
    fs::create_dir_all(&cfg.out_dir)?;
    let dir = cfg.out_dir.clone();
    pipeline::write_json(&dir.join("certificate.json"), cert)?;
    if let Some(bis) = &cert_stage.bisection {
        pipeline::write_json(&dir.join("bisection.json"), &bis.log)?;
    }

    let alg = pipeline::algorithm_stage(&cfg, canon, cert)?;
    let whole = projsynth::synthesize(canon, cert, ConstraintSet::whole(cfg.d))?;
    let x0 = pipeline::initial_state(&cfg, &stage.canonicalization.state_map);
    let history = pipeline::pre_history(cfg.history);
    let projected: RunResult = pipeline::run_projected(&alg, oracle, &x0, cfg.horizon, history, cfg.fixed_point_steps)?;
    let free: RunResult = pipeline::run_projected(&whole, oracle, &x0, cfg.horizon, history, cfg.fixed_point_steps)?;
    let naive = projsynth::run_naive(canon, alg.set(), oracle, &x0, cfg.horizon)?;

    let fig1 = figure_rows(&whole, oracle, &free.run, &free.fixed_point);
    let fig2 = figure_rows(&alg, oracle, &projected.run, &projected.fixed_point);
    write_figure_csv(&dir.join("fig1_unconstrained.csv"), &fig1)?;
    write_figure_csv(&dir.join("fig2_projected.csv"), &fig2)?;
    let naive_rows = figure_rows_without_reference(&naive, oracle, &projected.fixed_point);
    write_figure_csv(&dir.join("naive.csv"), &naive_rows)?;

    let closed_form = checks::closed_form_rates(sector)?;
    let instances = checks::preservation_instances(canon, cert, alg.set(), &x0, cfg.seed)?;
    let structure = checks::structural_identities(sector, cfg.seed)?;
    let multipliers = checks::multiplier_validity(canon, cert, cfg.seed)?;
    let projections = checks::projection_library(cfg.seed)?;
    let envelopes = vec![checks::envelope_check("fig1", &fig1), checks::envelope_check("fig2", &fig2)];

    let sweep_rows = sweep(canon, sector, cfg.bisect, &opts.sweep);
    if !sweep_rows.is_empty() {
        write_sweep(&dir.join("ell_sweep.csv"), &sweep_rows)?;
    }

    let criteria = vec![
        checks::judge_reference_rate(cert.rho, ell),
        checks::judge_closed_form(&closed_form),
        checks::judge_preservation(&instances),
        checks::judge_optimality(&instances),
        checks::judge_structure(&structure),
        checks::judge_multipliers(&multipliers),
        checks::judge_projections(&projections),
        checks::judge_envelopes(&envelopes),
    ];
    let rep = &projected.report;
    let outcome = ReproOutcome {
        ell,
        certify_seconds,
        rho: cert.rho,
        chi: alg.chi().iter().copied().collect(),
        gamma: rep.gamma,
        y_star: rep.y_star.iter().copied().collect(),
        integrator_change: stage.integrator_change,
        closed_form,
        instances,
        structure,
        multipliers,
        projections,
        envelopes,
        sweep: sweep_rows,
        criteria,
    };

    let mut s = String::new();
    let _ = writeln!(s, "ell = {ell}");
    let _ = writeln!(s, "rho = {:.6}", cert.rho);
    if let Some(bis) = &cert_stage.bisection {
        let _ = writeln!(s, "rho_lower = {:.6}", bis.rho_lower);
    }
    if let Some(c) = stage.integrator_change {
        let _ = writeln!(s, "integrator_restore_change = {c:.3e}");
    }
    let _ = writeln!(s, "schur = {:.6e}", alg.s());
    let _ = writeln!(s, "chi = {}", list(&outcome.chi));
    let _ = writeln!(s, "chi_reference = {} (normalization dependent, not compared)", list(&REFERENCE_CHI));
    let _ = writeln!(s, "gamma = {:.6}", rep.gamma);
    let _ = writeln!(s, "y_star = {}", list(&outcome.y_star));
    let _ = writeln!(s, "kkt_residual = {:.3e}", rep.kkt_residual);
    let _ = writeln!(s, "worst_contraction_ratio = {:.9}", projected.worst_ratio);
    let _ = writeln!(s, "unconstrained_worst_ratio = {:.9}", free.worst_ratio);
    for r in &outcome.sweep {
        let _ = writeln!(s, "sweep ell = {}: {} {}", r.ell, r.outcome, r.rho.map_or(String::new(), |v| format!("{v:.6}")));
    }
    fs::write(dir.join("summary.txt"), &s)?;
    fs::write(dir.join("acceptance.txt"), outcome.table())?;
    Ok(outcome)
}

/// Figure columns for the naive baseline, measured against the projected
/// fixed point without a Lyapunov reference.
fn figure_rows_without_reference(run: &ProjectedRun, oracle: &dyn ObjectiveOracle, fp: &FixedPoint) -> Vec<FigureRow> {
    let f_star = oracle.value(&fp.y_star);
    (0..run.outputs.len())
        .map(|k| {
            let y = &run.outputs[k];
            FigureRow {
                k,
                y: y.iter().copied().collect(),
                grad_norm: run.grad_norms[k],
                proj_residual: run.proj_residuals[k],
                err_2norm: (y - &fp.y_star).norm(),
                err_pnorm: f64::NAN,
                envelope: f64::NAN,
                y_envelope: f64::NAN,
                f_gap: oracle.value(y) - f_star,
                f_envelope: f64::NAN,
            }
        })
        .collect()
}
