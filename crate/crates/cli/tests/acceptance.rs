//! Acceptance run: one PASS/FAIL line per criterion, then a single assert.
//! Tolerances are pinned here, independently of the library constants.

use std::path::Path;

use lure_forge_cli::checks::{FigureRow, ProjectionReport};
use lure_forge_cli::repro::{repro_paper, ReproOptions, ReproOutcome};

const RATE_TARGET: f64 = 0.827;
const RATE_TOL: f64 = 0.01;
const RATE_RUNTIME_SECONDS: f64 = 300.0;
const GD_TARGETS: [f64; 2] = [0.818, 0.900];
const GD_TOL: f64 = 0.005;
const CONTRACTION_SLACK: f64 = 1e-8;
const MIN_RANDOM_TRIPLES: usize = 20;
const KKT_TOL: f64 = 1e-6;
const FIXED_POINT_TOL: f64 = 1e-8;
const IO_TOL: f64 = 1e-9;
const MULTIPLIER_TOL: f64 = 1e-8;
const MIN_TRAJECTORIES: usize = 1000;
const MIN_PAIRS: usize = 1000;
const MIN_EXTERIOR_POINTS: usize = 100;
const BRUTE_FORCE_TOL: f64 = 1e-6;
const PROJECTION_SLACK: f64 = 1e-9;
const ENVELOPE_SLACK: f64 = 1e-8;

struct Line {
    id: u8,
    ok: bool,
    detail: String,
}

fn line(id: u8, ok: bool, detail: String) -> Line {
    println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    Line { id, ok, detail }
}

fn criterion_1(o: &ReproOutcome) -> Line {
    let ok = o.ell == 9 && (o.rho - RATE_TARGET).abs() <= RATE_TOL && o.certify_seconds < RATE_RUNTIME_SECONDS;
    line(1, ok, format!("ell = {}, rho = {:.6} (target {RATE_TARGET} +/- {RATE_TOL}), bisection {:.1} s", o.ell, o.rho, o.certify_seconds))
}

fn criterion_2(o: &ReproOutcome) -> Line {
    let ok = o.closed_form.len() == 2
        && o.closed_form.iter().zip(GD_TARGETS).all(|(r, t)| (r.certified - t).abs() <= GD_TOL && (r.simulated - t).abs() <= GD_TOL);
    let detail = o
        .closed_form
        .iter()
        .map(|r| format!("alpha {:.4}: rho {:.6}, worst-case quadratic {:.6}", r.alpha, r.certified, r.simulated))
        .collect::<Vec<_>>()
        .join("; ");
    line(2, ok, detail)
}

fn criterion_3(o: &ReproOutcome) -> Line {
    let example = o.instances.iter().filter(|r| r.label == "example").count();
    let random = o.instances.len() - example;
    let kinds: std::collections::BTreeSet<&str> = o.instances.iter().map(|r| r.set_kind).collect();
    let worst = o.instances.iter().map(|r| r.worst_ratio / r.rho).fold(0.0, f64::max);
    let ok = example == 1
        && random >= MIN_RANDOM_TRIPLES
        && ["box", "ball", "ellipsoid"].iter().all(|k| kinds.contains(k))
        && o.instances.iter().all(|r| r.worst_ratio <= r.rho * (1.0 + CONTRACTION_SLACK));
    line(3, ok, format!("example + {random} random triples, worst per-step ratio {worst:.6} rho"))
}

fn criterion_4(o: &ReproOutcome) -> Line {
    let kkt = o.instances.iter().map(|r| r.kkt_residual).fold(0.0, f64::max);
    let gamma = o.instances.iter().map(|r| r.gamma).fold(f64::INFINITY, f64::min);
    let ok = kkt <= KKT_TOL && gamma > 0.0 && o.gamma > 0.0;
    line(
        4,
        ok,
        format!("max ||Pi(y* - grad f(y*)) - y*|| = {kkt:.2e}, min gamma = {gamma:.4}; chi = {:?} (reference only)", o.chi),
    )
}

fn criterion_5(o: &ReproOutcome) -> Line {
    let ok = o.structure.len() >= 5
        && o.structure.iter().all(|r| r.fixed_point_residual <= FIXED_POINT_TOL && r.g < 0.0 && r.io_deviation <= IO_TOL);
    let worst_io = o.structure.iter().map(|r| r.io_deviation).fold(0.0, f64::max);
    let worst_res = o.structure.iter().map(|r| r.fixed_point_residual).fold(0.0, f64::max);
    line(5, ok, format!("{} catalog systems, residual <= {worst_res:.2e}, io deviation <= {worst_io:.2e}", o.structure.len()))
}

fn criterion_6(o: &ReproOutcome) -> Line {
    let m = &o.multipliers;
    let ok = m.trajectories >= MIN_TRAJECTORIES && m.worst_pointwise >= -MULTIPLIER_TOL && m.worst_weighted_sum >= -MULTIPLIER_TOL;
    line(
        6,
        ok,
        format!("{} trajectories, pointwise min {:.2e}, weighted sum min {:.2e}", m.trajectories, m.worst_pointwise, m.worst_weighted_sum),
    )
}

fn criterion_7(p: &ProjectionReport) -> Line {
    let kinds: Vec<&str> = p.kinds.iter().map(|k| k.kind).collect();
    let ok = ["box", "halfspace", "ball", "ellipsoid"].iter().all(|k| kinds.contains(k))
        && p.kinds.iter().all(|k| {
            k.pairs >= MIN_PAIRS && k.worst_expansion <= PROJECTION_SLACK && k.worst_idempotence <= PROJECTION_SLACK
        })
        && p.brute_force_points >= MIN_EXTERIOR_POINTS
        && p.brute_force_gap <= BRUTE_FORCE_TOL;
    let exp = p.kinds.iter().map(|k| k.worst_expansion).fold(f64::NEG_INFINITY, f64::max);
    let idem = p.kinds.iter().map(|k| k.worst_idempotence).fold(0.0, f64::max);
    line(7, ok, format!("{kinds:?}: expansion {exp:.2e}, idempotence {idem:.2e}, brute-force gap {:.2e}", p.brute_force_gap))
}

/// Re-read a figure file and check every sample against its envelope.
fn read_figure(path: &Path) -> Vec<FigureRow> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let col = |name: &str| header.iter().position(|h| h == name).unwrap_or_else(|| panic!("{name} missing in {path:?}"));
    let num = |rec: &csv::StringRecord, name: &str| -> f64 {
        let s = &rec[col(name)];
        if s.is_empty() {
            f64::NAN
        } else {
            s.parse().unwrap()
        }
    };
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            FigureRow {
                k: rec[0].parse().unwrap(),
                y: vec![num(&rec, "y0"), num(&rec, "y1")],
                grad_norm: num(&rec, "grad_norm"),
                proj_residual: num(&rec, "proj_residual"),
                err_2norm: num(&rec, "err_2norm"),
                err_pnorm: num(&rec, "err_Pnorm"),
                envelope: num(&rec, "envelope"),
                y_envelope: num(&rec, "y_envelope"),
                f_gap: num(&rec, "f_gap"),
                f_envelope: num(&rec, "f_envelope"),
            }
        })
        .collect()
}

fn criterion_8(dir: &Path, o: &ReproOutcome) -> Line {
    let mut ok = o.envelopes.iter().all(|e| e.violations == 0);
    let mut details = Vec::new();
    for name in ["fig1_unconstrained.csv", "fig2_projected.csv"] {
        let rows = read_figure(&dir.join(name));
        let bad = rows
            .iter()
            .filter(|r| {
                !(r.err_pnorm <= r.envelope * (1.0 + ENVELOPE_SLACK)
                    && r.err_2norm <= r.y_envelope * (1.0 + ENVELOPE_SLACK)
                    && r.f_gap.abs() <= r.f_envelope * (1.0 + ENVELOPE_SLACK))
            })
            .count();
        ok &= bad == 0 && rows.len() > 1;
        details.push(format!("{name}: {} samples, {bad} above the envelope", rows.len()));
    }
    line(8, ok, details.join("; "))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let opts = ReproOptions { out: dir.path().to_path_buf(), ..Default::default() };
    let outcome = repro_paper(&opts).expect("reproduction runs");
    let lines = [
        criterion_1(&outcome),
        criterion_2(&outcome),
        criterion_3(&outcome),
        criterion_4(&outcome),
        criterion_5(&outcome),
        criterion_6(&outcome),
        criterion_7(&outcome.projections),
        criterion_8(dir.path(), &outcome),
    ];
    let failed: Vec<String> = lines.iter().filter(|l| !l.ok).map(|l| format!("{}: {}", l.id, l.detail)).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria:\n{}", failed.join("\n"));
        std::process::exit(1);
    }
}
