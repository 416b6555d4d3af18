//! Versioned TOML run configuration.
//!
//! Structural errors come from the TOML deserializer (which reports line and
//! column); semantic errors are anchored to the offending field through
//! `toml::Spanned`.

use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lure_forge::canonical::BranchChoice;
use lure_forge::catalog;
use lure_forge::certify::BisectOptions;
use lure_forge::oracles::{self, ObjectiveOracle, Sector};
use lure_forge::projection::{ConstraintSet, ConstraintSpec};
use lure_forge::sssys::{self, ReducedLti};
use lure_forge::{linalg, LureError};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use toml::Spanned;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Slack allowed when comparing the oracle sector with the declared one.
const SECTOR_SLACK: f64 = 1e-12;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    schema_version: Spanned<u32>,
    system: SystemSection,
    sector: Option<Spanned<SectorSection>>,
    #[serde(default)]
    certify: CertifySection,
    constraint: Option<Spanned<ConstraintSpec>>,
    oracle: Option<Spanned<OracleSpec>>,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Form {
    /// `A`, `b`, `c` act on scalar states; the vector dimension comes from `d`.
    #[default]
    Reduced,
    /// Full `(A kron I_d, B kron I_d, C kron I_d)` matrices.
    Full,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Numeric {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSection {
    preset: Option<Spanned<String>>,
    alpha: Option<f64>,
    beta: Option<f64>,
    a: Option<Spanned<Vec<Vec<f64>>>>,
    b: Option<Spanned<Numeric>>,
    c: Option<Spanned<Numeric>>,
    #[serde(default)]
    form: Form,
    d: Option<Spanned<usize>>,
    /// Largest entry change allowed when moving the integrating eigenvalue
    /// back to one.
    restore_integrator: Option<Spanned<f64>>,
    #[serde(default)]
    branch: BranchChoice,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectorSection {
    m: f64,
    #[serde(alias = "l")]
    #[serde(rename = "L")]
    l: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertifySection {
    ell: Option<usize>,
    rho_lo: Option<f64>,
    rho_hi: Option<f64>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    certificate: Option<Spanned<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum OracleSpec {
    Quadratic {
        #[serde(alias = "F")]
        f: Vec<Vec<f64>>,
        p: Vec<f64>,
    },
    LogSumExp {
        #[serde(alias = "A")]
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        mu: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum History {
    Zero,
    #[default]
    Steady,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    horizon: Option<usize>,
    seed: Option<u64>,
    x0: Option<Spanned<Vec<Vec<f64>>>>,
    x0_range: Option<Spanned<[f64; 2]>>,
    #[serde(default)]
    history: History,
    fixed_point_steps: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<String>,
}

/// Initial state of a run, in the coordinates of the configured system.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Given(DMatrix<f64>),
    Uniform { lo: f64, hi: f64 },
}

/// Validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub path: PathBuf,
    pub system: ReducedLti,
    pub restore: Option<f64>,
    pub branch: BranchChoice,
    pub sector: Option<Sector>,
    /// Lift length; `None` when neither the file nor the command line sets it.
    pub ell: Option<usize>,
    pub bisect: BisectOptions,
    pub certificate: Option<PathBuf>,
    pub constraint: Option<ConstraintSet>,
    pub oracle: Option<Arc<dyn ObjectiveOracle>>,
    /// Vector dimension shared by the oracle, the constraint set and the states.
    pub d: usize,
    pub horizon: usize,
    pub seed: u64,
    pub x0: InitialState,
    pub history: History,
    pub fixed_point_steps: usize,
    pub out_dir: PathBuf,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub ell: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

struct Source<'a> {
    path: &'a Path,
    text: &'a str,
}

impl Source<'_> {
    fn position(&self, offset: usize) -> (usize, usize) {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
        (line, col)
    }

    fn error(&self, span: Range<usize>, field: &str, msg: impl std::fmt::Display) -> CliError {
        let (line, col) = self.position(span.start);
        CliError::Validation(format!("{}:{line}:{col}: `{field}`: {msg}", self.path.display()))
    }

    fn error_at<T>(&self, value: &Spanned<T>, field: &str, msg: impl std::fmt::Display) -> CliError {
        self.error(value.span(), field, msg)
    }
}

fn matrix(src: &Source<'_>, v: &Spanned<Vec<Vec<f64>>>, field: &str) -> Result<DMatrix<f64>, CliError> {
    let rows = v.get_ref();
    if rows.is_empty() || rows[0].is_empty() {
        return Err(src.error_at(v, field, "matrix is empty"));
    }
    if let Some(i) = rows.iter().position(|r| r.len() != rows[0].len()) {
        return Err(src.error_at(
            v,
            field,
            format!("row {} has {} entries, expected {}", i + 1, rows[i].len(), rows[0].len()),
        ));
    }
    if rows.iter().flatten().any(|x| !x.is_finite()) {
        return Err(src.error_at(v, field, "entries must be finite"));
    }
    Ok(linalg::from_rows(rows).expect("rows checked"))
}

fn numeric_matrix(src: &Source<'_>, v: &Spanned<Numeric>, field: &str, column: bool) -> Result<DMatrix<f64>, CliError> {
    match v.get_ref() {
        Numeric::Vector(x) if x.is_empty() => Err(src.error_at(v, field, "vector is empty")),
        Numeric::Vector(x) if column => Ok(DMatrix::from_column_slice(x.len(), 1, x)),
        Numeric::Vector(x) => Ok(DMatrix::from_row_slice(1, x.len(), x)),
        Numeric::Matrix(rows) => matrix(src, &Spanned::new(v.span(), rows.clone()), field),
    }
}

fn validation<'a>(src: &'a Source<'_>, span: Range<usize>, field: &str) -> impl Fn(LureError) -> CliError + 'a {
    let field = field.to_string();
    move |e| src.error(span.clone(), &field, e)
}

fn build_system(src: &Source<'_>, s: &SystemSection, sector: Option<Sector>) -> Result<(ReducedLti, Option<f64>), CliError> {
    let explicit = s.a.is_some() || s.b.is_some() || s.c.is_some();
    let restore = s.restore_integrator.as_ref().map(|r| (*r.get_ref(), r.span()));
    if let Some((tol, span)) = &restore {
        if !(tol.is_finite() && *tol > 0.0) {
            return Err(src.error(span.clone(), "system.restore_integrator", "must be a positive tolerance"));
        }
    }
    let restore = restore.map(|r| r.0);
    if let Some(preset) = &s.preset {
        if explicit {
            return Err(src.error_at(preset, "system.preset", "give either a preset or explicit matrices, not both"));
        }
        if s.form == Form::Full {
            return Err(src.error_at(preset, "system.form", "presets are defined in reduced form"));
        }
        let need_sector = || {
            sector.ok_or_else(|| src.error_at(preset, "system.preset", "this preset is tuned from the [sector] table"))
        };
        let sys = match preset.get_ref().as_str() {
            "gradient-descent" => match s.alpha {
                Some(a) => catalog::gradient_descent(a),
                None => {
                    let sec = need_sector()?;
                    catalog::gradient_descent(2.0 / (sec.m + sec.l))
                }
            },
            "heavy-ball" => match (s.alpha, s.beta) {
                (Some(a), Some(b)) => catalog::heavy_ball(a, b),
                _ => {
                    let sec = need_sector()?;
                    catalog::heavy_ball_tuned(sec.m, sec.l)
                }
            },
            "nesterov" => match (s.alpha, s.beta) {
                (Some(a), Some(b)) => catalog::nesterov(a, b),
                _ => {
                    let sec = need_sector()?;
                    catalog::nesterov_tuned(sec.m, sec.l)
                }
            },
            "triple-momentum" => {
                let sec = need_sector()?;
                catalog::triple_momentum(sec.m, sec.l)
            }
            "delayed-gradient" => {
                return Ok((catalog::delayed_gradient_printed(), Some(restore.unwrap_or(catalog::PRINTED_ROUNDING))));
            }
            other => {
                return Err(src.error_at(
                    preset,
                    "system.preset",
                    format!(
                        "unknown preset `{other}` (expected gradient-descent, heavy-ball, nesterov, \
                         triple-momentum or delayed-gradient)"
                    ),
                ))
            }
        };
        return Ok((sys, restore));
    }
    let (Some(a), Some(b), Some(c)) = (&s.a, &s.b, &s.c) else {
        let missing = [("a", s.a.is_some()), ("b", s.b.is_some()), ("c", s.c.is_some())]
            .iter()
            .filter(|(_, present)| !present)
            .map(|(n, _)| *n)
            .collect::<Vec<_>>()
            .join(", ");
        return Err(CliError::Validation(format!(
            "{}: [system] needs a preset or all of a, b, c (missing {missing})",
            src.path.display()
        )));
    };
    let am = matrix(src, a, "system.a")?;
    if !am.is_square() {
        return Err(src.error_at(a, "system.a", format!("must be square, got {}x{}", am.nrows(), am.ncols())));
    }
    let sys = match s.form {
        Form::Reduced => {
            let bm = numeric_matrix(src, b, "system.b", true)?;
            let cm = numeric_matrix(src, c, "system.c", true)?;
            if bm.ncols() != 1 || bm.nrows() != am.nrows() {
                return Err(src.error_at(b, "system.b", format!("expected a vector of length {}", am.nrows())));
            }
            if cm.len() != am.nrows() || (cm.ncols() != 1 && cm.nrows() != 1) {
                return Err(src.error_at(c, "system.c", format!("expected a vector of length {}", am.nrows())));
            }
            let bv = DVector::from_iterator(bm.len(), bm.iter().copied());
            let cv = DVector::from_iterator(cm.len(), cm.iter().copied());
            ReducedLti::new(am, bv, cv, 1).map_err(validation(src, a.span(), "system"))?
        }
        Form::Full => {
            let d = s
                .d
                .as_ref()
                .ok_or_else(|| src.error_at(a, "system.d", "full-form systems need the dimension `d`"))?;
            let bm = numeric_matrix(src, b, "system.b", true)?;
            let cm = numeric_matrix(src, c, "system.c", false)?;
            sssys::reduce(&am, &bm, &cm, *d.get_ref()).map_err(validation(src, a.span(), "system"))?
        }
    };
    Ok((sys, restore))
}

fn build_oracle(src: &Source<'_>, spec: &Spanned<OracleSpec>) -> Result<Arc<dyn ObjectiveOracle>, CliError> {
    let err = validation(src, spec.span(), "oracle");
    let rows = |m: &Vec<Vec<f64>>, field: &str| matrix(src, &Spanned::new(spec.span(), m.clone()), field);
    Ok(match spec.get_ref() {
        OracleSpec::Quadratic { f, p } => {
            let f = rows(f, "oracle.f")?;
            if (&f - f.transpose()).amax() > 1e-12 * f.amax().max(1.0) {
                return Err(src.error_at(spec, "oracle.f", "must be symmetric"));
            }
            Arc::new(oracles::quadratic(f, DVector::from_column_slice(p)).map_err(err)?)
        }
        OracleSpec::LogSumExp { a, b, mu } => {
            let a = rows(a, "oracle.a")?;
            Arc::new(oracles::log_sum_exp(a, DVector::from_column_slice(b), *mu).map_err(err)?)
        }
    })
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(path, &text, overrides)
    }

    pub fn parse(path: &Path, text: &str, overrides: &Overrides) -> Result<Self, CliError> {
        let src = Source { path, text };
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => src.error(span, "config", msg),
                None => CliError::Validation(format!("{}: {msg}", path.display())),
            }
        })?;
        if *raw.schema_version.get_ref() != SCHEMA_VERSION {
            return Err(src.error_at(
                &raw.schema_version,
                "schema_version",
                format!("unsupported version {} (this build reads {SCHEMA_VERSION})", raw.schema_version.get_ref()),
            ));
        }
        let sector = match &raw.sector {
            Some(s) => Some(Sector::new(s.get_ref().m, s.get_ref().l).map_err(validation(&src, s.span(), "sector"))?),
            None => None,
        };
        let (system, restore) = build_system(&src, &raw.system, sector)?;

        let constraint = match &raw.constraint {
            Some(c) => Some(ConstraintSet::try_from(c.get_ref()).map_err(validation(&src, c.span(), "constraint"))?),
            None => None,
        };
        let oracle = raw.oracle.as_ref().map(|o| build_oracle(&src, o)).transpose()?;

        let mut dims: Vec<(&str, usize, Range<usize>)> = Vec::new();
        if let (Some(c), Some(set)) = (&raw.constraint, &constraint) {
            dims.push(("constraint", set.dim(), c.span()));
        }
        if let (Some(o), Some(f)) = (&raw.oracle, &oracle) {
            dims.push(("oracle", f.dim(), o.span()));
        }
        if let Some(d) = &raw.system.d {
            dims.push(("system.d", *d.get_ref(), d.span()));
        }
        let d = dims.first().map_or(1, |x| x.1);
        if let Some((field, dim, span)) = dims.iter().find(|x| x.1 != d) {
            return Err(src.error(
                span.clone(),
                field,
                format!("dimension {dim} disagrees with {} (dimension {d})", dims[0].0),
            ));
        }

        if let (Some(f), Some(sec), Some(o)) = (&oracle, sector, &raw.oracle) {
            let fs = f.sector();
            if fs.m < sec.m * (1.0 - SECTOR_SLACK) || fs.l > sec.l * (1.0 + SECTOR_SLACK) {
                return Err(src.error_at(
                    o,
                    "oracle",
                    format!("objective lies in S({}, {}), outside the declared S({}, {})", fs.m, fs.l, sec.m, sec.l),
                ));
            }
        }

        let c = &raw.certify;
        let defaults = BisectOptions::default();
        let bisect = BisectOptions {
            rho_lo: c.rho_lo.unwrap_or(defaults.rho_lo),
            rho_hi: c.rho_hi.unwrap_or(defaults.rho_hi),
            tol: c.tol.unwrap_or(defaults.tol),
            max_iter: c.max_iter.unwrap_or(defaults.max_iter),
        };
        if !(0.0 < bisect.rho_lo && bisect.rho_lo < bisect.rho_hi && bisect.rho_hi < 1.0 && bisect.tol > 0.0) {
            return Err(CliError::Validation(format!(
                "{}: [certify] needs 0 < rho_lo < rho_hi < 1 and tol > 0, got [{}, {}] with tol {}",
                path.display(),
                bisect.rho_lo,
                bisect.rho_hi,
                bisect.tol
            )));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        let certificate = match &c.certificate {
            Some(p) => {
                let full = base.join(p.get_ref());
                if !full.is_file() {
                    return Err(src.error_at(p, "certify.certificate", format!("file {} does not exist", full.display())));
                }
                Some(full)
            }
            None => None,
        };

        let r = &raw.run;
        let x0 = match (&r.x0, &r.x0_range) {
            (Some(x), None) => {
                let m = matrix(&src, x, "run.x0")?;
                if m.shape() != (system.n(), d) {
                    return Err(src.error_at(
                        x,
                        "run.x0",
                        format!("expected {} rows of {d} entries (one row per state), got {}x{}", system.n(), m.nrows(), m.ncols()),
                    ));
                }
                InitialState::Given(m)
            }
            (None, Some(range)) => {
                let [lo, hi] = *range.get_ref();
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(src.error_at(range, "run.x0_range", "needs finite lo < hi"));
                }
                InitialState::Uniform { lo, hi }
            }
            (None, None) => InitialState::Uniform { lo: 0.0, hi: 1.0 },
            (Some(x), Some(_)) => return Err(src.error_at(x, "run.x0", "give either x0 or x0_range, not both")),
        };

        Ok(Self {
            path: path.to_path_buf(),
            system,
            restore,
            branch: raw.system.branch,
            sector,
            ell: overrides.ell.or(c.ell),
            bisect,
            certificate,
            constraint,
            oracle,
            d,
            horizon: r.horizon.unwrap_or(100),
            seed: overrides.seed.or(r.seed).unwrap_or(0),
            x0,
            history: r.history,
            fixed_point_steps: r.fixed_point_steps.unwrap_or(20_000),
            out_dir: overrides
                .out
                .clone()
                .unwrap_or_else(|| base.join(raw.output.dir.as_deref().unwrap_or("out"))),
        })
    }

    pub fn lift(&self) -> usize {
        self.ell.unwrap_or(0)
    }

    pub fn require_sector(&self) -> Result<Sector, CliError> {
        self.sector
            .ok_or_else(|| CliError::Validation(format!("{}: this command needs a [sector] table", self.path.display())))
    }

    pub fn require_oracle(&self) -> Result<&dyn ObjectiveOracle, CliError> {
        self.oracle
            .as_deref()
            .ok_or_else(|| CliError::Validation(format!("{}: this command needs an [oracle] table", self.path.display())))
    }

    pub fn require_constraint(&self) -> Result<&ConstraintSet, CliError> {
        self.constraint
            .as_ref()
            .ok_or_else(|| CliError::Validation(format!("{}: this command needs a [constraint] table", self.path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
schema_version = 1

[system]
preset = "gradient-descent"
alpha = 0.1

[sector]
m = 1.0
L = 10.0
"#;

    fn parse(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::parse(Path::new("test.toml"), text, &Overrides::default())
    }

    fn message(e: CliError) -> String {
        match e {
            CliError::Validation(m) => m,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = parse(BASE).unwrap();
        assert_eq!(cfg.system.n(), 1);
        assert_eq!(cfg.ell, None);
        assert_eq!(cfg.d, 1);
        assert_eq!(cfg.horizon, 100);
        assert_eq!(cfg.x0, InitialState::Uniform { lo: 0.0, hi: 1.0 });
        assert_eq!(cfg.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn ragged_matrix_names_field_and_line() {
        let text = "schema_version = 1\n[system]\na = [[1.0, 0.0],\n     [0.5]]\nb = [1.0, 0.0]\nc = [0.0, 1.0]\n";
        let msg = message(parse(text).unwrap_err());
        assert!(msg.contains("system.a"), "{msg}");
        assert!(msg.contains("test.toml:3:"), "{msg}");
        assert!(msg.contains("row 2"), "{msg}");
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let msg = message(parse(&BASE.replace("schema_version = 1", "schema_version = 7")).unwrap_err());
        assert!(msg.contains("schema_version") && msg.contains(":2:"), "{msg}");
    }

    #[test]
    fn unknown_key_reports_a_position() {
        let msg = message(parse(&format!("{BASE}\n[run]\nhorizn = 5\n")).unwrap_err());
        assert!(msg.contains("horizn") && msg.contains("test.toml:"), "{msg}");
    }

    #[test]
    fn oracle_outside_the_sector_is_rejected() {
        let text = format!("{BASE}\n[oracle]\nkind = \"quadratic\"\nf = [[20.0]]\np = [0.0]\n");
        let msg = message(parse(&text).unwrap_err());
        assert!(msg.contains("outside the declared"), "{msg}");
    }

    #[test]
    fn dimensions_must_agree() {
        let text = format!(
            "{BASE}\n[oracle]\nkind = \"quadratic\"\nf = [[2.0, 0.0], [0.0, 3.0]]\np = [0.0, 0.0]\n\
             [constraint]\nkind = \"ball\"\ncenter = [0.0]\nradius = 1.0\n"
        );
        let msg = message(parse(&text).unwrap_err());
        assert!(msg.contains("disagrees"), "{msg}");
    }

    #[test]
    fn overrides_take_precedence() {
        let text = format!("{BASE}\n[certify]\nell = 3\n[run]\nseed = 4\n");
        let o = Overrides { ell: Some(5), seed: Some(9), out: Some(PathBuf::from("elsewhere")) };
        let cfg = RunConfig::parse(Path::new("cfg/test.toml"), &text, &o).unwrap();
        assert_eq!((cfg.ell, cfg.seed), (Some(5), 9));
        assert_eq!(cfg.out_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn full_form_is_reduced() {
        let text = "schema_version = 1\n[system]\nform = \"full\"\nd = 2\n\
                    a = [[1.0, 0.0], [0.0, 1.0]]\nb = [[-0.1, 0.0], [0.0, -0.1]]\nc = [[1.0, 0.0], [0.0, 1.0]]\n";
        let cfg = parse(text).unwrap();
        assert_eq!((cfg.system.n(), cfg.system.d()), (1, 2));
        assert_eq!(cfg.d, 2);
    }

    #[test]
    fn delayed_gradient_preset_restores_by_default() {
        let cfg = parse("schema_version = 1\n[system]\npreset = \"delayed-gradient\"\n").unwrap();
        assert_eq!(cfg.restore, Some(catalog::PRINTED_ROUNDING));
        assert_eq!(cfg.system.n(), 4);
    }
}
