use std::path::Path;

use kcl_core::constructor::{build_profile_ode, build_profile_quadrature, corollary_profile, Diagnostics};
use kcl_core::geometry::REGISTRY;
use kcl_core::verifier::{self, BoundParams, CheckResult, VerificationReport};
use kcl_core::{Error, GraphSolution, Method, ModelManifold, ModelSpec, Variant};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{CheckKind, MethodChoice, RunConfig, SweepParameter};
use crate::output::{fmt_f64, to_csv, to_json, write_file, Cell};

pub const PROFILE_FILE: &str = "profile.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.csv";

pub const PROFILE_HEADER: [&str; 7] = ["r", "u", "u_prime", "W", "phi", "t", "u_times_exp_minus_psi"];

pub const SWEEP_HEADER: [&str; 10] = [
    "parameter",
    "value",
    "r0",
    "delta_psi",
    "max_weighted_height",
    "bound_sharp",
    "bound_theorem_a",
    "margin_sharp",
    "margin_theorem_a",
    "error",
];

/// Geodesic radii of the volume lemma, as fractions of the meridian length.
const LEMMA_FRACTIONS: [f64; 3] = [0.15, 0.3, 0.6];

/// What a command printed and how the process should exit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            code: 0,
            stdout,
            stderr: String::new(),
        }
    }
}

/// Failure with its stable exit code: 2 for configuration, 3 for numerics.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let config = e.is_config_error() || matches!(e, Error::GridTooCoarse(_));
        CliError {
            code: if config { 2 } else { 3 },
            kind: error_kind(&e),
            message: e.to_string(),
        }
    }
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            kind: "config",
            message: message.into(),
        }
    }

    fn io(e: std::io::Error, path: &Path) -> Self {
        CliError {
            code: 2,
            kind: "io",
            message: format!("{}: {e}", path.display()),
        }
    }

    pub fn into_outcome(self) -> Outcome {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: &'a str,
            exit_code: i32,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        let stderr = to_json(&Wrapper {
            error: Body {
                kind: self.kind,
                message: &self.message,
                exit_code: self.code,
            },
        });
        Outcome {
            code: self.code,
            stdout: String::new(),
            stderr,
        }
    }
}

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Expr(_) => "expression",
        Error::Config(_) => "config",
        Error::UnknownModel(_) => "unknown_model",
        Error::ModelInvariant { .. } => "model_invariant",
        Error::OutOfRange { .. } => "out_of_range",
        Error::SignConvention { .. } => "sign_convention",
        Error::TargetOutOfRange { .. } => "target_out_of_range",
        Error::NonMonotoneRatio { .. } => "non_monotone_ratio",
        Error::QuadratureNonConvergence { .. } => "quadrature_non_convergence",
        Error::DegenerateDenominator { .. } => "degenerate_denominator",
        Error::StepUnderflow { .. } => "step_underflow",
        Error::Fold { .. } => "fold",
        Error::MissingTrace => "missing_trace",
        Error::RadiusExceedsProfile { .. } => "radius_exceeds_profile",
        Error::GridTooCoarse(_) => "grid_too_coarse",
        Error::Numerical(_) => "numerical",
    }
}

pub fn cmd_models(json: bool) -> Outcome {
    if json {
        #[derive(Serialize)]
        struct Param {
            name: &'static str,
            description: &'static str,
        }
        #[derive(Serialize)]
        struct Entry {
            name: &'static str,
            description: &'static str,
            params: Vec<Param>,
        }
        let entries: Vec<Entry> = REGISTRY
            .iter()
            .map(|e| Entry {
                name: e.name,
                description: e.description,
                params: e.params.iter().map(|&(name, description)| Param { name, description }).collect(),
            })
            .collect();
        return Outcome::ok(to_json(&entries));
    }
    let mut out = String::new();
    for entry in &REGISTRY {
        out.push_str(&format!("{}\n    {}\n", entry.name, entry.description));
        for (k, v) in entry.params {
            out.push_str(&format!("    {k:<10} {v}\n"));
        }
    }
    Outcome::ok(out)
}

fn method_of(choice: MethodChoice) -> Method {
    match choice {
        MethodChoice::Quadrature => Method::Quadrature,
        MethodChoice::Ode => Method::Ode,
        MethodChoice::Corollary => Method::Corollary,
    }
}

/// Variant actually constructed: corollary models fix their own.
fn effective_variant(cfg: &RunConfig, method: Method) -> Variant {
    match (method, cfg.corollary_parts()) {
        (Method::Corollary, Some((_, _, v))) => v,
        _ => cfg.variant,
    }
}

pub fn build(cfg: &RunConfig, method: Method) -> Result<GraphSolution, Error> {
    let variant = effective_variant(cfg, method);
    match method {
        Method::Quadrature => {
            let m = ModelManifold::new(&cfg.model)?;
            build_profile_quadrature(&m, cfg.h0, variant, cfg.grid_size, &cfg.quadrature)
        }
        Method::Ode => {
            let m = ModelManifold::new(&cfg.model)?;
            build_profile_ode(&m, cfg.h0, variant, cfg.grid_size, &cfg.ode, &cfg.quadrature)
        }
        Method::Corollary => {
            let (base, c, _) = cfg
                .corollary_parts()
                .ok_or_else(|| Error::Config("method `corollary` needs a corollary model".into()))?;
            corollary_profile(base, c, cfg.h0, variant, cfg.grid_size, &cfg.quadrature)
        }
    }
}

/// Independent build used for cross-validation.
fn companion_method(method: Method) -> Method {
    match method {
        Method::Quadrature => Method::Ode,
        Method::Ode | Method::Corollary => Method::Quadrature,
    }
}

fn companion(cfg: &RunConfig, primary: &GraphSolution) -> Result<GraphSolution, Error> {
    let method = companion_method(primary.method);
    let mut cfg = cfg.clone();
    cfg.variant = primary.variant();
    build(&cfg, method)
}

#[derive(Serialize)]
struct Summary<'a> {
    model: String,
    model_spec: &'a ModelSpec,
    variant: Variant,
    method: Method,
    #[serde(rename = "H0")]
    h0: f64,
    r0: f64,
    grid_size: usize,
    max_height: f64,
    max_weighted_height: f64,
    agreement_method: Method,
    method_agreement: Option<f64>,
    agreement_note: Option<String>,
    diagnostics: &'a Diagnostics,
}

pub fn profile_csv(sol: &GraphSolution) -> Result<String, Error> {
    let p = &sol.profile;
    let weighted = p.weighted_height(&sol.model)?;
    let rows: Vec<Vec<Cell>> = (0..p.len())
        .map(|i| {
            [p.r[i], p.u[i], p.u_prime[i], p.w[i], p.phi[i], p.t[i], weighted[i]]
                .into_iter()
                .map(Cell::Num)
                .collect()
        })
        .collect();
    Ok(to_csv(&PROFILE_HEADER, &rows))
}

fn save(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    write_file(dir, name, contents).map_err(|e| CliError::io(e, &dir.join(name)))
}

pub fn cmd_construct(cfg: &RunConfig, json: bool, out: &Path) -> Result<Outcome, CliError> {
    let primary = build(cfg, method_of(cfg.method))?;
    let (agreement, note) = match companion(cfg, &primary) {
        Ok(other) => match verifier::method_agreement(&primary, &other) {
            Ok(sup) => (Some(sup), None),
            Err(_) => (
                None,
                Some(format!(
                    "boundary radii differ: r0 = {} against {}",
                    fmt_f64(primary.r0),
                    fmt_f64(other.r0)
                )),
            ),
        },
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = Summary {
        model: cfg.model.to_string(),
        model_spec: &cfg.model,
        variant: primary.variant(),
        method: primary.method,
        h0: primary.h0,
        r0: primary.r0,
        grid_size: primary.profile.len(),
        max_height: primary.profile.max_height(),
        max_weighted_height: primary.max_weighted_height()?,
        agreement_method: companion_method(primary.method),
        method_agreement: agreement,
        agreement_note: note,
        diagnostics: &primary.diagnostics,
    };
    let summary_json = to_json(&summary);
    save(out, PROFILE_FILE, &profile_csv(&primary)?)?;
    save(out, SUMMARY_FILE, &summary_json)?;
    if json {
        return Ok(Outcome::ok(summary_json));
    }
    let mut text = String::new();
    let mut line = |k: &str, v: String| text.push_str(&format!("{k:<22} {v}\n"));
    line("model", summary.model.clone());
    line("variant", summary.variant.name().to_string());
    line("method", summary.method.name().to_string());
    line("H0", fmt_f64(summary.h0));
    line("r0", fmt_f64(summary.r0));
    line("max_height", fmt_f64(summary.max_height));
    line("max_weighted_height", fmt_f64(summary.max_weighted_height));
    line(
        "method_agreement",
        agreement.map(fmt_f64).unwrap_or_else(|| "n/a".to_string()),
    );
    line("profile", out.join(PROFILE_FILE).display().to_string());
    Ok(Outcome::ok(text))
}

#[derive(Serialize)]
pub struct ReportDocument {
    pub model: String,
    pub model_spec: ModelSpec,
    pub variant: Variant,
    pub method: Method,
    #[serde(rename = "H0")]
    pub h0: f64,
    pub r0: f64,
    pub grid_size: usize,
    pub all_passed: bool,
    pub checks: Vec<CheckResult>,
}

fn default_growth_radii(m: &ModelManifold) -> Vec<f64> {
    let (lo, hi) = if m.domain_end() > 20.0 {
        (5.0, 20.0)
    } else {
        (0.05 * m.domain_end(), 0.5 * m.domain_end())
    };
    (0..8).map(|i| lo * (hi / lo).powf(i as f64 / 7.0)).collect()
}

/// Runs the requested checks in the requested order.
pub fn run_checks(cfg: &RunConfig) -> Result<(GraphSolution, VerificationReport), Error> {
    let primary = build(cfg, method_of(cfg.method))?;
    let checks = cfg.checks();
    let need_trace = checks.iter().any(|c| c.needs_trace());
    let traced = if primary.trace.is_some() || !need_trace {
        None
    } else {
        let mut ode_cfg = cfg.clone();
        ode_cfg.variant = primary.variant();
        Some(build(&ode_cfg, Method::Ode)?)
    };
    let traced = traced.as_ref().unwrap_or(&primary);
    let tol = &cfg.tolerances;
    let q = &cfg.quadrature;
    let k = cfg.weight_exponent.unwrap_or(primary.weight_exponent());
    let mut report = VerificationReport::default();
    for kind in checks {
        match kind {
            CheckKind::CurvatureResidual => report.push(verifier::curvature_residual_check(&primary, tol)?),
            CheckKind::FluxIdentity => report.push(verifier::flux_identity_check(&primary, tol, q)?),
            CheckKind::HeightBounds => {
                let bp = BoundParams::from_solution(&primary, cfg.bounds.c_relax, cfg.bounds.g)?;
                report.extend(verifier::height_bound_check(&primary, &bp, tol, q)?);
            }
            CheckKind::AngleFunction => report.extend(verifier::angle_function_check(&primary, tol)?),
            CheckKind::LaplacianIdentity => {
                for &c in &cfg.laplacian_exponents {
                    report.push(verifier::laplacian_identity_check(traced, c, tol)?);
                }
            }
            CheckKind::Salavessa => {
                let radii: Vec<f64> = cfg.salavessa_fractions.iter().map(|f| f * primary.r0).collect();
                report.extend(verifier::salavessa_check(&primary.model, &primary, &radii, k, tol, q)?);
            }
            CheckKind::VolumeLemma => {
                let length = traced.trace.as_ref().map_or(0.0, |t| t.length());
                let radii = cfg
                    .volume_lemma
                    .radii
                    .clone()
                    .unwrap_or_else(|| LEMMA_FRACTIONS.iter().map(|f| f * length).collect());
                for &r in &radii {
                    for &delta in &cfg.volume_lemma.deltas {
                        for &d in &cfg.volume_lemma.d_exponents {
                            for c in verifier::volume_lemma_check(traced, r, delta, d, q, tol)? {
                                if report.get(&c.name).is_none() {
                                    report.push(c);
                                }
                            }
                        }
                    }
                }
            }
            CheckKind::VolumeGrowth => {
                let radii = cfg
                    .growth_radii
                    .clone()
                    .unwrap_or_else(|| default_growth_radii(&primary.model));
                report.push(verifier::volume_growth_check(&primary.model, k, &radii, q, tol)?);
            }
            CheckKind::MethodAgreement => {
                let other = companion(cfg, &primary)?;
                let check = match verifier::method_agreement_check(&primary, &other, tol) {
                    Ok(c) => c,
                    Err(_) => {
                        let gap = (primary.r0 - other.r0).abs();
                        CheckResult::residual("method_agreement", gap, tol.agreement)
                            .with_detail(format!(
                                "boundary radii of the {} and {} builds differ",
                                primary.method.name(),
                                other.method.name()
                            ))
                    }
                };
                report.push(check);
            }
            CheckKind::BakryEmery => report.push(verifier::bakry_emery_diagnostic(&primary)?),
        }
    }
    report.mark_expected_failures(&cfg.expected_fail);
    Ok((primary, report))
}

pub fn report_table(report: &VerificationReport) -> String {
    let mut out = format!("{:<56} {:<14} {:>24}\n", "check", "status", "margin");
    for c in &report.checks {
        out.push_str(&format!("{:<56} {:<14} {:>24}\n", c.name, c.status.name(), fmt_f64(c.margin)));
    }
    out
}

pub fn cmd_verify(cfg: &RunConfig, json: bool, out: &Path) -> Result<Outcome, CliError> {
    let (primary, report) = run_checks(cfg)?;
    let all_passed = report.all_passed();
    let doc = ReportDocument {
        model: cfg.model.to_string(),
        model_spec: cfg.model.clone(),
        variant: primary.variant(),
        method: primary.method,
        h0: primary.h0,
        r0: primary.r0,
        grid_size: primary.profile.len(),
        all_passed,
        checks: report.checks.clone(),
    };
    let text = to_json(&doc);
    save(out, REPORT_FILE, &text)?;
    let stdout = if json { text } else { report_table(&report) };
    Ok(Outcome {
        code: if all_passed { 0 } else { 1 },
        stdout,
        stderr: String::new(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub parameter: &'static str,
    pub value: f64,
    pub r0: Option<f64>,
    pub delta_psi: Option<f64>,
    pub max_weighted_height: Option<f64>,
    pub bound_sharp: Option<f64>,
    pub bound_theorem_a: Option<f64>,
    pub margin_sharp: Option<f64>,
    pub margin_theorem_a: Option<f64>,
    pub error: Option<String>,
}

struct RowValues {
    r0: f64,
    delta_psi: f64,
    height: f64,
    sharp: f64,
    theorem_a: f64,
}

fn sweep_config(cfg: &RunConfig, parameter: SweepParameter, value: f64) -> RunConfig {
    let mut cfg = cfg.clone();
    match parameter {
        SweepParameter::H0 => cfg.h0 = value,
        SweepParameter::C => {
            cfg.model = match cfg.model {
                ModelSpec::CorollaryWeighted { base, .. } => ModelSpec::CorollaryWeighted { base, c: value },
                ModelSpec::CorollaryUnweighted { base, .. } => ModelSpec::CorollaryUnweighted { base, c: value },
                other => other,
            }
        }
    }
    cfg
}

fn sweep_values(cfg: &RunConfig) -> Result<RowValues, Error> {
    cfg.validate()?;
    let sol = build(cfg, method_of(cfg.method))?;
    let bp = BoundParams::from_solution(&sol, None, None)?;
    let osc = bp.oscillation();
    Ok(RowValues {
        r0: sol.r0,
        delta_psi: osc,
        height: sol.max_weighted_height()?,
        sharp: osc.exp() * verifier::integral_height_bound(&sol, &cfg.quadrature)?,
        theorem_a: (2.0 * osc).exp() / sol.h0.abs(),
    })
}

/// Thread cap from `KCL_THREADS`; `None` means rayon's default.
pub fn thread_cap(var: Option<&str>) -> Result<Option<usize>, CliError> {
    match var {
        None => Ok(None),
        Some(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::config(format!("KCL_THREADS = `{s}` must be a positive integer"))),
        },
    }
}

pub fn sweep_rows(cfg: &RunConfig, threads: Option<usize>) -> Result<Vec<SweepRow>, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::config("config has no `sweep` section"))?;
    if sweep.values.is_empty() {
        return Err(CliError::config("sweep range is empty"));
    }
    let parameter = sweep.parameter;
    let row = |&value: &f64| -> SweepRow {
        let result = sweep_values(&sweep_config(cfg, parameter, value));
        let mut row = SweepRow {
            parameter: parameter.name(),
            value,
            r0: None,
            delta_psi: None,
            max_weighted_height: None,
            bound_sharp: None,
            bound_theorem_a: None,
            margin_sharp: None,
            margin_theorem_a: None,
            error: None,
        };
        match result {
            Ok(v) => {
                row.r0 = Some(v.r0);
                row.delta_psi = Some(v.delta_psi);
                row.max_weighted_height = Some(v.height);
                row.bound_sharp = Some(v.sharp);
                row.bound_theorem_a = Some(v.theorem_a);
                row.margin_sharp = Some(v.sharp - v.height);
                row.margin_theorem_a = Some(v.theorem_a - v.height);
            }
            Err(e) => row.error = Some(format!("{}: {e}", error_kind(&e))),
        }
        row
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::config(format!("cannot start the sweep thread pool: {e}")))?;
    // collect keeps parameter order whatever the completion order
    Ok(pool.install(|| sweep.values.par_iter().map(row).collect()))
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let num = |x: Option<f64>| x.map_or(Cell::Empty, Cell::Num);
    let cells: Vec<Vec<Cell>> = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Text(r.parameter.to_string()),
                Cell::Num(r.value),
                num(r.r0),
                num(r.delta_psi),
                num(r.max_weighted_height),
                num(r.bound_sharp),
                num(r.bound_theorem_a),
                num(r.margin_sharp),
                num(r.margin_theorem_a),
                r.error.clone().map_or(Cell::Empty, Cell::Text),
            ]
        })
        .collect();
    to_csv(&SWEEP_HEADER, &cells)
}

pub fn cmd_sweep(cfg: &RunConfig, json: bool, out: &Path, threads: Option<usize>) -> Result<Outcome, CliError> {
    let rows = sweep_rows(cfg, threads)?;
    let csv = sweep_csv(&rows);
    save(out, SWEEP_FILE, &csv)?;
    Ok(Outcome::ok(if json { to_json(&rows) } else { csv }))
}
