//! Command-line front end.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::asymptotic::{decay_order_estimate, ghat_asymptotic_series, Chart, ChartKind};
use crate::conformal::{
    classify_integrability, conformal_scalar, integrability_probe, leading_order_of_r, Integrability,
};
use crate::mass::{
    default_quad_degree, default_radii, extrapolate_mass, mass_sweep, symbolic_mass_cancellation_for,
    AsymptoticMetric, MassFormula, Schwarzschild, SphereRule, SurfaceEnd,
};
use crate::obstruction::{
    c_theta, expansion_coefficients, integrated_identity, required_jet_order, script_r_series, series_json,
};
use crate::polyjet::{MultiPoly, TermJson};
use crate::surface::{umbilical_decompose, verify_rho_identities_symbolic, GraphSurface, SurfaceKind, SurfaceSpec};

/// Minimum `R^2` of a mass extrapolation for `mass` to succeed.
pub const FIT_THRESHOLD: f64 = 0.99;
/// Slack below the chart's expected order accepted by `decay`.
pub const DECAY_TOLERANCE: f64 = 0.1;
/// Numeric tolerance of the pointwise identity checks.
pub const NUMERIC_TOLERANCE: f64 = 1e-7;
/// Numeric tolerance of the conformal flatness check.
pub const FLATNESS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ChartArg {
    Y,
    Z,
}

impl ChartArg {
    pub fn kind(self) -> ChartKind {
        match self {
            ChartArg::Y => ChartKind::InvertedY,
            ChartArg::Z => ChartKind::CorrectedZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    Schwarzschild,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "umbilic", version, about = "Umbilical points, conformal inversion and the ADM mass of the inverted end")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check the curvature identities at the inversion point.
    Verify,
    /// Mass sweeps in radius and their extrapolation.
    Mass,
    /// Decay order of the metric near infinity.
    Decay,
    /// Dump the expansion of the conformal curvature bracket.
    Expand,
    /// Dump the cubic obstruction C(theta).
    Ctheta,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Options {
    /// Dimension of the hypersurface.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Jet truncation degree D.
    #[arg(long, global = true)]
    pub order: Option<u32>,
    #[arg(long, value_enum, global = true)]
    pub chart: Option<ChartArg>,
    /// Comma-separated radii.
    #[arg(long, global = true, value_delimiter = ',')]
    pub radii: Option<Vec<f64>>,
    #[arg(long = "quad-deg", global = true)]
    pub quad_deg: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, global = true, default_value = "json")]
    pub format: Format,
    /// One of flat, sphere, quartic_x1, cubic_x1.
    #[arg(long, global = true, conflicts_with_all = ["poly", "fixture"])]
    pub builtin: Option<String>,
    /// Surface file or polynomial term list.
    #[arg(long, global = true, conflicts_with = "fixture")]
    pub poly: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub fixture: Option<Fixture>,
    /// Mass parameter of the fixture.
    #[arg(long, global = true, default_value_t = 1.0)]
    pub m: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

fn usage<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Usage(e.to_string())
}

/// Exit code and rendered report.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub report: String,
}

fn load_surface(o: &Options) -> Result<GraphSurface, CliError> {
    if let Some(name) = &o.builtin {
        let n = o.n.ok_or_else(|| usage("--builtin needs --n"))?;
        check_n(n)?;
        return GraphSurface::builtin(name, n).map_err(usage);
    }
    let path = o
        .poly
        .as_ref()
        .ok_or_else(|| usage("give a surface with --builtin or --poly"))?;
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let surface = if value.is_array() {
        let terms: Vec<TermJson> = serde_json::from_value(value).map_err(usage)?;
        let n = match (o.n, terms.first()) {
            (Some(n), _) => n,
            (None, Some(t)) => t.exp.len(),
            (None, None) => return Err(usage("empty polynomial needs --n")),
        };
        check_n(n)?;
        // A trailing parameter slot (the H convention) must carry degree 0.
        let mut spatial = Vec::with_capacity(terms.len());
        for t in terms {
            if t.exp.len() == n + 1 && t.exp[n] == 0 {
                spatial.push(TermJson {
                    exp: t.exp[..n].to_vec(),
                    ..t
                });
            } else {
                spatial.push(t);
            }
        }
        let p = MultiPoly::from_json_terms(n, 0, &spatial).map_err(usage)?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        GraphSurface::polynomial(&name, p).map_err(usage)?
    } else {
        let spec: SurfaceSpec = serde_json::from_value(value).map_err(usage)?;
        if let Some(n) = o.n {
            if n != spec.n {
                return Err(usage(format!("--n {n} disagrees with n = {} in the surface file", spec.n)));
            }
        }
        check_n(spec.n)?;
        spec.build().map_err(usage)?
    };
    Ok(surface)
}

fn check_n(n: usize) -> Result<(), CliError> {
    if n < 2 {
        return Err(usage(format!("--n must be at least 2, got {n}")));
    }
    Ok(())
}

fn surface_json(s: &GraphSurface) -> Value {
    let kind = match s.kind() {
        SurfaceKind::Flat => "flat",
        SurfaceKind::Sphere { .. } => "sphere",
        SurfaceKind::Polynomial(_) => "polynomial",
        SurfaceKind::BlackBox => "black_box",
    };
    let mut v = json!({ "name": s.name, "n": s.n(), "kind": kind, "numeric": s.is_numeric() });
    match s.kind() {
        SurfaceKind::Sphere { radius } => v["radius"] = json!(radius.to_string()),
        SurfaceKind::Polynomial(p) => v["poly"] = json!(p.to_string()),
        _ => {}
    }
    v
}

fn render(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
    s.push('\n');
    s
}

fn radii_or_default(o: &Options) -> Result<Vec<f64>, CliError> {
    let r = o.radii.clone().unwrap_or_else(default_radii);
    if r.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(usage("radii must be positive and finite"));
    }
    Ok(r)
}

fn sample_points(n: usize, count: usize, radius: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: f64 = v.iter().map(|a| a * a).sum();
        if r2 <= 1.0 && r2 > 1e-4 {
            out.push(v.into_iter().map(|a| a * radius).collect());
        }
    }
    out
}

struct Checks {
    rows: Vec<Value>,
    ok: bool,
}

impl Checks {
    fn push(&mut self, name: &str, passed: bool, detail: Value) {
        self.ok &= passed;
        self.rows.push(json!({ "name": name, "passed": passed, "detail": detail }));
    }
}

fn cmd_verify(o: &Options) -> Result<Outcome, CliError> {
    let s = load_surface(o)?;
    let n = s.n();
    let mut checks = Checks { rows: Vec::new(), ok: true };
    let mut report = json!({ "command": "verify", "surface": surface_json(&s), "seed": o.seed });

    // Pointwise identities for rho, numerically.
    let pts = sample_points(n, 20, 0.5, o.seed);
    let mut worst = 0.0f64;
    for x in &pts {
        let r = s.verify_rho_identities(x).map_err(usage)?;
        worst = worst.max(r.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    }
    checks.push(
        "rho_identities_numeric",
        worst < NUMERIC_TOLERANCE,
        json!({ "points": pts.len(), "max_residual": worst, "tolerance": NUMERIC_TOLERANCE }),
    );

    if s.has_jet() {
        let d = o.order.unwrap_or(required_jet_order(2).max(6));
        if d < required_jet_order(2) {
            return Err(usage(format!("--order must be at least {}", required_jet_order(2))));
        }
        let jet = s.jet(d, 0).map_err(usage)?;
        match umbilical_decompose(&jet) {
            Err(e) => checks.push("umbilical", false, json!(e.to_string())),
            Ok(u) => {
                checks.push("umbilical", true, json!({ "H": u.h.to_string(), "A3": u.part(3).to_string() }));
                let sym = verify_rho_identities_symbolic(&jet).map_err(usage)?;
                checks.push("rho_identities_symbolic", sym.all_zero(), json!({ "order": d }));
                let exp = expansion_coefficients(&jet).map_err(usage)?;
                checks.push("order0_zero", exp.c0.is_zero(), series_json(&exp.c0));
                checks.push("order1_zero", exp.c1.is_zero(), series_json(&exp.c1));
                checks.push("order2_equals_c_theta", exp.c2_matches_c, series_json(&exp.c2));
                checks.push(
                    "integral_identity",
                    exp.integral_lhs == exp.integral_rhs,
                    json!({ "lhs": exp.integral_lhs.to_string(), "rhs": exp.integral_rhs.to_string(), "unit": "|S^{n-1}|" }),
                );
                if let Some(d6) = &exp.dim6 {
                    checks.push(
                        "dim6_residual_forces_divisibility",
                        !d6.residual_zero || d6.divisible,
                        json!({
                            "residual_zero": d6.residual_zero,
                            "divisible": d6.divisible,
                            "square_divisible": d6.square_divisible,
                            "harmonic_square_constant": d6.harmonic_square_constant,
                        }),
                    );
                }
                report["expansion"] = exp.to_json();

                let w = d as i32 - 2;
                let lead = leading_order_of_r(&jet, w).map_err(usage)?;
                let verdict = classify_integrability(n, &lead);
                let mut integ = json!({
                    "leading_order": if lead.is_zero { Value::Null } else { json!(lead.k) },
                    "zero_through_order": if lead.is_zero { json!(lead.order) } else { Value::Null },
                    "verdict": verdict.as_str(),
                    "c_theta_zero": exp.c_theta.is_zero(),
                });
                if verdict != Integrability::Inconclusive {
                    let radii: Vec<f64> = (0..5).map(|i| 10f64.powf(-1.0 - 0.5 * i as f64)).collect();
                    let probe = integrability_probe(&s, &radii, 8).map_err(usage)?;
                    let agrees = probe.convergent == (verdict == Integrability::Integrable);
                    integ["probe"] = serde_json::to_value(&probe).expect("serializable");
                    checks.push(
                        "integrability_probe_agrees",
                        agrees,
                        json!({ "exponent": probe.exponent, "convergent": probe.convergent }),
                    );
                }
                report["integrability"] = integ;

                if matches!(s.kind(), SurfaceKind::Sphere { .. } | SurfaceKind::Flat) {
                    let sym_zero = lead.is_zero;
                    let mut worst = 0.0f64;
                    for x in &pts {
                        worst = worst.max(conformal_scalar(&s, x).map_err(usage)?.abs());
                    }
                    checks.push(
                        "conformally_flat",
                        sym_zero && worst < FLATNESS_TOLERANCE,
                        json!({ "symbolic_zero_through": w, "max_numeric": worst }),
                    );
                }
            }
        }
    }
    report["checks"] = Value::Array(checks.rows.clone());
    report["passed"] = json!(checks.ok);
    let text = match o.format {
        Format::Json => render(&report),
        Format::Csv => {
            let mut t = String::from("check,passed\n");
            for r in &checks.rows {
                let _ = writeln!(t, "{},{}", r["name"].as_str().unwrap_or(""), r["passed"]);
            }
            t
        }
    };
    Ok(Outcome {
        code: if checks.ok { 0 } else { 1 },
        report: text,
    })
}

fn sweep_json(
    metric: &dyn AsymptoticMetric,
    formula: MassFormula,
    radii: &[f64],
    rule: &SphereRule,
) -> Result<(Value, Vec<(f64, f64)>, Option<crate::mass::Extrapolation>), CliError> {
    let est = mass_sweep(metric, formula, radii, rule).map_err(usage)?;
    let ex = extrapolate_mass(&est).ok();
    let pairs = est.iter().map(|e| (e.radius, e.value)).collect();
    Ok((
        json!({
            "formula": formula.as_str(),
            "estimates": est,
            "extrapolation": ex.map(|e| extrapolation_json(&e)),
        }),
        pairs,
        ex,
    ))
}

fn extrapolation_json(e: &crate::mass::Extrapolation) -> Value {
    json!({ "m_inf": e.m_inf, "decay_exponent": e.decay_exponent, "amplitude": e.amplitude, "fit_quality": e.fit_quality })
}

fn cmd_mass(o: &Options) -> Result<Outcome, CliError> {
    let radii = radii_or_default(o)?;
    let surface;
    let end;
    let fixture;
    let (metric, surface_value, chart_label, primary, cancellation): (&dyn AsymptoticMetric, Value, String, MassFormula, Value) =
        if let Some(Fixture::Schwarzschild) = o.fixture {
            let n = o.n.unwrap_or(3);
            if n < 3 {
                return Err(usage("the Schwarzschild fixture needs n >= 3"));
            }
            if !o.m.is_finite() {
                return Err(usage("--m must be finite"));
            }
            fixture = Schwarzschild { n, m: o.m };
            (&fixture, json!({ "fixture": "schwarzschild", "n": n, "m": o.m }), "schwarzschild".into(), MassFormula::StandardAdm, Value::Null)
        } else {
            surface = load_surface(o)?;
            let kind = o.chart.unwrap_or(ChartArg::Y).kind();
            end = SurfaceEnd::new(&surface, kind).map_err(usage)?;
            let cancellation = if surface.has_jet() {
                let jet = surface.jet(10, 0).map_err(usage)?;
                serde_json::to_value(symbolic_mass_cancellation_for(&jet, kind).map_err(usage)?).expect("serializable")
            } else {
                Value::Null
            };
            let primary = if kind == ChartKind::CorrectedZ {
                MassFormula::LeeParker
            } else {
                MassFormula::StandardAdm
            };
            if radii.iter().any(|&r| r <= end.chart.singular_radius()) {
                return Err(usage("radii must exceed the singular radius of the chart"));
            }
            (&end, surface_json(&surface), kind.as_str().into(), primary, cancellation)
        };
    let n = metric.dim();
    let degree = o.quad_deg.unwrap_or_else(|| default_quad_degree(n));
    let rule = SphereRule::new(n, degree);
    let (std_json, std_pairs, std_ex) = sweep_json(metric, MassFormula::StandardAdm, &radii, &rule)?;
    let (lp_json, lp_pairs, lp_ex) = sweep_json(metric, MassFormula::LeeParker, &radii, &rule)?;
    let ex = if primary == MassFormula::LeeParker { lp_ex } else { std_ex };
    let agreement = std_pairs
        .iter()
        .zip(&lp_pairs)
        .map(|(a, b)| json!({ "radius": a.0, "difference": a.1 - b.1 }))
        .collect::<Vec<_>>();
    let fit_quality = ex.map(|e| e.fit_quality);
    let mut report = json!({
        "command": "mass",
        "surface": surface_value,
        "chart": chart_label,
        "formula": primary.as_str(),
        "quadrature": { "degree": degree, "nodes": rule.len() },
        "sweeps": [std_json, lp_json],
        "formula_agreement": agreement,
        "m_inf": ex.map(|e| e.m_inf),
        "decay_exponent": ex.and_then(|e| e.decay_exponent),
        "fit_quality": fit_quality,
        "symbolic_cancellation": cancellation,
    });
    if o.fixture.is_some() {
        let last = std_pairs.len() - 1;
        report["calibration"] = json!({
            "m": o.m,
            "radius": std_pairs[last].0,
            "standard_adm": std_pairs[last].1,
            "lee_parker": lp_pairs[last].1,
            "ratio_lee_parker_over_standard": lp_pairs[last].1 / std_pairs[last].1,
        });
    }
    let ok = fit_quality.is_some_and(|q| q >= FIT_THRESHOLD);
    let text = match o.format {
        Format::Json => render(&report),
        Format::Csv => {
            let mut t = String::from("radius,formula,mass\n");
            for (f, pairs) in [("standard_adm", &std_pairs), ("lee_parker", &lp_pairs)] {
                for (r, v) in pairs.iter() {
                    let _ = writeln!(t, "{r},{f},{v}");
                }
            }
            t
        }
    };
    Ok(Outcome {
        code: if ok { 0 } else { 1 },
        report: text,
    })
}

fn cmd_decay(o: &Options) -> Result<Outcome, CliError> {
    let s = load_surface(o)?;
    let kind = o.chart.unwrap_or(ChartArg::Y).kind();
    let chart = Chart::for_surface(&s, kind).map_err(usage)?;
    let radii = radii_or_default(o)?;
    let fit = decay_order_estimate(&s, &chart, &radii, o.seed).map_err(usage)?;
    let expected = kind.expected_order();
    let ok = fit.tau >= expected - DECAY_TOLERANCE && fit.r_squared >= FIT_THRESHOLD;
    let mut fit_json = serde_json::to_value(&fit).expect("serializable");
    fit_json["tau"] = fit.tau_json();
    for key in ["slope_h", "slope_dh", "slope_ddh"] {
        if fit_json[key].is_null() {
            fit_json[key] = json!("-inf");
        }
    }
    let report = json!({
        "command": "decay",
        "surface": surface_json(&s),
        "chart": kind.as_str(),
        "H": chart.h,
        "expected_order": expected,
        "fit": fit_json,
        "passed": ok,
    });
    let text = match o.format {
        Format::Json => render(&report),
        Format::Csv => {
            let mut t = String::from("radius,max_h,max_dh,max_ddh\n");
            for i in 0..fit.radii.len() {
                let _ = writeln!(t, "{},{},{},{}", fit.radii[i], fit.max_h[i], fit.max_dh[i], fit.max_ddh[i]);
            }
            t
        }
    };
    Ok(Outcome {
        code: if ok { 0 } else { 1 },
        report: text,
    })
}

fn series_csv(v: &Value) -> String {
    let mut t = String::from("radial,total_order,term\n");
    if let Some(terms) = v["terms"].as_array() {
        for term in terms {
            let _ = writeln!(t, "{},{},\"{}\"", term["radial"], term["total_order"], term["text"].as_str().unwrap_or(""));
        }
    }
    t
}

fn cmd_expand(o: &Options) -> Result<Outcome, CliError> {
    let s = load_surface(o)?;
    let d = o.order.unwrap_or(required_jet_order(2).max(6));
    if d < required_jet_order(0) {
        return Err(usage(format!("--order must be at least {}", required_jet_order(0))));
    }
    let w = d as i32 - 2;
    let jet = s.jet(d, 0).map_err(usage)?;
    let series = script_r_series(&jet, w).map_err(usage)?;
    let sj = series_json(&series);
    let mut report = json!({ "command": "expand", "surface": surface_json(&s), "order": d, "series": sj });
    if let Some(c) = o.chart {
        let ser = ghat_asymptotic_series(&jet, c.kind(), 6).map_err(usage)?;
        report["ghat_series"] = ser.to_json();
    }
    let text = match o.format {
        Format::Json => render(&report),
        Format::Csv => series_csv(&report["series"]),
    };
    Ok(Outcome { code: 0, report: text })
}

fn cmd_ctheta(o: &Options) -> Result<Outcome, CliError> {
    let s = load_surface(o)?;
    let jet = s.jet(3, 0).map_err(usage)?;
    let u = umbilical_decompose(&jet).map_err(usage)?;
    let a3 = u.part(3);
    let c = c_theta(&a3).map_err(usage)?;
    let (lhs, rhs) = integrated_identity(&a3).map_err(usage)?;
    let report = json!({
        "command": "ctheta",
        "surface": surface_json(&s),
        "A3": a3.to_string(),
        "c_theta": series_json(&c),
        "c_theta_zero": c.is_zero(),
        "integral": { "lhs": lhs.to_string(), "rhs": rhs.to_string(), "unit": "|S^{n-1}|" },
    });
    let text = match o.format {
        Format::Json => render(&report),
        Format::Csv => series_csv(&report["c_theta"]),
    };
    Ok(Outcome { code: 0, report: text })
}

pub fn execute(cli: &Cli) -> Result<Outcome, CliError> {
    let o = &cli.opts;
    if o.fixture.is_some() && !matches!(cli.command, Command::Mass) {
        return Err(usage("--fixture is only used by the mass command"));
    }
    match cli.command {
        Command::Verify => cmd_verify(o),
        Command::Mass => cmd_mass(o),
        Command::Decay => cmd_decay(o),
        Command::Expand => cmd_expand(o),
        Command::Ctheta => cmd_ctheta(o),
    }
}

/// Caps rayon's global pool at `UMBILIC_THREADS` when set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("UMBILIC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| usage(format!("UMBILIC_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(usage("UMBILIC_THREADS must be positive"));
        }
        // A pool configured earlier in the process stays in place.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args`, runs the command and writes the report; returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return 2;
    }
    match execute(&cli) {
        Ok(out) => {
            let written = match &cli.opts.out {
                Some(path) => std::fs::write(path, &out.report),
                None => {
                    print!("{}", out.report);
                    Ok(())
                }
            };
            if let Err(e) = written {
                eprintln!("error: {e}");
                return 2;
            }
            out.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
