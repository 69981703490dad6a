#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bour_core::bour::{default_t_range, sample_fundamental_forms, sample_mesh, Mesh};
use bour_core::cusps::{classify_edge, classify_edge_via_profile, classify_plane_cusp, PlaneCurveJet, DEFAULT_CUSP_TOL};
use bour_core::deform::{deformation_family, invariant_map, invert_invariants, isomers, jacobian_det, DeformError};
use bour_core::export::{fundamental_form_csv, write_family, write_obj};
use bour_core::expr::parse_expr;
use bour_core::invariants::invariant_report;
use bour_core::natural::roundtrip;
use bour_core::profile::{EdgeData, EdgeSpec, Interval, Profile, Sign, DEFAULT_STAR_SAMPLES};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

const DEFAULT_QUAD_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "bour-edge", version, about = "Helicoidal n-type edges from Bour data")]
struct Cli {
    /// Report errors on stderr as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the admissibility conditions of a datum.
    Validate {
        #[command(flatten)]
        datum: DatumArgs,
        #[arg(long, default_value_t = DEFAULT_STAR_SAMPLES)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample the surface and write an OBJ mesh and a fundamental-form CSV.
    Build {
        #[command(flatten)]
        datum: DatumArgs,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form invariants with their numerical oracles.
    Invariants {
        #[command(flatten)]
        datum: DatumArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Edge type from the derivatives of U.
    Classify {
        #[command(flatten)]
        datum: DatumArgs,
        /// Classify the profile curve instead.
        #[arg(long)]
        via_profile: bool,
        #[arg(long, default_value_t = DEFAULT_CUSP_TOL)]
        cusp_tol: f64,
    },
    /// Grid of isometric deformations (h, m).
    Deform {
        #[command(flatten)]
        datum: DatumArgs,
        /// `lo,hi`; defaults to h ± 0.1.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        h_span: Option<Interval>,
        /// `lo,hi`; defaults to m ± 0.1.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        m_span: Option<Interval>,
        #[arg(long, default_value_t = 5)]
        nh: usize,
        #[arg(long, default_value_t = 5)]
        nm: usize,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve (kappa_nu, kappa_t) = target for (h, m).
    Invert {
        #[command(flatten)]
        datum: DatumArgs,
        #[arg(long, allow_negative_numbers = true)]
        kappa_nu: f64,
        #[arg(long, allow_negative_numbers = true)]
        kappa_t: f64,
    },
    /// The four sign variants (eps1, eps2).
    Isomers {
        #[command(flatten)]
        datum: DatumArgs,
        #[command(flatten)]
        mesh: MeshArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the surface, read off its profile and recover U.
    Roundtrip {
        #[command(flatten)]
        datum: DatumArgs,
        #[arg(long, default_value_t = 101)]
        probes: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cusp type of a plane curve at a point.
    ClassifyCurve {
        #[arg(long)]
        expr_x: String,
        #[arg(long)]
        expr_y: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        base: f64,
        #[arg(long, default_value_t = DEFAULT_CUSP_TOL)]
        cusp_tol: f64,
    },
}

/// Datum from a JSON file; inline flags override its fields.
#[derive(Args, Debug)]
struct DatumArgs {
    #[arg(long)]
    datum: Option<PathBuf>,
    #[arg(long = "U", alias = "u")]
    u: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    h: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long, allow_negative_numbers = true, value_parser = parse_sign)]
    eps0: Option<Sign>,
    #[arg(long, allow_negative_numbers = true, value_parser = parse_sign)]
    eps1: Option<Sign>,
    #[arg(long, allow_negative_numbers = true, value_parser = parse_sign)]
    eps2: Option<Sign>,
    #[arg(long)]
    k: Option<usize>,
    /// `lo,hi`
    #[arg(long = "J", alias = "j", value_parser = parse_range, allow_hyphen_values = true)]
    j: Option<Interval>,
}

#[derive(Args, Debug)]
struct MeshArgs {
    #[arg(long, default_value_t = 101)]
    rows: usize,
    #[arg(long, default_value_t = 121)]
    cols: usize,
    /// `lo,hi`; defaults to J.
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    s_range: Option<Interval>,
    /// `lo,hi`; defaults to [0, 2πm].
    #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
    t_range: Option<Interval>,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    quad_tol: f64,
}

fn parse_range(text: &str) -> Result<Interval, String> {
    let (a, b) = text.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo <= hi) {
        return Err(format!("lo = {lo} exceeds hi = {hi}"));
    }
    Ok(Interval::new(lo, hi))
}

fn parse_sign(text: &str) -> Result<Sign, String> {
    match text.trim() {
        "1" | "+1" | "+" => Ok(Sign::Plus),
        "-1" | "-" => Ok(Sign::Minus),
        other => Err(format!("sign must be 1 or -1, got {other}")),
    }
}

#[derive(Debug)]
enum Failure {
    /// Bad flags, unreadable files, malformed JSON.
    Usage(String),
    /// The input was read but fails a mathematical check.
    Invalid(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Invalid(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Invalid(_) => "validation",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Invalid(m) => m,
        }
    }
}

fn invalid(e: impl std::fmt::Display) -> Failure {
    Failure::Invalid(e.to_string())
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{}: {e}", path.display()))
}

type Outcome = Result<Value, Failure>;

impl DatumArgs {
    fn spec(&self) -> Result<EdgeSpec, Failure> {
        let mut spec = match &self.datum {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(io_err(path))?;
                serde_json::from_str::<EdgeSpec>(&text)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            }
            None => {
                let (Some(u), Some(k), Some(j)) = (&self.u, self.k, self.j) else {
                    return Err(Failure::Usage(
                        "a datum needs --datum <file> or at least --U, --k and --J".into(),
                    ));
                };
                EdgeSpec {
                    u: u.clone(),
                    h: 0.0,
                    m: 1.0,
                    eps0: Sign::Plus,
                    eps1: Sign::Plus,
                    eps2: Sign::Plus,
                    k,
                    j,
                }
            }
        };
        if let Some(u) = &self.u {
            spec.u = u.clone();
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { spec.$f = v; })* };
        }
        set!(h, m, eps0, eps1, eps2, k, j);
        Ok(spec)
    }
}

fn validation_value(spec: &EdgeSpec, samples: usize) -> (bool, Value) {
    let checked = parse_expr(&spec.u)
        .map_err(|e| e.to_string())
        .and_then(|u| Profile::new(u, spec.k, spec.j).map_err(|e| e.to_string()))
        .and_then(|p| {
            if !(spec.m > 0.0) {
                return Err(format!("m = {} must be positive", spec.m));
            }
            Ok(p.check_star(spec.h, spec.m, samples))
        });
    match checked {
        Ok(report) => (report.star_ok, json!({"valid": report.star_ok, "datum": spec, "report": report})),
        Err(msg) => (false, json!({"valid": false, "datum": spec, "error": msg})),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("value serializes") + "\n";
    fs::write(path, text).map_err(io_err(path))
}

fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Validated datum; on failure writes `validation.json` into `out` when given.
fn load(args: &DatumArgs, out: Option<&Path>) -> Result<EdgeData, Failure> {
    let spec = args.spec()?;
    match EdgeData::from_spec(&spec) {
        Ok(d) => Ok(d),
        Err(e) => {
            if let Some(dir) = out {
                ensure_dir(dir)?;
                write_json(&dir.join("validation.json"), &validation_value(&spec, DEFAULT_STAR_SAMPLES).1)?;
            }
            Err(invalid(e))
        }
    }
}

fn mesh_for(data: &EdgeData, args: &MeshArgs) -> Result<Mesh, Failure> {
    let s = args.s_range.unwrap_or(data.span());
    let t = args.t_range.unwrap_or_else(|| default_t_range(data));
    sample_mesh(data, s, t, args.rows, args.cols, args.quad_tol).map_err(invalid)
}

fn cmd_validate(datum: &DatumArgs, samples: usize, out: Option<&Path>) -> Outcome {
    let spec = datum.spec()?;
    let (ok, value) = validation_value(&spec, samples.max(16));
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("validation.json"), &value)?;
    }
    if ok {
        Ok(value)
    } else {
        emit(&value);
        Err(Failure::Invalid("datum violates the admissibility conditions".into()))
    }
}

fn cmd_build(datum: &DatumArgs, mesh_args: &MeshArgs, out: &Path) -> Outcome {
    let data = load(datum, Some(out))?;
    let mesh = mesh_for(&data, mesh_args)?;
    ensure_dir(out)?;
    let obj = out.join("mesh.obj");
    write_obj(&obj, &mesh, &data).map_err(io_err(&obj))?;
    let s = mesh_args.s_range.unwrap_or(data.span());
    let t = mesh_args.t_range.unwrap_or_else(|| default_t_range(&data));
    let forms = sample_fundamental_forms(&data, s, t, mesh_args.rows, mesh_args.cols, mesh_args.quad_tol).map_err(invalid)?;
    let csv = out.join("fundamental_form.csv");
    fs::write(&csv, fundamental_form_csv(&forms)).map_err(io_err(&csv))?;
    write_json(&out.join("datum.json"), &json!(data.to_spec()))?;
    Ok(json!({
        "obj": obj,
        "csv": csv,
        "rows": mesh.rows,
        "cols": mesh.cols,
        "singular_row": mesh.singular_row,
    }))
}

fn cmd_invariants(datum: &DatumArgs, out: Option<&Path>) -> Outcome {
    let data = load(datum, out)?;
    let report = invariant_report(&data).map_err(invalid)?;
    let mut value = serde_json::to_value(&report).expect("report serializes");
    value["jacobian_det"] = json!(jacobian_det(&data));
    value["datum"] = json!(data.to_spec());
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("invariants.json"), &value)?;
    }
    Ok(value)
}

fn cmd_classify(datum: &DatumArgs, via_profile: bool, tol: f64) -> Outcome {
    let data = load(datum, None)?;
    let c = if via_profile {
        classify_edge_via_profile(&data, tol)
    } else {
        classify_edge(&data, tol)
    }
    .map_err(invalid)?;
    Ok(serde_json::to_value(c).expect("classification serializes"))
}

fn cmd_deform(
    datum: &DatumArgs,
    h_span: Option<Interval>,
    m_span: Option<Interval>,
    nh: usize,
    nm: usize,
    mesh_args: &MeshArgs,
    out: &Path,
) -> Outcome {
    let data = load(datum, Some(out))?;
    let hs = h_span.unwrap_or(Interval::new(data.h() - 0.1, data.h() + 0.1));
    let ms = m_span.unwrap_or(Interval::new((data.m() - 0.1).max(1e-3), data.m() + 0.1));
    let family = deformation_family(&data, hs, ms, nh, nm).map_err(|e| match e {
        DeformError::InvalidArgument(m) => Failure::Usage(m),
        e => invalid(e),
    })?;
    let files = write_family(out, &family, |d| mesh_for(d, mesh_args))?;
    Ok(json!({
        "members": family.members.len(),
        "valid": family.valid_members().count(),
        "max_metric_delta": family.max_metric_delta(),
        "files": files,
    }))
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn cmd_invert(datum: &DatumArgs, target: (f64, f64)) -> Outcome {
    let data = load(datum, None)?;
    let r = invert_invariants(&data, target).map_err(invalid)?;
    let (kn, kt) = invariant_map(&r.data);
    Ok(json!({
        "h": r.h,
        "m": r.m,
        "iterations": r.iterations,
        "residual": r.residual,
        "kappa_nu": kn,
        "kappa_t": kt,
        "datum": r.data.to_spec(),
    }))
}

fn sign_tag(s: Sign) -> char {
    match s {
        Sign::Plus => 'p',
        Sign::Minus => 'm',
    }
}

fn cmd_isomers(datum: &DatumArgs, mesh_args: &MeshArgs, out: Option<&Path>) -> Outcome {
    let data = load(datum, out)?;
    let set = isomers(&data).map_err(invalid)?;
    let variants: Vec<Value> = set
        .variants
        .iter()
        .zip(&set.helices)
        .map(|(((e1, e2), d), hx)| json!({"eps1": e1, "eps2": e2, "datum": d.to_spec(), "helix": hx}))
        .collect();
    let value = json!({"metric_delta": set.metric_delta, "variants": variants});
    if let Some(dir) = out {
        ensure_dir(dir)?;
        for ((e1, e2), d) in &set.variants {
            let path = dir.join(format!("isomer_{}{}.obj", sign_tag(*e1), sign_tag(*e2)));
            write_obj(&path, &mesh_for(d, mesh_args)?, d).map_err(io_err(&path))?;
        }
        write_json(&dir.join("isomers.json"), &value)?;
    }
    Ok(value)
}

fn cmd_roundtrip(datum: &DatumArgs, probes: usize, out: Option<&Path>) -> Outcome {
    let data = load(datum, out)?;
    let j = data.span();
    let window = Interval::new(j.lo.max(-0.5), j.hi.min(0.5));
    let (report, chart) = roundtrip(&data, &window.linspace(probes.max(2))).map_err(invalid)?;
    let value = json!({"datum": data.to_spec(), "report": report});
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_json(&dir.join("roundtrip.json"), &value)?;
        write_json(&dir.join("chart.json"), &json!(chart.dump()))?;
    }
    Ok(value)
}

fn cmd_classify_curve(x: &str, y: &str, base: f64, tol: f64) -> Outcome {
    let fx = parse_expr(x).map_err(|e| Failure::Usage(format!("--expr-x: {e}")))?;
    let fy = parse_expr(y).map_err(|e| Failure::Usage(format!("--expr-y: {e}")))?;
    let curve = PlaneCurveJet::from_fns(&fx, &fy, base, 16).map_err(invalid)?;
    Ok(serde_json::to_value(classify_plane_cusp(&curve, tol)).expect("classification serializes"))
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Validate { datum, samples, out } => cmd_validate(datum, *samples, out.as_deref()),
        Command::Build { datum, mesh, out } => cmd_build(datum, mesh, out),
        Command::Invariants { datum, out } => cmd_invariants(datum, out.as_deref()),
        Command::Classify {
            datum,
            via_profile,
            cusp_tol,
        } => cmd_classify(datum, *via_profile, *cusp_tol),
        Command::Deform {
            datum,
            h_span,
            m_span,
            nh,
            nm,
            mesh,
            out,
        } => cmd_deform(datum, *h_span, *m_span, *nh, *nm, mesh, out),
        Command::Invert {
            datum,
            kappa_nu,
            kappa_t,
        } => cmd_invert(datum, (*kappa_nu, *kappa_t)),
        Command::Isomers { datum, mesh, out } => cmd_isomers(datum, mesh, out.as_deref()),
        Command::Roundtrip { datum, probes, out } => cmd_roundtrip(datum, *probes, out.as_deref()),
        Command::ClassifyCurve {
            expr_x,
            expr_y,
            base,
            cusp_tol,
        } => cmd_classify_curve(expr_x, expr_y, *base, *cusp_tol),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("BOUR_EDGE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            // Fails only if a pool already exists.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

/// Pretty JSON on stdout; a closed pipe is not an error.
fn emit(value: &Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

fn report(f: &Failure, as_json: bool) {
    if as_json {
        eprintln!("{}", json!({"error": f.kind(), "message": f.message()}));
    } else {
        eprintln!("bour-edge: {}", f.message());
    }
}

fn run(argv: Vec<String>) -> u8 {
    let wants_json = argv.iter().any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if wants_json {
                report(&Failure::Usage(e.kind().to_string()), true);
            } else {
                let _ = e.print();
            }
            return 2;
        }
    };
    configure_threads();
    match dispatch(&cli) {
        Ok(value) => {
            emit(&value);
            0
        }
        Err(f) => {
            report(&f, cli.json);
            f.code()
        }
    }
}

fn main() -> ExitCode {
    ExitCode::from(run(std::env::args().collect()))
}
