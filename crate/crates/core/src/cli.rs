//! Batch front door: parse arguments, dispatch to the library, emit JSON and
//! CSV artifacts.
//!
//! Output determinism: JSON objects are sorted-key maps and every float is
//! rendered with 17 significant digits in scientific notation, so identical
//! configurations produce byte-identical artifacts. Every report embeds the
//! resolved command configuration and a schema version. Validation errors
//! exit 1 with a machine-readable JSON object on stderr; numerical failures
//! (solver divergence, NaN guards) exit 2.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::decay::{
    detect_support, fit_tail_slope, log_spaced, RaySample, RaySource, SLOPE_TOL_CLOSED_FORM,
};
use crate::error::{Error, Result};
use crate::exponents::{DerivedExponents, ExponentVector};
use crate::grid::{read_field, write_field, TensorGrid};
use crate::moser::enumerate_phi;
use crate::rational::{format_rational, parse_rational};
use crate::solver::{minimize, SolverConfig};
use crate::transforms::{sigma_theta, tau_theta, ThetaVector};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "anisodecay",
    about = "Exponent calculus and desk-scale numerics for critical anisotropic equations",
    version
)]
struct Cli {
    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Cap on rayon worker threads (first invocation wins in-process).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive every exponent and index set from an anisotropy vector.
    Exponents(ExponentsArgs),
    /// Compute the tau/sigma coordinate maps for a theta vector.
    Transform(TransformArgs),
    /// Enumerate the iteration scheme: stopping sets, k bounds, ladder.
    Moser(MoserArgs),
    /// Minimize the constrained energy on a tensor grid.
    Solve(SolveArgs),
    /// Fit a log-log tail slope along an axis of a stored field.
    Fit(FitArgs),
    /// Detect per-axis support extents of a stored field.
    Support(SupportArgs),
}

#[derive(Args)]
struct ExponentsArgs {
    /// Comma-separated exponents, rationals as a/b or decimals: 3/2,3/2,5
    #[arg(long, value_name = "LIST")]
    p: String,
}

#[derive(Args)]
struct TransformArgs {
    #[arg(long, value_name = "LIST")]
    p: String,
    /// Comma-separated theta weights with sum of reciprocals n/p.
    #[arg(long, value_name = "LIST")]
    theta: String,
    /// Gradient integrals for the sigma map (omit for tau only).
    #[arg(long, value_name = "LIST")]
    grad_integrals: Option<String>,
}

#[derive(Args)]
struct MoserArgs {
    #[arg(long, value_name = "LIST")]
    p: String,
    /// Starting exponent gamma (rational or decimal).
    #[arg(long)]
    gamma: String,
    /// Stopping slack epsilon in (0,1).
    #[arg(long)]
    eps: String,
    /// Index set I1 (1-based), defaults to empty.
    #[arg(long, value_name = "IDX")]
    i1: Option<String>,
    /// Index set I2 (1-based), defaults to all indices.
    #[arg(long, value_name = "IDX")]
    i2: Option<String>,
    /// Enumeration depth cap (defaults to k_plus).
    #[arg(long)]
    kmax: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    /// JSON solver configuration file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Binary field container produced by solve (or the library).
    #[arg(long)]
    field: PathBuf,
    /// Exponent vector of the field (needed for the predicted rate).
    #[arg(long, value_name = "LIST")]
    p: String,
    /// Axis to fit along, 1-based.
    #[arg(long)]
    axis: usize,
    /// Radial window lo,hi.
    #[arg(long, value_name = "LO,HI")]
    window: String,
    /// Decay parameter q of the envelope being tested.
    #[arg(long)]
    q: f64,
    /// Number of log-spaced sample radii.
    #[arg(long, default_value_t = 32)]
    samples: usize,
    /// Slope tolerance for the pass flag.
    #[arg(long, default_value_t = SLOPE_TOL_CLOSED_FORM)]
    tolerance: f64,
}

#[derive(Args)]
struct SupportArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    threshold: f64,
    /// Index set for the r0 estimate (1-based).
    #[arg(long, value_name = "IDX")]
    i0: Option<String>,
}

/// JSON solver configuration accepted by `solve --config`.
#[derive(Deserialize)]
struct SolveFileConfig {
    p: Vec<String>,
    extents: Vec<f64>,
    counts: Vec<usize>,
    #[serde(default = "default_lambda_growth")]
    lambda_growth: f64,
    #[serde(default = "default_eps_schedule")]
    eps_schedule: Vec<f64>,
    #[serde(default = "default_step0")]
    step0: f64,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    init_noise: f64,
    #[serde(default)]
    init_field: Option<PathBuf>,
}

fn default_lambda_growth() -> f64 {
    1.0
}
fn default_eps_schedule() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
}
fn default_step0() -> f64 {
    1.0
}
fn default_tol() -> f64 {
    1e-9
}
fn default_max_iters() -> usize {
    500
}

/// Serialize with sorted keys and fixed 17-significant-digit floats.
pub fn to_deterministic_json(value: &Value) -> String {
    struct SciFormatter;
    impl serde_json::ser::Formatter for SciFormatter {
        fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
        where
            W: ?Sized + std::io::Write,
        {
            if value.is_finite() {
                write!(writer, "{value:.16e}")
            } else {
                writer.write_all(b"null")
            }
        }
    }
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    serde::Serialize::serialize(value, &mut ser).expect("JSON serialization cannot fail");
    let mut s = String::from_utf8(out).expect("serde_json emits UTF-8");
    s.push('\n');
    s
}

fn parse_index_set(s: &str) -> Result<BTreeSet<usize>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad index {part:?}")))
        })
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("bad number {part:?}")))
        })
        .collect()
}

fn exponent_vector(p: &str) -> Result<ExponentVector> {
    let parts: Vec<&str> = p.split(',').collect();
    ExponentVector::from_strs(&parts)
}

fn write_artifact(out_dir: &Path, name: &str, value: &Value) -> Result<String> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    let body = to_deterministic_json(value);
    fs::write(&path, &body)?;
    print!("{body}");
    Ok(path.display().to_string())
}

fn run_exponents(args: &ExponentsArgs, out_dir: &Path) -> Result<()> {
    let ev = exponent_vector(&args.p)?;
    let derived = DerivedExponents::compute(&ev)?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "exponents",
        "config": { "p": args.p },
        "exponents": derived.to_json(&ev),
    });
    write_artifact(out_dir, "exponents.json", &report)?;
    Ok(())
}

fn run_transform(args: &TransformArgs, out_dir: &Path) -> Result<()> {
    let ev = exponent_vector(&args.p)?;
    let theta = ThetaVector::new(&ev, parse_f64_list(&args.theta)?)?;
    let tau = tau_theta(&ev, &theta)?;
    let sigma = match &args.grad_integrals {
        Some(g) => Some(sigma_theta(&ev, &theta, &parse_f64_list(g)?)?),
        None => None,
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "transform",
        "config": {
            "p": args.p,
            "theta": args.theta,
            "grad_integrals": args.grad_integrals,
        },
        "tau": serde_json::to_value(&tau)?,
        "sigma": sigma.map(|m| serde_json::to_value(m).unwrap()),
    });
    write_artifact(out_dir, "transform.json", &report)?;
    Ok(())
}

fn run_moser(args: &MoserArgs, out_dir: &Path) -> Result<()> {
    let ev = exponent_vector(&args.p)?;
    let gamma = parse_rational(&args.gamma)?;
    let eps = parse_rational(&args.eps)?;
    let i1 = match &args.i1 {
        Some(s) => parse_index_set(s)?,
        None => BTreeSet::new(),
    };
    let i2 = match &args.i2 {
        Some(s) => parse_index_set(s)?,
        None => (1..=ev.n()).collect(),
    };
    let trace = enumerate_phi(&ev, &i1, &i2, &gamma, &eps, args.kmax)?;
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "moser",
        "config": {
            "p": args.p,
            "gamma": format_rational(&gamma),
            "eps": format_rational(&eps),
            "i1": i1.iter().copied().collect::<Vec<_>>(),
            "i2": i2.iter().copied().collect::<Vec<_>>(),
            "kmax": args.kmax,
        },
        "trace": trace.to_json(),
    });
    write_artifact(out_dir, "moser_trace.json", &report)?;
    Ok(())
}

fn run_solve(args: &SolveArgs, out_dir: &Path) -> Result<()> {
    let text = fs::read_to_string(&args.config)?;
    let file: SolveFileConfig = serde_json::from_str(&text)?;
    let ev = ExponentVector::from_strs(&file.p)?;
    let grid = TensorGrid::new(file.extents.clone(), file.counts.clone())?;
    let init_field = match &file.init_field {
        Some(path) => Some(read_field(path)?),
        None => None,
    };
    let config = SolverConfig {
        ev: ev.clone(),
        grid,
        lambda_growth: file.lambda_growth,
        eps_schedule: file.eps_schedule.clone(),
        step0: file.step0,
        tol: file.tol,
        max_iters: file.max_iters,
        seed: file.seed,
        init_noise: file.init_noise,
        init_field,
    };
    let report = minimize(&config)?;
    fs::create_dir_all(out_dir)?;
    let field_path = out_dir.join("solution_field.bin");
    write_field(&report.field, &field_path)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "solve",
        "config": {
            "p": file.p,
            "extents": file.extents,
            "counts": file.counts,
            "lambda_growth": file.lambda_growth,
            "eps_schedule": file.eps_schedule,
            "step0": file.step0,
            "tol": file.tol,
            "max_iters": file.max_iters,
            "seed": file.seed,
            "init_noise": file.init_noise,
            "init_field": file.init_field,
        },
        "field_file": "solution_field.bin",
        "energy": report.energy,
        "mass": report.mass,
        "lambda_u": report.lambda_u,
        "rescale": serde_json::to_value(&report.rescale)?,
        "stats": serde_json::to_value(&report.stats)?,
    });
    write_artifact(out_dir, "solve_report.json", &value)?;
    Ok(())
}

fn run_fit(args: &FitArgs, out_dir: &Path) -> Result<()> {
    let field = read_field(&args.field)?;
    let ev = exponent_vector(&args.p)?;
    let window = {
        let parts = parse_f64_list(&args.window)?;
        if parts.len() != 2 {
            return Err(Error::invalid("window must be lo,hi"));
        }
        (parts[0], parts[1])
    };
    let report = fit_tail_slope(
        &field,
        &ev,
        args.axis,
        window,
        args.samples,
        args.q,
        args.tolerance,
    )?;

    // ray CSV: radius, value, log-log residual against the fitted line
    let radii = log_spaced(window.0, window.1, args.samples);
    let samples: Vec<RaySample> = field.sample_ray(args.axis, &radii);
    let mean_x = samples.iter().map(|s| s.r.ln()).sum::<f64>() / samples.len() as f64;
    let mean_y = samples.iter().map(|s| s.value.ln()).sum::<f64>() / samples.len() as f64;
    let intercept = mean_y - report.fitted_slope * mean_x;
    fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join("fit_ray.csv");
    let mut csv = String::from("radius,value,loglog_residual\n");
    for s in &samples {
        let resid = s.value.ln() - (intercept + report.fitted_slope * s.r.ln());
        csv.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", s.r, s.value, resid));
    }
    fs::write(&csv_path, csv)?;

    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "fit",
        "config": {
            "field": args.field.display().to_string(),
            "p": args.p,
            "axis": args.axis,
            "window": [window.0, window.1],
            "q": args.q,
            "samples": args.samples,
            "tolerance": args.tolerance,
        },
        "ray_csv": "fit_ray.csv",
        "fit": serde_json::to_value(&report)?,
    });
    write_artifact(out_dir, "fit_report.json", &value)?;
    Ok(())
}

fn run_support(args: &SupportArgs, out_dir: &Path) -> Result<()> {
    let field = read_field(&args.field)?;
    let i0 = match &args.i0 {
        Some(s) => Some(parse_index_set(s)?),
        None => None,
    };
    let report = detect_support(&field, args.threshold, i0.as_ref())?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "support",
        "config": {
            "field": args.field.display().to_string(),
            "threshold": args.threshold,
            "i0": i0.as_ref().map(|s| s.iter().copied().collect::<Vec<_>>()),
        },
        "support": serde_json::to_value(&report)?,
    });
    write_artifact(out_dir, "support_report.json", &value)?;
    Ok(())
}

fn emit_error(err: &Error) -> i32 {
    let kind = match err {
        Error::Invalid(_) => "validation",
        Error::Numerics(_) => "numerical",
        Error::Io(_) => "io",
        Error::Json { .. } => "json",
    };
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "error": { "kind": kind, "message": err.to_string() },
    });
    eprint!("{}", to_deterministic_json(&value));
    err.exit_code()
}

/// Entry point shared by the binary and the tests: parses argv, dispatches,
/// and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let value = json!({
                    "schema_version": SCHEMA_VERSION,
                    "error": { "kind": "usage", "message": e.to_string() },
                });
                eprint!("{}", to_deterministic_json(&value));
                return 1;
            }
            // --help / --version
            print!("{e}");
            return 0;
        }
    };
    if let Some(threads) = cli.threads {
        // first caller wins; later in-process calls keep the existing pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let result = match &cli.command {
        Command::Exponents(args) => run_exponents(args, &cli.out),
        Command::Transform(args) => run_transform(args, &cli.out),
        Command::Moser(args) => run_moser(args, &cli.out),
        Command::Solve(args) => run_solve(args, &cli.out),
        Command::Fit(args) => run_fit(args, &cli.out),
        Command::Support(args) => run_support(args, &cli.out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => emit_error(&e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_float_formatting() {
        let v = json!({"x": 2.75, "y": [1.0, 0.1]});
        let s = to_deterministic_json(&v);
        assert_eq!(
            s,
            "{\"x\":2.7500000000000000e0,\"y\":[1.0000000000000000e0,1.0000000000000001e-1]}\n"
        );
    }

    #[test]
    fn index_set_parsing() {
        assert_eq!(parse_index_set("1,2,3").unwrap(), BTreeSet::from([1, 2, 3]));
        assert!(parse_index_set("1,x").is_err());
    }
}
