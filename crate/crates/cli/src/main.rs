//! `equnfold`: Hopf curves, double Hopf search, equivariant unfoldings and
//! artifact verification from the command line.
//!
//! Exit codes: 0 success, 1 pipeline failure, 2 usage or schema error,
//! 3 versal but not minimal.

mod config;

use std::fs;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use equivar_core::audit::{verify_artifact, AuditReport, Verdict};
use equivar_core::d3::{self, Case, Factor, Window};
use equivar_core::io::{self, ScanDoc};
use equivar_core::Error;
use serde_json::json;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "equnfold", version, about = "Equivariant versal unfoldings of linear delay equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the Hopf curves of one factor of the three-cell model as CSV.
    Curves(CurvesArgs),
    /// Locate double Hopf points of one factor inside a window.
    DoubleHopf(DoubleHopfArgs),
    /// Build an equivariant unfolding and write it as a JSON artifact.
    Unfold(UnfoldArgs),
    /// Re-check every invariant of an artifact.
    Verify(VerifyArgs),
    /// Run both three-cell cases end to end into a directory.
    D3Demo(DemoArgs),
}

#[derive(Args)]
struct CurvesArgs {
    #[arg(long, default_value = "delta1")]
    factor: String,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = 4.0)]
    tau_n: f64,
    /// `START:END:STEP`
    #[arg(long, default_value = "0.05:5:0.005", allow_hyphen_values = true)]
    omega_range: String,
    /// `LO..HI`
    #[arg(long, default_value = "-1..8", allow_hyphen_values = true)]
    branches: String,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DoubleHopfArgs {
    #[arg(long, default_value = "delta1")]
    factor: String,
    #[arg(long, default_value_t = -0.5, allow_negative_numbers = true)]
    beta: f64,
    #[arg(long, default_value_t = 4.0)]
    tau_n: f64,
    /// `LO:HI`
    #[arg(long, default_value = "-4:4", allow_hyphen_values = true)]
    alpha_window: String,
    /// `LO:HI`
    #[arg(long, default_value = "0:10", allow_hyphen_values = true)]
    tau_s_window: String,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct UnfoldArgs {
    /// `d3:simple` or `d3:double`.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's output path; stdout when neither is set.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Keep every slot instead of the selected ones.
    #[arg(long)]
    all_directions: bool,
}

#[derive(Args)]
struct VerifyArgs {
    artifact: PathBuf,
    /// Also write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value = "d3-demo")]
    out_dir: PathBuf,
}

/// Error carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if matches!(e, Error::Schema(_)) { 2 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 1, message: format!("{}: {e}", path.display()) }
}

/// Write-temp-rename in the target's directory.
fn write_atomic(path: &Path, contents: &str) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_failure(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| io_failure(path, e))?;
    tmp.persist(path).map_err(|e| io_failure(path, e.error))?;
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<(), Failure> {
    match out {
        Some(p) => write_atomic(p, contents),
        None => match std::io::stdout().lock().write_all(contents.as_bytes()) {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure { code: 1, message: format!("stdout: {e}") }),
            _ => Ok(()),
        },
    }
}

fn parse_f64(s: &str, what: &str) -> Result<f64, Failure> {
    s.trim().parse().map_err(|_| usage(format!("{what}: {s:?} is not a number")))
}

fn parse_range(s: &str) -> Result<(f64, f64, f64), Failure> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(usage(format!("omega range {s:?} must be START:END:STEP")));
    };
    Ok((parse_f64(a, "omega range")?, parse_f64(b, "omega range")?, parse_f64(c, "omega range")?))
}

fn parse_window(s: &str, what: &str) -> Result<(f64, f64), Failure> {
    let (a, b) = s.split_once(':').ok_or_else(|| usage(format!("{what} {s:?} must be LO:HI")))?;
    let (a, b) = (parse_f64(a, what)?, parse_f64(b, what)?);
    if !(a < b) {
        return Err(usage(format!("{what} {s:?} needs LO < HI")));
    }
    Ok((a, b))
}

fn parse_branches(s: &str) -> Result<RangeInclusive<i32>, Failure> {
    let bad = || usage(format!("branches {s:?} must be LO..HI with LO <= HI"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let (a, b): (i32, i32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if a > b {
        return Err(bad());
    }
    Ok(a..=b)
}

fn factor(s: &str) -> Result<Factor, Failure> {
    s.parse::<Factor>().map_err(Failure::from)
}

fn finite(x: f64, what: &str) -> Result<f64, Failure> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(usage(format!("{what} must be finite")))
    }
}

fn cmd_curves(a: &CurvesArgs) -> Result<u8, Failure> {
    let f = factor(&a.factor)?;
    let (start, end, step) = parse_range(&a.omega_range)?;
    let omegas = d3::omega_grid(start, end, step)?;
    let branches = parse_branches(&a.branches)?;
    let points = d3::sweep_curves(f, finite(a.beta, "beta")?, finite(a.tau_n, "tau-n")?, &omegas, branches);
    emit(a.out.as_deref(), &d3::curves_csv(&points))?;
    Ok(0)
}

fn cmd_double_hopf(a: &DoubleHopfArgs) -> Result<u8, Failure> {
    let f = factor(&a.factor)?;
    let window = Window {
        alpha: parse_window(&a.alpha_window, "alpha window")?,
        tau_s: parse_window(&a.tau_s_window, "tau-s window")?,
    };
    let (beta, tau_n) = (finite(a.beta, "beta")?, finite(a.tau_n, "tau-n")?);
    let points = d3::scan_double_hopf(f, beta, tau_n, &window)?;
    let label = match f {
        Factor::Delta1 => Case::Simple.name(),
        Factor::Delta2 => Case::Double.name(),
    };
    emit(a.out.as_deref(), &io::to_json(&ScanDoc::new(&window, label, &points))?)?;
    if points.is_empty() {
        eprintln!("no double Hopf point in the window");
        return Ok(1);
    }
    Ok(0)
}

fn error_report(e: &Error) -> String {
    let kind = format!("{e:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
    let doc = json!({ "schema": io::SCHEMA, "status": "error", "error": { "kind": kind, "message": e.to_string() } });
    io::to_json(&doc).unwrap_or_default()
}

fn cmd_unfold(a: &UnfoldArgs) -> Result<u8, Failure> {
    let mut cfg = match (&a.preset, &a.config) {
        (Some(p), None) => RunConfig::preset(config::parse_preset(p)?),
        (None, Some(path)) => RunConfig::load(path)?,
        _ => return Err(usage("give exactly one of --preset and --config")),
    };
    if a.all_directions {
        cfg.mini_versal = false;
    }
    let out = a.out.clone().or_else(|| cfg.output.clone());
    cfg.validate()?;
    match config::run(&cfg) {
        Ok(outcome) => {
            emit(out.as_deref(), &io::to_json(&outcome.artifact)?)?;
            let v = &outcome.artifact.versality;
            eprintln!(
                "{} parameters; commutant {} = tangent {} + codimension {}; {}",
                v.parameters,
                v.commutant_dim,
                v.tangent_dim,
                v.codimension,
                if outcome.mini_versal { "mini-versal" } else { "versal, not minimal" }
            );
            Ok(if outcome.mini_versal { 0 } else { 3 })
        }
        Err(e @ Error::Schema(_)) => Err(e.into()),
        Err(e) => {
            emit(out.as_deref(), &error_report(&e))?;
            Err(e.into())
        }
    }
}

fn print_audit(r: &AuditReport) {
    for c in &r.checks {
        let mark = if c.passed { "ok  " } else { "FAIL" };
        if c.detail.is_empty() {
            println!("{mark} {:<32} {:.3e} (tol {:.1e})", c.name, c.value, c.tolerance);
        } else {
            println!("{mark} {:<32} {}", c.name, c.detail);
        }
    }
    let verdict = match r.verdict {
        Verdict::Pass => "all checks pass",
        Verdict::NotMinimal => "versal but not minimal",
        Verdict::Fail => "verification failed",
    };
    println!("{verdict}");
}

fn cmd_verify(a: &VerifyArgs) -> Result<u8, Failure> {
    let text = fs::read_to_string(&a.artifact).map_err(|e| usage(format!("{}: {e}", a.artifact.display())))?;
    let artifact = io::parse_artifact(&text)?;
    let report = verify_artifact(&artifact)?;
    print_audit(&report);
    if let Some(p) = &a.report {
        write_atomic(p, &io::to_json(&report)?)?;
    }
    Ok(report.verdict.exit_code() as u8)
}

fn cmd_demo(a: &DemoArgs) -> Result<u8, Failure> {
    fs::create_dir_all(&a.out_dir).map_err(|e| io_failure(&a.out_dir, e))?;
    let mut worst = 0u8;
    for case in [Case::Simple, Case::Double] {
        let (beta, tau_n) = case.reference();
        let (s, e, st) = d3::SCAN_OMEGA;
        let omegas = d3::omega_grid(s, e, st)?;
        let curves = d3::sweep_curves(case.factor(), beta, tau_n, &omegas, d3::SCAN_BRANCHES);
        write_atomic(&a.out_dir.join(format!("curves_{}.csv", case.name())), &d3::curves_csv(&curves))?;
        let window = Window::default();
        let points = d3::scan_double_hopf(case.factor(), beta, tau_n, &window)?;
        write_atomic(
            &a.out_dir.join(format!("double_hopf_{}.json", case.name())),
            &io::to_json(&ScanDoc::new(&window, case.name(), &points))?,
        )?;
        let outcome = config::run(&RunConfig::preset(case))?;
        let path = a.out_dir.join(format!("unfold_{}.json", case.name()));
        write_atomic(&path, &io::to_json(&outcome.artifact)?)?;
        let report = verify_artifact(&outcome.artifact)?;
        let p = outcome.artifact.point.as_ref();
        println!(
            "{}: {} double Hopf points; using alpha {:.6}, tau_s {:.6}, omega ({:.6}, {:.6}); \
             {} parameters, codimension {}; verify: {:?}",
            case.name(),
            points.len(),
            p.map_or(f64::NAN, |p| p.alpha),
            p.map_or(f64::NAN, |p| p.tau_s),
            p.map_or(f64::NAN, |p| p.omega1),
            p.map_or(f64::NAN, |p| p.omega2),
            outcome.artifact.versality.parameters,
            outcome.artifact.versality.codimension,
            report.verdict
        );
        worst = worst.max(report.verdict.exit_code() as u8);
    }
    println!("wrote {}", a.out_dir.display());
    Ok(worst)
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(v) = std::env::var("EQUNFOLD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("EQUNFOLD_THREADS={v:?} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure { code: 1, message: e.to_string() })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Curves(a) => cmd_curves(a),
        Command::DoubleHopf(a) => cmd_double_hopf(a),
        Command::Unfold(a) => cmd_unfold(a),
        Command::Verify(a) => cmd_verify(a),
        Command::D3Demo(a) => cmd_demo(a),
    });
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
