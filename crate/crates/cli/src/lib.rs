//! Front end for `cbs-core`: single points, parameter sweeps, the
//! visibility-versus-temperature curve, and self-validation.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 quadrature did not
//! converge, 3 a validation check failed.

pub mod config;
pub mod fig2b;
pub mod inputs;
pub mod output;
pub mod sweep;
pub mod validate;

use std::ffi::OsString;

use cbs_core::fock::FockError;
use cbs_core::observables::full_report;
use cbs_core::{ObservableError, ParamError, QuadError, QuadratureSpec};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::fig2b::Fig2b;
use crate::inputs::{Common, Format};
use crate::output::{emit, TableRow};
use crate::sweep::{tensor_order_for, Axis, SweepSpec};
use crate::validate::Suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Caps the worker pool when set.
pub const THREADS_ENV: &str = "CBS_THREADS";

/// Above this |δ| the tensor rule loses accuracy.
const DETUNING_WARNING: f64 = 2.0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid parameters: {0}")]
    Param(#[from] ParamError),
    #[error("invalid quadrature settings: {0}")]
    Quad(#[from] QuadError),
    #[error("{0}")]
    Observable(#[from] ObservableError),
    #[error("{0}")]
    Fock(#[from] FockError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}:{line}: {message}")]
    Config { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("could not serialize output: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_USAGE
    }
}

#[derive(Debug, Parser)]
#[command(name = "cbs", version, about = "Coherent backscattering by two trapped atoms: visibility, predictability and which-path information")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one parameter point (JSON by default).
    Point(PointArgs),
    /// Evaluate a one- or two-axis grid (CSV by default).
    Sweep(SweepArgs),
    /// Resonant visibility against ξ_cl² on a log grid.
    Fig2b(Fig2bArgs),
    /// Run the self-checks; exits 3 if any fails.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// name:min:max:count[:lin|log], name one of delta, omega_ho, omega_R,
    /// nbar, theta, mu, xi_cl_sq.
    #[arg(long, required_unless_present = "schema", allow_hyphen_values = true)]
    pub axis1: Option<Axis>,
    /// Second axis, varied fastest.
    #[arg(long, allow_hyphen_values = true)]
    pub axis2: Option<Axis>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Fig2bArgs {
    #[arg(long, default_value_t = 1e-2)]
    pub xi_cl_sq_min: f64,
    #[arg(long, default_value_t = 1e2)]
    pub xi_cl_sq_max: f64,
    /// Grid points, log-spaced.
    #[arg(long, default_value_t = 41)]
    pub count: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Suites to run (default: all).
    #[arg(long, value_enum)]
    pub suite: Vec<Suite>,
    /// Random cases in the oracle-equivalence suite.
    #[arg(long, default_value_t = 128)]
    pub cases: usize,
    /// Negate the correlator kernel, to see the oracle suite fail.
    #[arg(long, hide = true)]
    pub inject_kernel_sign_flip: bool,
    #[command(flatten)]
    pub common: Common,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads().and_then(|_| dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    // Fails only if the pool already exists, e.g. on a second call in one
    // process; the first setting stands.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn warn_detuning(delta: f64) {
    if delta.abs() > DETUNING_WARNING {
        eprintln!(
            "warning: |delta| = {} > {DETUNING_WARNING}; the time integrals oscillate strongly and need a high tensor order (check the error columns, raise --quad-order if needed)",
            delta.abs()
        );
    }
}

/// The tensor order follows |δ| unless given explicitly.
fn auto_order(c: &Common) -> bool {
    c.quad.quad_order.is_none()
}

fn dispatch(command: Command) -> Result<i32, CliError> {
    match command {
        Command::Point(a) => point(a),
        Command::Sweep(a) => sweep(a),
        Command::Fig2b(a) => fig2b(a),
        Command::Validate(a) => validate(a),
    }
}

fn schema(common: &Common) -> Result<i32, CliError> {
    emit(common.out.as_deref(), &output::schema_bytes())?;
    Ok(EXIT_OK)
}

fn point(mut a: PointArgs) -> Result<i32, CliError> {
    let c = &mut a.common;
    c.apply_config()?;
    if c.schema {
        return schema(c);
    }
    let p = c.params.resolve()?;
    let mut spec = c.quad.spec(QuadratureSpec::default())?;
    if auto_order(c) {
        spec.order = tensor_order_for(p.delta);
    }
    warn_detuning(p.delta);
    let report = full_report(&p, &spec)?;
    let bytes = match c.format.unwrap_or(Format::Json) {
        Format::Json => output::point_json(&p, &report)?,
        Format::Csv => output::table(&[TableRow::from_report(&p, &report)], Format::Csv)?,
    };
    emit(c.out.as_deref(), &bytes)?;
    if report.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: quadrature did not reach its target error");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn write_table(c: &Common, rows: &[TableRow]) -> Result<i32, CliError> {
    let bytes = output::table(rows, c.format.unwrap_or(Format::Csv))?;
    emit(c.out.as_deref(), &bytes)?;
    let failed = rows.iter().filter(|r| r.is_failed()).count();
    let unconverged = rows.iter().filter(|r| !r.is_failed() && !r.converged).count();
    if unconverged > 0 {
        eprintln!("warning: {unconverged} of {} rows did not converge", rows.len());
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {} rows failed", rows.len());
    }
    Ok(if !rows.is_empty() && failed == rows.len() {
        EXIT_USAGE
    } else {
        EXIT_OK
    })
}

fn sweep(mut a: SweepArgs) -> Result<i32, CliError> {
    let c = &mut a.common;
    c.apply_config()?;
    if c.schema {
        return schema(c);
    }
    let axes: Vec<Axis> = a.axis1.into_iter().chain(a.axis2).collect();
    let mut spec = SweepSpec::new(axes, c.params.clone(), c.quad.spec(QuadratureSpec::default())?)?;
    spec.auto_order = auto_order(c);
    let max_delta = spec
        .points()
        .iter()
        .map(|p| p.delta.unwrap_or(0.0).abs())
        .fold(0.0, f64::max);
    warn_detuning(max_delta);
    let rows = spec.run();
    write_table(c, &rows)
}

fn fig2b(mut a: Fig2bArgs) -> Result<i32, CliError> {
    let c = &mut a.common;
    c.apply_config()?;
    if c.schema {
        return schema(c);
    }
    let p = &c.params;
    if p.delta.is_some_and(|d| d != 0.0) {
        return Err(CliError::Usage("fig2b is evaluated at resonance; --delta must be 0".into()));
    }
    if p.nbar.is_some() || p.theta.is_some() || p.xi_cl_sq.is_some() || p.xi_cl.is_some() {
        return Err(CliError::Usage(
            "fig2b sweeps the temperature itself; use --xi-cl-sq-min/--xi-cl-sq-max instead of thermal flags".into(),
        ));
    }
    let defaults = Fig2b::default();
    let f = Fig2b {
        omega_r: p.omega_r.unwrap_or(defaults.omega_r),
        omega_ho: p.omega_ho.unwrap_or(defaults.omega_ho),
        mu: p.mu.unwrap_or(defaults.mu),
        xi_cl_sq_min: a.xi_cl_sq_min,
        xi_cl_sq_max: a.xi_cl_sq_max,
        count: a.count,
        low: c.quad.spec(defaults.low.clone())?,
        high: c.quad.spec(defaults.high.clone())?,
        switch_at: defaults.switch_at,
    };
    let rows = f.run()?;
    write_table(c, &rows)
}

fn validate(mut a: ValidateArgs) -> Result<i32, CliError> {
    let c = &mut a.common;
    c.apply_config()?;
    if c.schema {
        return schema(c);
    }
    let defaults = validate::Options::default();
    let opts = validate::Options {
        suites: if a.suite.is_empty() { defaults.suites } else { a.suite },
        cases: a.cases,
        seed: c.quad.seed.unwrap_or(defaults.seed),
        fock_dim: c.fock_dim,
        flip_kernel_sign: a.inject_kernel_sign_flip,
    };
    let checks = validate::run(&opts)?;
    let bytes = match c.format {
        Some(Format::Json) => {
            let mut v = serde_json::to_vec_pretty(&checks).map_err(|e| CliError::Output(e.to_string()))?;
            v.push(b'\n');
            v
        }
        _ => checks.iter().map(|ch| format!("{ch}\n")).collect::<String>().into_bytes(),
    };
    emit(c.out.as_deref(), &bytes)?;
    Ok(if checks.iter().all(|ch| ch.passed) {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn negative_values_parse() {
        let cli = Cli::try_parse_from(["cbs", "point", "--delta", "-0.5", "--mu", "-1"]).unwrap();
        let Command::Point(a) = cli.command else { panic!() };
        assert_eq!((a.common.params.delta, a.common.params.mu), (Some(-0.5), Some(-1.0)));
        let cli = Cli::try_parse_from(["cbs", "sweep", "--axis1", "delta:-1:1:3"]).unwrap();
        let Command::Sweep(a) = cli.command else { panic!() };
        assert_eq!(a.axis1.unwrap().min, -1.0);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["cbs", "point", "--no-such-flag"]), EXIT_USAGE);
        assert_eq!(run(["cbs", "sweep"]), EXIT_USAGE);
        assert_eq!(run(["cbs", "point", "--mu", "2"]), EXIT_USAGE);
        assert_eq!(run(["cbs", "point", "--nbar", "1", "--theta", "1"]), EXIT_USAGE);
        assert_eq!(run(["cbs", "point", "--quad-order", "2"]), EXIT_USAGE);
        assert_eq!(run(["cbs", "fig2b", "--delta", "1"]), EXIT_USAGE);
        assert_eq!(run(["cbs", "fig2b", "--omega-r", "1e-3"]), EXIT_USAGE);
        assert_eq!(run(["cbs", "--help"]), EXIT_OK);
    }
}
