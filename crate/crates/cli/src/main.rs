//! Experiment runner: loads laminations and test-function specs, executes the
//! library operations and emits machine-readable tables.
//!
//! Exit codes: 0 pass, 1 threshold fail, 2 invalid input, 3 numerical
//! failure.

mod output;
mod parse;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde_json::json;

use liouville_core::currents::{liouville_box, GeodesicBox, TestFunction};
use liouville_core::deriv::{
    cauchy_derivative, d1_lamination, d1_quakebend, d2_lamination, decay_profile,
    earthquake_functional, fd_derivative, kj_stabilization, quakebend_functional_dyadic,
    receding_family, DerivativeReport, FdOrder,
};
use liouville_core::earthquake::elementary_earthquake;
use liouville_core::lamination::thurston_norm_estimate;
use liouville_core::{Error as CoreError, FiniteLamination};

use output::{Cell, Report};
use parse::{parse_boundary_token, parse_complex, read_lamination, LaminationSource};

#[derive(Parser)]
#[command(
    name = "liouville-lab",
    about = "Liouville measures, earthquakes and quake-bend derivatives on the hyperbolic plane",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonOpts {
    /// Output format: csv or json
    #[arg(long, default_value = "csv")]
    format: String,
    /// Numerical tolerance for quadrature / dyadic sums
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Seed for sampled estimators
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LaminationOpts {
    /// Inline leaf as three tokens: P_MINUS P_PLUS WEIGHT (repeatable)
    #[arg(long = "leaf", num_args = 3, value_names = ["P_MINUS", "P_PLUS", "WEIGHT"], action = clap::ArgAction::Append, allow_hyphen_values = true)]
    leaf: Vec<String>,
    /// Lamination file: one `p_minus p_plus weight` per line, `#` comments
    #[arg(long)]
    lamination: Option<PathBuf>,
    /// Orbit spec: "a b c d / seed_p seed_q / weight / n"
    #[arg(long)]
    orbit: Option<String>,
}

#[derive(Args, Debug)]
struct XiOpts {
    /// Support box corners A B C D (first arc [A,B], second arc [C,D]; `inf` allowed)
    #[arg(long, num_args = 4, value_names = ["A", "B", "C", "D"], allow_hyphen_values = true)]
    support: Vec<String>,
    /// Test-function kind: tent or bump
    #[arg(long, default_value = "tent")]
    kind: String,
    /// Hölder exponent for bump test functions
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Liouville mass of a box of geodesics
    Liouville {
        /// Box corners A B C D (`inf` allowed)
        #[arg(long = "box", num_args = 4, value_names = ["A", "B", "C", "D"], allow_hyphen_values = true)]
        corners: Vec<String>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Evaluate an earthquake / quake-bend boundary map at points
    QuakeEval {
        #[command(flatten)]
        lamination: LaminationOpts,
        /// Shear parameter τ (complex, e.g. "0.1+0.05i")
        #[arg(long, default_value = "0", allow_hyphen_values = true)]
        tau: String,
        /// Comma-separated boundary points (`inf` allowed)
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// First derivative of the Liouville functional vs its FD oracle
    D1 {
        #[command(flatten)]
        lamination: LaminationOpts,
        #[command(flatten)]
        xi: XiOpts,
        /// Finite-difference step
        #[arg(long, default_value_t = 1e-4)]
        fd_step: f64,
        /// Relative-error threshold for exit code 0
        #[arg(long, default_value_t = 1e-5)]
        threshold: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Second derivative of the Liouville functional vs its FD oracle
    D2 {
        #[command(flatten)]
        lamination: LaminationOpts,
        #[command(flatten)]
        xi: XiOpts,
        #[arg(long, default_value_t = 1e-3)]
        fd_step: f64,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Quake-bend first derivative (dyadic route) vs the Cauchy-integral oracle
    D1Quakebend {
        #[command(flatten)]
        lamination: LaminationOpts,
        #[command(flatten)]
        xi: XiOpts,
        /// Quake-bend parameter τ (complex)
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        /// Cauchy contour radius
        #[arg(long, default_value_t = 0.05)]
        radius: f64,
        /// Cauchy contour points
        #[arg(long, default_value_t = 32)]
        points: usize,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Decay profile of the cos-kernel integrals along a receding family
    Decay {
        #[command(flatten)]
        xi: XiOpts,
        /// Number of family members
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, default_value_t = 1.0)]
        d_min: f64,
        #[arg(long, default_value_t = 8.0)]
        d_max: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Truncation (K_j) stabilization table of the quake-bend derivative
    Kj {
        #[command(flatten)]
        lamination: LaminationOpts,
        #[command(flatten)]
        xi: XiOpts,
        #[arg(long, allow_hyphen_values = true)]
        tau: String,
        /// Comma-separated increasing truncation radii
        #[arg(long)]
        radii: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sampled lower bound for the Thurston norm
    ThurstonEstimate {
        #[command(flatten)]
        lamination: LaminationOpts,
        /// Number of random arcs on top of the deterministic ladder
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
}

/// Success outcomes; threshold misses map to exit code 1.
enum Outcome {
    Pass,
    ThresholdFail,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Numerical(String),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::BranchGuard(_)
            | CoreError::ToleranceNotMet { .. }
            | CoreError::SlowConvergence { .. }
            | CoreError::StencilFailure(_)
            | CoreError::PathEvaluationFailure(_)
            | CoreError::AllZero => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome::Pass) => ExitCode::from(0),
        Ok(Outcome::ThresholdFail) => ExitCode::from(1),
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}

fn build_box(tokens: &[String]) -> Result<GeodesicBox, CliError> {
    if tokens.len() != 4 {
        return Err(CliError::Input("expected four box corners".into()));
    }
    let mut vals = Vec::with_capacity(4);
    for t in tokens {
        vals.push(parse_boundary_token(t).map_err(CliError::Input)?);
    }
    GeodesicBox::from_parts(vals[0], vals[1], vals[2], vals[3]).map_err(CliError::from)
}

fn build_xi(opts: &XiOpts) -> Result<TestFunction, CliError> {
    let support = build_box(&opts.support)?;
    match opts.kind.as_str() {
        "tent" => TestFunction::tent(support).map_err(CliError::from),
        "bump" => TestFunction::bump(support, opts.lambda).map_err(CliError::from),
        other => Err(CliError::Input(format!("unknown test-function kind `{other}`"))),
    }
}

fn build_lamination(
    opts: &LaminationOpts,
) -> Result<(FiniteLamination, serde_json::Value), CliError> {
    let source = LaminationSource::from_cli(&opts.leaf, &opts.lamination, &opts.orbit)
        .map_err(CliError::Input)?;
    let mu = read_lamination(&source).map_err(|e| match e {
        parse::ReadError::Input(m) => CliError::Input(m),
        parse::ReadError::Core(c) => CliError::from(c),
    })?;
    Ok((mu, source.describe()))
}

fn xi_config(opts: &XiOpts) -> serde_json::Value {
    json!({
        "kind": opts.kind,
        "lambda": opts.lambda,
        "support": opts.support,
    })
}

fn common_config(c: &CommonOpts) -> serde_json::Value {
    json!({ "format": c.format, "tol": c.tol, "seed": c.seed })
}

fn run(cmd: Command) -> Result<Outcome, CliError> {
    match cmd {
        Command::Liouville { corners, common } => {
            let b = build_box(&corners)?;
            let mass = liouville_box(&b).map_err(CliError::from)?;
            let report = Report {
                config: json!({
                    "command": "liouville",
                    "box": corners,
                    "common": common_config(&common),
                }),
                columns: vec!["mass"],
                rows: vec![vec![Cell::F(mass)]],
                summary: vec![("mass".into(), json!(mass))],
                scalar: Some(mass.to_string()),
            };
            report.emit(&common.format, common.out.as_deref()).map_err(CliError::Input)?;
            Ok(Outcome::Pass)
        }

        Command::QuakeEval { lamination, tau, points, common } => {
            let (mu, source) = build_lamination(&lamination)?;
            let tau_c = parse_complex(&tau).map_err(CliError::Input)?;
            let e = elementary_earthquake(&mu, tau_c);
            let mut rows = Vec::new();
            for tok in points.split(',') {
                let p = parse_boundary_token(tok.trim()).map_err(CliError::Input)?;
                let point = p.map_or_else(
                    liouville_core::BoundaryPoint::infinity,
                    liouville_core::BoundaryPoint::real,
                );
                let image = e.evaluate(&point);
                rows.push(vec![Cell::S(format!("{point}")), Cell::S(format!("{image}"))]);
            }
            let report = Report {
                config: json!({
                    "command": "quake-eval",
                    "lamination": source,
                    "tau": tau,
                    "points": points,
                    "common": common_config(&common),
                }),
                columns: vec!["point", "image"],
                rows,
                summary: vec![("leaves".into(), json!(mu.len()))],
                scalar: None,
            };
            report.emit(&common.format, common.out.as_deref()).map_err(CliError::Input)?;
            Ok(Outcome::Pass)
        }

        Command::D1 { lamination, xi, fd_step, threshold, common } => {
            let (mu, source) = build_lamination(&lamination)?;
            let xif = build_xi(&xi)?;
            let closed = d1_lamination(&mu, &xif, common.tol).map_err(CliError::from)?;
            let oracle = fd_derivative(
                |t| {
                    earthquake_functional(
                        &mu,
                        Complex64::new(t, 0.0),
                        &xif,
                        (common.tol * 1e-4).max(1e-13),
                    )
                },
                0.0,
                fd_step,
                FdOrder::First,
            );
            let config = json!({
                "command": "d1",
                "lamination": source,
                "xi": xi_config(&xi),
                "fd_step": fd_step,
                "threshold": threshold,
                "common": common_config(&common),
            });
            emit_derivative_report(
                config,
                Complex64::new(closed, 0.0),
                oracle.map(|r| r.extrapolated),
                &format!("central FD step {fd_step:e}, Richardson"),
                threshold,
                &common,
            )
        }

        Command::D2 { lamination, xi, fd_step, threshold, common } => {
            let (mu, source) = build_lamination(&lamination)?;
            let xif = build_xi(&xi)?;
            let closed = d2_lamination(&mu, &xif, common.tol).map_err(CliError::from)?;
            let oracle = fd_derivative(
                |t| {
                    earthquake_functional(
                        &mu,
                        Complex64::new(t, 0.0),
                        &xif,
                        (common.tol * 1e-5).max(3e-13),
                    )
                },
                0.0,
                fd_step,
                FdOrder::Second,
            );
            let config = json!({
                "command": "d2",
                "lamination": source,
                "xi": xi_config(&xi),
                "fd_step": fd_step,
                "threshold": threshold,
                "common": common_config(&common),
            });
            emit_derivative_report(
                config,
                Complex64::new(closed, 0.0),
                oracle.map(|r| r.extrapolated),
                &format!("5-point second FD step {fd_step:e}, Richardson"),
                threshold,
                &common,
            )
        }

        Command::D1Quakebend { lamination, xi, tau, radius, points, threshold, common } => {
            let (mu, source) = build_lamination(&lamination)?;
            let xif = build_xi(&xi)?;
            let tau_c = parse_complex(&tau).map_err(CliError::Input)?;
            let closed = d1_quakebend(&mu, tau_c, &xif, common.tol).map_err(CliError::from)?;
            let oracle = cauchy_derivative(
                |t| quakebend_functional_dyadic(&mu, t, &xif, common.tol),
                tau_c,
                radius,
                points,
                1,
            );
            let config = json!({
                "command": "d1-quakebend",
                "lamination": source,
                "xi": xi_config(&xi),
                "tau": tau,
                "radius": radius,
                "points": points,
                "threshold": threshold,
                "common": common_config(&common),
            });
            emit_derivative_report(
                config,
                closed,
                oracle,
                &format!("Cauchy integral radius {radius}, {points} points"),
                threshold,
                &common,
            )
        }

        Command::Decay { xi, count, d_min, d_max, common } => {
            let xif = build_xi(&xi)?;
            let family = receding_family(&xif, count, d_min, d_max).map_err(CliError::from)?;
            let fit = decay_profile(&xif, &family, common.tol).map_err(CliError::from)?;
            let rows = fit
                .distances
                .iter()
                .zip(&fit.magnitudes)
                .map(|(&d, &m)| vec![Cell::F(d), Cell::F(m)])
                .collect();
            let report = Report {
                config: json!({
                    "command": "decay",
                    "xi": xi_config(&xi),
                    "count": count,
                    "d_min": d_min,
                    "d_max": d_max,
                    "common": common_config(&common),
                }),
                columns: vec!["d_g", "magnitude"],
                rows,
                summary: vec![
                    ("slope".into(), json!(fit.fitted_slope)),
                    ("intercept".into(), json!(fit.fitted_intercept)),
                ],
                scalar: None,
            };
            report.emit(&common.format, common.out.as_deref()).map_err(CliError::Input)?;
            Ok(Outcome::Pass)
        }

        Command::Kj { lamination, xi, tau, radii, common } => {
            let (mu, source) = build_lamination(&lamination)?;
            let xif = build_xi(&xi)?;
            let tau_c = parse_complex(&tau).map_err(CliError::Input)?;
            let radii_v: Vec<f64> = {
                let mut v = Vec::new();
                for tok in radii.split(',') {
                    v.push(
                        tok.trim()
                            .parse::<f64>()
                            .map_err(|e| CliError::Input(format!("bad radius `{tok}`: {e}")))?,
                    );
                }
                v
            };
            let rows_data =
                kj_stabilization(&mu, &xif, &radii_v, tau_c, common.tol).map_err(CliError::from)?;
            let rows = rows_data
                .iter()
                .map(|(r, v)| vec![Cell::F(*r), Cell::F(v.re), Cell::F(v.im)])
                .collect();
            let stabilized = rows_data
                .windows(2)
                .last()
                .map(|w| (w[1].1 - w[0].1).norm())
                .unwrap_or(0.0);
            let report = Report {
                config: json!({
                    "command": "kj",
                    "lamination": source,
                    "xi": xi_config(&xi),
                    "tau": tau,
                    "radii": radii,
                    "common": common_config(&common),
                }),
                columns: vec!["radius", "re", "im"],
                rows,
                summary: vec![("last_increment".into(), json!(stabilized))],
                scalar: None,
            };
            report.emit(&common.format, common.out.as_deref()).map_err(CliError::Input)?;
            Ok(Outcome::Pass)
        }

        Command::ThurstonEstimate { lamination, samples, common } => {
            let (mu, source) = build_lamination(&lamination)?;
            let est = thurston_norm_estimate(&mu, samples, common.seed);
            let report = Report {
                config: json!({
                    "command": "thurston-estimate",
                    "lamination": source,
                    "samples": samples,
                    "common": common_config(&common),
                }),
                columns: vec!["lower_bound", "arcs_tested"],
                rows: vec![vec![Cell::F(est.lower_bound), Cell::U(est.arcs_tested as u64)]],
                summary: vec![("lower_bound".into(), json!(est.lower_bound))],
                scalar: None,
            };
            report.emit(&common.format, common.out.as_deref()).map_err(CliError::Input)?;
            Ok(Outcome::Pass)
        }
    }
}

/// Closed form vs oracle table; the report is written even when the oracle
/// fails (exit 3 afterwards).
fn emit_derivative_report(
    config: serde_json::Value,
    closed: Complex64,
    oracle: Result<Complex64, CoreError>,
    method: &str,
    threshold: f64,
    common: &CommonOpts,
) -> Result<Outcome, CliError> {
    let columns =
        vec!["closed_re", "closed_im", "oracle_re", "oracle_im", "abs_err", "rel_err"];
    match oracle {
        Ok(oracle) => {
            let rep = DerivativeReport::new(closed, oracle, method);
            let report = Report {
                config,
                columns,
                rows: vec![vec![
                    Cell::F(rep.closed_form.re),
                    Cell::F(rep.closed_form.im),
                    Cell::F(rep.oracle.re),
                    Cell::F(rep.oracle.im),
                    Cell::F(rep.abs_err),
                    Cell::F(rep.rel_err),
                ]],
                summary: vec![
                    ("method".into(), json!(rep.method)),
                    ("rel_err".into(), json!(rep.rel_err)),
                    ("threshold".into(), json!(threshold)),
                ],
                scalar: None,
            };
            report.emit(&common.format, common.out.as_deref()).map_err(CliError::Input)?;
            if rep.rel_err <= threshold {
                Ok(Outcome::Pass)
            } else {
                Ok(Outcome::ThresholdFail)
            }
        }
        Err(e) => {
            let report = Report {
                config,
                columns,
                rows: vec![vec![
                    Cell::F(closed.re),
                    Cell::F(closed.im),
                    Cell::S("nan".into()),
                    Cell::S("nan".into()),
                    Cell::S("nan".into()),
                    Cell::S("nan".into()),
                ]],
                summary: vec![("oracle_error".into(), json!(e.to_string()))],
                scalar: None,
            };
            report.emit(&common.format, common.out.as_deref()).map_err(CliError::Input)?;
            Err(CliError::from(e))
        }
    }
}
