//! `holab`: run a holonomy pipeline on a builtin or spec-file metric and
//! print the JSON report.
//!
//! Exit codes: 0 completed, 2 completed with unconverged numerics, 1 input error.

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lorentz_holonomy::deform::{build_deformation, DeformationFamily};
use lorentz_holonomy::geometry::{ChartMetric, Interval};
use lorentz_holonomy::report::{run_report, Command, RunOptions, Status};
use lorentz_holonomy::specfile::load_spec;
use lorentz_holonomy::zoo;

#[derive(Parser)]
#[command(name = "holab", version, about = "Numerical Lorentzian holonomy lab")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample the holonomy group and decide precompactness.
    Holonomy(Common),
    /// Average a vector over the sampled group and extend it to a parallel field.
    ParallelVector(Common),
    /// Maximal orthonormal parallel system.
    ParallelSystem(Common),
    /// Holonomy of loops confined to a coordinate slice.
    RelativeHolonomy(Common),
    /// Compare holonomy on the chart's cover with the quotient.
    Covering(Common),
    /// Flip metric of the parallel timelike field and its connection.
    Flip(Common),
    /// Null sectional curvature at a point.
    Nullsec(Common),
    /// Geodesic completeness probe.
    Geodesic(Common),
    /// Checks on the deformation family c(r).
    Deform(Common),
    /// Whether two metrics differ only on a compact set.
    DiffSupport(Common),
    /// Everything applicable to the metric.
    Report(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Metric spec file (TOML).
    #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
    spec: Option<String>,
    /// Builtin metric or deformation family name.
    #[arg(long)]
    builtin: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of sampled contractible loops.
    #[arg(long, default_value_t = 50)]
    budget: usize,
    /// Comma-separated coordinates; defaults to the base point.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    /// Comma-separated vector components (initial velocity, U, or v₀).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    vector: Option<Vec<f64>>,
    /// Deformation parameter in [0, 1]; all of 0, 0.25, …, 1 when omitted.
    #[arg(long)]
    r: Option<f64>,
    /// Grid resolution per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Affine span of geodesic probes.
    #[arg(long, default_value_t = lorentz_holonomy::report::DEFAULT_SPAN)]
    span: f64,
    /// Coordinate names held constant (relative-holonomy).
    #[arg(long, value_delimiter = ',')]
    slice: Option<Vec<String>>,
    /// Second metric for diff-support (spec file).
    #[arg(long, conflicts_with = "other_builtin")]
    other_spec: Option<String>,
    /// Second metric for diff-support (builtin).
    #[arg(long)]
    other_builtin: Option<String>,
    /// Core box for diff-support, e.g. "-1:1,-1:1".
    #[arg(long, allow_hyphen_values = true)]
    core: Option<String>,
    #[arg(long, default_value_t = 2)]
    json_indent: usize,
}

fn load(spec: Option<&str>, builtin: Option<&str>) -> Result<(ChartMetric, Option<DeformationFamily>), String> {
    match (spec, builtin) {
        (Some(path), _) => {
            let s = load_spec(path).map_err(|e| e.to_string())?;
            Ok((s.metric, s.deformation))
        }
        (None, Some(name)) => match zoo::family(name) {
            Some(fam) => {
                let mut g = build_deformation(&fam, 0.0).map_err(|e| e.to_string())?;
                g.name = name.to_string();
                Ok((g, Some(fam)))
            }
            None => {
                let g = zoo::builtin(name).map_err(|e| {
                    format!("{e}; deformation families: {}", zoo::FAMILY_NAMES.join(", "))
                })?;
                Ok((g, None))
            }
        },
        (None, None) => Err("give --spec or --builtin".into()),
    }
}

fn parse_core(text: &str) -> Result<Vec<Interval>, String> {
    text.split(',')
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| format!("core box entry `{part}` is not lo:hi"))?;
            let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("`{s}`: {e}"));
            Ok(Interval::new(num(lo)?, num(hi)?))
        })
        .collect()
}

fn options(c: &Common, g: &ChartMetric) -> Result<RunOptions, String> {
    let slice = c
        .slice
        .as_ref()
        .map(|names| {
            names
                .iter()
                .map(|n| {
                    g.coords()
                        .iter()
                        .position(|c| c == n.trim())
                        .ok_or_else(|| format!("--slice: `{n}` is not a coordinate of {}", g.name))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;
    let other = match (&c.other_spec, &c.other_builtin) {
        (None, None) => None,
        (s, b) => Some(load(s.as_deref(), b.as_deref())?.0),
    };
    Ok(RunOptions {
        seed: c.seed,
        budget: c.budget,
        point: c.point.clone(),
        vector: c.vector.clone(),
        r: c.r,
        grid: c.grid,
        span: c.span,
        slice,
        other,
        core_box: c.core.as_deref().map(parse_core).transpose()?,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Holonomy(c) => (Command::Holonomy, c),
        Cmd::ParallelVector(c) => (Command::ParallelVector, c),
        Cmd::ParallelSystem(c) => (Command::ParallelSystem, c),
        Cmd::RelativeHolonomy(c) => (Command::RelativeHolonomy, c),
        Cmd::Covering(c) => (Command::Covering, c),
        Cmd::Flip(c) => (Command::Flip, c),
        Cmd::Nullsec(c) => (Command::Nullsec, c),
        Cmd::Geodesic(c) => (Command::Geodesic, c),
        Cmd::Deform(c) => (Command::Deform, c),
        Cmd::DiffSupport(c) => (Command::DiffSupport, c),
        Cmd::Report(c) => (Command::Report, c),
    };
    let run = || -> Result<_, String> {
        let (g, fam) = load(common.spec.as_deref(), common.builtin.as_deref())?;
        let opts = options(&common, &g)?;
        run_report(&g, fam.as_ref(), command, &opts).map_err(|e| e.to_string())
    };
    match run() {
        Ok(report) => {
            // a closed pipe (e.g. `| head`) is not an error of the run
            let _ = writeln!(std::io::stdout(), "{}", report.to_json(common.json_indent));
            match report.status {
                Status::Ok => ExitCode::SUCCESS,
                Status::Unconverged => ExitCode::from(2),
            }
        }
        Err(e) => {
            eprintln!("holab {}: {e}", command.name());
            ExitCode::from(1)
        }
    }
}
