//! Command implementations behind the `spherex` binary.
//!
//! Each command returns a [`CommandOutput`]: a JSON report for standard
//! output, a human summary for standard error, optional CSV, and the exit code.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{serialize_extended, ProblemConfig};
use crate::error::{Error, Result};
use crate::galerkin::{GalerkinSpace, Subspace};
use crate::solvers::{compute_thresholds, solve_sphere, v0_condition, Problem, Sense, SolverSettings};
use crate::verify::{demo_remark1, extremal_value, run_all, PropertyStatus, SweepPoint, VerifyPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_RADIUS_TOO_LARGE: i32 = 4;

/// Trials per property in `verify`.
pub const VERIFY_TRIALS: usize = 1000;

#[derive(Debug, Parser)]
#[command(name = "spherex", version, about = "Unique extrema of integral functionals on generalized spheres in H1")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Problem configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Overrides the configuration seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Writes the JSON report here instead of standard output; CSV output
    /// goes next to it with a `.csv` extension.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Runs sweep rows and multistart trials concurrently.
    #[arg(long, global = true)]
    pub parallel: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Thresholds δ and δ₁ plus the v₀ condition.
    Delta,
    /// Extremum of J on the level set ‖u‖² + I(u) = r.
    Solve {
        #[arg(long)]
        r: f64,
        #[arg(long, value_enum, default_value = "min")]
        sense: Sense,
    },
    /// Extremal values over the configured r_list.
    Sweep {
        #[arg(long, value_enum, default_value = "both")]
        sense: SweepSense,
    },
    /// Runs every numerical property check.
    Verify,
    /// Reproduces a documented failure case.
    Demo {
        #[command(subcommand)]
        which: Demo,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepSense {
    Both,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Demo {
    /// f(ξ, η) = −(ξ² + η²), g = 0: the v₀ condition fails and δ = 0.
    Remark1,
}

#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub report: Value,
    pub summary: String,
    pub csv: Option<String>,
    pub exit_code: i32,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::RadiusTooLarge { .. } => EXIT_RADIUS_TOO_LARGE,
        Error::Inconclusive(_) | Error::SolverFailure { .. } => EXIT_INCONCLUSIVE,
        _ => EXIT_CONFIG,
    }
}

/// Error report in the same JSON shape every command uses.
pub fn error_output(err: &Error) -> CommandOutput {
    let mut report = json!({ "error": err.to_string(), "exit_code": exit_code(err) });
    if let Error::RadiusTooLarge { r, c_min } = err {
        report["r"] = json!(r);
        report["c_lambda_min"] = json!(c_min);
    }
    let hint = match err {
        Error::RadiusTooLarge { c_min, .. } => {
            format!("\nhint: choose r below c(lambda_min) = {c_min} (run `delta` for the threshold)")
        }
        _ => String::new(),
    };
    CommandOutput {
        report,
        summary: format!("error: {err}{hint}"),
        csv: None,
        exit_code: exit_code(err),
    }
}

/// A loaded configuration with the command-line overrides applied.
pub struct Context {
    pub config: ProblemConfig,
    pub problem: Problem,
    pub settings: SolverSettings,
    pub seed: u64,
}

impl Context {
    pub fn load(path: &Path, seed: Option<u64>, parallel: bool) -> Result<Self> {
        let config = ProblemConfig::load(path)?;
        Self::from_config(config, path.parent(), seed, parallel)
    }

    pub fn from_config(
        config: ProblemConfig,
        base_dir: Option<&Path>,
        seed: Option<u64>,
        parallel: bool,
    ) -> Result<Self> {
        let problem = config.build(base_dir)?;
        let mut settings = config.settings()?;
        settings.parallel = parallel;
        Ok(Self {
            seed: seed.unwrap_or(config.seed),
            config,
            problem,
            settings,
        })
    }
}

fn fmt_extended(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        "+inf".into()
    }
}

pub fn cmd_delta(ctx: &Context) -> Result<CommandOutput> {
    let p = &ctx.problem;
    let v0 = v0_condition(&p.space, &p.subspace, &p.f)?;
    let thresholds = compute_thresholds(p, ctx.config.n_starts, ctx.seed, &ctx.settings)?;
    let mut summary = format!(
        "delta  = {} ({:?})\ndelta1 = {} (max side {:?})\nv0 condition: {} (norm {:.6})",
        fmt_extended(thresholds.delta),
        thresholds.min_side.status,
        fmt_extended(thresholds.delta1),
        thresholds.max_side.status,
        if v0.holds { "holds" } else { "fails" },
        v0.functional_norm
    );
    if !v0.holds {
        summary.push_str(
            "\nwarning: the linear functional from grad f(0) vanishes on V; uniqueness is not guaranteed for any r",
        );
    }
    #[derive(Serialize)]
    struct Report<'a> {
        #[serde(serialize_with = "serialize_extended")]
        delta: f64,
        #[serde(serialize_with = "serialize_extended")]
        delta1: f64,
        lambda_bar: f64,
        min: &'a crate::solvers::DeltaReport,
        max: &'a crate::solvers::DeltaReport,
        v0: &'a crate::solvers::V0Report,
    }
    let report = serde_json::to_value(Report {
        delta: thresholds.delta,
        delta1: thresholds.delta1,
        lambda_bar: p.lambda_bar(),
        min: &thresholds.min_side,
        max: &thresholds.max_side,
        v0: &v0,
    })?;
    Ok(CommandOutput {
        report,
        summary,
        csv: None,
        exit_code: EXIT_OK,
    })
}

fn nodal_csv(space: &GalerkinSpace, values: &crate::galerkin::Field) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "u"])?;
    for (x, u) in space.nodes().iter().zip(values.coeffs.iter()) {
        w.write_record([x.to_string(), u.to_string()])?;
    }
    into_string(w)
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

pub fn cmd_solve(ctx: &Context, r: f64, sense: Sense) -> Result<CommandOutput> {
    let p = &ctx.problem;
    let s = solve_sphere(p, r, sense, &ctx.settings)?;
    let summary = format!(
        "{} of J on C_r, r = {r}: lambda* = {}, J(u*) = {}, residual = {:e}, certified = {} (lambda_bar = {})",
        sense.name(),
        s.lambda_star,
        s.j_value,
        s.constraint_residual,
        s.certified,
        s.lambda_bar
    );
    let nodal: Vec<[f64; 2]> = p
        .space
        .nodes()
        .iter()
        .zip(s.u_star.coeffs.iter())
        .map(|(x, u)| [*x, *u])
        .collect();
    let report = json!({
        "sense": sense,
        "r": r,
        "lambda_star": s.lambda_star,
        "lambda_bar": s.lambda_bar,
        "j_value": s.j_value,
        "constraint_residual": s.constraint_residual,
        "certified": s.certified,
        "evaluations": s.evaluations,
        "nodal_values": nodal,
    });
    Ok(CommandOutput {
        report,
        summary,
        csv: Some(nodal_csv(&p.space, &s.u_star)?),
        exit_code: EXIT_OK,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub r: f64,
    pub min: Option<SweepPoint>,
    pub max: Option<SweepPoint>,
    pub errors: Vec<String>,
}

pub const SWEEP_CSV_HEADER: [&str; 9] = [
    "r",
    "lambda_min",
    "lambda_max",
    "j_min",
    "j_max",
    "certified_min",
    "certified_max",
    "residual_min",
    "residual_max",
];

fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(SWEEP_CSV_HEADER)?;
    let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for row in rows {
        let (m, x) = (row.min.as_ref(), row.max.as_ref());
        w.write_record([
            row.r.to_string(),
            opt(m.and_then(|p| p.lambda_star)),
            opt(x.and_then(|p| p.lambda_star)),
            opt(m.map(|p| p.j_value)),
            opt(x.map(|p| p.j_value)),
            m.map(|p| p.certified).unwrap_or(false).to_string(),
            x.map(|p| p.certified).unwrap_or(false).to_string(),
            opt(m.map(|p| p.residual)),
            opt(x.map(|p| p.residual)),
        ])?;
    }
    into_string(w)
}

pub fn cmd_sweep(ctx: &Context, which: SweepSense) -> Result<CommandOutput> {
    let radii = &ctx.config.r_list;
    if radii.is_empty() {
        return Err(Error::Config("sweep needs a non-empty r_list".into()));
    }
    let sides: &[Sense] = match which {
        SweepSense::Both => &[Sense::Min, Sense::Max],
        SweepSense::Min => &[Sense::Min],
        SweepSense::Max => &[Sense::Max],
    };
    // Rows run sequentially inside; parallelism is across rows.
    let mut inner = ctx.settings;
    inner.parallel = false;
    let row = |r: f64| -> SweepRow {
        let mut out = SweepRow {
            r,
            min: None,
            max: None,
            errors: Vec::new(),
        };
        for &sense in sides {
            match extremal_value(&ctx.problem, r, sense, ctx.config.n_starts, ctx.seed, &inner) {
                Ok(pt) => match sense {
                    Sense::Min => out.min = Some(pt),
                    Sense::Max => out.max = Some(pt),
                },
                Err(e) => out.errors.push(format!("{}: {e}", sense.name())),
            }
        }
        out
    };
    let rows: Vec<SweepRow> = if ctx.settings.parallel {
        radii.par_iter().map(|&r| row(r)).collect()
    } else {
        radii.iter().map(|&r| row(r)).collect()
    };

    let certified = |row: &SweepRow| {
        sides.iter().all(|s| match s {
            Sense::Min => row.min.as_ref().is_some_and(|p| p.certified),
            Sense::Max => row.max.as_ref().is_some_and(|p| p.certified),
        })
    };
    let n_certified = rows.iter().filter(|r| certified(r)).count();
    let mut summary = format!("{} of {} radii certified", n_certified, rows.len());
    if n_certified == 0 {
        summary.push_str("\nwarning: no radius in r_list is below the computed threshold");
    }
    for row in &rows {
        for e in &row.errors {
            summary.push_str(&format!("\nr = {}: {e}", row.r));
        }
    }
    Ok(CommandOutput {
        report: json!({ "rows": rows, "n_certified": n_certified }),
        summary,
        csv: Some(sweep_csv(&rows)?),
        exit_code: EXIT_OK,
    })
}

pub fn cmd_verify(ctx: &Context) -> Result<CommandOutput> {
    let plan = VerifyPlan {
        n_trials: VERIFY_TRIALS,
        n_starts: ctx.config.n_starts.max(1),
        seed: ctx.seed,
        r_list: ctx.config.r_list.clone(),
    };
    let mut reports = run_all(&ctx.problem, &plan, &ctx.settings)?;
    let v0 = v0_condition(&ctx.problem.space, &ctx.problem.subspace, &ctx.problem.f)?;
    if !v0.holds {
        let demo = demo_remark1(
            &ctx.problem.space,
            &ctx.problem.subspace,
            plan.n_starts,
            ctx.seed,
            &ctx.settings,
        )?;
        reports.extend(demo.properties);
    }
    let failed = reports.iter().filter(|r| r.status == PropertyStatus::Fail).count();
    let mut summary = format!("{:<44} {:>8} {:>14}  status", "property", "trials", "worst_slack");
    for r in &reports {
        summary.push_str(&format!(
            "\n{:<44} {:>8} {:>14.3e}  {:?}",
            r.name, r.n_trials, r.worst_slack, r.status
        ));
    }
    summary.push_str(&format!("\n{failed} failed"));
    Ok(CommandOutput {
        report: json!({ "properties": reports, "failed": failed }),
        summary,
        csv: None,
        exit_code: if failed == 0 { EXIT_OK } else { EXIT_PROPERTY_FAILED },
    })
}

/// The degenerate example on the configured mesh, or on (0, 1) with 64
/// elements when no configuration is given.
pub fn cmd_demo_remark1(ctx: Option<&Context>, seed: u64, parallel: bool) -> Result<CommandOutput> {
    let (space, subspace, n_starts, mut settings) = match ctx {
        Some(c) => (
            c.problem.space.clone(),
            c.problem.subspace.clone(),
            c.config.n_starts,
            c.settings,
        ),
        None => (
            GalerkinSpace::new(0.0, 1.0, 64)?,
            Subspace::Full,
            8,
            SolverSettings::default(),
        ),
    };
    settings.parallel = parallel;
    let report = demo_remark1(&space, &subspace, n_starts, seed, &settings)?;
    let summary = format!(
        "f = -(xi^2 + eta^2), g = 0\nv0 condition holds: {}\ndelta = {} ({:?})\n\
         two members of S at H1 distance {:.6}, objective values {:e} and {:e}",
        report.v0.holds,
        report.delta.delta,
        report.delta.status,
        report.distinct_minimizers_spread,
        report.objective_u1,
        report.objective_u2
    );
    let failed = report.properties.iter().any(|p| !p.pass);
    Ok(CommandOutput {
        report: serde_json::to_value(&report)?,
        summary,
        csv: None,
        exit_code: if failed { EXIT_PROPERTY_FAILED } else { EXIT_OK },
    })
}

/// Parses nothing; dispatches an already parsed command line.
pub fn run(cli: &Cli) -> CommandOutput {
    let result = (|| -> Result<CommandOutput> {
        let load = || -> Result<Context> {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
            Context::load(path, cli.seed, cli.parallel)
        };
        match &cli.command {
            Command::Delta => cmd_delta(&load()?),
            Command::Solve { r, sense } => cmd_solve(&load()?, *r, *sense),
            Command::Sweep { sense } => cmd_sweep(&load()?, *sense),
            Command::Verify => cmd_verify(&load()?),
            Command::Demo { which: Demo::Remark1 } => {
                let ctx = match cli.config {
                    Some(_) => Some(load()?),
                    None => None,
                };
                let seed = ctx.as_ref().map(|c| c.seed).or(cli.seed).unwrap_or(0);
                cmd_demo_remark1(ctx.as_ref(), seed, cli.parallel)
            }
        }
    })();
    result.unwrap_or_else(|e| error_output(&e))
}
