//! `cr-adjoint`: gradient-field exports, gradient checks and the Helmholtz
//! inverse problem from the command line.

mod args;

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use cr_adjoint::adjoint::GradientPath;
use cr_adjoint::optimize::GradientSource;
use cr_adjoint::report::{
    compute_field, method_name, parse_method, run_check, run_inverse, Axes, Axis, HelmholtzSetup, InverseConfig,
    ProblemKind, INVERSE_COST_TARGET,
};
use num_complex::Complex64;

use args::{parse_complex, parse_grid, parse_range};

/// Generalized adjoint gradients for non-holomorphic problems.
#[derive(Parser)]
#[command(name = "cr-adjoint", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct HelmholtzFlags {
    /// Interior resolution of the inversion grid.
    #[arg(long, default_value_t = 120)]
    n: usize,
    /// Interior resolution of the grid that generates the targets.
    #[arg(long = "truth-n", default_value_t = 1000)]
    truth_n: usize,
    /// Parameter that generates the targets.
    #[arg(long = "p-true", default_value = "0.5+0.5i", value_parser = parse_complex)]
    p_true: Complex64,
}

impl HelmholtzFlags {
    fn setup(&self) -> HelmholtzSetup {
        HelmholtzSetup { n: self.n, truth_n: self.truth_n, p_true: self.p_true, ..HelmholtzSetup::default() }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Sample cost and gradient on a grid and write them as JSON.
    Gradfield {
        #[arg(long, value_parser = parse_problem)]
        problem: ProblemKind,
        /// Points per axis: `41` or `41x31`.
        #[arg(long, default_value = "41", value_parser = parse_grid)]
        grid: (usize, usize),
        /// `min,max` or `xmin,xmax,ymin,ymax`; defaults to the problem's domain.
        #[arg(long, value_parser = parse_range, allow_hyphen_values = true)]
        range: Option<[f64; 4]>,
        /// Gradient path to force; the cheapest applicable one by default.
        #[arg(long, value_parser = parse_path)]
        path: Option<GradientPath>,
        #[command(flatten)]
        helmholtz: HelmholtzFlags,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare adjoint gradients with finite differences and across paths at seeded random points.
    Check {
        #[arg(long, value_parser = parse_problem)]
        problem: ProblemKind,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        helmholtz: HelmholtzFlags,
        /// Also write the JSON summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recover the Helmholtz boundary parameter from endpoint data.
    Inverse {
        #[command(flatten)]
        helmholtz: HelmholtzFlags,
        /// Gradient sources to run, comma separated: `adjoint`, `fd`.
        #[arg(long = "method", value_delimiter = ',', default_value = "adjoint,fd", value_parser = parse_method_arg)]
        methods: Vec<GradientSource>,
        #[arg(long, default_value = "0", value_parser = parse_complex, allow_hyphen_values = true)]
        p0: Complex64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_problem(s: &str) -> Result<ProblemKind, String> {
    s.parse().map_err(|e: cr_adjoint::Error| e.to_string())
}

fn parse_method_arg(s: &str) -> Result<GradientSource, String> {
    parse_method(s).map_err(|e| e.to_string())
}

fn parse_path(s: &str) -> Result<GradientPath, String> {
    [
        GradientPath::GeneralDirect,
        GradientPath::GeneralAdjoint,
        GradientPath::HoloInX,
        GradientPath::FullyHolo,
        GradientPath::LinearConstraint,
    ]
    .into_iter()
    .find(|p| p.name() == s)
    .ok_or_else(|| format!("unknown path `{s}`"))
}

/// Failure classes mapped onto exit codes.
enum Failure {
    /// Output could not be written (exit 2).
    Output(anyhow::Error),
    /// A tolerance or a method target was missed (exit 1).
    Tolerance(String),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<cr_adjoint::Error> for Failure {
    fn from(e: cr_adjoint::Error) -> Self {
        Failure::Other(e.into())
    }
}

/// Opens `path` up front so an unwritable destination fails before any work is done.
fn open_output(path: &Path) -> Result<File, Failure> {
    File::create(path)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Output)
}

fn write_output(mut file: File, path: &Path, text: &str) -> Result<(), Failure> {
    file.write_all(text.as_bytes())
        .and_then(|_| file.flush())
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::Output)
}

fn gradfield(
    problem: ProblemKind,
    grid: (usize, usize),
    range: Option<[f64; 4]>,
    path: Option<GradientPath>,
    helmholtz: &HelmholtzFlags,
    out: &Path,
) -> Result<(), Failure> {
    let file = open_output(out)?;
    let [x0, x1, y0, y1] = range.unwrap_or_else(|| {
        let [lo, hi] = problem.default_domain();
        [lo, hi, lo, hi]
    });
    let axes = Axes { x: Axis::new(x0, x1, grid.0)?, y: Axis::new(y0, y1, grid.1)? };
    let instance = problem.build(&helmholtz.setup())?;
    let field = compute_field(problem, instance.as_ref(), axes, path);
    log::info!("{}: {} points, {} nulls", problem, grid.0 * grid.1, field.nulls.len());
    write_output(file, out, &field.to_json()?)?;
    println!("wrote {} ({}x{} points, {} nulls)", out.display(), grid.0, grid.1, field.nulls.len());
    Ok(())
}

fn check(
    problem: ProblemKind,
    samples: usize,
    seed: u64,
    helmholtz: &HelmholtzFlags,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let file = out.map(open_output).transpose()?;
    let instance = problem.build(&helmholtz.setup())?;
    let summary = run_check(problem, instance.as_ref(), samples, seed)?;
    let json = summary.to_json()?;
    println!(
        "{}: {} samples, adjoint vs fd {:.3e} (tol {:.0e}), across paths {:.3e} (tol {:.0e}): {}",
        problem,
        samples,
        summary.max_fd_rel_error,
        summary.fd_tol,
        summary.max_path_rel_error,
        summary.path_tol,
        if summary.passed { "ok" } else { "FAILED" }
    );
    print!("{json}");
    if let (Some(file), Some(path)) = (file, out) {
        write_output(file, path, &json)?;
    }
    if summary.passed {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!("{problem}: gradient check exceeded tolerance")))
    }
}

fn inverse(helmholtz: &HelmholtzFlags, methods: &[GradientSource], p0: Complex64, out: &Path) -> Result<(), Failure> {
    if methods.is_empty() {
        return Err(anyhow::anyhow!("no methods selected").into());
    }
    let file = open_output(out)?;
    let cfg = InverseConfig { setup: helmholtz.setup(), p0, methods: methods.to_vec(), ..InverseConfig::default() };
    let report = match run_inverse(&cfg) {
        Ok(report) => report,
        Err(e) => {
            drop(file);
            let _ = std::fs::remove_file(out);
            return Err(e.into());
        }
    };
    println!("{:<8} {:>12} {:>28} {:>12}", "method", "cost evals", "final p", "final cost");
    for row in &report.rows {
        let p = Complex64::from(row.final_p);
        println!("{:<8} {:>12} {:>28} {:>12.3e}", row.method, row.n_cost_evals, format!("{p:.6}"), row.final_cost);
    }
    write_output(file, out, &report.to_json()?)?;
    let failed = report.failed_methods();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Tolerance(format!(
            "final cost above {INVERSE_COST_TARGET:e} for: {}",
            failed.join(", ")
        )))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Gradfield { problem, grid, range, path, helmholtz, out } => {
            gradfield(problem, grid, range, path, &helmholtz, &out)
        }
        Command::Check { problem, samples, seed, helmholtz, out } => {
            check(problem, samples, seed, &helmholtz, out.as_deref())
        }
        Command::Inverse { helmholtz, methods, p0, out } => {
            let mut seen = Vec::new();
            for m in methods {
                if seen.contains(&m) {
                    return Err(anyhow::anyhow!("method `{}` given twice", method_name(m)).into());
                }
                seen.push(m);
            }
            inverse(&helmholtz, &seen, p0, &out)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CR_ADJOINT_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Output(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Tolerance(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
