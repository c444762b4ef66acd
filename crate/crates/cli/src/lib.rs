//! Command-line harness for the `lmaa` solver: runs, success statistics,
//! parameter sweeps and instance generation.

pub mod gen;
pub mod problem;
pub mod run;
pub mod settings;
pub mod stats;
pub mod sweep;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lmaa::batch::Execution;
use lmaa::Status;

use settings::{ConfigError, RunSpec, Settings};

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_DIVERGED: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "lmaa",
    version,
    about = "Globalized Anderson acceleration for fixed-point problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one problem and write its convergence trace
    Run(RunArgs),
    /// Success-rate table for one or more traces
    Stats(StatsArgs),
    /// Run a parameter grid, one trace per point plus summary.csv
    Sweep(SweepArgs),
    /// Write a seeded problem instance to disk
    Gen(GenArgs),
}

/// Settings shared by `run`, `sweep` and `gen`. Any of them may also come
/// from `--config`; flags win.
#[derive(Args, Debug, Default, Clone)]
pub struct SpecArgs {
    /// Flat `key = value` file with any of the settings below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// logistic, tv, nnls or fixture:<name>
    #[arg(long)]
    pub problem: Option<String>,
    /// plain, aa, lm-aa or fixed-lambda:<value>
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    #[arg(long)]
    pub eta1: Option<f64>,
    #[arg(long)]
    pub eta2: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Prediction discount, or `auto` for the map's contraction estimate
    #[arg(long)]
    pub c: Option<String>,
    #[arg(long)]
    pub mu0: Option<f64>,
    /// Power of ||f|| in the regularization weight: 2 or 4
    #[arg(long)]
    pub lambda_exp: Option<u32>,
    #[arg(long)]
    pub eps_f: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Seed for generated data, image noise and fixture starts
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset (svmlight or labeled CSV), image (PGM or CSV) or NNLS matrix (CSV)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// NNLS right-hand side, one value per line
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    /// Logistic: generated sample count
    #[arg(long)]
    pub samples: Option<usize>,
    /// Logistic: generated feature count
    #[arg(long)]
    pub features: Option<usize>,
    /// Logistic: ridge weight is L_F / tau_ratio
    #[arg(long)]
    pub tau_ratio: Option<f64>,
    /// TV: side of the generated test image
    #[arg(long)]
    pub size: Option<usize>,
    /// TV penalty or NNLS splitting parameter
    #[arg(long)]
    pub beta: Option<f64>,
    /// TV fidelity weight
    #[arg(long)]
    pub nu: Option<f64>,
    /// TV: standard deviation of added Gaussian noise
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// NNLS: fraction of nonzero entries in H
    #[arg(long)]
    pub density: Option<f64>,
    /// NNLS: added to the leading diagonal of H
    #[arg(long)]
    pub shift: Option<f64>,
}

impl SpecArgs {
    /// Config file entries overlaid with the flags that were given.
    pub fn settings(&self) -> anyhow::Result<Settings> {
        let mut settings = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::new(),
        };
        let mut flags = Settings::new();
        let path = |p: &PathBuf| p.display().to_string();
        let pairs: [(&str, Option<String>); 27] = [
            ("problem", self.problem.clone()),
            ("solver", self.solver.clone()),
            ("m", self.m.map(|v| v.to_string())),
            ("p1", self.p1.map(|v| v.to_string())),
            ("p2", self.p2.map(|v| v.to_string())),
            ("eta1", self.eta1.map(|v| v.to_string())),
            ("eta2", self.eta2.map(|v| v.to_string())),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("c", self.c.clone()),
            ("mu0", self.mu0.map(|v| v.to_string())),
            ("lambda_exp", self.lambda_exp.map(|v| v.to_string())),
            ("eps_f", self.eps_f.map(|v| v.to_string())),
            ("max_iter", self.max_iter.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("input", self.input.as_ref().map(path)),
            ("rhs", self.rhs.as_ref().map(path)),
            ("samples", self.samples.map(|v| v.to_string())),
            ("features", self.features.map(|v| v.to_string())),
            ("tau_ratio", self.tau_ratio.map(|v| v.to_string())),
            ("size", self.size.map(|v| v.to_string())),
            ("beta", self.beta.map(|v| v.to_string())),
            ("nu", self.nu.map(|v| v.to_string())),
            ("noise", self.noise.map(|v| v.to_string())),
            ("rows", self.rows.map(|v| v.to_string())),
            ("cols", self.cols.map(|v| v.to_string())),
            ("density", self.density.map(|v| v.to_string())),
            ("shift", self.shift.map(|v| v.to_string())),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        settings.overlay(&flags);
        Ok(settings)
    }
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Trace CSV path; the trace goes to stdout when omitted
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Final weights, denoised image or NNLS solution as CSV
    #[arg(long)]
    pub solution_out: Option<PathBuf>,
    /// Leave the wall_ns column empty so traces are reproducible byte for byte
    #[arg(long)]
    pub no_wall_time: bool,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// Trace files written by `run` or `sweep`
    #[arg(required = true)]
    pub traces: Vec<PathBuf>,
    /// Also write the table as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print CSV instead of the aligned table
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Axis `key=v1,v2,...` or zipped `k1:k2=a1:b1,a2:b2`; repeat for a product
    #[arg(long = "grid")]
    pub grid: Vec<String>,
    /// Directory for the traces and summary.csv
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub no_wall_time: bool,
    /// Run grid points one after another
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Output file: svmlight/CSV dataset, PGM/CSV image or CSV matrix
    #[arg(long)]
    pub out: PathBuf,
    /// NNLS right-hand side output
    #[arg(long)]
    pub rhs_out: Option<PathBuf>,
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<ExitCode> {
    let spec = RunSpec::resolve(&args.spec.settings()?)?;
    let out = run::execute(&spec)?;
    let wall = !args.no_wall_time;
    match &args.out {
        Some(path) => {
            run::write_trace_file(path, &out, wall)?;
            println!("{}", run::summary(&out.result));
        }
        None => {
            let stdout = std::io::stdout();
            lmaa::trace::write_trace(stdout.lock(), &out.header, &out.result.trace, wall)?;
            eprintln!("{}", run::summary(&out.result));
        }
    }
    if let Some(path) = &args.solution_out {
        run::write_solution(path, &out)?;
    }
    Ok(ExitCode::from(status_code(out.result.status)))
}

fn cmd_stats(args: &StatsArgs) -> anyhow::Result<ExitCode> {
    let rows = stats::load_all(&args.traces)?;
    let csv = stats::to_csv(&rows);
    if args.csv {
        print!("{csv}");
    } else {
        print!("{}", stats::to_table(&rows));
    }
    if let Some(path) = &args.out {
        fs::write(path, &csv).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<ExitCode> {
    let base = args.spec.settings()?;
    let axes = args
        .grid
        .iter()
        .map(|g| sweep::parse_axis(g))
        .collect::<Result<Vec<_>, _>>()?;
    let execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let rows = sweep::run_sweep(&base, &axes, &args.out, !args.no_wall_time, execution)?;
    let summary = sweep::summary_csv(&axes, &rows);
    let path = args.out.join("summary.csv");
    fs::write(&path, &summary).with_context(|| format!("cannot write {}", path.display()))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    println!(
        "{} runs, {failed} failed; summary in {}",
        rows.len(),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<ExitCode> {
    let mut settings = args.spec.settings()?;
    // Generation never runs a solver; keep solver settings at their defaults.
    if settings.get("solver").is_none() {
        settings.set("solver", "lm-aa")?;
    }
    let spec = RunSpec::resolve(&settings)?;
    gen::generate(&spec, &args.out, args.rhs_out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

/// Exit code for a run that finished: only divergence is a failure.
pub fn status_code(status: Status) -> u8 {
    match status {
        Status::Diverged => EXIT_DIVERGED,
        _ => 0,
    }
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<lmaa::Error>() {
        Some(
            lmaa::Error::InvalidConfig(_)
            | lmaa::Error::InvalidProblem(_)
            | lmaa::Error::DimensionMismatch { .. },
        ) => EXIT_CONFIG,
        Some(lmaa::Error::NonFinite { .. }) => EXIT_DIVERGED,
        _ => EXIT_IO,
    }
}

pub fn execute(cli: &Cli) -> anyhow::Result<ExitCode> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Gen(a) => cmd_gen(a),
    }
}
